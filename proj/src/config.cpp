#include "mineseg/config.hpp"

#include <fstream>
#include <set>

#include "mineseg/errors.hpp"

namespace mineseg {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& section, const std::set<std::string>& known) {
    if (!j.is_object()) {
        throw ConfigError(section, "expected an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError(section.empty() ? key : section + "." + key, "unknown key");
        }
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    if (path.is_absolute() || base.empty()) {
        return path;
    }
    return base / path;
}

json query_json(const CatalogQuery& q) {
    return {{"start", format_date(q.start)}, {"end", format_date(q.end)}};
}

CatalogQuery parse_query(const json& j, const std::string& section, CatalogQuery q) {
    reject_unknown(j, section, {"start", "end", "year"});
    try {
        if (j.contains("year")) {
            const double cloud = q.max_cloud_pct;
            q = CatalogQuery::season(j["year"].get<int>());
            q.max_cloud_pct = cloud;
        }
        if (j.contains("start")) q.start = parse_date(j["start"].get<std::string>());
        if (j.contains("end")) q.end = parse_date(j["end"].get<std::string>());
    } catch (const json::exception&) {
        throw ConfigError(section, "dates must be YYYY-MM-DD strings and year an integer");
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(section, e.what());
    }
    return q;
}

template <typename F>
auto section_or_default(const json& j, const char* key, F&& parse) {
    return parse(j.contains(key) ? j.at(key) : json::object());
}

}  // namespace

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError(assignment, "override must look like section.key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) {
        value = raw;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) {
            throw ConfigError(key, "empty path component");
        }
        if (!node->is_object()) {
            throw ConfigError(key, "path crosses a non-object value");
        }
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) {
            *node = json::object();
        }
        start = dot + 1;
    }
}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    reject_unknown(j, "", {"paths", "catalog", "tiling", "split", "augment", "model", "loss", "train", "inference"});
    RunConfig c;

    if (j.contains("paths")) {
        const json& p = j["paths"];
        reject_unknown(p, "paths",
                       {"scene_root", "ground_truth", "tile_store", "compare_tile_store", "split_dir", "band_stats",
                        "output_dir"});
        const auto set = [&](const char* key, std::filesystem::path& dst) {
            if (!p.contains(key)) {
                dst = resolve(base_dir, dst.string());
                return;
            }
            if (!p[key].is_string()) {
                throw ConfigError(std::string("paths.") + key, "expected a string");
            }
            dst = resolve(base_dir, p[key].get<std::string>());
        };
        set("scene_root", c.paths.scene_root);
        set("ground_truth", c.paths.ground_truth);
        set("tile_store", c.paths.tile_store);
        set("compare_tile_store", c.paths.compare_tile_store);
        set("split_dir", c.paths.split_dir);
        set("band_stats", c.paths.band_stats);
        set("output_dir", c.paths.output_dir);
    } else {
        for (auto* p : {&c.paths.scene_root, &c.paths.ground_truth, &c.paths.tile_store, &c.paths.compare_tile_store,
                        &c.paths.split_dir, &c.paths.band_stats, &c.paths.output_dir}) {
            *p = resolve(base_dir, p->string());
        }
    }

    if (j.contains("catalog")) {
        const json& cat = j["catalog"];
        reject_unknown(cat, "catalog", {"train", "compare", "max_cloud_pct", "bbox"});
        if (cat.contains("max_cloud_pct")) {
            if (!cat["max_cloud_pct"].is_number()) {
                throw ConfigError("catalog.max_cloud_pct", "expected a number");
            }
            c.train_query.max_cloud_pct = c.compare_query.max_cloud_pct = cat["max_cloud_pct"].get<double>();
        }
        if (cat.contains("bbox")) {
            const json& b = cat["bbox"];
            if (!b.is_array() || b.size() != 4 || !std::all_of(b.begin(), b.end(), [](const json& v) { return v.is_number(); })) {
                throw ConfigError("catalog.bbox", "expected [min_x, min_y, max_x, max_y]");
            }
            const BBox box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
            c.train_query.region = c.compare_query.region = box;
        }
        if (cat.contains("train")) c.train_query = parse_query(cat["train"], "catalog.train", c.train_query);
        if (cat.contains("compare")) c.compare_query = parse_query(cat["compare"], "catalog.compare", c.compare_query);
    }

    if (j.contains("tiling")) {
        const json& t = j["tiling"];
        reject_unknown(t, "tiling", {"tile_size"});
        if (t.contains("tile_size")) {
            if (!t["tile_size"].is_number_unsigned()) {
                throw ConfigError("tiling.tile_size", "expected a positive integer");
            }
            c.tile_size = t["tile_size"].get<std::size_t>();
        }
    }

    if (j.contains("split")) {
        reject_unknown(j["split"], "split", {"ratios", "seed"});
        c.split = SplitSpec::from_json(j["split"]);
    }
    if (j.contains("augment")) {
        reject_unknown(j["augment"], "augment",
                       {"p_crop", "crop_size", "p_vflip", "p_rot", "p_hflip", "p_channel_shuffle"});
        c.augment = AugmentConfig::from_json(j["augment"]);
    }
    if (j.contains("model")) {
        json m = j["model"];
        reject_unknown(m, "model",
                       {"preset", "in_channels", "stage_depths", "embed_dims", "num_heads", "sr_ratios", "mlp_ratio",
                        "patch_sizes", "strides", "decoder_dim", "drop_path_rate", "out_classes"});
        ModelConfig base = ModelConfig::b3();
        if (m.contains("preset")) {
            const std::string preset = m["preset"].is_string() ? m["preset"].get<std::string>() : "";
            if (preset == "tiny") {
                base = ModelConfig::tiny();
            } else if (preset != "b3") {
                throw ConfigError("model.preset", "expected \"b3\" or \"tiny\"");
            }
            m.erase("preset");
        }
        json merged = base.to_json();
        merged.merge_patch(m);
        c.model = ModelConfig::from_json(merged);
    }
    if (j.contains("loss")) {
        reject_unknown(j["loss"], "loss", {"kind", "alpha", "beta", "delta", "numerator_smoothing"});
        c.loss = LossConfig::from_json(j["loss"]);
    }
    if (j.contains("train")) {
        reject_unknown(j["train"], "train",
                       {"epochs", "lr0", "eta_min", "batch_size", "crop", "seed", "optimizer", "finetune"});
        if (j["train"].contains("optimizer")) {
            reject_unknown(j["train"]["optimizer"], "train.optimizer",
                           {"beta1", "beta2", "eps", "weight_decay", "clip_norm"});
        }
        if (j["train"].contains("finetune")) {
            reject_unknown(j["train"]["finetune"], "train.finetune", {"epochs", "lr0"});
        }
        c.train = TrainConfig::from_json(j["train"]);
    }
    if (j.contains("inference")) {
        const json& inf = j["inference"];
        reject_unknown(inf, "inference", {"window", "overlap", "threshold"});
        try {
            if (inf.contains("window")) c.inference.window = inf["window"].get<std::size_t>();
            if (inf.contains("overlap")) c.inference.overlap = inf["overlap"].get<std::size_t>();
            if (inf.contains("threshold")) c.inference.threshold = inf["threshold"].get<double>();
        } catch (const json::exception&) {
            throw ConfigError("inference", "wrong type");
        }
    }
    c.validate();
    return c;
}

json RunConfig::to_json() const {
    json model_json = model.to_json();
    json j = {{"paths",
               {{"scene_root", paths.scene_root.string()},
                {"ground_truth", paths.ground_truth.string()},
                {"tile_store", paths.tile_store.string()},
                {"compare_tile_store", paths.compare_tile_store.string()},
                {"split_dir", paths.split_dir.string()},
                {"band_stats", paths.band_stats.string()},
                {"output_dir", paths.output_dir.string()}}},
              {"catalog",
               {{"train", query_json(train_query)},
                {"compare", query_json(compare_query)},
                {"max_cloud_pct", train_query.max_cloud_pct}}},
              {"tiling", {{"tile_size", tile_size}}},
              {"split", split.to_json()},
              {"augment", augment.to_json()},
              {"model", std::move(model_json)},
              {"loss", loss.to_json()},
              {"train", train.to_json()},
              {"inference",
               {{"window", inference.window}, {"overlap", inference.overlap}, {"threshold", inference.threshold}}}};
    if (train_query.region) {
        const BBox& b = *train_query.region;
        j["catalog"]["bbox"] = {b.min_x, b.min_y, b.max_x, b.max_y};
    }
    return j;
}

void RunConfig::validate() const {
    const auto wrap = [](const char* field, auto&& fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(field, e.what());
        }
    };
    wrap("catalog.train", [&] { train_query.validate(); });
    wrap("catalog.compare", [&] { compare_query.validate(); });
    if (tile_size == 0 || tile_size % 6 != 0) {
        throw ConfigError("tiling.tile_size", "must be a positive multiple of 6");
    }
    split.validate();
    augment.validate();
    model.validate();
    loss.validate();
    train.validate();
    inference.validate();
    if (train.crop > tile_size) {
        throw ConfigError("train.crop", "exceeds tiling.tile_size");
    }
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
    json j = json::object();
    std::filesystem::path base;
    if (file) {
        std::ifstream in(*file);
        if (!in) {
            throw IoError("configuration file not found: " + file->string());
        }
        j = json::parse(in, nullptr, false, true);
        if (j.is_discarded()) {
            throw ConfigError("<file>", "configuration is not valid JSON: " + file->string());
        }
        base = std::filesystem::absolute(*file).parent_path();
    }
    for (const auto& o : overrides) {
        apply_override(j, o);
    }
    return RunConfig::from_json(j, base);
}

}  // namespace mineseg

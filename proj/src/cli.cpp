#include "mineseg/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "mineseg/config.hpp"
#include "mineseg/errors.hpp"
#include "mineseg/inference.hpp"
#include "mineseg/pipeline.hpp"
#include "mineseg/synthetic.hpp"
#include "mineseg/training.hpp"

namespace mineseg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kSceneRootEnv = "MINESEG_SCENE_ROOT";

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    unsigned jobs = 1;
    bool dry_run = false;
};

struct Flags {
    // synth
    std::string out_dir;
    std::size_t tiles = 8;
    std::uint64_t seed = 1;
    std::size_t tile_size = 192;
    // prepare / predict
    std::string period = "train";
    // train / finetune / evaluate / predict
    std::string checkpoint;
    std::string resume;
    std::optional<std::size_t> epochs;
    std::optional<std::uint64_t> train_seed;
    std::string split = "all";
    std::string mode = "test";
    // compare
    std::string before;
    std::string after;
};

void require(const fs::path& p, const std::string& what) {
    if (p.empty() || !fs::exists(p)) {
        throw IoError("missing " + what + ": " + p.string());
    }
}

RunConfig load_config(const Common& common, const Flags& flags) {
    std::optional<fs::path> file;
    if (!common.config.empty()) {
        file = common.config;
    }
    std::vector<std::string> overrides = common.overrides;
    if (flags.epochs) {
        overrides.push_back("train.epochs=" + std::to_string(*flags.epochs));
    }
    if (flags.train_seed) {
        overrides.push_back("train.seed=" + std::to_string(*flags.train_seed));
    }
    RunConfig cfg = load_run_config(file, overrides);
    if (const char* root = std::getenv(kSceneRootEnv); root != nullptr && *root != '\0') {
        cfg.paths.scene_root = root;
    }
    return cfg;
}

Period parse_period_flag(const std::string& s) {
    try {
        return parse_period(s);
    } catch (const Error&) {
        throw ConfigError("--period", "expected \"train\" or \"compare\"");
    }
}

fs::path tile_store_for(const RunConfig& cfg, Period p) {
    return p == Period::train ? cfg.paths.tile_store : cfg.paths.compare_tile_store;
}

fs::path checkpoint_path(const RunConfig& cfg, const Flags& flags, const char* fallback) {
    return flags.checkpoint.empty() ? cfg.paths.output_dir / fallback : fs::path(flags.checkpoint);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
}

PrepareSummary do_prepare(const RunConfig& cfg, Period period) {
    require(cfg.paths.scene_root, "scene store");
    fs::path gt = cfg.paths.ground_truth;
    if (period == Period::train) {
        require(gt, "ground truth");
    } else if (!fs::exists(gt)) {
        gt.clear();
    }
    const DirectorySceneStore store(cfg.paths.scene_root);
    const fs::path dest = tile_store_for(cfg, period);
    fs::remove_all(dest);
    TileStoreWriter writer(dest);
    const CatalogQuery& q = period == Period::train ? cfg.train_query : cfg.compare_query;
    PrepareSummary s = prepare_period(store, q, gt, period, cfg.tile_size, writer);
    writer.finish();
    return s;
}

void print_prepare(std::ostream& out, const PrepareSummary& s, const fs::path& dest) {
    out << "prepared " << s.tiles_written << " tiles (" << s.tiles_dropped << " dropped for nodata) from "
        << s.scenes_used.size() << " scenes in " << s.crs_groups << " CRS group(s) -> " << dest.string() << '\n';
}

json synth_config(std::size_t tile_size, std::uint64_t seed) {
    return {{"paths",
             {{"scene_root", "scenes"},
              {"ground_truth", "ground_truth.geojson"},
              {"tile_store", "tiles"},
              {"compare_tile_store", "tiles_compare"},
              {"split_dir", "splits"},
              {"band_stats", "band_stats.json"},
              {"output_dir", "run"}}},
            {"catalog",
             {{"train", {{"start", "2021-04-01"}, {"end", "2021-09-01"}}},
              {"compare", {{"start", "2022-04-01"}, {"end", "2022-09-01"}}},
              {"max_cloud_pct", 1.0}}},
            {"tiling", {{"tile_size", tile_size}}},
            {"split", {{"ratios", {0.7, 0.15, 0.15}}, {"seed", seed}}},
            {"augment", AugmentConfig{}.to_json()},
            {"model", {{"preset", "tiny"}}},
            {"loss", LossConfig{}.to_json()},
            {"train",
             {{"epochs", 150},
              {"lr0", 2e-3},
              {"eta_min", 0.0},
              {"batch_size", 2},
              {"crop", tile_size - tile_size % 32},
              {"seed", seed},
              {"finetune", {{"epochs", 20}, {"lr0", 1e-4}}}}},
            {"inference", {{"window", tile_size - tile_size % 32}, {"overlap", (tile_size - tile_size % 32) / 2}}}};
}

int cmd_synth(const Common& common, const Flags& flags, std::ostream& out) {
    if (flags.out_dir.empty()) {
        throw ConfigError("--out", "output directory required");
    }
    if (flags.tiles == 0) {
        throw ConfigError("--tiles", "must be >= 1");
    }
    if (flags.tile_size < 32 || flags.tile_size % 6 != 0) {
        throw ConfigError("--tile-size", "must be a multiple of 6 and at least 32");
    }
    const fs::path root = flags.out_dir;
    const json cfg_json = synth_config(flags.tile_size, flags.seed);
    if (common.dry_run) {
        (void)RunConfig::from_json(cfg_json, root);
        out << "dry run: synthetic dataset of " << flags.tiles << " tiles would be written to " << root.string()
            << '\n';
        return kExitOk;
    }
    fs::create_directories(root);
    const SyntheticLayout layout = write_synthetic_scenes(root, flags.tiles, flags.tile_size, flags.seed);
    write_text(root / "config.json", cfg_json.dump(2) + "\n");
    const RunConfig cfg = RunConfig::from_json(cfg_json, fs::absolute(root));
    const PrepareSummary s = do_prepare(cfg, Period::train);
    out << "synthetic scenes: " << layout.scene_root.string() << " (" << layout.tile_rows << "x" << layout.tile_cols
        << " tiles)\n";
    print_prepare(out, s, cfg.paths.tile_store);
    out << "config: " << (root / "config.json").string() << '\n';
    return kExitOk;
}

int cmd_prepare(const RunConfig& cfg, const Flags& flags, std::ostream& out) {
    const Period period = parse_period_flag(flags.period);
    const PrepareSummary s = do_prepare(cfg, period);
    print_prepare(out, s, tile_store_for(cfg, period));
    return kExitOk;
}

int cmd_split(const RunConfig& cfg, std::ostream& out) {
    require(cfg.paths.tile_store, "tile store");
    const DirectoryTileStore store(cfg.paths.tile_store);
    const auto ids = store.ids();
    const Splits s = split_dataset(ids, cfg.split);
    write_splits(cfg.paths.split_dir, s);
    out << "split " << ids.size() << " tiles: train " << s.train.size() << ", val " << s.val.size() << ", test "
        << s.test.size() << " -> " << cfg.paths.split_dir.string() << '\n';
    return kExitOk;
}

int cmd_stats(const RunConfig& cfg, std::ostream& out) {
    require(cfg.paths.tile_store, "tile store");
    require(cfg.paths.split_dir, "split directory");
    const DirectoryTileStore store(cfg.paths.tile_store);
    const Splits s = read_splits(cfg.paths.split_dir);
    const BandStats stats = compute_band_stats(store, s.train);
    write_band_stats(cfg.paths.band_stats, stats);
    out << "band statistics over " << s.train.size() << " training tiles -> " << cfg.paths.band_stats.string()
        << '\n';
    return kExitOk;
}

void print_record(std::ostream& out, const EpochRecord& r) { out << r.to_line() << '\n'; }

int cmd_train(const RunConfig& cfg, const Common& common, const Flags& flags, std::ostream& out) {
    require(cfg.paths.tile_store, "tile store");
    require(cfg.paths.split_dir, "split directory");
    TrainOptions opt;
    opt.output_dir = cfg.paths.output_dir;
    opt.jobs = common.jobs;
    opt.on_record = [&](const EpochRecord& r) { print_record(out, r); };
    const DirectoryTileStore store(cfg.paths.tile_store);
    const Splits splits = read_splits(cfg.paths.split_dir);
    TrainResult result;
    if (!flags.resume.empty()) {
        require(flags.resume, "checkpoint");
        result = resume(load_checkpoint(flags.resume), store, splits, opt);
    } else {
        require(cfg.paths.band_stats, "band statistics");
        const BandStats stats = read_band_stats(cfg.paths.band_stats);
        result = train(store, splits, stats, cfg.model, cfg.loss, cfg.train, cfg.augment, opt);
    }
    out << "trained to epoch " << result.last.epoch << "; best val F1 " << result.last.best_val_f1 << " at epoch "
        << result.last.best_epoch << "; checkpoints in " << cfg.paths.output_dir.string() << '\n';
    return kExitOk;
}

int cmd_finetune(const RunConfig& cfg, const Common& common, const Flags& flags, std::ostream& out) {
    const fs::path ck_path = checkpoint_path(cfg, flags, "best.ckpt");
    require(ck_path, "checkpoint");
    require(cfg.paths.tile_store, "tile store");
    require(cfg.paths.split_dir, "split directory");
    Checkpoint ck = load_checkpoint(ck_path);
    ck.train.finetune = cfg.train.finetune;
    TrainOptions opt;
    opt.output_dir = cfg.paths.output_dir;
    opt.jobs = common.jobs;
    opt.on_record = [&](const EpochRecord& r) { print_record(out, r); };
    const DirectoryTileStore store(cfg.paths.tile_store);
    const TrainResult result = finetune(ck, cfg.model, store, read_splits(cfg.paths.split_dir), opt);
    out << "fine-tuned " << result.last.epoch << " epochs; best val F1 " << result.last.best_val_f1 << '\n';
    return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const Common& common, const Flags& flags, std::ostream& out) {
    const fs::path ck_path = checkpoint_path(cfg, flags, "best.ckpt");
    require(ck_path, "checkpoint");
    require(cfg.paths.tile_store, "tile store");
    require(cfg.paths.split_dir, "split directory");
    const Checkpoint ck = load_checkpoint(ck_path);
    const SegFormer net(ck.model);
    const DirectoryTileStore store(cfg.paths.tile_store);
    const Splits splits = read_splits(cfg.paths.split_dir);
    EvalOptions eo;
    if (flags.mode == "val") {
        eo.mode = EvalMode::val;
    } else if (flags.mode != "test") {
        throw ConfigError("--mode", "expected \"val\" or \"test\"");
    }
    eo.crop = flags.mode == "val" ? cfg.train.crop : cfg.inference.window;
    eo.overlap = cfg.inference.overlap;
    eo.seed = ck.train.seed;
    eo.jobs = common.jobs;
    const std::map<std::string, const std::vector<std::string>*> by_name{
        {"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}};
    std::vector<std::string> names;
    if (flags.split == "all") {
        names = {"train", "val", "test"};
    } else if (by_name.contains(flags.split)) {
        names = {flags.split};
    } else {
        throw ConfigError("--split", "expected train, val, test or all");
    }
    MetricsReport report;
    for (const auto& name : names) {
        report.splits.push_back(evaluate(net, ck.params, ck.stats, store, *by_name.at(name), name, eo));
    }
    fs::create_directories(cfg.paths.output_dir);
    write_text(cfg.paths.output_dir / "metrics.json", report.to_json().dump(2) + "\n");
    write_text(cfg.paths.output_dir / "metrics.txt", report.table());
    out << report.table();
    return kExitOk;
}

int cmd_predict(const RunConfig& cfg, const Common& common, const Flags& flags, std::ostream& out) {
    const Period period = parse_period_flag(flags.period);
    const fs::path ck_path = checkpoint_path(cfg, flags, "best.ckpt");
    require(ck_path, "checkpoint");
    const fs::path src = tile_store_for(cfg, period);
    require(src, "tile store");
    const Checkpoint ck = load_checkpoint(ck_path);
    const SegFormer net(ck.model);
    const DirectoryTileStore store(src);
    InferenceConfig icfg = cfg.inference;
    icfg.jobs = common.jobs;
    const fs::path dest = cfg.paths.output_dir / "predictions" / std::string(period_name(period));
    fs::remove_all(dest);
    fs::create_directories(dest);
    std::size_t windows = 0;
    std::size_t positives = 0;
    const auto ids = store.ids();
    for (const auto& id : ids) {
        const TileSample tile = store.load(id);
        const Prediction p = predict(net, ck.params, ck.stats, tile, icfg);
        windows += p.windows;
        MaskRaster m;
        m.values = p.mask;
        m.transform = tile.provenance.transform;
        m.crs = tile.provenance.crs;
        for (auto v : m.values.storage()) {
            positives += v;
        }
        write_mask(dest / (id + ".msr"), m);
    }
    out << "predicted " << ids.size() << " tiles (" << windows << " windows, " << positives
        << " positive pixels) -> " << dest.string() << '\n';
    return kExitOk;
}

/// Masks in a prediction directory keyed by CRS and tile origin.
std::map<std::string, std::pair<std::string, MaskRaster>> masks_by_location(const fs::path& dir) {
    require(dir, "prediction directory");
    std::map<std::string, std::pair<std::string, MaskRaster>> out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".msr") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        MaskRaster m = load_mask(f);
        char key[128];
        std::snprintf(key, sizeof key, "%.3f/%.3f", m.transform.origin_x(), m.transform.origin_y());
        out.emplace(m.crs + "@" + key, std::make_pair(f.stem().string(), std::move(m)));
    }
    return out;
}

int cmd_compare(const RunConfig& cfg, const Flags& flags, std::ostream& out) {
    const fs::path pred_root = cfg.paths.output_dir / "predictions";
    const fs::path before = flags.before.empty() ? pred_root / "train" : fs::path(flags.before);
    const fs::path after = flags.after.empty() ? pred_root / "compare" : fs::path(flags.after);
    const auto a = masks_by_location(before);
    const auto b = masks_by_location(after);
    ChangeReport report;
    std::size_t unmatched = 0;
    for (const auto& [key, entry] : a) {
        const auto it = b.find(key);
        if (it == b.end()) {
            ++unmatched;
            continue;
        }
        report.add(it->second.first, compare_periods(entry.second, it->second.second));
    }
    unmatched += b.size() - (a.size() - unmatched);
    if (report.tiles.empty()) {
        throw PreconditionError("no tile locations shared by " + before.string() + " and " + after.string());
    }
    json j = report.to_json();
    j["unmatched_tiles"] = unmatched;
    write_text(cfg.paths.output_dir / "change_report.json", j.dump(2) + "\n");
    out << report.table();
    if (unmatched > 0) {
        out << unmatched << " tile(s) without a counterpart in the other period were skipped\n";
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mining-disturbance segmentation pipeline on Sentinel-2 tiles", "mineseg"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    Common common;
    Flags flags;
    app.add_option("-c,--config", common.config, "run configuration (JSON)");
    app.add_option("--set", common.overrides, "override a configuration key, e.g. --set train.epochs=5")
        ->take_all()
        ->allow_extra_args(false);
    app.add_option("-j,--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--dry-run", common.dry_run, "validate the configuration and exit without writing");

    auto* synth = app.add_subcommand("synth", "write a deterministic synthetic scene store and its tiles");
    synth->add_option("-o,--out", flags.out_dir, "output directory")->required();
    synth->add_option("--tiles", flags.tiles, "number of tiles the training period yields");
    synth->add_option("--seed", flags.seed, "generator seed");
    synth->add_option("--tile-size", flags.tile_size, "tile side in 10 m pixels (multiple of 6)");

    auto* prepare = app.add_subcommand("prepare", "query, merge, rasterize and tile one period");
    prepare->add_option("--period", flags.period, "train or compare");

    app.add_subcommand("split", "write train/val/test tile lists");
    app.add_subcommand("stats", "compute per-band normalization statistics on the training split");

    auto* train_cmd = app.add_subcommand("train", "train from scratch (or resume) with cosine annealing");
    train_cmd->add_option("--resume", flags.resume, "continue from this checkpoint");
    train_cmd->add_option("--epochs", flags.epochs, "override train.epochs");
    train_cmd->add_option("--seed", flags.train_seed, "override train.seed");

    auto* ft = app.add_subcommand("finetune", "warm-start a second cosine run from a checkpoint");
    ft->add_option("--checkpoint", flags.checkpoint, "checkpoint (default <output_dir>/best.ckpt)");

    auto* ev = app.add_subcommand("evaluate", "per-image precision/recall/F1 per split");
    ev->add_option("--checkpoint", flags.checkpoint, "checkpoint (default <output_dir>/best.ckpt)");
    ev->add_option("--split", flags.split, "train, val, test or all");
    ev->add_option("--mode", flags.mode, "val (random crops) or test (whole tiles)");

    auto* pr = app.add_subcommand("predict", "sliding-window masks for every tile of a period");
    pr->add_option("--checkpoint", flags.checkpoint, "checkpoint (default <output_dir>/best.ckpt)");
    pr->add_option("--period", flags.period, "train or compare");

    auto* cmp = app.add_subcommand("compare", "expansion/contraction between two periods of predicted masks");
    cmp->add_option("--before", flags.before, "earlier prediction directory");
    cmp->add_option("--after", flags.after, "later prediction directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error UsageError: " << e.what() << '\n';
        return kExitInvalidConfig;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (name == "synth") {
            return cmd_synth(common, flags, out);
        }
        const RunConfig cfg = load_config(common, flags);
        if (common.dry_run) {
            out << cfg.to_json().dump(2) << "\ndry run: configuration valid for '" << name << "'\n";
            return kExitOk;
        }
        if (name == "prepare") return cmd_prepare(cfg, flags, out);
        if (name == "split") return cmd_split(cfg, out);
        if (name == "stats") return cmd_stats(cfg, out);
        if (name == "train") return cmd_train(cfg, common, flags, out);
        if (name == "finetune") return cmd_finetune(cfg, common, flags, out);
        if (name == "evaluate") return cmd_evaluate(cfg, common, flags, out);
        if (name == "predict") return cmd_predict(cfg, common, flags, out);
        if (name == "compare") return cmd_compare(cfg, flags, out);
        throw ArgumentError("unknown subcommand " + name);
    } catch (const ConfigError& e) {
        err << "error ConfigError: " << e.what() << '\n';
        return kExitInvalidConfig;
    } catch (const IoError& e) {
        err << "error IoError: " << e.what() << '\n';
        return kExitMissingInput;
    } catch (const Error& e) {
        err << "error " << e.kind() << ": " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error InternalError: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace mineseg::cli

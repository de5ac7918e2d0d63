#include "mineseg/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "mineseg/errors.hpp"
#include "mineseg/inference.hpp"
#include "mineseg/parallel.hpp"
#include "mineseg/raster_io.hpp"

namespace mineseg {
namespace {

using nlohmann::json;

constexpr std::uint64_t kShuffleStream = 0x5EED;
constexpr std::uint64_t kAugmentPurpose = 1;
constexpr std::uint64_t kDropPathPurpose = 2;
constexpr std::uint64_t kValCropPurpose = 0x7A1;
constexpr std::uint64_t kPhaseStride = 8;

double to_f32(double x) noexcept { return static_cast<double>(static_cast<float>(x)); }

std::uint64_t purpose(Phase phase, std::uint64_t kind) {
    return static_cast<std::uint64_t>(phase) * kPhaseStride + kind;
}

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Largest multiple of 32 not exceeding min(crop, h, w).
std::size_t fit_crop(std::size_t crop, std::size_t h, std::size_t w) {
    const std::size_t c = std::min({crop, h, w});
    const std::size_t fitted = c - c % 32;
    if (fitted == 0) {
        throw ArgumentError("tile " + std::to_string(h) + "x" + std::to_string(w) +
                            " is smaller than the 32 px model granularity");
    }
    return fitted;
}

/// Residual scales for stochastic depth: two per block (attention, feed-forward).
std::vector<double> drop_path_scales(const SegFormer& net, Rng& rng) {
    const auto rates = net.drop_path_rates();
    std::vector<double> scales;
    scales.reserve(2 * rates.size());
    for (double r : rates) {
        for (int branch = 0; branch < 2; ++branch) {
            const bool keep = rng.uniform() >= r;
            scales.push_back(keep ? 1.0 / (1.0 - r) : 0.0);
        }
    }
    return scales;
}

Grid<std::uint8_t> logits_to_mask(const Grid<double>& logits) {
    Grid<std::uint8_t> m(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        m.storage()[i] = sigmoid(logits.storage()[i]) >= kDecisionThreshold ? 1 : 0;
    }
    return m;
}

struct ValResult {
    double loss = 0.0;
    SplitReport report;
};

Augmented val_crop(const TileSample& tile, std::size_t crop, std::uint64_t seed) {
    AugmentConfig cfg;
    cfg = cfg.crop_only();
    cfg.crop_size = fit_crop(crop, tile.height, tile.width);
    Rng rng = sample_rng(seed, 0, tile.provenance.tile_id, kValCropPurpose);
    return augment(tile, cfg, rng);
}

ValResult validation_pass(const SegFormer& net, const ModelParams& params, const BandStats& stats,
                          const TileSource& tiles, const std::vector<std::string>& ids, std::size_t crop,
                          std::uint64_t seed, const LossConfig* loss, unsigned jobs) {
    std::vector<Grid<std::uint8_t>> preds(ids.size());
    std::vector<Grid<std::uint8_t>> targets(ids.size());
    std::vector<double> losses(ids.size(), 0.0);
    parallel_for(ids.size(), jobs, [&](std::size_t i) {
        TileSample tile = tiles.load(ids[i]);
        tile.provenance.tile_id = ids[i];
        const Augmented a = val_crop(tile, crop, seed);
        const Grid<double> logits = net.forward(params, normalize(a.sample, stats));
        if (loss != nullptr) {
            losses[i] = image_loss(logits, a.sample.mask, *loss).value;
        }
        preds[i] = logits_to_mask(logits);
        targets[i] = a.sample.mask;
    });
    ValResult r;
    for (double l : losses) {
        r.loss += l;
    }
    r.loss /= static_cast<double>(ids.size());
    r.report = split_report("val", preds, targets, ids);
    return r;
}

void append_line(const std::filesystem::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::app);
    if (!out) {
        throw IoError("cannot append to " + path.string());
    }
    out << line << '\n';
}

struct PhaseFiles {
    std::filesystem::path log;
    std::filesystem::path last;
    std::filesystem::path best;
};

PhaseFiles phase_files(const std::filesystem::path& dir, Phase phase) {
    const std::string prefix = phase == Phase::train ? "" : "finetune_";
    return {dir / (std::string(phase_name(phase)) + ".log"), dir / (prefix + "last.ckpt"),
            dir / (prefix + "best.ckpt")};
}

void write_nonfinite_dump(const std::filesystem::path& dir, const Checkpoint& state, std::size_t epoch, double lr,
                          const std::vector<std::string>& batch_ids, const std::string& what) {
    if (dir.empty()) {
        return;
    }
    const json dump = {{"phase", phase_name(state.phase)}, {"epoch", epoch + 1},
                       {"lr", lr},                         {"batch_ids", batch_ids},
                       {"error", what}};
    std::ofstream(dir / "nonfinite_dump.json") << dump.dump(2) << '\n';
}

/// Runs epochs [state.epoch, end) of state.phase, mutating `state`.
TrainResult run_phase(Checkpoint state, const TileSource& tiles, const Splits& splits, const TrainOptions& opt,
                      bool fresh_log) {
    if (splits.train.empty()) {
        throw ArgumentError("training split is empty");
    }
    if (splits.val.empty()) {
        throw ArgumentError("validation split is empty");
    }
    state.train.validate();
    state.loss.validate();
    state.stats.validate();
    const SegFormer net(state.model);
    if (!state.params.same_layout(net.layout())) {
        throw CompatibilityError("checkpoint parameters do not match the model configuration");
    }
    const TrainConfig& cfg = state.train;
    const bool is_finetune = state.phase == Phase::finetune;
    const std::size_t total = is_finetune ? cfg.finetune.epochs : cfg.epochs;
    const double lr0 = is_finetune ? cfg.finetune.lr0 : cfg.lr0;
    const std::size_t end = std::min(total, opt.stop_after_epoch.value_or(total));

    AugmentConfig aug = state.augment;
    aug.crop_size = cfg.crop;
    aug.validate();

    PhaseFiles files;
    if (!opt.output_dir.empty()) {
        std::filesystem::create_directories(opt.output_dir);
        files = phase_files(opt.output_dir, state.phase);
        if (fresh_log) {
            std::ofstream(files.log, std::ios::trunc);
        }
    }

    const unsigned jobs = std::max(1u, opt.jobs);
    const std::size_t n = splits.train.size();
    const std::size_t batch = cfg.batch_size;
    TrainResult result;
    std::vector<Gradients> local(std::min<std::size_t>(jobs, batch), Gradients(state.params));
    Gradients total_grad(state.params);

    for (std::size_t e = state.epoch; e < end; ++e) {
        const double lr = cosine_lr(e, total, lr0, cfg.eta_min);
        Rng shuffle(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(state.phase), e});
        const auto order = shuffle.permutation(n);
        std::vector<double> losses(n, 0.0);
        std::vector<double> f1s(n, 0.0);

        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t bsz = std::min(batch, n - start);
            std::vector<std::string> batch_ids;
            for (std::size_t i = 0; i < bsz; ++i) {
                batch_ids.push_back(splits.train[order[start + i]]);
            }
            total_grad.zero();
            try {
                for (std::size_t chunk = 0; chunk < bsz; chunk += local.size()) {
                    const std::size_t m = std::min(local.size(), bsz - chunk);
                    parallel_for(m, jobs, [&](std::size_t k) {
                        const std::size_t slot = start + chunk + k;
                        const std::string& id = batch_ids[chunk + k];
                        const TileSample tile = tiles.load(id);
                        Rng arng = sample_rng(cfg.seed, e, id, purpose(state.phase, kAugmentPurpose));
                        const Augmented a = augment(tile, aug, arng);
                        Rng drng = sample_rng(cfg.seed, e, id, purpose(state.phase, kDropPathPurpose));
                        const auto scales = drop_path_scales(net, drng);
                        SegFormer::Trace trace;
                        const Grid<double> logits = net.forward(state.params, normalize(a.sample, state.stats),
                                                                &trace, scales);
                        LossValue lv = image_loss(logits, a.sample.mask, state.loss);
                        if (!std::isfinite(lv.value)) {
                            throw NumericalError("non-finite loss on tile " + id);
                        }
                        Grid<double> d(logits.rows(), logits.cols());
                        d.storage() = std::move(lv.grad);
                        local[k].zero();
                        net.backward(state.params, trace, d, local[k]);
                        losses[slot] = lv.value;
                        f1s[slot] = prf1(confusion(logits_to_mask(logits), a.sample.mask)).f1;
                    });
                    for (std::size_t k = 0; k < m; ++k) {
                        total_grad.add(local[k]);
                    }
                }
                total_grad.scale(1.0 / static_cast<double>(bsz));
                adamw_step(state.params, state.adam, total_grad, lr, cfg.optimizer);
            } catch (const NumericalError& err) {
                write_nonfinite_dump(opt.output_dir, state, e, lr, batch_ids, err.what());
                std::string ids;
                for (const auto& id : batch_ids) {
                    ids += (ids.empty() ? "" : ",") + id;
                }
                throw NumericalError(std::string(err.what()) + " (phase " + std::string(phase_name(state.phase)) +
                                     ", epoch " + std::to_string(e + 1) + ", lr " + fmt_double(lr) +
                                     ", batch " + ids + ")");
            }
            ++result.optimizer_steps;
        }

        EpochRecord tr{state.phase, e + 1, "train", 0.0, lr, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            tr.loss += losses[i];
            tr.f1 += f1s[i];
        }
        tr.loss /= static_cast<double>(n);
        tr.f1 /= static_cast<double>(n);

        const ValResult val = validation_pass(net, state.params, state.stats, tiles, splits.val, cfg.crop, cfg.seed,
                                              &state.loss, jobs);
        const EpochRecord vr{state.phase, e + 1, "val", val.loss, lr, val.report.mean.f1};

        state.epoch = e + 1;
        const bool improved = vr.f1 > state.best_val_f1;
        if (improved) {
            state.best_val_f1 = vr.f1;
            state.best_epoch = e + 1;
        }
        for (const EpochRecord* r : std::initializer_list<const EpochRecord*>{&tr, &vr}) {
            result.log.push_back(*r);
            if (opt.on_record) {
                opt.on_record(*r);
            }
            if (!files.log.empty()) {
                append_line(files.log, r->to_line());
            }
        }
        if (improved) {
            result.best = state;
            if (!files.best.empty()) {
                save_checkpoint(files.best, state);
            }
        }
        if (!files.last.empty()) {
            save_checkpoint(files.last, state);
        }
    }
    if (!files.last.empty() && state.epoch == 0) {
        save_checkpoint(files.last, state);
    }
    result.last = std::move(state);
    return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration and schedule

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
    if (!(lr0 > eta_min)) throw ConfigError("train.lr0", "must exceed train.eta_min");
    if (!(eta_min >= 0.0)) throw ConfigError("train.eta_min", "must be >= 0");
    if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (crop < 32 || crop % 32 != 0) throw ConfigError("train.crop", "must be a positive multiple of 32");
    if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) throw ConfigError("train.optimizer.beta1", "must lie in [0, 1)");
    if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) throw ConfigError("train.optimizer.beta2", "must lie in [0, 1)");
    if (!(optimizer.eps > 0.0)) throw ConfigError("train.optimizer.eps", "must be > 0");
    if (!(optimizer.weight_decay >= 0.0)) throw ConfigError("train.optimizer.weight_decay", "must be >= 0");
    if (!(optimizer.clip_norm >= 0.0)) throw ConfigError("train.optimizer.clip_norm", "must be >= 0");
    if (!(finetune.lr0 > eta_min)) throw ConfigError("train.finetune.lr0", "must exceed train.eta_min");
}

json TrainConfig::to_json() const {
    return {{"epochs", epochs},
            {"lr0", lr0},
            {"eta_min", eta_min},
            {"batch_size", batch_size},
            {"crop", crop},
            {"seed", seed},
            {"optimizer",
             {{"beta1", optimizer.beta1},
              {"beta2", optimizer.beta2},
              {"eps", optimizer.eps},
              {"weight_decay", optimizer.weight_decay},
              {"clip_norm", optimizer.clip_norm}}},
            {"finetune", {{"epochs", finetune.epochs}, {"lr0", finetune.lr0}}}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    if (!j.is_object()) {
        throw ConfigError("train", "expected an object");
    }
    TrainConfig c;
    const auto read = [&](const json& obj, const char* key, auto& dst, const std::string& path) {
        if (!obj.contains(key)) {
            return;
        }
        try {
            dst = obj.at(key).get<std::remove_reference_t<decltype(dst)>>();
        } catch (const json::exception&) {
            throw ConfigError(path + "." + key, "wrong type");
        }
    };
    read(j, "epochs", c.epochs, "train");
    read(j, "lr0", c.lr0, "train");
    read(j, "eta_min", c.eta_min, "train");
    read(j, "batch_size", c.batch_size, "train");
    read(j, "crop", c.crop, "train");
    read(j, "seed", c.seed, "train");
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        read(o, "beta1", c.optimizer.beta1, "train.optimizer");
        read(o, "beta2", c.optimizer.beta2, "train.optimizer");
        read(o, "eps", c.optimizer.eps, "train.optimizer");
        read(o, "weight_decay", c.optimizer.weight_decay, "train.optimizer");
        read(o, "clip_norm", c.optimizer.clip_norm, "train.optimizer");
    }
    if (j.contains("finetune")) {
        const json& f = j.at("finetune");
        read(f, "epochs", c.finetune.epochs, "train.finetune");
        read(f, "lr0", c.finetune.lr0, "train.finetune");
    }
    c.validate();
    return c;
}

double cosine_lr(std::size_t t, std::size_t T, double lr0, double eta_min) {
    if (T == 0) {
        throw ArgumentError("cosine schedule needs at least one epoch");
    }
    if (t > T) {
        throw ArgumentError("epoch " + std::to_string(t) + " beyond schedule length " + std::to_string(T));
    }
    const double c = std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(T));
    return eta_min + 0.5 * (lr0 - eta_min) * (1.0 + c);
}

std::string_view phase_name(Phase p) noexcept { return p == Phase::train ? "train" : "finetune"; }

// ---------------------------------------------------------------------------
// Optimizer

AdamState::AdamState(const ModelParams& params) {
    for (const auto& t : params.tensors()) {
        m.emplace_back(t.numel(), 0.0);
        v.emplace_back(t.numel(), 0.0);
    }
}

double adamw_step(ModelParams& params, AdamState& state, Gradients& grads, double lr, const OptimizerConfig& cfg) {
    const double norm = std::sqrt(grads.squared_norm());
    if (!std::isfinite(norm)) {
        throw NumericalError("non-finite gradient norm");
    }
    if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) {
        grads.scale(cfg.clip_norm / norm);
    }
    ++state.step;
    const double step = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, step);
    for (std::size_t i = 0; i < params.size(); ++i) {
        nn::ParamTensor& t = params.at(i);
        const double decay = t.shape.size() >= 2 ? 1.0 - lr * cfg.weight_decay : 1.0;
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto& g = grads.g[i];
        for (std::size_t j = 0; j < t.values.size(); ++j) {
            m[j] = to_f32(cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j]);
            v[j] = to_f32(cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j]);
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            t.values[j] = to_f32(t.values[j] * decay - lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
    return norm;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kCheckpointFormat = "mineseg-checkpoint";

RasterArray tensor_array(const std::string& name, const std::vector<std::size_t>& shape,
                         const std::vector<double>& values) {
    Grid<float> g(1, values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        g.storage()[i] = static_cast<float>(values[i]);
    }
    RasterArray a = RasterArray::from_grid(name, g);
    a.attrs["shape"] = shape;
    return a;
}

void fill_tensor(const RasterContainer& c, const std::string& name, const std::vector<std::size_t>& shape,
                 std::vector<double>& dst) {
    const RasterArray* a = c.find(name);
    if (a == nullptr) {
        throw CompatibilityError("checkpoint lacks tensor " + name);
    }
    if (!a->attrs.contains("shape") || a->attrs["shape"].get<std::vector<std::size_t>>() != shape) {
        throw CompatibilityError("tensor " + name + " has a different shape than the model expects");
    }
    const Grid<float> g = a->to_float();
    if (g.size() != dst.size()) {
        throw CompatibilityError("tensor " + name + " has the wrong element count");
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = g.storage()[i];
    }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    RasterContainer c;
    c.header = {{"format", kCheckpointFormat},
                {"version", Checkpoint::kFormatVersion},
                {"model", ckpt.model.to_json()},
                {"loss", ckpt.loss.to_json()},
                {"train", ckpt.train.to_json()},
                {"augment", ckpt.augment.to_json()},
                {"band_stats", ckpt.stats.to_json()},
                {"phase", phase_name(ckpt.phase)},
                {"epoch", ckpt.epoch},
                {"seed", ckpt.train.seed},
                {"init_seed", ckpt.params.seed()},
                {"adam_step", ckpt.adam.step},
                {"best_val_f1", ckpt.best_val_f1},
                {"best_epoch", ckpt.best_epoch}};
    const auto& tensors = ckpt.params.tensors();
    const bool has_adam = ckpt.adam.m.size() == tensors.size();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        c.arrays.push_back(tensor_array("param/" + tensors[i].name, tensors[i].shape, tensors[i].values));
    }
    if (has_adam) {
        for (std::size_t i = 0; i < tensors.size(); ++i) {
            c.arrays.push_back(tensor_array("adam.m/" + tensors[i].name, tensors[i].shape, ckpt.adam.m[i]));
            c.arrays.push_back(tensor_array("adam.v/" + tensors[i].name, tensors[i].shape, ckpt.adam.v[i]));
        }
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    write_container(tmp, c);
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw IoError("checkpoint not found: " + path.string());
    }
    const RasterContainer c = read_container(path);
    const json& h = c.header;
    if (h.value("format", std::string{}) != kCheckpointFormat) {
        throw CompatibilityError(path.string() + " is not a checkpoint");
    }
    if (h.value("version", 0) != Checkpoint::kFormatVersion) {
        throw CompatibilityError("unsupported checkpoint version " + h.value("version", json(0)).dump());
    }
    Checkpoint ck;
    try {
        ck.model = ModelConfig::from_json(h.at("model"));
        ck.loss = LossConfig::from_json(h.at("loss"));
        ck.train = TrainConfig::from_json(h.at("train"));
        ck.augment = AugmentConfig::from_json(h.at("augment"));
        ck.stats = BandStats::from_json(h.at("band_stats"));
        ck.phase = h.at("phase").get<std::string>() == "finetune" ? Phase::finetune : Phase::train;
        ck.epoch = h.at("epoch").get<std::size_t>();
        ck.best_val_f1 = h.at("best_val_f1").get<double>();
        ck.best_epoch = h.at("best_epoch").get<std::size_t>();
        ck.adam.step = h.at("adam_step").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw CompatibilityError(std::string("malformed checkpoint header: ") + e.what());
    } catch (const ConfigError& e) {
        throw CompatibilityError(std::string("checkpoint configuration invalid: ") + e.what());
    }
    const SegFormer net(ck.model);
    ck.params = net.init_params(h.value("init_seed", std::uint64_t{0}));
    const auto step = ck.adam.step;
    ck.adam = AdamState(ck.params);
    ck.adam.step = step;
    const bool has_adam = c.find("adam.m/" + ck.params.at(0).name) != nullptr;
    for (std::size_t i = 0; i < ck.params.size(); ++i) {
        nn::ParamTensor& t = ck.params.at(i);
        fill_tensor(c, "param/" + t.name, t.shape, t.values);
        if (has_adam) {
            fill_tensor(c, "adam.m/" + t.name, t.shape, ck.adam.m[i]);
            fill_tensor(c, "adam.v/" + t.name, t.shape, ck.adam.v[i]);
        }
    }
    return ck;
}

std::string EpochRecord::to_line() const {
    return "phase=" + std::string(phase_name(phase)) + " epoch=" + std::to_string(epoch) + " split=" + split +
           " loss=" + fmt_double(loss) + " lr=" + fmt_double(lr) + " f1=" + fmt_double(f1);
}

// ---------------------------------------------------------------------------
// Entry points

TrainResult train(const TileSource& tiles, const Splits& splits, const BandStats& stats, const ModelConfig& model,
                  const LossConfig& loss, const TrainConfig& cfg, const AugmentConfig& augment,
                  const TrainOptions& options) {
    model.validate();
    cfg.validate();
    Checkpoint state;
    state.model = model;
    state.loss = loss;
    state.train = cfg;
    state.augment = augment;
    state.stats = stats;
    state.params = init_params(model, cfg.seed);
    state.adam = AdamState(state.params);
    state.phase = Phase::train;
    return run_phase(std::move(state), tiles, splits, options, true);
}

TrainResult resume(const Checkpoint& ckpt, const TileSource& tiles, const Splits& splits,
                   const TrainOptions& options) {
    return run_phase(ckpt, tiles, splits, options, false);
}

TrainResult finetune(const Checkpoint& ckpt, const ModelConfig& model, const TileSource& tiles, const Splits& splits,
                     const TrainOptions& options) {
    const SegFormer net(model);
    if (!ckpt.params.same_layout(net.layout())) {
        throw CompatibilityError("checkpoint parameters do not fit the configured model");
    }
    Checkpoint state = ckpt;
    state.model = model;
    state.phase = Phase::finetune;
    state.epoch = 0;
    state.adam = AdamState(state.params);
    state.best_val_f1 = -1.0;
    state.best_epoch = 0;
    return run_phase(std::move(state), tiles, splits, options, true);
}

SplitReport evaluate(const SegFormer& model, const ModelParams& params, const BandStats& stats,
                     const TileSource& tiles, const std::vector<std::string>& ids, const std::string& split_name,
                     const EvalOptions& options) {
    if (ids.empty()) {
        throw ArgumentError("split '" + split_name + "' is empty");
    }
    if (options.mode == EvalMode::val) {
        ValResult r = validation_pass(model, params, stats, tiles, ids, options.crop, options.seed, nullptr,
                                      options.jobs);
        r.report.split = split_name;
        return r.report;
    }
    std::vector<Grid<std::uint8_t>> preds;
    std::vector<Grid<std::uint8_t>> targets;
    InferenceConfig icfg;
    icfg.window = options.crop;
    icfg.overlap = options.overlap;
    icfg.jobs = options.jobs;
    for (const auto& id : ids) {
        const TileSample tile = tiles.load(id);
        preds.push_back(predict(model, params, stats, tile, icfg).mask);
        targets.push_back(tile.mask);
    }
    return split_report(split_name, preds, targets, ids);
}

}  // namespace mineseg

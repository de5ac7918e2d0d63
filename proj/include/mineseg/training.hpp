#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mineseg/dataset.hpp"
#include "mineseg/losses.hpp"
#include "mineseg/metrics.hpp"
#include "mineseg/model.hpp"

namespace mineseg {

struct OptimizerConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // decoupled; applied to tensors with rank >= 2
    double clip_norm = 1.0;      // global L2 norm; 0 disables clipping
};

struct FinetuneConfig {
    std::size_t epochs = 1000;
    double lr0 = 1e-4;
};

struct TrainConfig {
    std::size_t epochs = 1000;
    double lr0 = 3e-4;
    double eta_min = 0.0;
    std::size_t batch_size = 8;
    std::size_t crop = 512;
    OptimizerConfig optimizer;
    std::uint64_t seed = 0;
    FinetuneConfig finetune;

    /// Throws ConfigError naming the field.
    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static TrainConfig from_json(const nlohmann::json& j);
};

/// eta_min + (lr0 - eta_min) * (1 + cos(pi * t / T)) / 2. Throws ArgumentError
/// unless 0 <= t <= T and T >= 1.
[[nodiscard]] double cosine_lr(std::size_t t, std::size_t T, double lr0, double eta_min);

enum class Phase { train, finetune };
[[nodiscard]] std::string_view phase_name(Phase p) noexcept;

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;

    AdamState() = default;
    explicit AdamState(const ModelParams& params);
};

/// Parameters are kept float32-representable after every update so a saved
/// checkpoint resumes bit-exactly. Returns the pre-clipping gradient norm.
double adamw_step(ModelParams& params, AdamState& state, Gradients& grads, double lr, const OptimizerConfig& cfg);

/// Everything needed to continue or reuse a run. Sample randomness is derived
/// from (seed, phase, epoch, tile id), so no generator state is stored.
struct Checkpoint {
    static constexpr int kFormatVersion = 1;

    ModelConfig model;
    LossConfig loss;
    TrainConfig train;
    AugmentConfig augment;
    BandStats stats;
    ModelParams params;
    AdamState adam;
    Phase phase = Phase::train;
    std::size_t epoch = 0;  // completed epochs of `phase`
    double best_val_f1 = -1.0;
    std::size_t best_epoch = 0;
};

/// Header JSON + named float32 arrays with explicit shapes.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IoError for unreadable files and CompatibilityError for an unknown
/// format version or a parameter layout that disagrees with the stored model
/// configuration.
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochRecord {
    Phase phase = Phase::train;
    std::size_t epoch = 0;  // 1-based
    std::string split;
    double loss = 0.0;
    double lr = 0.0;
    double f1 = 0.0;

    /// One whitespace-separated key=value line; doubles printed round-trip exact.
    [[nodiscard]] std::string to_line() const;
    bool operator==(const EpochRecord&) const = default;
};

struct TrainOptions {
    std::filesystem::path output_dir;  // empty: nothing written
    unsigned jobs = 1;
    std::optional<std::size_t> stop_after_epoch;  // stop early (absolute epoch of the phase)
    std::function<void(const EpochRecord&)> on_record;
};

struct TrainResult {
    Checkpoint last;
    std::optional<Checkpoint> best;
    std::vector<EpochRecord> log;
    std::size_t optimizer_steps = 0;  // steps taken by this call
};

/// Main run from freshly initialized parameters. Writes "last.ckpt",
/// "best.ckpt" and "train.log" into output_dir when one is set.
[[nodiscard]] TrainResult train(const TileSource& tiles, const Splits& splits, const BandStats& stats,
                                const ModelConfig& model, const LossConfig& loss, const TrainConfig& cfg,
                                const AugmentConfig& augment, const TrainOptions& options = {});

/// Continues `ckpt` within its own phase up to its configured epoch count.
[[nodiscard]] TrainResult resume(const Checkpoint& ckpt, const TileSource& tiles, const Splits& splits,
                                 const TrainOptions& options = {});

/// Warm start from `ckpt`: fresh cosine schedule from finetune.lr0 over
/// finetune.epochs with reset optimizer moments. Throws CompatibilityError if
/// the checkpoint parameters do not fit `model`.
[[nodiscard]] TrainResult finetune(const Checkpoint& ckpt, const ModelConfig& model, const TileSource& tiles,
                                   const Splits& splits, const TrainOptions& options = {});

enum class EvalMode { val, test };

struct EvalOptions {
    EvalMode mode = EvalMode::test;
    std::size_t crop = 512;      // val-mode crop and test-mode window
    std::size_t overlap = 256;   // test-mode window overlap
    std::uint64_t seed = 0;      // val-mode crop positions
    unsigned jobs = 1;
};

/// Val mode: one seeded random crop per tile. Test mode: whole tiles through
/// sliding windows and stitching. Threshold 0.5 on probabilities.
[[nodiscard]] SplitReport evaluate(const SegFormer& model, const ModelParams& params, const BandStats& stats,
                                   const TileSource& tiles, const std::vector<std::string>& ids,
                                   const std::string& split_name, const EvalOptions& options);

}  // namespace mineseg

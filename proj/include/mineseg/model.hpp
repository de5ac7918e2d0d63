#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mineseg/dataset.hpp"
#include "mineseg/grid.hpp"
#include "mineseg/nn.hpp"

namespace mineseg {

using nn::ModelParams;
using nn::Gradients;

/// Hierarchical encoder + all-MLP decoder hyperparameters.
struct ModelConfig {
    std::size_t in_channels = 12;
    std::array<std::size_t, 4> stage_depths{3, 4, 18, 3};
    std::array<std::size_t, 4> embed_dims{64, 128, 320, 512};
    std::array<std::size_t, 4> num_heads{1, 2, 5, 8};
    std::array<std::size_t, 4> sr_ratios{8, 4, 2, 1};
    std::size_t mlp_ratio = 4;
    std::array<std::size_t, 4> patch_sizes{7, 3, 3, 3};
    std::array<std::size_t, 4> strides{4, 2, 2, 2};
    std::size_t decoder_dim = 768;
    double drop_path_rate = 0.1;
    std::size_t out_classes = 1;

    /// B3-sized default.
    [[nodiscard]] static ModelConfig b3() { return {}; }
    /// Small configuration used by tests and the synthetic pipeline.
    [[nodiscard]] static ModelConfig tiny();

    /// Throws ConfigError naming the offending field.
    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    /// Missing keys keep their defaults; wrong-length stage lists are errors.
    [[nodiscard]] static ModelConfig from_json(const nlohmann::json& j);

    bool operator==(const ModelConfig&) const = default;
};

class SegFormer {
public:
    struct StageTrace {
        nn::OverlapPatchEmbed::Cache embed;
        std::vector<nn::TransformerBlock::Cache> blocks;
        nn::LayerNorm::Cache norm;
        std::size_t height = 0;
        std::size_t width = 0;
    };

    /// Intermediate state kept by forward() for backward().
    struct Trace {
        std::size_t in_h = 0;
        std::size_t in_w = 0;
        std::array<StageTrace, 4> stages;
        std::array<nn::Mat, 4> features;   // normalized stage outputs
        std::array<nn::Mat, 4> upsampled;  // decoder projections at 1/4 scale
        nn::Mat fused_pre;
        nn::Mat fused;
    };

    explicit SegFormer(ModelConfig cfg);

    [[nodiscard]] const ModelConfig& config() const noexcept { return cfg_; }
    /// Zero-valued parameter store with this model's names and shapes.
    [[nodiscard]] const ModelParams& layout() const noexcept { return layout_; }
    [[nodiscard]] ModelParams init_params(std::uint64_t seed) const;

    [[nodiscard]] std::size_t block_count() const noexcept;
    /// Stochastic-depth rate per block, rising linearly to drop_path_rate.
    [[nodiscard]] std::vector<double> drop_path_rates() const;

    /// Logits at input resolution. `branch_scales` holds two residual scales
    /// per block (attention, feed-forward) in block order; empty means
    /// inference (all ones). Throws ShapeError for inputs not divisible by 32
    /// and NumericalError for non-finite logits.
    [[nodiscard]] Grid<double> forward(const ModelParams& params, const Image& image, Trace* trace = nullptr,
                                       std::span<const double> branch_scales = {}) const;

    /// Accumulates parameter gradients for d(objective)/d(logits).
    void backward(const ModelParams& params, const Trace& trace, const Grid<double>& d_logits,
                  Gradients& grads) const;

    /// Encoder features per stage (inference mode).
    [[nodiscard]] std::array<nn::FeatureMap, 4> encode(const ModelParams& params, const Image& image) const;

private:
    struct Stage {
        nn::OverlapPatchEmbed embed;
        std::vector<nn::TransformerBlock> blocks;
        nn::LayerNorm norm;
    };

    void check(const ModelParams& params, const Image& image) const;
    [[nodiscard]] std::array<nn::FeatureMap, 4> run_encoder(const ModelParams& params, const Image& image,
                                                            Trace* trace, std::span<const double> scales) const;

    ModelConfig cfg_;
    ModelParams layout_;
    std::array<Stage, 4> stages_;
    std::array<nn::Linear, 4> decoder_proj_;
    nn::Linear fuse_;
    nn::Linear classifier_;
};

/// init_params from the model section of the contract.
[[nodiscard]] ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

[[nodiscard]] inline double sigmoid(double x) noexcept {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace mineseg

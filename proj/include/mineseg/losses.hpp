#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mineseg/grid.hpp"

namespace mineseg {

enum class LossKind { tversky, dice, jaccard, lovasz_hinge, bce };

[[nodiscard]] std::string_view loss_kind_name(LossKind k) noexcept;
[[nodiscard]] LossKind parse_loss_kind(std::string_view name);

struct LossConfig {
    LossKind kind = LossKind::tversky;
    double alpha = 0.3;   // weight of false positives
    double beta = 0.7;    // weight of false negatives
    double delta = 1e-6;  // denominator smoothing
    bool numerator_smoothing = false;

    /// dice pins (alpha, beta) to (0.5, 0.5), jaccard to (1, 1).
    [[nodiscard]] LossConfig resolved() const;
    /// Throws ConfigError for non-positive alpha, beta or delta.
    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static LossConfig from_json(const nlohmann::json& j);
};

struct LossValue {
    double value = 0.0;
    std::vector<double> grad;  // d value / d input, same length as the input
};

/// 1 - TP / (TP + alpha*FP + beta*FN + delta) over soft predictions, with
/// TP = sum(y*p), FP = sum((1-y)*p), FN = sum(y*(1-p)). With numerator
/// smoothing the index becomes (TP + delta) / (...). Gradient w.r.t. probs.
[[nodiscard]] LossValue tversky_loss(std::span<const double> probs, std::span<const std::uint8_t> target,
                                     const LossConfig& cfg);

/// Lovasz hinge over logits: hinge errors max(0, 1 - s*f) with s = 2y-1,
/// sorted descending (stable by pixel index), dotted with the discrete
/// gradient of the Jaccard loss along that order. Gradient w.r.t. logits.
[[nodiscard]] LossValue lovasz_hinge(std::span<const double> logits, std::span<const std::uint8_t> target);

/// Gradient of the Jaccard loss along a sorted ground-truth sequence.
[[nodiscard]] std::vector<double> lovasz_grad(std::span<const std::uint8_t> sorted_target);

/// Mean binary cross-entropy, probabilities clamped to [1e-7, 1 - 1e-7].
/// Gradient w.r.t. probs (zero where clamping is active).
[[nodiscard]] LossValue bce_loss(std::span<const double> probs, std::span<const std::uint8_t> target);

inline constexpr double kBceEps = 1e-7;

/// Loss of one image's logits under `cfg`, with the gradient w.r.t. logits
/// (sigmoid applied internally for probability-based losses).
[[nodiscard]] LossValue image_loss(const Grid<double>& logits, const Grid<std::uint8_t>& target,
                                   const LossConfig& cfg);

}  // namespace mineseg

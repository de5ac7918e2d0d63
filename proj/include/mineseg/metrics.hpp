#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mineseg/grid.hpp"

namespace mineseg {

inline constexpr double kDecisionThreshold = 0.5;

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    [[nodiscard]] std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept;
    bool operator==(const ConfusionCounts&) const = default;
};

struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Throws ArgumentError on shape mismatch or values outside {0, 1}.
[[nodiscard]] ConfusionCounts confusion(const Grid<std::uint8_t>& pred, const Grid<std::uint8_t>& target);

/// A zero denominator scores 1 when tp = fp = fn = 0 and 0 otherwise.
[[nodiscard]] Scores prf1(const ConfusionCounts& c) noexcept;

struct SplitReport {
    std::string split;
    std::vector<std::string> image_ids;
    std::vector<ConfusionCounts> counts;
    std::vector<Scores> per_image;
    Scores mean;    // arithmetic mean of per-image scores
    Scores pooled;  // scores of the summed confusion counts

    [[nodiscard]] nlohmann::json to_json() const;
};

struct MetricsReport {
    std::vector<SplitReport> splits;

    [[nodiscard]] const SplitReport* find(const std::string& split) const noexcept;
    [[nodiscard]] nlohmann::json to_json() const;
    /// split x (F1, Precision, Recall) table of per-image means, followed by
    /// the pooled-pixel scores.
    [[nodiscard]] std::string table() const;
};

/// Per-image scores and their means. Throws ArgumentError for an empty split
/// or mismatched list lengths. `ids` may be empty.
[[nodiscard]] SplitReport split_report(std::string split, const std::vector<Grid<std::uint8_t>>& preds,
                                       const std::vector<Grid<std::uint8_t>>& targets,
                                       std::vector<std::string> ids = {});

/// 1 where prob >= threshold.
[[nodiscard]] Grid<std::uint8_t> threshold_mask(const Grid<float>& probs, double threshold = kDecisionThreshold);
[[nodiscard]] Grid<std::uint8_t> threshold_mask(const Grid<double>& probs, double threshold = kDecisionThreshold);

}  // namespace mineseg

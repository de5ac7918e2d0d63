#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mineseg/catalog.hpp"
#include "mineseg/dataset.hpp"
#include "mineseg/grid.hpp"
#include "mineseg/model.hpp"

namespace mineseg {

struct InferenceConfig {
    std::size_t window = 512;
    std::size_t overlap = 256;
    double threshold = 0.5;
    unsigned jobs = 1;

    void validate() const;
};

struct Prediction {
    Grid<float> probability;
    Grid<std::uint8_t> mask;
    std::size_t windows = 0;
};

/// Sliding-window forward over the normalized tile; each window's logits go
/// through the sigmoid, the probabilities are stitched by per-pixel mean and
/// thresholded. Windows larger than the tile shrink to the largest multiple of
/// 32 that fits, and the overlap shrinks to at most half the window. Throws
/// CompatibilityError if the model does not take kChannels inputs.
[[nodiscard]] Prediction predict(const SegFormer& model, const ModelParams& params, const BandStats& stats,
                                 const TileSample& tile, const InferenceConfig& cfg = {});

inline constexpr double kPixelArea = 100.0;  // m^2 per 10 m pixel

struct ChangeCounts {
    std::uint64_t expansion_px = 0;    // positive in b only
    std::uint64_t contraction_px = 0;  // positive in a only
    std::uint64_t stable_px = 0;       // positive in both
    std::uint64_t excluded_px = 0;     // nodata in either period

    [[nodiscard]] double expansion_m2() const noexcept { return static_cast<double>(expansion_px) * kPixelArea; }
    [[nodiscard]] double contraction_m2() const noexcept {
        return static_cast<double>(contraction_px) * kPixelArea;
    }
    [[nodiscard]] double stable_m2() const noexcept { return static_cast<double>(stable_px) * kPixelArea; }
    ChangeCounts& operator+=(const ChangeCounts& o) noexcept;
    bool operator==(const ChangeCounts&) const = default;
};

/// Pixels equal to MaskRaster::kNoData in either mask are excluded. Throws
/// AlignmentError on shape mismatch and ArgumentError on other non-binary values.
[[nodiscard]] ChangeCounts compare_periods(const Grid<std::uint8_t>& a, const Grid<std::uint8_t>& b);
/// As above, and the CRS and transform must agree too.
[[nodiscard]] ChangeCounts compare_periods(const MaskRaster& a, const MaskRaster& b);

struct TileChange {
    std::string tile_id;
    ChangeCounts counts;
};

struct ChangeReport {
    ChangeCounts total;
    std::vector<TileChange> tiles;

    void add(std::string tile_id, const ChangeCounts& counts);
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string table() const;
};

}  // namespace mineseg

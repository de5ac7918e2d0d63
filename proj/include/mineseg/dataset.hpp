#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mineseg/rng.hpp"
#include "mineseg/tiling.hpp"

namespace mineseg {

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
    std::array<double, 3> ratios{0.70, 0.15, 0.15};  // train, val, test
    std::uint64_t seed = 0;

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static SplitSpec from_json(const nlohmann::json& j);
};

struct Splits {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

/// Seeded shuffle, then floor(n*train) and floor(n*val) ids, remainder to test.
[[nodiscard]] Splits split_dataset(std::span<const std::string> tile_ids, const SplitSpec& spec);

/// train.txt / val.txt / test.txt, one id per line.
void write_splits(const std::filesystem::path& dir, const Splits& splits);
[[nodiscard]] Splits read_splits(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Normalization

struct BandStats {
    std::array<double, kChannels> mean{};
    std::array<double, kChannels> std{};

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static BandStats from_json(const nlohmann::json& j);
};

void write_band_stats(const std::filesystem::path& path, const BandStats& stats);
[[nodiscard]] BandStats read_band_stats(const std::filesystem::path& path);

/// Population mean/std per band over every pixel of the given tiles (two
/// passes). Throws StatisticsError on an empty set or a zero-variance band.
[[nodiscard]] BandStats compute_band_stats(const TileSource& source, std::span<const std::string> train_ids);

/// Channel-first double tensor fed to the model.
struct Image {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    Image() = default;
    Image(std::size_t c, std::size_t h, std::size_t w) : channels(c), height(h), width(w), data(c * h * w, 0.0) {}

    [[nodiscard]] double& at(std::size_t ch, std::size_t r, std::size_t c) noexcept {
        return data[(ch * height + r) * width + c];
    }
    [[nodiscard]] double at(std::size_t ch, std::size_t r, std::size_t c) const noexcept {
        return data[(ch * height + r) * width + c];
    }
};

[[nodiscard]] Image normalize(const TileSample& tile, const BandStats& stats);
/// Inverse of normalize (reflectance units).
[[nodiscard]] Image denormalize(const Image& image, const BandStats& stats);

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentConfig {
    double p_crop = 1.0;
    std::size_t crop_size = 512;
    double p_vflip = 0.5;
    double p_rot = 0.5;
    double p_hflip = 0.5;
    double p_channel_shuffle = 0.3;

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static AugmentConfig from_json(const nlohmann::json& j);
    /// Random crop only (validation-time transform).
    [[nodiscard]] AugmentConfig crop_only() const;
};

struct AugmentRecord {
    std::size_t crop_row = 0;
    std::size_t crop_col = 0;
    bool cropped = false;
    bool vflip = false;
    int rot_quarters = 0;  // counter-clockwise quarter turns; 0 = not rotated
    bool hflip = false;
    bool channel_shuffle = false;
    std::array<std::size_t, kChannels> channel_order{};  // output channel i <- input channel_order[i]
};

struct Augmented {
    TileSample sample;
    AugmentRecord record;
};

/// Fixed order: crop, vertical flip, rotation by k*90 deg (k uniform in
/// {1,2,3}), horizontal flip, channel permutation. Geometric steps act on the
/// mask too; the channel shuffle never does. The stream consumption does not
/// depend on which transforms fire. When the crop does not fire, the crop is
/// taken at the tile center.
[[nodiscard]] Augmented augment(const TileSample& sample, const AugmentConfig& cfg, Rng& rng);

/// Per-sample stream for (seed, epoch, sample id).
[[nodiscard]] Rng sample_rng(std::uint64_t seed, std::uint64_t epoch, std::string_view sample_id,
                             std::uint64_t purpose = 0);

/// FNV-1a 64-bit hash of an id.
[[nodiscard]] std::uint64_t id_hash(std::string_view id) noexcept;

}  // namespace mineseg

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mineseg/catalog.hpp"
#include "mineseg/grid.hpp"

namespace mineseg {

inline constexpr std::size_t kTileSize = 768;

enum class Period { train, compare };
[[nodiscard]] std::string_view period_name(Period p) noexcept;
[[nodiscard]] Period parse_period(std::string_view name);

struct TileProvenance {
    std::string tile_id;
    std::string scene_id;
    std::size_t row = 0;  // window origin in 10 m scene pixels
    std::size_t col = 0;
    Period period = Period::train;
    std::string crs;
    Affine transform;  // georeference of the tile's top-left pixel
};

/// Channel-first 12-band sample on the 10 m grid plus its binary mask.
struct TileSample {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> pixels;  // kChannels * height * width
    Grid<std::uint8_t> mask;    // height x width, values {0, 1}
    TileProvenance provenance;

    TileSample() = default;
    TileSample(std::size_t h, std::size_t w)
        : height(h), width(w), pixels(kChannels * h * w, 0.0f), mask(h, w, 0) {}

    [[nodiscard]] float& at(std::size_t ch, std::size_t r, std::size_t c) noexcept {
        return pixels[(ch * height + r) * width + c];
    }
    [[nodiscard]] float at(std::size_t ch, std::size_t r, std::size_t c) const noexcept {
        return pixels[(ch * height + r) * width + c];
    }
    [[nodiscard]] std::span<float> channel(std::size_t ch) noexcept {
        return std::span<float>(pixels).subspan(ch * height * width, height * width);
    }
    [[nodiscard]] std::span<const float> channel(std::size_t ch) const noexcept {
        return std::span<const float>(pixels).subspan(ch * height * width, height * width);
    }
    [[nodiscard]] std::size_t positive_pixels() const noexcept;
    /// Throws ShapeError/SchemaError if channel count, sizes or mask values are off.
    void validate() const;
};

/// Cuts aligned tiles: tile_size px of the 10 m bands, tile_size/2 of the 20 m
/// bands and tile_size/6 of the 60 m bands over the same ground square, with
/// the coarse crops upsampled to the 10 m grid. Tiles touching nodata in any
/// band or in the mask are dropped. tile_size must be a multiple of 6.
[[nodiscard]] std::vector<TileSample> tile_scene(const SceneRaster& scene, const MaskRaster& mask, Period period,
                                                 std::size_t tile_size = kTileSize);

/// Streaming form of tile_scene: hands each kept tile to `sink` in row-major
/// tile order. Returns the number of tiles dropped for nodata.
std::size_t for_each_tile(const SceneRaster& scene, const MaskRaster& mask, Period period, std::size_t tile_size,
                          const std::function<void(TileSample&&)>& sink);

struct WindowPlan {
    std::size_t window_h = 0;
    std::size_t window_w = 0;
    std::size_t stride_h = 0;
    std::size_t stride_w = 0;
    std::vector<std::pair<std::size_t, std::size_t>> origins;  // (row, col)
};

/// Sliding windows at stride window - overlap; the last origin on each axis is
/// clamped to extent - window so every pixel is covered.
[[nodiscard]] WindowPlan plan_windows(std::size_t extent_h, std::size_t extent_w, std::size_t window_h,
                                      std::size_t window_w, std::size_t overlap);

struct WindowPrediction {
    std::size_t row = 0;
    std::size_t col = 0;
    Grid<float> values;
};

/// Per-pixel mean of all windows covering the pixel. Throws CoverageError if
/// any pixel is uncovered.
[[nodiscard]] Grid<float> stitch(std::span<const WindowPrediction> windows, std::size_t extent_h,
                                 std::size_t extent_w);

/// Cuts `image` into the plan's windows.
[[nodiscard]] std::vector<WindowPrediction> split_by_plan(const Grid<float>& image, const WindowPlan& plan);

// ---------------------------------------------------------------------------
// Tile store

void write_tile(const std::filesystem::path& path, const TileSample& tile);
[[nodiscard]] TileSample read_tile(const std::filesystem::path& path);

struct ManifestEntry {
    std::string tile_id;
    std::string scene_id;
    Period period = Period::train;
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t positive_px = 0;
};

/// Tab-separated, one header line.
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);
[[nodiscard]] std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Random-access tile provider.
class TileSource {
public:
    virtual ~TileSource() = default;
    [[nodiscard]] virtual std::vector<std::string> ids() const = 0;
    [[nodiscard]] virtual TileSample load(const std::string& id) const = 0;
};

class InMemoryTiles final : public TileSource {
public:
    InMemoryTiles() = default;
    explicit InMemoryTiles(std::vector<TileSample> tiles);
    void add(TileSample tile);
    [[nodiscard]] std::vector<std::string> ids() const override;
    [[nodiscard]] TileSample load(const std::string& id) const override;
    [[nodiscard]] const TileSample& get(const std::string& id) const;

private:
    std::vector<TileSample> tiles_;
};

/// Directory with "manifest.tsv" and "tiles/<tile_id>.msr".
class DirectoryTileStore final : public TileSource {
public:
    explicit DirectoryTileStore(std::filesystem::path root);
    [[nodiscard]] std::vector<std::string> ids() const override;
    [[nodiscard]] TileSample load(const std::string& id) const override;
    [[nodiscard]] const std::vector<ManifestEntry>& manifest() const noexcept { return manifest_; }

private:
    std::filesystem::path root_;
    std::vector<ManifestEntry> manifest_;
};

/// Incrementally fills a DirectoryTileStore; the manifest is written by finish().
class TileStoreWriter {
public:
    explicit TileStoreWriter(std::filesystem::path root);
    void add(const TileSample& tile);
    void finish();
    [[nodiscard]] std::size_t count() const noexcept { return entries_.size(); }

private:
    std::filesystem::path root_;
    std::vector<ManifestEntry> entries_;
};

}  // namespace mineseg

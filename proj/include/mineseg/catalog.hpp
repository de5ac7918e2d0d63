#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mineseg/grid.hpp"

namespace mineseg {

using Date = std::chrono::year_month_day;

/// Parses "YYYY-MM-DD"; throws ArgumentError on malformed or invalid dates.
[[nodiscard]] Date parse_date(std::string_view text);
[[nodiscard]] std::string format_date(const Date& d);

/// GDAL-ordered affine geotransform:
///   x = c[0] + col * c[1] + row * c[2]
///   y = c[3] + col * c[4] + row * c[5]
/// Only north-up transforms (c[2] == c[4] == 0, c[1] > 0, c[5] < 0) are accepted.
struct Affine {
    std::array<double, 6> c{0.0, 10.0, 0.0, 0.0, 0.0, -10.0};

    [[nodiscard]] double origin_x() const noexcept { return c[0]; }
    [[nodiscard]] double origin_y() const noexcept { return c[3]; }
    [[nodiscard]] double pixel_width() const noexcept { return c[1]; }
    [[nodiscard]] double pixel_height() const noexcept { return c[5]; }

    [[nodiscard]] static Affine north_up(double origin_x, double origin_y, double pixel_size) {
        return Affine{{origin_x, pixel_size, 0.0, origin_y, 0.0, -pixel_size}};
    }
    /// Same origin, shifted by (row, col) pixels.
    [[nodiscard]] Affine offset(double row, double col) const {
        Affine a = *this;
        a.c[0] += col * c[1];
        a.c[3] += row * c[5];
        return a;
    }
    /// Throws MetadataError unless north-up with positive x-scale and negative y-scale.
    void validate() const;

    bool operator==(const Affine&) const = default;
};

struct BBox {
    double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    [[nodiscard]] bool intersects(const BBox& o) const noexcept {
        return min_x < o.max_x && o.min_x < max_x && min_y < o.max_y && o.min_y < max_y;
    }
};

// ---------------------------------------------------------------------------
// Band catalogue

struct BandInfo {
    std::string_view id;
    int resolution_m;
};

/// The twelve retained bands in channel order. The cirrus band (B10) is
/// excluded; it only serves atmospheric correction.
inline constexpr std::array<BandInfo, 12> kBands{{
    {"B01", 60}, {"B02", 10}, {"B03", 10}, {"B04", 10}, {"B05", 20}, {"B06", 20},
    {"B07", 20}, {"B08", 10}, {"B8A", 20}, {"B09", 60}, {"B11", 20}, {"B12", 20},
}};
inline constexpr std::size_t kChannels = kBands.size();
inline constexpr double kBaseResolution = 10.0;

/// Canonical id for a band label ("B1", "b01", "B8a" ...). Returns nullopt for
/// the excluded cirrus band; throws SchemaError for unknown labels.
[[nodiscard]] std::optional<std::string> canonical_band(std::string_view label);
[[nodiscard]] int band_resolution(std::string_view canonical_id);
[[nodiscard]] std::size_t band_channel(std::string_view canonical_id);

// ---------------------------------------------------------------------------
// Rasters

struct Band {
    double pixel_size = 10.0;
    Grid<float> values;
    Grid<std::uint8_t> valid;  // 1 = valid, 0 = nodata
};

struct SceneRaster {
    std::string id;
    std::map<std::string, Band> bands;  // keyed by canonical band id
    Affine transform;                   // transform of the 10 m grid
    std::string crs;
    float nodata = 0.0f;                // sentinel used when serializing
    Date acquisition_date{};
    double cloud_cover_pct = 0.0;

    /// Extent in 10 m pixels.
    [[nodiscard]] std::size_t rows() const;
    [[nodiscard]] std::size_t cols() const;
    [[nodiscard]] BBox bbox() const;
    /// Throws SchemaError/MetadataError if the invariants do not hold.
    void validate() const;
};

struct MaskRaster {
    static constexpr std::uint8_t kNoData = 255;
    static constexpr double kResolution = 10.0;

    Grid<std::uint8_t> values;  // {0, 1, 255}
    Affine transform;
    std::string crs;
};

/// Target pixel grid for rasterization.
struct GridSpec {
    Affine transform;
    std::string crs;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

[[nodiscard]] SceneRaster load_scene(const std::filesystem::path& path);
void write_scene(const std::filesystem::path& path, const SceneRaster& scene);

[[nodiscard]] MaskRaster load_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const MaskRaster& mask);

// ---------------------------------------------------------------------------
// Catalog

struct CatalogQuery {
    Date start{};
    Date end{};
    double max_cloud_pct = 1.0;
    std::optional<BBox> region;

    /// April 1st to September 1st of `year`, at most 1 % cloud.
    [[nodiscard]] static CatalogQuery season(int year);
    void validate() const;
};

struct SceneRef {
    std::string id;
    std::filesystem::path path;
    Date date{};
    double cloud_pct = 0.0;
    BBox bbox;
    std::string crs;
};

/// Read-only source of scenes. Only the local-directory client ships; remote
/// catalogs implement the same interface.
class SceneStore {
public:
    virtual ~SceneStore() = default;
    [[nodiscard]] virtual std::vector<SceneRef> list() const = 0;
    [[nodiscard]] virtual SceneRaster load(const SceneRef& ref) const = 0;
};

/// Directory of "<id>.msr" rasters, each with a "<id>.meta.json" sidecar
/// holding one JSON record {id, date, cloud_pct, bbox[, crs, file]}.
class DirectorySceneStore final : public SceneStore {
public:
    explicit DirectorySceneStore(std::filesystem::path root);
    [[nodiscard]] std::vector<SceneRef> list() const override;
    [[nodiscard]] SceneRaster load(const SceneRef& ref) const override;
    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }

    /// Writes the raster and its sidecar into `root`.
    static SceneRef add(const std::filesystem::path& root, const SceneRaster& scene);

private:
    std::filesystem::path root_;
};

/// Scenes matching the query, by date ascending then id.
[[nodiscard]] std::vector<SceneRef> query_catalog(const SceneStore& store, const CatalogQuery& q);

/// Reverse-painter composite: each output pixel takes the first valid value
/// in list order. Output extent is the union of the inputs.
[[nodiscard]] SceneRaster merge_scenes(std::span<const SceneRaster> scenes);

// ---------------------------------------------------------------------------
// Ground truth

struct Point {
    double x = 0;
    double y = 0;
};
using Ring = std::vector<Point>;

/// Outer ring plus holes; inside-ness uses the even-odd rule over all rings.
struct Polygon {
    std::vector<Ring> rings;
};

/// Pixel = 1 iff its center falls inside any polygon.
[[nodiscard]] MaskRaster rasterize_mask(std::span<const Polygon> polygons, const GridSpec& target);

/// Polygon/MultiPolygon features from a GeoJSON file whose coordinates are
/// already in `expected_crs`. A declared "crs" member must match it.
[[nodiscard]] std::vector<Polygon> load_polygons_geojson(const std::filesystem::path& path,
                                                         const std::string& expected_crs);
void write_polygons_geojson(const std::filesystem::path& path, std::span<const Polygon> polygons,
                            const std::string& crs);

// ---------------------------------------------------------------------------
// Resampling

/// Separable Catmull-Rom bicubic upsampling by 2 (20 m) or 6 (60 m), with
/// replicated borders and pixel-center alignment.
[[nodiscard]] Grid<float> upsample_band(const Grid<float>& band, int factor);

/// The cubic convolution kernel with a = -0.5.
[[nodiscard]] double catmull_rom(double t) noexcept;

}  // namespace mineseg

#include "mineseg/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "mineseg/errors.hpp"
#include "mineseg/rng.hpp"

namespace mineseg {
namespace {

// Reflectance x 1e4 per channel (kBands order).
constexpr std::array<double, kChannels> kBackground{1200, 600, 800, 700, 1100, 1900, 2300, 2600, 2700, 900, 1700, 950};
constexpr std::array<double, kChannels> kDisturbed{1500, 1300, 1500, 1700, 1900, 2000, 2100, 2150, 2200, 800, 3100, 2700};

constexpr double kOriginX = 500000.0;
constexpr double kOriginY = 6000000.0;
constexpr const char* kCrs = "EPSG:32610";

struct Wave {
    double kx, ky, phase, amp;
};

/// Smooth background texture shared by all bands (scaled per band).
struct Texture {
    std::array<Wave, 4> waves{};

    explicit Texture(Rng& rng) {
        for (auto& w : waves) {
            const double period = 300.0 + 1500.0 * rng.uniform();  // metres
            const double angle = 2.0 * std::numbers::pi * rng.uniform();
            w.kx = 2.0 * std::numbers::pi / period * std::cos(angle);
            w.ky = 2.0 * std::numbers::pi / period * std::sin(angle);
            w.phase = 2.0 * std::numbers::pi * rng.uniform();
            w.amp = 0.05 + 0.1 * rng.uniform();
        }
    }

    [[nodiscard]] double at(double x, double y) const noexcept {
        double v = 0.0;
        for (const auto& w : waves) {
            v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
        }
        return v;
    }
};

bool inside_ring(const Ring& ring, double x, double y) noexcept {
    bool in = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) {
            in = !in;
        }
    }
    return in;
}

bool inside_any(const std::vector<Polygon>& polys, double x, double y) noexcept {
    for (const auto& p : polys) {
        if (inside_ring(p.rings.front(), x, y)) {
            return true;
        }
    }
    return false;
}

/// 1 to 3 rectangles or 24-gon ellipses inside the square [x0, x0+side] x
/// [y0-side, y0] (map units), kept clear of the border.
std::vector<Polygon> random_shapes(Rng& rng, double x0, double y0, double side) {
    std::vector<Polygon> out;
    const std::size_t count = 1 + static_cast<std::size_t>(rng.below(3));
    for (std::size_t s = 0; s < count; ++s) {
        const double hw = side * (0.08 + 0.12 * rng.uniform());
        const double hh = side * (0.08 + 0.12 * rng.uniform());
        const double cx = x0 + hw + side * 0.05 + (side * 0.9 - 2 * hw) * rng.uniform();
        const double cy = y0 - hh - side * 0.05 - (side * 0.9 - 2 * hh) * rng.uniform();
        Ring ring;
        if (rng.bernoulli(0.5)) {
            ring = {{cx - hw, cy - hh}, {cx + hw, cy - hh}, {cx + hw, cy + hh}, {cx - hw, cy + hh}};
        } else {
            for (int k = 0; k < 24; ++k) {
                const double a = 2.0 * std::numbers::pi * k / 24.0;
                ring.push_back({cx + hw * std::cos(a), cy + hh * std::sin(a)});
            }
        }
        ring.push_back(ring.front());
        out.push_back(Polygon{{std::move(ring)}});
    }
    return out;
}

/// Same shapes scaled by `factor` about their vertex centroid.
std::vector<Polygon> grown(const std::vector<Polygon>& polys, double factor) {
    std::vector<Polygon> out = polys;
    for (auto& p : out) {
        Ring& r = p.rings.front();
        double cx = 0.0;
        double cy = 0.0;
        for (std::size_t i = 0; i + 1 < r.size(); ++i) {
            cx += r[i].x;
            cy += r[i].y;
        }
        cx /= static_cast<double>(r.size() - 1);
        cy /= static_cast<double>(r.size() - 1);
        for (auto& pt : r) {
            pt.x = cx + (pt.x - cx) * factor;
            pt.y = cy + (pt.y - cy) * factor;
        }
    }
    return out;
}

double band_value(std::size_t ch, bool disturbed, double texture, double noise) {
    const double base = disturbed ? kDisturbed[ch] : kBackground[ch];
    return base * (1.0 + texture) + 60.0 * noise;
}

struct SceneSpec {
    std::string id;
    Date date;
    double cloud_pct = 0.0;
    std::size_t col0 = 0;  // 10 m pixel offset within the full extent
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::vector<Polygon> shapes;
    std::uint64_t stream = 0;
    // Nodata hole in 10 m pixels, relative to this scene: [r0, r1) x [c0, c1).
    std::array<std::size_t, 4> hole{0, 0, 0, 0};
    double haze = 0.0;  // additive brightening of every band
};

SceneRaster render_scene(const SceneSpec& spec, const Texture& texture, std::uint64_t seed) {
    SceneRaster s;
    s.id = spec.id;
    s.crs = kCrs;
    s.acquisition_date = spec.date;
    s.cloud_cover_pct = spec.cloud_pct;
    const double x0 = kOriginX + static_cast<double>(spec.col0) * kBaseResolution;
    s.transform = Affine::north_up(x0, kOriginY, kBaseResolution);
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        const auto& info = kBands[ch];
        const double res = info.resolution_m;
        const std::size_t f = static_cast<std::size_t>(info.resolution_m / 10);
        Band band;
        band.pixel_size = res;
        const std::size_t rows = spec.rows / f;
        const std::size_t cols = spec.cols / f;
        band.values = Grid<float>(rows, cols);
        band.valid = Grid<std::uint8_t>(rows, cols, 1);
        Rng noise(seed, {0x5C3E, spec.stream, ch});
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                const double x = x0 + (static_cast<double>(c) + 0.5) * res;
                const double y = kOriginY - (static_cast<double>(r) + 0.5) * res;
                const bool hit = inside_any(spec.shapes, x, y);
                const double v = band_value(ch, hit, texture.at(x, y), noise.normal()) + spec.haze;
                band.values(r, c) = static_cast<float>(v);
                const std::size_t r10 = r * f;
                const std::size_t c10 = c * f;
                if (r10 >= spec.hole[0] && r10 < spec.hole[1] && c10 >= spec.hole[2] && c10 < spec.hole[3]) {
                    band.valid(r, c) = 0;
                }
            }
        }
        s.bands.emplace(std::string(info.id), std::move(band));
    }
    return s;
}

std::size_t round_down6(std::size_t v) { return v - v % 6; }

}  // namespace

std::vector<TileSample> synthesize_tiles(std::size_t n, std::size_t size, std::uint64_t seed) {
    if (n == 0 || size < 32) {
        throw ArgumentError("synthetic tiles need n >= 1 and size >= 32");
    }
    std::vector<TileSample> tiles;
    tiles.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(seed, {0x7115, i});
        const Texture texture(rng);
        const double side = static_cast<double>(size) * kBaseResolution;
        const double x0 = kOriginX + static_cast<double>(i) * side;
        const auto shapes = random_shapes(rng, x0, kOriginY, side);
        TileSample t(size, size);
        char id[32];
        std::snprintf(id, sizeof id, "synth-%03zu", i);
        t.provenance.tile_id = id;
        t.provenance.scene_id = "synthetic";
        t.provenance.crs = kCrs;
        t.provenance.transform = Affine::north_up(x0, kOriginY, kBaseResolution);
        for (std::size_t r = 0; r < size; ++r) {
            for (std::size_t c = 0; c < size; ++c) {
                const double x = x0 + (static_cast<double>(c) + 0.5) * kBaseResolution;
                const double y = kOriginY - (static_cast<double>(r) + 0.5) * kBaseResolution;
                t.mask(r, c) = inside_any(shapes, x, y) ? 1 : 0;
            }
        }
        for (std::size_t ch = 0; ch < kChannels; ++ch) {
            for (std::size_t r = 0; r < size; ++r) {
                for (std::size_t c = 0; c < size; ++c) {
                    const double x = x0 + (static_cast<double>(c) + 0.5) * kBaseResolution;
                    const double y = kOriginY - (static_cast<double>(r) + 0.5) * kBaseResolution;
                    t.at(ch, r, c) = static_cast<float>(band_value(ch, t.mask(r, c) != 0, texture.at(x, y), rng.normal()));
                }
            }
        }
        tiles.push_back(std::move(t));
    }
    return tiles;
}

SyntheticLayout write_synthetic_scenes(const std::filesystem::path& root, std::size_t tiles, std::size_t tile_size,
                                       std::uint64_t seed) {
    if (tiles == 0) {
        throw ArgumentError("need at least one tile");
    }
    if (tile_size == 0 || tile_size % 6 != 0) {
        throw ArgumentError("tile size must be a positive multiple of 6");
    }
    SyntheticLayout layout;
    std::size_t tr = 1;
    for (std::size_t d = 1; d * d <= tiles; ++d) {
        if (tiles % d == 0) {
            tr = d;
        }
    }
    layout.tile_rows = tr;
    layout.tile_cols = tiles / tr;
    layout.crs = kCrs;
    layout.scene_root = root / "scenes";
    layout.ground_truth = root / "ground_truth.geojson";
    std::filesystem::remove_all(layout.scene_root);
    std::filesystem::create_directories(layout.scene_root);

    const std::size_t rows = layout.tile_rows * tile_size;
    const std::size_t cols = layout.tile_cols * tile_size;
    const double side = static_cast<double>(tile_size) * kBaseResolution;

    Rng rng(seed, {0x5CE7E});
    const Texture texture(rng);
    std::vector<Polygon> shapes;
    for (std::size_t r = 0; r < layout.tile_rows; ++r) {
        for (std::size_t c = 0; c < layout.tile_cols; ++c) {
            const double x0 = kOriginX + static_cast<double>(c) * side;
            const double y0 = kOriginY - static_cast<double>(r) * side;
            auto cell = random_shapes(rng, x0, y0, side);
            shapes.insert(shapes.end(), cell.begin(), cell.end());
        }
    }
    write_polygons_geojson(layout.ground_truth, shapes, kCrs);

    // Two overlapping in-season scenes; the earlier one wins the overlap except
    // inside its nodata hole.
    const std::size_t a_end = std::max<std::size_t>(6, round_down6(cols * 6 / 10));
    const std::size_t b_start = std::min(round_down6(cols * 4 / 10), a_end - 6);
    SceneSpec a;
    a.id = "S2A_synthetic_20210610";
    a.date = parse_date(std::to_string(layout.train_year) + "-06-10");
    a.cloud_pct = 0.4;
    a.col0 = 0;
    a.cols = a_end;
    a.rows = rows;
    a.shapes = shapes;
    a.stream = 1;
    a.hole = {0, round_down6(rows / 3) + 6, b_start, a_end};

    SceneSpec b = a;
    b.id = "S2B_synthetic_20210715";
    b.date = parse_date(std::to_string(layout.train_year) + "-07-15");
    b.cloud_pct = 0.8;
    b.col0 = b_start;
    b.cols = cols - b_start;
    b.stream = 2;
    b.hole = {0, 0, 0, 0};

    SceneSpec cloudy = a;
    cloudy.id = "S2A_synthetic_20210720_cloudy";
    cloudy.date = parse_date(std::to_string(layout.train_year) + "-07-20");
    cloudy.cloud_pct = 5.0;
    cloudy.cols = cols;
    cloudy.stream = 3;
    cloudy.hole = {0, 0, 0, 0};
    cloudy.haze = 2500.0;

    SceneSpec next = cloudy;
    next.id = "S2B_synthetic_20220705";
    next.date = parse_date(std::to_string(layout.compare_year) + "-07-05");
    next.cloud_pct = 0.3;
    next.stream = 4;
    next.haze = 0.0;
    next.shapes = grown(shapes, 1.25);

    for (const SceneSpec* spec : {&a, &b, &cloudy, &next}) {
        DirectorySceneStore::add(layout.scene_root, render_scene(*spec, texture, seed));
    }
    return layout;
}

}  // namespace mineseg

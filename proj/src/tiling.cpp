#include "mineseg/tiling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mineseg/errors.hpp"
#include "mineseg/raster_io.hpp"

namespace mineseg {
namespace {

using nlohmann::json;

std::string sanitize(std::string s) {
    for (char& ch : s) {
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) {
            ch = '_';
        }
    }
    return s;
}

std::string make_tile_id(Period p, const std::string& scene_id, std::size_t row, std::size_t col) {
    return std::string(period_name(p)) + "-" + sanitize(scene_id) + "-r" + std::to_string(row) + "-c" +
           std::to_string(col);
}

}  // namespace

std::string_view period_name(Period p) noexcept { return p == Period::train ? "train" : "compare"; }

Period parse_period(std::string_view name) {
    if (name == "train") return Period::train;
    if (name == "compare") return Period::compare;
    throw ArgumentError("unknown period '" + std::string(name) + "' (expected train|compare)");
}

std::size_t TileSample::positive_pixels() const noexcept {
    return static_cast<std::size_t>(std::count(mask.storage().begin(), mask.storage().end(), std::uint8_t{1}));
}

void TileSample::validate() const {
    if (pixels.size() != kChannels * height * width) {
        throw ShapeError("tile pixel buffer does not hold 12 channels of " + std::to_string(height) + "x" +
                         std::to_string(width));
    }
    if (mask.rows() != height || mask.cols() != width) {
        throw ShapeError("tile mask shape differs from pixel shape");
    }
    for (auto v : mask.storage()) {
        if (v > 1) {
            throw SchemaError("tile mask values must be 0 or 1");
        }
    }
}

// ---------------------------------------------------------------------------

std::size_t for_each_tile(const SceneRaster& scene, const MaskRaster& mask, Period period, std::size_t tile_size,
                          const std::function<void(TileSample&&)>& sink) {
    if (tile_size == 0 || tile_size % 6 != 0) {
        throw ArgumentError("tile size must be a positive multiple of 6 so 20 m and 60 m crops align");
    }
    if (mask.crs != scene.crs) {
        throw AlignmentError("mask CRS " + mask.crs + " differs from scene CRS " + scene.crs);
    }
    for (std::size_t i = 0; i < 6; ++i) {
        if (std::abs(mask.transform.c[i] - scene.transform.c[i]) > 1e-6) {
            throw AlignmentError("mask and scene transforms differ");
        }
    }
    if (mask.values.rows() != scene.rows() || mask.values.cols() != scene.cols()) {
        throw AlignmentError("mask and scene extents differ");
    }
    for (const auto& b : kBands) {
        if (!scene.bands.contains(std::string(b.id))) {
            throw SchemaError("scene '" + scene.id + "' lacks band " + std::string(b.id));
        }
    }

    const std::size_t tiles_down = scene.rows() / tile_size;
    const std::size_t tiles_across = scene.cols() / tile_size;
    std::size_t dropped = 0;
    for (std::size_t ti = 0; ti < tiles_down; ++ti) {
        for (std::size_t tj = 0; tj < tiles_across; ++tj) {
            const std::size_t r10 = ti * tile_size;
            const std::size_t c10 = tj * tile_size;
            const Grid<std::uint8_t> mask_crop = mask.values.crop(r10, c10, tile_size, tile_size);
            bool usable = std::none_of(mask_crop.storage().begin(), mask_crop.storage().end(),
                                       [](std::uint8_t v) { return v == MaskRaster::kNoData; });

            TileSample tile(tile_size, tile_size);
            for (std::size_t ch = 0; usable && ch < kChannels; ++ch) {
                const Band& band = scene.bands.at(std::string(kBands[ch].id));
                const auto factor = static_cast<std::size_t>(kBands[ch].resolution_m / 10);
                const std::size_t n = tile_size / factor;
                const Grid<std::uint8_t> valid = band.valid.crop(r10 / factor, c10 / factor, n, n);
                if (std::find(valid.storage().begin(), valid.storage().end(), std::uint8_t{0}) !=
                    valid.storage().end()) {
                    usable = false;
                    break;
                }
                Grid<float> crop = band.values.crop(r10 / factor, c10 / factor, n, n);
                if (factor > 1) {
                    crop = upsample_band(crop, static_cast<int>(factor));
                }
                std::copy(crop.storage().begin(), crop.storage().end(), tile.channel(ch).begin());
            }
            if (!usable) {
                ++dropped;
                continue;
            }
            tile.mask = mask_crop;
            tile.provenance.scene_id = scene.id;
            tile.provenance.row = r10;
            tile.provenance.col = c10;
            tile.provenance.period = period;
            tile.provenance.crs = scene.crs;
            tile.provenance.transform = scene.transform.offset(static_cast<double>(r10), static_cast<double>(c10));
            tile.provenance.tile_id = make_tile_id(period, scene.id, r10, c10);
            sink(std::move(tile));
        }
    }
    return dropped;
}

std::vector<TileSample> tile_scene(const SceneRaster& scene, const MaskRaster& mask, Period period,
                                   std::size_t tile_size) {
    std::vector<TileSample> tiles;
    for_each_tile(scene, mask, period, tile_size, [&](TileSample&& t) { tiles.push_back(std::move(t)); });
    return tiles;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> axis_origins(std::size_t extent, std::size_t window, std::size_t stride) {
    std::vector<std::size_t> origins;
    for (std::size_t o = 0;; o += stride) {
        if (o + window >= extent) {
            origins.push_back(extent - window);
            break;
        }
        origins.push_back(o);
    }
    return origins;
}

}  // namespace

WindowPlan plan_windows(std::size_t extent_h, std::size_t extent_w, std::size_t window_h, std::size_t window_w,
                        std::size_t overlap) {
    if (window_h == 0 || window_w == 0) {
        throw ArgumentError("window must be non-empty");
    }
    if (window_h > extent_h || window_w > extent_w) {
        throw ArgumentError("window " + std::to_string(window_h) + "x" + std::to_string(window_w) +
                            " exceeds extent " + std::to_string(extent_h) + "x" + std::to_string(extent_w));
    }
    if (overlap >= std::min(window_h, window_w)) {
        throw ArgumentError("overlap must be smaller than the window");
    }
    WindowPlan plan;
    plan.window_h = window_h;
    plan.window_w = window_w;
    plan.stride_h = window_h - overlap;
    plan.stride_w = window_w - overlap;
    const auto rows = axis_origins(extent_h, window_h, plan.stride_h);
    const auto cols = axis_origins(extent_w, window_w, plan.stride_w);
    for (auto r : rows) {
        for (auto c : cols) {
            plan.origins.emplace_back(r, c);
        }
    }
    return plan;
}

Grid<float> stitch(std::span<const WindowPrediction> windows, std::size_t extent_h, std::size_t extent_w) {
    // Float inputs summed in double are exact for any realistic overlap count,
    // so the mean of identical values reproduces the value bit-for-bit.
    std::vector<double> sum(extent_h * extent_w, 0.0);
    std::vector<std::uint32_t> count(extent_h * extent_w, 0);
    for (const auto& w : windows) {
        if (w.row + w.values.rows() > extent_h || w.col + w.values.cols() > extent_w) {
            throw ArgumentError("window at (" + std::to_string(w.row) + "," + std::to_string(w.col) +
                                ") extends past the extent");
        }
        for (std::size_t r = 0; r < w.values.rows(); ++r) {
            const std::size_t base = (w.row + r) * extent_w + w.col;
            for (std::size_t c = 0; c < w.values.cols(); ++c) {
                sum[base + c] += static_cast<double>(w.values(r, c));
                ++count[base + c];
            }
        }
    }
    Grid<float> out(extent_h, extent_w);
    for (std::size_t i = 0; i < sum.size(); ++i) {
        if (count[i] == 0) {
            throw CoverageError("pixel (" + std::to_string(i / extent_w) + "," + std::to_string(i % extent_w) +
                                ") is not covered by any window");
        }
        out.storage()[i] = static_cast<float>(sum[i] / count[i]);
    }
    return out;
}

std::vector<WindowPrediction> split_by_plan(const Grid<float>& image, const WindowPlan& plan) {
    std::vector<WindowPrediction> out;
    out.reserve(plan.origins.size());
    for (const auto& [r, c] : plan.origins) {
        out.push_back(WindowPrediction{r, c, image.crop(r, c, plan.window_h, plan.window_w)});
    }
    return out;
}

// ---------------------------------------------------------------------------

void write_tile(const std::filesystem::path& path, const TileSample& tile) {
    tile.validate();
    const auto& p = tile.provenance;
    RasterContainer c;
    c.header = {{"kind", "tile"},
                {"tile_id", p.tile_id},
                {"scene_id", p.scene_id},
                {"window_origin", {p.row, p.col}},
                {"period", period_name(p.period)},
                {"crs", p.crs},
                {"transform", p.transform.c}};
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        Grid<float> g(tile.height, tile.width);
        const auto src = tile.channel(ch);
        std::copy(src.begin(), src.end(), g.storage().begin());
        c.arrays.push_back(RasterArray::from_grid(std::string(kBands[ch].id), g));
    }
    c.arrays.push_back(RasterArray::from_grid("mask", tile.mask));
    write_container(path, c);
}

TileSample read_tile(const std::filesystem::path& path) {
    const RasterContainer c = read_container(path);
    const json& h = c.header;
    if (h.value("kind", std::string{}) != "tile") {
        throw SchemaError("not a tile container: " + path.string());
    }
    const RasterArray* mask = c.find("mask");
    if (mask == nullptr) {
        throw SchemaError("tile lacks a mask: " + path.string());
    }
    TileSample t(mask->rows, mask->cols);
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        const RasterArray* a = c.find(std::string(kBands[ch].id));
        if (a == nullptr) {
            throw SchemaError("tile lacks band " + std::string(kBands[ch].id) + ": " + path.string());
        }
        if (a->rows != t.height || a->cols != t.width) {
            throw ShapeError("band " + a->name + " shape differs from the mask in " + path.string());
        }
        const Grid<float> g = a->to_float();
        std::copy(g.storage().begin(), g.storage().end(), t.channel(ch).begin());
    }
    t.mask = mask->to_u8();
    try {
        auto& p = t.provenance;
        p.tile_id = h.at("tile_id").get<std::string>();
        p.scene_id = h.at("scene_id").get<std::string>();
        const auto origin = h.at("window_origin").get<std::vector<std::size_t>>();
        p.row = origin.at(0);
        p.col = origin.at(1);
        p.period = parse_period(h.at("period").get<std::string>());
        p.crs = h.at("crs").get<std::string>();
        p.transform.c = h.at("transform").get<std::array<double, 6>>();
    } catch (const json::exception& e) {
        throw MetadataError("malformed tile provenance in " + path.string() + ": " + e.what());
    }
    t.validate();
    return t;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    out << "tile_id\tscene_id\tperiod\trow\tcol\tpositive_px\n";
    for (const auto& e : entries) {
        out << e.tile_id << '\t' << e.scene_id << '\t' << period_name(e.period) << '\t' << e.row << '\t' << e.col
            << '\t' << e.positive_px << '\n';
    }
    if (!out) {
        throw IoError("cannot write manifest " + path.string());
    }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read manifest " + path.string());
    }
    std::string line;
    std::getline(in, line);
    if (line.rfind("tile_id\t", 0) != 0) {
        throw SchemaError("manifest header missing in " + path.string());
    }
    std::vector<ManifestEntry> out;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream ss(line);
        ManifestEntry e;
        std::string period;
        if (!(std::getline(ss, e.tile_id, '\t') && std::getline(ss, e.scene_id, '\t') &&
              std::getline(ss, period, '\t') && (ss >> e.row >> e.col >> e.positive_px))) {
            throw SchemaError("malformed manifest line: " + line);
        }
        e.period = parse_period(period);
        out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------

InMemoryTiles::InMemoryTiles(std::vector<TileSample> tiles) : tiles_(std::move(tiles)) {}

void InMemoryTiles::add(TileSample tile) { tiles_.push_back(std::move(tile)); }

std::vector<std::string> InMemoryTiles::ids() const {
    std::vector<std::string> out;
    out.reserve(tiles_.size());
    for (const auto& t : tiles_) {
        out.push_back(t.provenance.tile_id);
    }
    return out;
}

const TileSample& InMemoryTiles::get(const std::string& id) const {
    for (const auto& t : tiles_) {
        if (t.provenance.tile_id == id) {
            return t;
        }
    }
    throw ArgumentError("unknown tile id '" + id + "'");
}

TileSample InMemoryTiles::load(const std::string& id) const { return get(id); }

DirectoryTileStore::DirectoryTileStore(std::filesystem::path root) : root_(std::move(root)) {
    manifest_ = read_manifest(root_ / "manifest.tsv");
}

std::vector<std::string> DirectoryTileStore::ids() const {
    std::vector<std::string> out;
    out.reserve(manifest_.size());
    for (const auto& e : manifest_) {
        out.push_back(e.tile_id);
    }
    return out;
}

TileSample DirectoryTileStore::load(const std::string& id) const {
    return read_tile(root_ / "tiles" / (id + ".msr"));
}

TileStoreWriter::TileStoreWriter(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "tiles");
}

void TileStoreWriter::add(const TileSample& tile) {
    write_tile(root_ / "tiles" / (tile.provenance.tile_id + ".msr"), tile);
    const auto& p = tile.provenance;
    entries_.push_back(ManifestEntry{p.tile_id, p.scene_id, p.period, p.row, p.col, tile.positive_pixels()});
}

void TileStoreWriter::finish() { write_manifest(root_ / "manifest.tsv", entries_); }

}  // namespace mineseg

#include "mineseg/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "mineseg/errors.hpp"
#include "mineseg/raster_io.hpp"

namespace mineseg {
namespace {

using nlohmann::json;

// Offsets between grids must be whole pixels; this tolerance absorbs
// floating-point noise in projected coordinates.
constexpr double kAlignTol = 1e-6;

bool is_whole(double v) { return std::abs(v - std::round(v)) <= kAlignTol; }

std::size_t whole(double v, const std::string& what) {
    if (!is_whole(v) || std::round(v) < 0) {
        throw AlignmentError(what + " is not a whole, non-negative pixel count (" + std::to_string(v) + ")");
    }
    return static_cast<std::size_t>(std::llround(v));
}

Affine parse_transform(const json& j) {
    if (!j.is_array() || j.size() != 6) {
        throw MetadataError("transform must hold 6 coefficients");
    }
    Affine a;
    for (std::size_t i = 0; i < 6; ++i) {
        if (!j[i].is_number()) {
            throw MetadataError("transform coefficient " + std::to_string(i) + " is not a number");
        }
        a.c[i] = j[i].get<double>();
    }
    a.validate();
    return a;
}

json transform_json(const Affine& a) { return json(a.c); }

}  // namespace

// ---------------------------------------------------------------------------

Date parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    char tail = 0;
    const std::string s(text);
    if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
        throw ArgumentError("malformed ISO-8601 date '" + s + "'");
    }
    const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!date.ok()) {
        throw ArgumentError("invalid calendar date '" + s + "'");
    }
    return date;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

void Affine::validate() const {
    for (double v : c) {
        if (!std::isfinite(v)) {
            throw MetadataError("transform has non-finite coefficients");
        }
    }
    if (c[2] != 0.0 || c[4] != 0.0) {
        throw MetadataError("rotated transforms are not supported");
    }
    if (!(c[1] > 0.0) || !(c[5] < 0.0)) {
        throw MetadataError("transform must have positive x-scale and negative y-scale");
    }
}

// ---------------------------------------------------------------------------

std::optional<std::string> canonical_band(std::string_view label) {
    std::string s;
    for (char ch : label) {
        s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    }
    if (s.size() < 2 || s[0] != 'B') {
        throw SchemaError("unknown band label '" + std::string(label) + "'");
    }
    std::string num = s.substr(1);
    if (num == "8A") {
        return std::string("B8A");
    }
    if (!std::all_of(num.begin(), num.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
        throw SchemaError("unknown band label '" + std::string(label) + "'");
    }
    const int n = std::stoi(num);
    if (n == 10) {
        return std::nullopt;
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "B%02d", n);
    if (n < 1 || n > 12) {
        throw SchemaError("unknown band label '" + std::string(label) + "'");
    }
    return std::string(buf);
}

int band_resolution(std::string_view canonical_id) {
    for (const auto& b : kBands) {
        if (b.id == canonical_id) {
            return b.resolution_m;
        }
    }
    throw SchemaError("unknown band '" + std::string(canonical_id) + "'");
}

std::size_t band_channel(std::string_view canonical_id) {
    for (std::size_t i = 0; i < kBands.size(); ++i) {
        if (kBands[i].id == canonical_id) {
            return i;
        }
    }
    throw SchemaError("unknown band '" + std::string(canonical_id) + "'");
}

// ---------------------------------------------------------------------------

std::size_t SceneRaster::rows() const {
    if (bands.empty()) {
        return 0;
    }
    const auto& [id0, b] = *bands.begin();
    return static_cast<std::size_t>(std::llround(static_cast<double>(b.values.rows()) * b.pixel_size / kBaseResolution));
}

std::size_t SceneRaster::cols() const {
    if (bands.empty()) {
        return 0;
    }
    const auto& [id0, b] = *bands.begin();
    return static_cast<std::size_t>(std::llround(static_cast<double>(b.values.cols()) * b.pixel_size / kBaseResolution));
}

BBox SceneRaster::bbox() const {
    const double w = static_cast<double>(cols()) * transform.pixel_width();
    const double h = static_cast<double>(rows()) * -transform.pixel_height();
    return BBox{transform.origin_x(), transform.origin_y() - h, transform.origin_x() + w, transform.origin_y()};
}

void SceneRaster::validate() const {
    if (crs.empty()) {
        throw MetadataError("scene '" + id + "' has no CRS");
    }
    transform.validate();
    if (std::abs(transform.pixel_width() - kBaseResolution) > kAlignTol ||
        std::abs(-transform.pixel_height() - kBaseResolution) > kAlignTol) {
        throw MetadataError("scene transform must describe the 10 m grid");
    }
    if (!(cloud_cover_pct >= 0.0 && cloud_cover_pct <= 100.0)) {
        throw MetadataError("cloud cover outside [0, 100]");
    }
    const double height_m = static_cast<double>(rows()) * kBaseResolution;
    const double width_m = static_cast<double>(cols()) * kBaseResolution;
    for (const auto& [bid, band] : bands) {
        if (band.pixel_size != band_resolution(bid)) {
            throw SchemaError("band " + bid + " has pixel size " + std::to_string(band.pixel_size) +
                              ", expected " + std::to_string(band_resolution(bid)));
        }
        if (band.values.rows() != band.valid.rows() || band.values.cols() != band.valid.cols()) {
            throw SchemaError("band " + bid + " validity mask shape mismatch");
        }
        if (std::abs(static_cast<double>(band.values.rows()) * band.pixel_size - height_m) > kAlignTol ||
            std::abs(static_cast<double>(band.values.cols()) * band.pixel_size - width_m) > kAlignTol) {
            throw SchemaError("band " + bid + " does not share the scene extent");
        }
    }
}

SceneRaster load_scene(const std::filesystem::path& path) {
    const RasterContainer c = read_container(path);
    const json& h = c.header;
    SceneRaster s;
    s.id = h.contains("id") && h["id"].is_string() ? h["id"].get<std::string>() : path.stem().string();
    if (!h.contains("crs") || !h["crs"].is_string() || h["crs"].get<std::string>().empty()) {
        throw MetadataError("missing CRS in " + path.string());
    }
    s.crs = h["crs"].get<std::string>();
    if (!h.contains("transform")) {
        throw MetadataError("missing transform in " + path.string());
    }
    s.transform = parse_transform(h["transform"]);
    std::optional<double> nodata;
    if (h.contains("nodata") && h["nodata"].is_number()) {
        nodata = h["nodata"].get<double>();
        s.nodata = static_cast<float>(*nodata);
    }
    if (h.contains("date") && h["date"].is_string()) {
        s.acquisition_date = parse_date(h["date"].get<std::string>());
    }
    if (h.contains("cloud_pct") && h["cloud_pct"].is_number()) {
        s.cloud_cover_pct = h["cloud_pct"].get<double>();
    }

    for (const auto& a : c.arrays) {
        const std::string label = a.attrs.contains("band") ? a.attrs["band"].get<std::string>() : a.name;
        const auto id = canonical_band(label);
        if (!id) {
            continue;  // cirrus
        }
        if (s.bands.contains(*id)) {
            throw SchemaError("duplicate band " + *id + " in " + path.string());
        }
        Band band;
        band.pixel_size = a.attrs.contains("pixel_size") ? a.attrs["pixel_size"].get<double>()
                                                         : static_cast<double>(band_resolution(*id));
        const double scale = a.attrs.value("scale", 1.0);
        const double offset = a.attrs.value("offset", 0.0);
        std::optional<double> band_nodata = nodata;
        if (a.attrs.contains("nodata") && a.attrs["nodata"].is_number()) {
            band_nodata = a.attrs["nodata"].get<double>();
        }
        Grid<float> raw = a.to_float();
        band.values = Grid<float>(a.rows, a.cols);
        band.valid = Grid<std::uint8_t>(a.rows, a.cols, 1);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const float v = raw.storage()[i];
            const bool invalid = std::isnan(v) || (band_nodata && static_cast<double>(v) == *band_nodata);
            band.valid.storage()[i] = invalid ? 0 : 1;
            band.values.storage()[i] = invalid ? 0.0f : static_cast<float>(v * scale + offset);
        }
        s.bands.emplace(*id, std::move(band));
    }
    s.validate();
    return s;
}

void write_scene(const std::filesystem::path& path, const SceneRaster& scene) {
    scene.validate();
    RasterContainer c;
    c.header = {{"kind", "scene"},
                {"id", scene.id},
                {"crs", scene.crs},
                {"transform", transform_json(scene.transform)},
                {"date", format_date(scene.acquisition_date)},
                {"cloud_pct", scene.cloud_cover_pct}};
    for (const auto& [bid, band] : scene.bands) {
        Grid<float> out = band.values;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (!band.valid.storage()[i]) {
                out.storage()[i] = std::numeric_limits<float>::quiet_NaN();
            }
        }
        auto a = RasterArray::from_grid(bid, out);
        a.attrs = {{"pixel_size", band.pixel_size}};
        c.arrays.push_back(std::move(a));
    }
    write_container(path, c);
}

MaskRaster load_mask(const std::filesystem::path& path) {
    const RasterContainer c = read_container(path);
    const json& h = c.header;
    if (!h.contains("crs") || !h["crs"].is_string()) {
        throw MetadataError("missing CRS in " + path.string());
    }
    if (!h.contains("transform")) {
        throw MetadataError("missing transform in " + path.string());
    }
    if (c.arrays.size() != 1) {
        throw SchemaError("mask rasters hold exactly one band: " + path.string());
    }
    MaskRaster m;
    m.crs = h["crs"].get<std::string>();
    m.transform = parse_transform(h["transform"]);
    if (std::abs(m.transform.pixel_width() - MaskRaster::kResolution) > kAlignTol) {
        throw SchemaError("mask resolution must be 10 m: " + path.string());
    }
    m.values = c.arrays[0].to_u8();
    for (auto v : m.values.storage()) {
        if (v != 0 && v != 1 && v != MaskRaster::kNoData) {
            throw SchemaError("mask values must be 0, 1 or 255: " + path.string());
        }
    }
    return m;
}

void write_mask(const std::filesystem::path& path, const MaskRaster& mask) {
    RasterContainer c;
    c.header = {{"kind", "mask"}, {"crs", mask.crs}, {"transform", transform_json(mask.transform)}, {"nodata", 255}};
    c.arrays.push_back(RasterArray::from_grid("mask", mask.values));
    write_container(path, c);
}

// ---------------------------------------------------------------------------

CatalogQuery CatalogQuery::season(int year) {
    using namespace std::chrono;
    CatalogQuery q;
    q.start = Date{std::chrono::year{year}, April, day{1}};
    q.end = Date{std::chrono::year{year}, September, day{1}};
    q.max_cloud_pct = 1.0;
    return q;
}

void CatalogQuery::validate() const {
    if (!start.ok() || !end.ok() || end < start) {
        throw ArgumentError("catalog date range must satisfy start <= end");
    }
    if (!(max_cloud_pct >= 0.0 && max_cloud_pct <= 100.0)) {
        throw ArgumentError("max_cloud_pct must lie in [0, 100]");
    }
}

DirectorySceneStore::DirectorySceneStore(std::filesystem::path root) : root_(std::move(root)) {}

std::vector<SceneRef> DirectorySceneStore::list() const {
    std::error_code ec;
    if (!std::filesystem::is_directory(root_, ec)) {
        throw IoError("scene store is not a readable directory: " + root_.string());
    }
    std::vector<std::filesystem::path> sidecars;
    for (const auto& entry : std::filesystem::directory_iterator(root_, ec)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > 10 && name.ends_with(".meta.json")) {
            sidecars.push_back(entry.path());
        }
    }
    if (ec) {
        throw IoError("cannot list scene store " + root_.string() + ": " + ec.message());
    }
    std::sort(sidecars.begin(), sidecars.end());

    std::vector<SceneRef> refs;
    for (const auto& p : sidecars) {
        std::ifstream in(p);
        if (!in) {
            throw IoError("cannot read sidecar " + p.string());
        }
        std::string line;
        std::getline(in, line);
        try {
            const json j = json::parse(line);
            SceneRef r;
            r.id = j.at("id").get<std::string>();
            r.date = parse_date(j.at("date").get<std::string>());
            r.cloud_pct = j.at("cloud_pct").get<double>();
            const auto bb = j.at("bbox").get<std::vector<double>>();
            if (bb.size() != 4) {
                throw MetadataError("bbox must hold 4 numbers");
            }
            r.bbox = BBox{bb[0], bb[1], bb[2], bb[3]};
            r.crs = j.value("crs", std::string{});
            r.path = root_ / j.value("file", r.id + ".msr");
            refs.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw MetadataError("malformed sidecar " + p.string() + ": " + e.what());
        } catch (const ArgumentError& e) {
            throw MetadataError("malformed sidecar " + p.string() + ": " + e.what());
        }
    }
    return refs;
}

SceneRaster DirectorySceneStore::load(const SceneRef& ref) const {
    SceneRaster s = load_scene(ref.path);
    s.id = ref.id;
    s.acquisition_date = ref.date;
    s.cloud_cover_pct = ref.cloud_pct;
    return s;
}

SceneRef DirectorySceneStore::add(const std::filesystem::path& root, const SceneRaster& scene) {
    std::filesystem::create_directories(root);
    SceneRef r;
    r.id = scene.id;
    r.path = root / (scene.id + ".msr");
    r.date = scene.acquisition_date;
    r.cloud_pct = scene.cloud_cover_pct;
    r.bbox = scene.bbox();
    r.crs = scene.crs;
    write_scene(r.path, scene);
    const json j = {{"id", r.id},
                    {"date", format_date(r.date)},
                    {"cloud_pct", r.cloud_pct},
                    {"bbox", {r.bbox.min_x, r.bbox.min_y, r.bbox.max_x, r.bbox.max_y}},
                    {"crs", r.crs},
                    {"file", r.path.filename().string()}};
    std::ofstream out(root / (scene.id + ".meta.json"), std::ios::trunc);
    out << j.dump() << '\n';
    if (!out) {
        throw IoError("cannot write sidecar for " + scene.id);
    }
    return r;
}

std::vector<SceneRef> query_catalog(const SceneStore& store, const CatalogQuery& q) {
    q.validate();
    std::vector<SceneRef> out;
    for (auto& r : store.list()) {
        if (r.date < q.start || r.date > q.end) continue;
        if (r.cloud_pct > q.max_cloud_pct) continue;
        if (q.region && !q.region->intersects(r.bbox)) continue;
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(), [](const SceneRef& a, const SceneRef& b) {
        if (a.date != b.date) return a.date < b.date;
        return a.id < b.id;
    });
    return out;
}

// ---------------------------------------------------------------------------

SceneRaster merge_scenes(std::span<const SceneRaster> scenes) {
    if (scenes.empty()) {
        throw ArgumentError("merge_scenes needs at least one scene");
    }
    for (const auto& s : scenes) {
        if (s.crs != scenes.front().crs) {
            throw PreconditionError("cannot merge scenes in different CRS (" + scenes.front().crs + " vs " +
                                    s.crs + ")");
        }
    }
    double min_x = std::numeric_limits<double>::infinity();
    double max_y = -min_x;
    double max_x = -min_x;
    double min_y = min_x;
    std::set<std::string> band_ids;
    for (const auto& s : scenes) {
        const BBox b = s.bbox();
        min_x = std::min(min_x, b.min_x);
        min_y = std::min(min_y, b.min_y);
        max_x = std::max(max_x, b.max_x);
        max_y = std::max(max_y, b.max_y);
        for (const auto& [bid, band] : s.bands) {
            band_ids.insert(bid);
        }
    }

    SceneRaster out;
    out.crs = scenes.front().crs;
    out.nodata = scenes.front().nodata;
    out.acquisition_date = scenes.front().acquisition_date;
    out.transform = Affine::north_up(min_x, max_y, kBaseResolution);
    out.id = scenes.size() == 1 ? scenes.front().id : "merged";
    for (const auto& s : scenes) {
        out.cloud_cover_pct = std::max(out.cloud_cover_pct, s.cloud_cover_pct);
        if (scenes.size() > 1) {
            out.id += "+" + s.id;
        }
    }

    for (const auto& bid : band_ids) {
        const double ps = band_resolution(bid);
        const std::size_t rows = whole((max_y - min_y) / ps, "merged " + bid + " height");
        const std::size_t cols = whole((max_x - min_x) / ps, "merged " + bid + " width");
        Band merged;
        merged.pixel_size = ps;
        merged.values = Grid<float>(rows, cols, 0.0f);
        merged.valid = Grid<std::uint8_t>(rows, cols, 0);
        for (const auto& s : scenes) {
            const auto it = s.bands.find(bid);
            if (it == s.bands.end()) {
                continue;
            }
            const Band& src = it->second;
            const std::size_t r0 = whole((max_y - s.transform.origin_y()) / ps, s.id + " row offset for " + bid);
            const std::size_t c0 = whole((s.transform.origin_x() - min_x) / ps, s.id + " column offset for " + bid);
            for (std::size_t r = 0; r < src.values.rows(); ++r) {
                for (std::size_t c = 0; c < src.values.cols(); ++c) {
                    if (src.valid(r, c) && !merged.valid(r0 + r, c0 + c)) {
                        merged.values(r0 + r, c0 + c) = src.values(r, c);
                        merged.valid(r0 + r, c0 + c) = 1;
                    }
                }
            }
        }
        out.bands.emplace(bid, std::move(merged));
    }
    return out;
}

}  // namespace mineseg

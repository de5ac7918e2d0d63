#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mineseg/catalog.hpp"
#include "mineseg/errors.hpp"

namespace mineseg {
namespace {

using nlohmann::json;

// Even-odd crossing test for one ring; a closing vertex equal to the first
// is harmless (it contributes a zero-length edge).
bool crosses_odd(const Ring& ring, double x, double y) {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if ((a.y > y) != (b.y > y)) {
            const double xc = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (x < xc) {
                inside = !inside;
            }
        }
    }
    return inside;
}

bool inside_polygon(const Polygon& p, double x, double y) {
    bool inside = false;
    for (const auto& ring : p.rings) {
        if (crosses_odd(ring, x, y)) {
            inside = !inside;
        }
    }
    return inside;
}

Ring parse_ring(const json& j) {
    Ring r;
    for (const auto& pt : j) {
        if (!pt.is_array() || pt.size() < 2) {
            throw GeometryError("ring coordinates must be [x, y] pairs");
        }
        r.push_back(Point{pt[0].get<double>(), pt[1].get<double>()});
    }
    return r;
}

Polygon parse_polygon(const json& coords) {
    Polygon p;
    for (const auto& ring : coords) {
        p.rings.push_back(parse_ring(ring));
    }
    return p;
}

std::size_t distinct_vertices(const Ring& r) {
    std::size_t n = r.size();
    if (n > 1 && r.front().x == r.back().x && r.front().y == r.back().y) {
        --n;
    }
    return n;
}

}  // namespace

MaskRaster rasterize_mask(std::span<const Polygon> polygons, const GridSpec& target) {
    target.transform.validate();
    if (std::abs(target.transform.pixel_width() - MaskRaster::kResolution) > 1e-9 ||
        std::abs(-target.transform.pixel_height() - MaskRaster::kResolution) > 1e-9) {
        throw ArgumentError("mask grid must have 10 m pixels");
    }
    for (const auto& p : polygons) {
        if (p.rings.empty()) {
            throw GeometryError("polygon without rings");
        }
        for (const auto& r : p.rings) {
            if (distinct_vertices(r) < 3) {
                throw GeometryError("degenerate ring with fewer than 3 vertices");
            }
        }
    }

    MaskRaster m;
    m.transform = target.transform;
    m.crs = target.crs;
    m.values = Grid<std::uint8_t>(target.rows, target.cols, 0);
    const Affine& t = target.transform;
    const double px = t.pixel_width();
    const double py = t.pixel_height();  // negative

    for (const auto& p : polygons) {
        double min_x = INFINITY, max_x = -INFINITY, min_y = INFINITY, max_y = -INFINITY;
        for (const auto& pt : p.rings.front()) {
            min_x = std::min(min_x, pt.x);
            max_x = std::max(max_x, pt.x);
            min_y = std::min(min_y, pt.y);
            max_y = std::max(max_y, pt.y);
        }
        // Pixel index range whose centers can fall inside the outer ring.
        const auto clamp_idx = [](double v, std::size_t n) {
            return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n)));
        };
        const std::size_t c_lo = clamp_idx(std::floor((min_x - t.origin_x()) / px - 0.5), target.cols);
        const std::size_t c_hi = clamp_idx(std::ceil((max_x - t.origin_x()) / px + 0.5), target.cols);
        const std::size_t r_lo = clamp_idx(std::floor((max_y - t.origin_y()) / py - 0.5), target.rows);
        const std::size_t r_hi = clamp_idx(std::ceil((min_y - t.origin_y()) / py + 0.5), target.rows);
        for (std::size_t r = r_lo; r < r_hi; ++r) {
            const double y = t.origin_y() + (static_cast<double>(r) + 0.5) * py;
            for (std::size_t c = c_lo; c < c_hi; ++c) {
                if (m.values(r, c)) {
                    continue;
                }
                const double x = t.origin_x() + (static_cast<double>(c) + 0.5) * px;
                if (inside_polygon(p, x, y)) {
                    m.values(r, c) = 1;
                }
            }
        }
    }
    return m;
}

std::vector<Polygon> load_polygons_geojson(const std::filesystem::path& path, const std::string& expected_crs) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open ground truth " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("corrupt GeoJSON " + path.string() + ": " + e.what());
    }
    if (doc.contains("crs")) {
        const auto& crs = doc["crs"];
        const std::string declared = crs.is_string() ? crs.get<std::string>()
                                                     : crs.at("properties").at("name").get<std::string>();
        if (declared != expected_crs) {
            throw PreconditionError("ground truth CRS " + declared + " differs from scene CRS " + expected_crs +
                                    "; reproject before rasterizing");
        }
    }
    std::vector<Polygon> out;
    const auto add_geometry = [&](const json& g) {
        if (g.is_null()) {
            return;
        }
        const std::string type = g.at("type").get<std::string>();
        if (type == "Polygon") {
            out.push_back(parse_polygon(g.at("coordinates")));
        } else if (type == "MultiPolygon") {
            for (const auto& poly : g.at("coordinates")) {
                out.push_back(parse_polygon(poly));
            }
        }
    };
    try {
        const std::string type = doc.at("type").get<std::string>();
        if (type == "FeatureCollection") {
            for (const auto& f : doc.at("features")) {
                add_geometry(f.at("geometry"));
            }
        } else if (type == "Feature") {
            add_geometry(doc.at("geometry"));
        } else {
            add_geometry(doc);
        }
    } catch (const json::exception& e) {
        throw GeometryError("malformed GeoJSON geometry in " + path.string() + ": " + e.what());
    }
    return out;
}

void write_polygons_geojson(const std::filesystem::path& path, std::span<const Polygon> polygons,
                            const std::string& crs) {
    json features = json::array();
    for (const auto& p : polygons) {
        json rings = json::array();
        for (const auto& r : p.rings) {
            json ring = json::array();
            for (const auto& pt : r) {
                ring.push_back({pt.x, pt.y});
            }
            rings.push_back(std::move(ring));
        }
        features.push_back({{"type", "Feature"},
                            {"properties", json::object()},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", std::move(rings)}}}});
    }
    const json doc = {{"type", "FeatureCollection"},
                      {"crs", {{"type", "name"}, {"properties", {{"name", crs}}}}},
                      {"features", std::move(features)}};
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    out << doc.dump(1) << '\n';
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

}  // namespace mineseg

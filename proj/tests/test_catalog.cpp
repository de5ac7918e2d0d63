#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mineseg/catalog.hpp"
#include "mineseg/errors.hpp"
#include "mineseg/raster_io.hpp"
#include "support.hpp"

using namespace mineseg;
using testsupport::constant_scene;
using testsupport::TempDir;

namespace {

SceneRef ref_with(const std::string& id, const std::string& date, double cloud) {
    return SceneRef{id, {}, parse_date(date), cloud, BBox{0, 0, 10, 10}, "EPSG:32610"};
}

class FakeStore final : public SceneStore {
public:
    std::vector<SceneRef> refs;
    std::vector<SceneRef> list() const override { return refs; }
    SceneRaster load(const SceneRef&) const override { throw IoError("not used"); }
};

// Pixel-center even-odd test, written independently of the library.
bool center_inside(const Ring& ring, double x, double y) {
    int crossings = 0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const Point a = ring[i];
        const Point b = ring[i + 1];
        if ((a.y <= y && b.y > y) || (b.y <= y && a.y > y)) {
            const double t = (y - a.y) / (b.y - a.y);
            if (x < a.x + t * (b.x - a.x)) {
                ++crossings;
            }
        }
    }
    return crossings % 2 == 1;
}

// Scalar Catmull-Rom upsampler evaluated pixel by pixel.
double scalar_bicubic(const Grid<float>& g, int factor, std::size_t orow, std::size_t ocol) {
    const auto kernel = [](double t) {
        t = std::abs(t);
        if (t <= 1) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
        if (t < 2) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
        return 0.0;
    };
    const double sy = (static_cast<double>(orow) + 0.5) / factor - 0.5;
    const double sx = (static_cast<double>(ocol) + 0.5) / factor - 0.5;
    const auto clamp_idx = [](long v, std::size_t n) {
        return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
    };
    double acc = 0.0;
    for (long dy = -1; dy <= 2; ++dy) {
        const long iy = static_cast<long>(std::floor(sy)) + dy;
        const double wy = kernel(sy - static_cast<double>(iy));
        for (long dx = -1; dx <= 2; ++dx) {
            const long ix = static_cast<long>(std::floor(sx)) + dx;
            const double wx = kernel(sx - static_cast<double>(ix));
            acc += wy * wx * g(clamp_idx(iy, g.rows()), clamp_idx(ix, g.cols()));
        }
    }
    return acc;
}

}  // namespace

TEST_CASE("band selection keeps twelve bands and drops cirrus") {
    CHECK(kChannels == 12);
    CHECK(canonical_band("B1").value() == "B01");
    CHECK(canonical_band("b8a").value() == "B8A");
    CHECK_FALSE(canonical_band("B10").has_value());
    CHECK_THROWS_AS((void)canonical_band("B13"), SchemaError);
    CHECK(band_resolution("B11") == 20);
    CHECK(band_resolution("B09") == 60);
}

TEST_CASE("load_scene round trip, cirrus removal and metadata errors") {
    TempDir dir("scene");
    SceneRaster s = constant_scene("S1", 12, 12, 0.25f);
    s.bands.at("B04").valid(0, 0) = 0;
    write_scene(dir / "s.msr", s);

    const SceneRaster back = load_scene(dir / "s.msr");
    CHECK(back.bands.size() == 12);
    CHECK(back.bands.at("B04").valid(0, 0) == 0);
    CHECK(back.bands.at("B04").values(1, 1) == doctest::Approx(0.25));
    CHECK(back.transform == s.transform);

    // 13-band file: add a cirrus band and check it is ignored.
    RasterContainer c = read_container(dir / "s.msr");
    auto cirrus = RasterArray::from_grid("B10", Grid<float>(2, 2, 1.0f));
    cirrus.attrs = {{"pixel_size", 60.0}};
    c.arrays.push_back(cirrus);
    write_container(dir / "s13.msr", c);
    CHECK(load_scene(dir / "s13.msr").bands.size() == 12);

    c.header.erase("crs");
    write_container(dir / "nocrs.msr", c);
    CHECK_THROWS_AS((void)load_scene(dir / "nocrs.msr"), MetadataError);

    RasterContainer bad = read_container(dir / "s.msr");
    bad.arrays.push_back(RasterArray::from_grid("B99", Grid<float>(2, 2, 1.0f)));
    write_container(dir / "bad.msr", bad);
    CHECK_THROWS_AS((void)load_scene(dir / "bad.msr"), SchemaError);

    CHECK_THROWS_AS((void)load_scene(dir / "missing.msr"), IoError);
    std::ofstream(dir / "corrupt.msr") << "not a raster";
    CHECK_THROWS_AS((void)load_scene(dir / "corrupt.msr"), IoError);
}

TEST_CASE("query_catalog filters on cloud, date and region and orders deterministically") {
    FakeStore store;
    store.refs = {ref_with("c", "2021-06-01", 0.5), ref_with("b", "2021-05-01", 2.0), ref_with("a", "2021-06-01", 0.2)};
    const CatalogQuery q = CatalogQuery::season(2021);
    const auto hits = query_catalog(store, q);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].id == "a");  // same date: id order
    CHECK(hits[1].id == "c");

    FakeStore empty;
    CHECK(query_catalog(empty, q).empty());

    store.refs.push_back(ref_with("late", "2021-09-02", 0.1));
    store.refs.push_back(ref_with("edge", "2021-09-01", 1.0));
    const auto hits2 = query_catalog(store, q);
    CHECK(hits2.size() == 3);
    CHECK(hits2.back().id == "edge");

    CatalogQuery far = q;
    far.region = BBox{100, 100, 200, 200};
    CHECK(query_catalog(store, far).empty());
}

TEST_CASE("directory store reads sidecars") {
    TempDir dir("store");
    SceneRaster a = constant_scene("A", 6, 6, 1.0f);
    a.cloud_cover_pct = 0.5;
    SceneRaster b = constant_scene("B", 6, 6, 2.0f);
    b.cloud_cover_pct = 3.0;
    DirectorySceneStore::add(dir.path(), a);
    DirectorySceneStore::add(dir.path(), b);
    const DirectorySceneStore store(dir.path());
    const auto hits = query_catalog(store, CatalogQuery::season(2021));
    REQUIRE(hits.size() == 1);
    CHECK(store.load(hits[0]).bands.at("B02").values(0, 0) == 1.0f);
}

TEST_CASE("merge_scenes paints first valid scene on top") {
    const std::vector<std::string> b02{"B02"};
    SUBCASE("1x3 worked example") {
        const SceneRaster a = constant_scene("A", 1, 2, 5.0f, 0, 0, b02);
        const SceneRaster b = constant_scene("B", 1, 2, 9.0f, 1, 0, b02);
        const std::vector<SceneRaster> ab{a, b};
        const SceneRaster m = merge_scenes(ab);
        const auto& g = m.bands.at("B02").values;
        REQUIRE(g.cols() == 3);
        CHECK(g(0, 0) == 5.0f);
        CHECK(g(0, 1) == 5.0f);
        CHECK(g(0, 2) == 9.0f);

        SceneRaster a_hole = a;
        a_hole.bands.at("B02").valid(0, 1) = 0;
        const std::vector<SceneRaster> ab2{a_hole, b};
        CHECK(merge_scenes(ab2).bands.at("B02").values(0, 1) == 9.0f);
    }
    SUBCASE("identity and union of valid pixels") {
        const SceneRaster a = constant_scene("A", 6, 12, 3.0f);
        const std::vector<SceneRaster> one{a};
        const SceneRaster m = merge_scenes(one);
        for (const auto& [bid, band] : a.bands) {
            CHECK(m.bands.at(bid).values == band.values);
            CHECK(m.bands.at(bid).valid == band.valid);
        }
    }
    SUBCASE("mixed CRS and empty input") {
        SceneRaster a = constant_scene("A", 6, 6, 1.0f);
        SceneRaster b = constant_scene("B", 6, 6, 1.0f);
        b.crs = "EPSG:32611";
        const std::vector<SceneRaster> ab{a, b};
        CHECK_THROWS_AS((void)merge_scenes(ab), PreconditionError);
        CHECK_THROWS_AS((void)merge_scenes(std::span<const SceneRaster>{}), ArgumentError);
    }
    SUBCASE("three-scene overlap against a painting oracle") {
        Rng rng(11);
        std::vector<SceneRaster> scenes;
        const std::array<std::size_t, 3> col0{0, 6, 12};
        for (std::size_t k = 0; k < 3; ++k) {
            SceneRaster s = constant_scene("S" + std::to_string(k), 12, 18, 0.0f, col0[k], 0, {"B02"});
            auto& band = s.bands.at("B02");
            for (std::size_t i = 0; i < band.values.size(); ++i) {
                band.values.storage()[i] = static_cast<float>(k * 100 + i);
                band.valid.storage()[i] = rng.bernoulli(0.7) ? 1 : 0;
            }
            scenes.push_back(s);
        }
        const SceneRaster m = merge_scenes(scenes);
        const auto& out = m.bands.at("B02");
        REQUIRE(out.values.cols() == 30);
        for (std::size_t r = 0; r < 12; ++r) {
            for (std::size_t c = 0; c < 30; ++c) {
                bool found = false;
                float expect = 0.0f;
                for (std::size_t k = 0; k < 3 && !found; ++k) {
                    if (c >= col0[k] && c < col0[k] + 18) {
                        const auto& src = scenes[k].bands.at("B02");
                        if (src.valid(r, c - col0[k])) {
                            found = true;
                            expect = src.values(r, c - col0[k]);
                        }
                    }
                }
                CHECK(out.valid(r, c) == (found ? 1 : 0));
                if (found) {
                    CHECK(out.values(r, c) == expect);
                }
            }
        }
        // Swapping the two leading scenes changes only pixels both cover validly.
        std::vector<SceneRaster> swapped{scenes[1], scenes[0], scenes[2]};
        const SceneRaster m2 = merge_scenes(swapped);
        const auto& out2 = m2.bands.at("B02");
        for (std::size_t r = 0; r < 12; ++r) {
            for (std::size_t c = 0; c < 30; ++c) {
                const bool in0 = c < 18 && scenes[0].bands.at("B02").valid(r, c);
                const bool in1 = c >= 6 && c < 24 && scenes[1].bands.at("B02").valid(r, c - 6);
                if (!(in0 && in1)) {
                    CHECK(out2.values(r, c) == out.values(r, c));
                }
            }
        }
    }
}

TEST_CASE("rasterize_mask uses pixel centers") {
    const GridSpec grid{Affine::north_up(0.0, 40.0, 10.0), "EPSG:32610", 4, 4};
    SUBCASE("square covering a 2x2 block") {
        const Polygon sq{{{{10, 30}, {30, 30}, {30, 10}, {10, 10}, {10, 30}}}};
        const MaskRaster m = rasterize_mask(std::span<const Polygon>(&sq, 1), grid);
        std::size_t ones = 0;
        for (auto v : m.values.storage()) {
            ones += v;
        }
        CHECK(ones == 4);
        CHECK(m.values(1, 1) == 1);
        CHECK(m.values(2, 2) == 1);
    }
    SUBCASE("empty list") {
        const MaskRaster m = rasterize_mask({}, grid);
        for (auto v : m.values.storage()) {
            CHECK(v == 0);
        }
    }
    SUBCASE("triangle matches brute force point-in-polygon") {
        const Ring tri{{1, 2}, {38, 7}, {13, 39}, {1, 2}};
        const Polygon p{{tri}};
        const MaskRaster m = rasterize_mask(std::span<const Polygon>(&p, 1), grid);
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                const double x = 10.0 * (c + 0.5);
                const double y = 40.0 - 10.0 * (r + 0.5);
                CHECK(m.values(r, c) == (center_inside(tri, x, y) ? 1 : 0));
            }
        }
    }
    SUBCASE("disjoint polygons rasterize to the pixelwise OR") {
        const Polygon a{{{{0, 40}, {15, 40}, {15, 25}, {0, 25}, {0, 40}}}};
        const Polygon b{{{{22, 18}, {40, 18}, {40, 0}, {22, 0}, {22, 18}}}};
        const std::vector<Polygon> both{a, b};
        const MaskRaster ma = rasterize_mask(std::span<const Polygon>(&a, 1), grid);
        const MaskRaster mb = rasterize_mask(std::span<const Polygon>(&b, 1), grid);
        const MaskRaster mab = rasterize_mask(both, grid);
        for (std::size_t i = 0; i < 16; ++i) {
            CHECK(mab.values.storage()[i] == (ma.values.storage()[i] | mb.values.storage()[i]));
        }
    }
    SUBCASE("degenerate ring and wrong resolution") {
        const Polygon line{{{{0, 0}, {10, 10}, {0, 0}}}};
        CHECK_THROWS_AS((void)rasterize_mask(std::span<const Polygon>(&line, 1), grid), GeometryError);
        const GridSpec coarse{Affine::north_up(0.0, 40.0, 20.0), "EPSG:32610", 2, 2};
        CHECK_THROWS_AS((void)rasterize_mask({}, coarse), ArgumentError);
    }
}

TEST_CASE("GeoJSON round trip and CRS check") {
    TempDir dir("geojson");
    const std::vector<Polygon> polys{Polygon{{{{0, 0}, {10, 0}, {10, 10}, {0, 0}}}}};
    write_polygons_geojson(dir / "gt.geojson", polys, "EPSG:32610");
    const auto back = load_polygons_geojson(dir / "gt.geojson", "EPSG:32610");
    REQUIRE(back.size() == 1);
    CHECK(back[0].rings[0].size() == 4);
    CHECK_THROWS((void)load_polygons_geojson(dir / "gt.geojson", "EPSG:32611"));
}

TEST_CASE("upsample_band: constants, ramps and shapes") {
    SUBCASE("constant field stays exact") {
        const Grid<float> g(5, 7, 7.0f);
        for (int f : {2, 6}) {
            const Grid<float> up = upsample_band(g, f);
            CHECK(up.rows() == 5u * f);
            for (float v : up.storage()) {
                CHECK(v == 7.0f);
            }
        }
    }
    SUBCASE("384 -> 768 and 128 -> 768") {
        CHECK(upsample_band(Grid<float>(384, 384, 1.0f), 2).rows() == 768);
        CHECK(upsample_band(Grid<float>(128, 128, 1.0f), 6).cols() == 768);
    }
    SUBCASE("4x4 ramp matches scalar oracle") {
        Grid<float> g(4, 4);
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                g(r, c) = static_cast<float>(3.0 * r + 2.0 * c + 1.0);
            }
        }
        const Grid<float> up = upsample_band(g, 2);
        for (std::size_t r = 0; r < 8; ++r) {
            for (std::size_t c = 0; c < 8; ++c) {
                CHECK(up(r, c) == doctest::Approx(scalar_bicubic(g, 2, r, c)).epsilon(1e-6));
            }
        }
    }
    SUBCASE("linear ramps reproduced away from borders") {
        Grid<float> g(20, 20);
        for (std::size_t r = 0; r < 20; ++r) {
            for (std::size_t c = 0; c < 20; ++c) {
                g(r, c) = static_cast<float>(100.0 + 1.5 * r - 0.75 * c);
            }
        }
        for (int f : {2, 6}) {
            const Grid<float> up = upsample_band(g, f);
            for (std::size_t r = 2 * f; r < up.rows() - 2 * f; ++r) {
                for (std::size_t c = 2 * f; c < up.cols() - 2 * f; ++c) {
                    const double sy = (r + 0.5) / f - 0.5;
                    const double sx = (c + 0.5) / f - 0.5;
                    const double expect = 100.0 + 1.5 * sy - 0.75 * sx;
                    CHECK(std::abs(up(r, c) - expect) <= 1e-6 * std::abs(expect));
                }
            }
        }
    }
    SUBCASE("unsupported factor") {
        CHECK_THROWS_AS((void)upsample_band(Grid<float>(2, 2), 3), ArgumentError);
    }
}

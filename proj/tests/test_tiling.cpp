#include <doctest.h>

#include <set>

#include "mineseg/errors.hpp"
#include "mineseg/tiling.hpp"
#include "support.hpp"

using namespace mineseg;
using testsupport::constant_scene;
using testsupport::random_tile;
using testsupport::TempDir;

namespace {

MaskRaster mask_for(const SceneRaster& s, std::uint8_t value = 0) {
    const auto& b = s.bands.at("B02");
    return MaskRaster{Grid<std::uint8_t>(b.values.rows(), b.values.cols(), value), s.transform, s.crs};
}

}  // namespace

TEST_CASE("tile_scene cuts aligned 12-band samples") {
    SUBCASE("1536 square scene gives four 12x768x768 tiles") {
        SceneRaster s = constant_scene("S", 1536, 1536, 0.0f);
        std::size_t k = 0;
        for (auto& [bid, band] : s.bands) {
            band.values = Grid<float>(band.values.rows(), band.values.cols(), static_cast<float>(++k));
        }
        MaskRaster m = mask_for(s);
        m.values(800, 10) = 1;
        const auto tiles = tile_scene(s, m, Period::train);
        REQUIRE(tiles.size() == 4);
        for (const auto& t : tiles) {
            CHECK(t.height == 768);
            CHECK(t.width == 768);
            CHECK(t.pixels.size() == 12u * 768 * 768);
            CHECK_NOTHROW(t.validate());
        }
        CHECK(tiles[2].provenance.row == 768);
        CHECK(tiles[2].provenance.col == 0);
        CHECK(tiles[2].mask(32, 10) == 1);
        CHECK(tiles[2].positive_pixels() == 1);
        // Constant native bands stay exact after x2 and x6 upsampling.
        for (std::size_t ch = 0; ch < kChannels; ++ch) {
            const float expect = s.bands.at(std::string(kBands[ch].id)).values(0, 0);
            CHECK(tiles[3].at(ch, 767, 767) == expect);
            CHECK(tiles[1].at(ch, 0, 400) == expect);
        }
    }
    SUBCASE("scene smaller than one tile") {
        const SceneRaster s = constant_scene("S", 600, 600, 1.0f);
        CHECK(tile_scene(s, mask_for(s), Period::train).empty());
    }
    SUBCASE("nodata drops the touched tile only") {
        SceneRaster s = constant_scene("S", 1536, 768, 1.0f);
        s.bands.at("B09").valid(130, 3) = 0;  // 60 m pixel inside the second tile
        const auto tiles = tile_scene(s, mask_for(s), Period::compare);
        REQUIRE(tiles.size() == 1);
        CHECK(tiles[0].provenance.row == 0);
        CHECK(tiles[0].provenance.period == Period::compare);

        MaskRaster m = mask_for(s);
        m.values(10, 10) = MaskRaster::kNoData;
        std::size_t kept = 0;
        const std::size_t dropped =
            for_each_tile(constant_scene("S", 1536, 768, 1.0f), m, Period::train, 768, [&](TileSample&&) { ++kept; });
        CHECK(kept == 1);
        CHECK(dropped == 1);
    }
    SUBCASE("misaligned mask") {
        const SceneRaster s = constant_scene("S", 768, 768, 1.0f);
        MaskRaster m = mask_for(s);
        m.crs = "EPSG:32611";
        CHECK_THROWS_AS((void)tile_scene(s, m, Period::train), AlignmentError);
        MaskRaster shifted = mask_for(s);
        shifted.transform = Affine::north_up(500010.0, 6000000.0, 10.0);
        CHECK_THROWS_AS((void)tile_scene(s, shifted, Period::train), AlignmentError);
        CHECK_THROWS_AS((void)tile_scene(s, mask_for(s), Period::train, 100), ArgumentError);
    }
}

TEST_CASE("plan_windows examples") {
    const WindowPlan p = plan_windows(768, 768, 512, 512, 256);
    const std::vector<std::pair<std::size_t, std::size_t>> want{{0, 0}, {0, 256}, {256, 0}, {256, 256}};
    CHECK(p.origins == want);
    CHECK(p.stride_h == 256);

    const WindowPlan single = plan_windows(512, 512, 512, 512, 0);
    REQUIRE(single.origins.size() == 1);
    CHECK(single.origins[0] == std::pair<std::size_t, std::size_t>{0, 0});

    const WindowPlan clamped = plan_windows(700, 512, 512, 512, 256);
    std::set<std::size_t> rows;
    for (const auto& o : clamped.origins) {
        rows.insert(o.first);
    }
    CHECK(rows == std::set<std::size_t>{0, 188});

    CHECK_THROWS_AS((void)plan_windows(400, 768, 512, 512, 256), ArgumentError);
    CHECK_THROWS_AS((void)plan_windows(768, 768, 512, 512, 512), ArgumentError);
}

TEST_CASE("plan_windows covers every pixel") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t wh = 1 + rng.below(40);
        const std::size_t ww = 1 + rng.below(40);
        const std::size_t h = wh + rng.below(90);
        const std::size_t w = ww + rng.below(90);
        const std::size_t overlap = rng.below(std::min(wh, ww));
        const WindowPlan p = plan_windows(h, w, wh, ww, overlap);
        Grid<int> count(h, w, 0);
        for (const auto& [r0, c0] : p.origins) {
            REQUIRE(r0 + wh <= h);
            REQUIRE(c0 + ww <= w);
            for (std::size_t r = r0; r < r0 + wh; ++r) {
                for (std::size_t c = c0; c < c0 + ww; ++c) {
                    ++count(r, c);
                }
            }
        }
        for (int v : count.storage()) {
            REQUIRE(v >= 1);
        }
    }
}

TEST_CASE("stitch examples") {
    SUBCASE("non-overlapping mosaic") {
        std::vector<WindowPrediction> w{{0, 0, Grid<float>(2, 2, 0.1f)}, {0, 2, Grid<float>(2, 2, 0.9f)}};
        const Grid<float> out = stitch(w, 2, 4);
        CHECK(out(1, 1) == 0.1f);
        CHECK(out(1, 2) == 0.9f);
    }
    SUBCASE("overlap strip is the mean") {
        std::vector<WindowPrediction> w{{0, 0, Grid<float>(1, 3, 0.2f)}, {0, 2, Grid<float>(1, 3, 0.6f)}};
        const Grid<float> out = stitch(w, 1, 5);
        CHECK(out(0, 1) == doctest::Approx(0.2));
        CHECK(out(0, 2) == doctest::Approx(0.4));
        CHECK(out(0, 4) == doctest::Approx(0.6));
    }
    SUBCASE("four-window constant plan against direct accumulation") {
        const WindowPlan p = plan_windows(768, 768, 512, 512, 256);
        std::vector<WindowPrediction> w;
        for (const auto& [r, c] : p.origins) {
            w.push_back({r, c, Grid<float>(512, 512, 0.37f)});
        }
        const Grid<float> out = stitch(w, 768, 768);
        for (float v : out.storage()) {
            REQUIRE(v == 0.37f);
        }
    }
    SUBCASE("uncovered pixel") {
        std::vector<WindowPrediction> w{{0, 0, Grid<float>(2, 2, 0.5f)}};
        CHECK_THROWS_AS((void)stitch(w, 2, 3), CoverageError);
    }
}

TEST_CASE("stitch of split_by_plan is bit exact") {
    Rng rng(9);
    for (std::size_t overlap : {0u, 17u, 256u}) {
        Grid<float> img(768, 700);
        for (auto& v : img.storage()) {
            v = static_cast<float>(rng.uniform());
        }
        const WindowPlan p = plan_windows(768, 700, 512, 512, overlap);
        const auto windows = split_by_plan(img, p);
        CHECK(stitch(windows, 768, 700) == img);
    }
}

TEST_CASE("tile store round trip") {
    TempDir dir("tiles");
    TileStoreWriter writer(dir.path());
    TileSample a = random_tile(12, 12, 1, "a");
    a.provenance.transform = Affine::north_up(500000.0, 6000000.0, 10.0);
    TileSample b = random_tile(12, 12, 2, "b");
    b.provenance.period = Period::compare;
    writer.add(a);
    writer.add(b);
    writer.finish();

    const DirectoryTileStore store(dir.path());
    CHECK(store.ids() == std::vector<std::string>{"a", "b"});
    const TileSample back = store.load("a");
    CHECK(back.pixels == a.pixels);
    CHECK(back.mask == a.mask);
    CHECK(back.provenance.transform == a.provenance.transform);
    CHECK(store.manifest()[0].positive_px == a.positive_pixels());
    CHECK(store.manifest()[1].period == Period::compare);
    CHECK_THROWS_AS((void)store.load("zzz"), IoError);
}

TEST_CASE("TileSample validation") {
    TileSample t(4, 4);
    t.mask(0, 0) = 3;
    CHECK_THROWS_AS(t.validate(), SchemaError);
    TileSample u(4, 4);
    u.pixels.pop_back();
    CHECK_THROWS_AS(u.validate(), ShapeError);
}

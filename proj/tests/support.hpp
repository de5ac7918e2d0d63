#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "mineseg/catalog.hpp"
#include "mineseg/rng.hpp"
#include "mineseg/tiling.hpp"

namespace testsupport {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("mineseg-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

/// Scene with the given bands at their native resolution, every pixel `value`,
/// covering rows x cols 10 m pixels with its top-left corner at
/// (x0 + col0*10, y0 - row0*10).
inline mineseg::SceneRaster constant_scene(const std::string& id, std::size_t rows, std::size_t cols, float value,
                                           std::size_t col0 = 0, std::size_t row0 = 0,
                                           const std::vector<std::string>& band_ids = {}) {
    using namespace mineseg;
    SceneRaster s;
    s.id = id;
    s.crs = "EPSG:32610";
    s.transform = Affine::north_up(500000.0 + 10.0 * static_cast<double>(col0),
                                   6000000.0 - 10.0 * static_cast<double>(row0), 10.0);
    s.acquisition_date = parse_date("2021-06-01");
    std::vector<std::string> ids = band_ids;
    if (ids.empty()) {
        for (const auto& b : kBands) {
            ids.emplace_back(b.id);
        }
    }
    for (const auto& bid : ids) {
        const int res = band_resolution(bid);
        const std::size_t f = static_cast<std::size_t>(res / 10);
        Band band;
        band.pixel_size = res;
        band.values = Grid<float>(rows / f, cols / f, value);
        band.valid = Grid<std::uint8_t>(rows / f, cols / f, 1);
        s.bands.emplace(bid, std::move(band));
    }
    return s;
}

/// Random tile of the given size with a random binary mask.
inline mineseg::TileSample random_tile(std::size_t h, std::size_t w, std::uint64_t seed, const std::string& id) {
    mineseg::TileSample t(h, w);
    mineseg::Rng rng(seed);
    for (auto& v : t.pixels) {
        v = static_cast<float>(1000.0 + 300.0 * rng.normal());
    }
    for (auto& m : t.mask.storage()) {
        m = rng.bernoulli(0.3) ? 1 : 0;
    }
    t.provenance.tile_id = id;
    t.provenance.scene_id = "scene";
    t.provenance.crs = "EPSG:32610";
    return t;
}

}  // namespace testsupport

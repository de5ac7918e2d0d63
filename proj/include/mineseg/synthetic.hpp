#pragma once

// Synthetic stand-in for the Sentinel-2 mining dataset: correlated-noise
// background bands with geometric "disturbed ground" regions that carry a
// distinct spectral signature. Fully determined by the seed.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mineseg/catalog.hpp"
#include "mineseg/tiling.hpp"

namespace mineseg {

/// `n` tiles of size x size on the 10 m grid, each holding 1 to 3 positive
/// shapes. Ids are "synth-<index>".
[[nodiscard]] std::vector<TileSample> synthesize_tiles(std::size_t n, std::size_t size, std::uint64_t seed);

struct SyntheticLayout {
    std::filesystem::path scene_root;    // DirectorySceneStore
    std::filesystem::path ground_truth;  // GeoJSON polygons
    std::size_t tile_rows = 0;
    std::size_t tile_cols = 0;
    int train_year = 2021;
    int compare_year = 2022;
    std::string crs;
};

/// Writes a scene store under `root/scenes` whose training-season query
/// yields exactly `tiles` tiles of `tile_size` after merging, plus the ground
/// truth at `root/ground_truth.geojson`. The store holds two overlapping
/// in-season scenes (the earlier one has a nodata hole inside the overlap), a
/// 5 % cloud scene the query must reject, and one scene of the following year
/// in which every region has grown.
SyntheticLayout write_synthetic_scenes(const std::filesystem::path& root, std::size_t tiles, std::size_t tile_size,
                                       std::uint64_t seed);

}  // namespace mineseg

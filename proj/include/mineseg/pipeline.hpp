#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mineseg/catalog.hpp"
#include "mineseg/tiling.hpp"

namespace mineseg {

struct PrepareSummary {
    std::vector<std::string> scenes_used;  // query order
    std::size_t crs_groups = 0;
    std::size_t tiles_written = 0;
    std::size_t tiles_dropped = 0;  // touched nodata
};

/// Query -> merge per CRS group (earliest acquisition wins) -> rasterize the
/// ground truth onto each merged grid -> tile into `writer`. A missing
/// ground-truth path yields all-zero masks. Throws PreconditionError when the
/// query matches no scene.
PrepareSummary prepare_period(const SceneStore& store, const CatalogQuery& query,
                              const std::filesystem::path& ground_truth, Period period, std::size_t tile_size,
                              TileStoreWriter& writer);

}  // namespace mineseg

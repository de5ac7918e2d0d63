#include "mineseg/pipeline.hpp"

#include <map>

#include "mineseg/errors.hpp"

namespace mineseg {

PrepareSummary prepare_period(const SceneStore& store, const CatalogQuery& query,
                              const std::filesystem::path& ground_truth, Period period, std::size_t tile_size,
                              TileStoreWriter& writer) {
    const auto refs = query_catalog(store, query);
    if (refs.empty()) {
        throw PreconditionError("no scene matches the catalog query for period " +
                                std::string(period_name(period)));
    }
    PrepareSummary summary;
    std::map<std::string, std::vector<SceneRef>> groups;
    for (const auto& r : refs) {
        summary.scenes_used.push_back(r.id);
        groups[r.crs].push_back(r);
    }
    summary.crs_groups = groups.size();
    for (const auto& [crs, group] : groups) {
        std::vector<SceneRaster> scenes;
        scenes.reserve(group.size());
        for (const auto& r : group) {
            scenes.push_back(store.load(r));
        }
        const SceneRaster merged = merge_scenes(scenes);
        scenes.clear();
        const GridSpec grid{merged.transform, merged.crs, merged.rows(), merged.cols()};
        std::vector<Polygon> polygons;
        if (!ground_truth.empty()) {
            polygons = load_polygons_geojson(ground_truth, crs);
        }
        const MaskRaster mask = rasterize_mask(polygons, grid);
        summary.tiles_dropped += for_each_tile(merged, mask, period, tile_size, [&](TileSample&& t) {
            writer.add(t);
            ++summary.tiles_written;
        });
    }
    return summary;
}

}  // namespace mineseg

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mineseg/catalog.hpp"
#include "mineseg/dataset.hpp"
#include "mineseg/inference.hpp"
#include "mineseg/losses.hpp"
#include "mineseg/model.hpp"
#include "mineseg/training.hpp"

namespace mineseg {

struct RunPaths {
    std::filesystem::path scene_root = "scenes";
    std::filesystem::path ground_truth = "ground_truth.geojson";
    std::filesystem::path tile_store = "tiles";                 // training period
    std::filesystem::path compare_tile_store = "tiles_compare";  // comparison period
    std::filesystem::path split_dir = "splits";
    std::filesystem::path band_stats = "band_stats.json";
    std::filesystem::path output_dir = "run";
};

/// Everything a subcommand may need, parsed from one JSON file. Relative paths
/// resolve against the directory of the configuration file.
struct RunConfig {
    RunPaths paths;
    CatalogQuery train_query = CatalogQuery::season(2021);
    CatalogQuery compare_query = CatalogQuery::season(2022);
    std::size_t tile_size = kTileSize;
    SplitSpec split;
    AugmentConfig augment;
    ModelConfig model;
    LossConfig loss;
    TrainConfig train;
    InferenceConfig inference;

    /// Unknown sections or keys are errors. Throws ConfigError with the path
    /// of the offending field.
    [[nodiscard]] static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    [[nodiscard]] nlohmann::json to_json() const;
    void validate() const;
};

/// Reads the file (IoError when missing), applies `overrides` ("a.b=value",
/// value parsed as JSON when possible, else taken as a string), then parses.
[[nodiscard]] RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                                        const std::vector<std::string>& overrides);

/// Sets a dotted key in a JSON object, creating intermediate objects.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace mineseg

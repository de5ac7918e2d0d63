#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mineseg/grid.hpp"

namespace mineseg {

// On-disk raster container shared by scenes, masks and tiles:
//
//   bytes 0..7   magic "MSGRST01"
//   bytes 8..15  header length N (uint64, little-endian)
//   N bytes      UTF-8 JSON header; header["arrays"] lists every array with
//                name, rows, cols, dtype and byte offset into the payload
//   payload      arrays back to back, little-endian
//
// Everything else in the header (CRS, transform, provenance...) is owned by
// the caller.

enum class DType { uint8, uint16, float32 };

[[nodiscard]] std::size_t dtype_size(DType t) noexcept;
[[nodiscard]] const char* dtype_name(DType t) noexcept;
[[nodiscard]] DType parse_dtype(const std::string& name);

struct RasterArray {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    DType dtype = DType::float32;
    nlohmann::json attrs = nlohmann::json::object();
    std::vector<std::uint8_t> raw;  // little-endian element bytes

    [[nodiscard]] static RasterArray from_grid(std::string name, const Grid<float>& g);
    [[nodiscard]] static RasterArray from_grid(std::string name, const Grid<std::uint8_t>& g);

    /// Element values widened to float (uint8/uint16 converted exactly).
    [[nodiscard]] Grid<float> to_float() const;
    [[nodiscard]] Grid<std::uint8_t> to_u8() const;
};

struct RasterContainer {
    nlohmann::json header = nlohmann::json::object();
    std::vector<RasterArray> arrays;

    [[nodiscard]] const RasterArray* find(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const RasterContainer& container);

/// Throws IoError on missing, truncated or corrupt files.
[[nodiscard]] RasterContainer read_container(const std::filesystem::path& path);

/// Reads only the JSON header.
[[nodiscard]] nlohmann::json read_container_header(const std::filesystem::path& path);

}  // namespace mineseg

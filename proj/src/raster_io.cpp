#include "mineseg/raster_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "mineseg/errors.hpp"

namespace mineseg {
namespace {

constexpr std::array<char, 8> kMagic{'M', 'S', 'G', 'R', 'S', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "container encoding assumes a little-endian host");

void put_u64(std::ofstream& out, std::uint64_t v) {
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    out.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint64_t get_u64(const unsigned char* b) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

struct ParsedPrefix {
    nlohmann::json header;
    std::uint64_t payload_offset = 0;
};

ParsedPrefix read_prefix(std::ifstream& in, const std::filesystem::path& path) {
    std::array<char, 8> magic{};
    std::array<unsigned char, 8> len{};
    if (!in.read(magic.data(), 8) || magic != kMagic) {
        throw IoError("not a raster container: " + path.string());
    }
    if (!in.read(reinterpret_cast<char*>(len.data()), 8)) {
        throw IoError("truncated container header: " + path.string());
    }
    const std::uint64_t n = get_u64(len.data());
    std::string text(n, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(n))) {
        throw IoError("truncated container header: " + path.string());
    }
    ParsedPrefix p;
    try {
        p.header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt container header in " + path.string() + ": " + e.what());
    }
    p.payload_offset = 16 + n;
    return p;
}

}  // namespace

std::size_t dtype_size(DType t) noexcept {
    switch (t) {
        case DType::uint8: return 1;
        case DType::uint16: return 2;
        case DType::float32: return 4;
    }
    return 0;
}

const char* dtype_name(DType t) noexcept {
    switch (t) {
        case DType::uint8: return "uint8";
        case DType::uint16: return "uint16";
        case DType::float32: return "float32";
    }
    return "?";
}

DType parse_dtype(const std::string& name) {
    if (name == "uint8") return DType::uint8;
    if (name == "uint16") return DType::uint16;
    if (name == "float32") return DType::float32;
    throw SchemaError("unsupported array dtype '" + name + "'");
}

RasterArray RasterArray::from_grid(std::string name, const Grid<float>& g) {
    RasterArray a;
    a.name = std::move(name);
    a.rows = g.rows();
    a.cols = g.cols();
    a.dtype = DType::float32;
    a.raw.resize(g.size() * 4);
    std::memcpy(a.raw.data(), g.storage().data(), a.raw.size());
    return a;
}

RasterArray RasterArray::from_grid(std::string name, const Grid<std::uint8_t>& g) {
    RasterArray a;
    a.name = std::move(name);
    a.rows = g.rows();
    a.cols = g.cols();
    a.dtype = DType::uint8;
    a.raw.assign(g.storage().begin(), g.storage().end());
    return a;
}

Grid<float> RasterArray::to_float() const {
    Grid<float> g(rows, cols);
    auto& out = g.storage();
    const std::size_t n = rows * cols;
    switch (dtype) {
        case DType::uint8:
            for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(raw[i]);
            break;
        case DType::uint16:
            for (std::size_t i = 0; i < n; ++i) {
                out[i] = static_cast<float>(static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8)));
            }
            break;
        case DType::float32:
            std::memcpy(out.data(), raw.data(), n * 4);
            break;
    }
    return g;
}

Grid<std::uint8_t> RasterArray::to_u8() const {
    if (dtype != DType::uint8) {
        throw SchemaError("array '" + name + "' is " + dtype_name(dtype) + ", expected uint8");
    }
    Grid<std::uint8_t> g(rows, cols);
    std::copy(raw.begin(), raw.end(), g.storage().begin());
    return g;
}

const RasterArray* RasterContainer::find(const std::string& name) const {
    for (const auto& a : arrays) {
        if (a.name == name) {
            return &a;
        }
    }
    return nullptr;
}

void write_container(const std::filesystem::path& path, const RasterContainer& container) {
    nlohmann::json header = container.header;
    nlohmann::json arrays = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& a : container.arrays) {
        if (a.raw.size() != a.rows * a.cols * dtype_size(a.dtype)) {
            throw ArgumentError("array '" + a.name + "' byte size does not match its shape");
        }
        nlohmann::json entry = {{"name", a.name},   {"rows", a.rows},     {"cols", a.cols},
                                {"dtype", dtype_name(a.dtype)}, {"offset", offset}};
        if (!a.attrs.empty()) {
            entry["attrs"] = a.attrs;
        }
        arrays.push_back(std::move(entry));
        offset += a.raw.size();
    }
    header["arrays"] = std::move(arrays);
    const std::string text = header.dump();

    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out.write(kMagic.data(), 8);
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& a : container.arrays) {
        out.write(reinterpret_cast<const char*>(a.raw.data()), static_cast<std::streamsize>(a.raw.size()));
    }
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

nlohmann::json read_container_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open: " + path.string());
    }
    return read_prefix(in, path).header;
}

RasterContainer read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open: " + path.string());
    }
    auto prefix = read_prefix(in, path);
    RasterContainer c;
    c.header = std::move(prefix.header);
    if (!c.header.contains("arrays") || !c.header["arrays"].is_array()) {
        throw IoError("container header lacks an array table: " + path.string());
    }
    try {
        for (const auto& entry : c.header["arrays"]) {
            RasterArray a;
            a.name = entry.at("name").get<std::string>();
            a.rows = entry.at("rows").get<std::size_t>();
            a.cols = entry.at("cols").get<std::size_t>();
            a.dtype = parse_dtype(entry.at("dtype").get<std::string>());
            if (entry.contains("attrs")) {
                a.attrs = entry["attrs"];
            }
            const auto offset = entry.at("offset").get<std::uint64_t>();
            a.raw.resize(a.rows * a.cols * dtype_size(a.dtype));
            in.seekg(static_cast<std::streamoff>(prefix.payload_offset + offset));
            if (!in.read(reinterpret_cast<char*>(a.raw.data()), static_cast<std::streamsize>(a.raw.size()))) {
                throw IoError("truncated array '" + a.name + "' in " + path.string());
            }
            c.arrays.push_back(std::move(a));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt array table in " + path.string() + ": " + e.what());
    }
    c.header.erase("arrays");
    return c;
}

}  // namespace mineseg

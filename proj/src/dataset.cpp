#include "mineseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mineseg/errors.hpp"

namespace mineseg {
namespace {

using nlohmann::json;

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            out.push_back(line);
        }
    }
    return out;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : lines) {
        out << l << '\n';
    }
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

// Geometric transforms applied identically to every channel and the mask.
template <typename T>
void flip_rows(std::span<T> plane, std::size_t h, std::size_t w) {
    for (std::size_t r = 0; r < h / 2; ++r) {
        std::swap_ranges(plane.begin() + static_cast<std::ptrdiff_t>(r * w),
                         plane.begin() + static_cast<std::ptrdiff_t>((r + 1) * w),
                         plane.begin() + static_cast<std::ptrdiff_t>((h - 1 - r) * w));
    }
}

template <typename T>
void flip_cols(std::span<T> plane, std::size_t h, std::size_t w) {
    for (std::size_t r = 0; r < h; ++r) {
        std::reverse(plane.begin() + static_cast<std::ptrdiff_t>(r * w),
                     plane.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
    }
}

// Counter-clockwise quarter turns of a square plane.
template <typename T>
void rotate_quarters(std::span<T> plane, std::size_t n, int k) {
    std::vector<T> src(plane.begin(), plane.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            std::size_t si = 0;
            std::size_t sj = 0;
            switch (k) {
                case 1: si = j; sj = n - 1 - i; break;
                case 2: si = n - 1 - i; sj = n - 1 - j; break;
                default: si = n - 1 - j; sj = i; break;
            }
            plane[i * n + j] = src[si * n + sj];
        }
    }
}

template <typename Fn>
void for_each_plane(TileSample& t, Fn&& fn) {
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        fn(t.channel(ch));
    }
    fn(std::span<std::uint8_t>(t.mask.storage()));
}

}  // namespace

// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0)) {
            throw ConfigError("split.ratios", "split fractions must be positive");
        }
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split.ratios", "split fractions must sum to 1");
    }
}

json SplitSpec::to_json() const {
    return {{"ratios", ratios}, {"seed", seed}};
}

SplitSpec SplitSpec::from_json(const json& j) {
    SplitSpec s;
    try {
        if (j.contains("ratios")) s.ratios = j.at("ratios").get<std::array<double, 3>>();
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError("split", std::string("wrong type: ") + e.what());
    }
    s.validate();
    return s;
}

Splits split_dataset(std::span<const std::string> tile_ids, const SplitSpec& spec) {
    spec.validate();
    if (tile_ids.size() < 3) {
        throw ArgumentError("need at least 3 tiles to form train/val/test splits, got " +
                            std::to_string(tile_ids.size()));
    }
    std::vector<std::string> ids(tile_ids.begin(), tile_ids.end());
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw ArgumentError("duplicate tile ids");
    }
    Rng rng(spec.seed, {0x5E11ull});
    const auto perm = rng.permutation(ids.size());

    const double n = static_cast<double>(ids.size());
    // The epsilon keeps exact products such as 10 * 0.8 from flooring down.
    const auto n_train = static_cast<std::size_t>(std::floor(n * spec.ratios[0] + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(n * spec.ratios[1] + 1e-9));
    Splits s;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        const std::string& id = ids[perm[i]];
        if (i < n_train) {
            s.train.push_back(id);
        } else if (i < n_train + n_val) {
            s.val.push_back(id);
        } else {
            s.test.push_back(id);
        }
    }
    return s;
}

void write_splits(const std::filesystem::path& dir, const Splits& splits) {
    std::filesystem::create_directories(dir);
    write_lines(dir / "train.txt", splits.train);
    write_lines(dir / "val.txt", splits.val);
    write_lines(dir / "test.txt", splits.test);
}

Splits read_splits(const std::filesystem::path& dir) {
    return Splits{read_lines(dir / "train.txt"), read_lines(dir / "val.txt"), read_lines(dir / "test.txt")};
}

// ---------------------------------------------------------------------------

void BandStats::validate() const {
    for (std::size_t i = 0; i < kChannels; ++i) {
        if (!std::isfinite(mean[i]) || !(std[i] > 0.0) || !std::isfinite(std[i])) {
            throw StatisticsError("band " + std::string(kBands[i].id) + " has non-positive or non-finite std");
        }
    }
}

json BandStats::to_json() const {
    return json{{"bands", [] {
                     json b = json::array();
                     for (const auto& info : kBands) b.push_back(info.id);
                     return b;
                 }()},
                {"mean", mean},
                {"std", std}};
}

BandStats BandStats::from_json(const json& j) {
    BandStats s;
    try {
        const auto m = j.at("mean").get<std::vector<double>>();
        const auto d = j.at("std").get<std::vector<double>>();
        if (m.size() != kChannels || d.size() != kChannels) {
            throw CompatibilityError("band statistics hold " + std::to_string(m.size()) + " bands, expected 12");
        }
        std::copy(m.begin(), m.end(), s.mean.begin());
        std::copy(d.begin(), d.end(), s.std.begin());
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed band statistics: ") + e.what());
    }
    s.validate();
    return s;
}

void write_band_stats(const std::filesystem::path& path, const BandStats& stats) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    out << stats.to_json().dump(1) << '\n';
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

BandStats read_band_stats(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    try {
        return BandStats::from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw IoError("corrupt band statistics " + path.string() + ": " + e.what());
    }
}

BandStats compute_band_stats(const TileSource& source, std::span<const std::string> train_ids) {
    if (train_ids.empty()) {
        throw StatisticsError("band statistics need at least one training tile");
    }
    std::array<double, kChannels> sum{};
    double count = 0.0;
    for (const auto& id : train_ids) {
        const TileSample t = source.load(id);
        for (std::size_t ch = 0; ch < kChannels; ++ch) {
            for (float v : t.channel(ch)) {
                sum[ch] += v;
            }
        }
        count += static_cast<double>(t.height * t.width);
    }
    BandStats s;
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        s.mean[ch] = sum[ch] / count;
    }
    std::array<double, kChannels> sq{};
    for (const auto& id : train_ids) {
        const TileSample t = source.load(id);
        for (std::size_t ch = 0; ch < kChannels; ++ch) {
            for (float v : t.channel(ch)) {
                const double d = v - s.mean[ch];
                sq[ch] += d * d;
            }
        }
    }
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        s.std[ch] = std::sqrt(sq[ch] / count);
        if (!(s.std[ch] > 0.0)) {
            throw StatisticsError("band " + std::string(kBands[ch].id) + " has zero variance over the training split");
        }
    }
    return s;
}

Image normalize(const TileSample& tile, const BandStats& stats) {
    Image img(kChannels, tile.height, tile.width);
    const std::size_t plane = tile.height * tile.width;
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        const auto src = tile.channel(ch);
        const double inv = 1.0 / stats.std[ch];
        double* dst = img.data.data() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            dst[i] = (static_cast<double>(src[i]) - stats.mean[ch]) * inv;
        }
    }
    return img;
}

Image denormalize(const Image& image, const BandStats& stats) {
    if (image.channels != kChannels) {
        throw CompatibilityError("denormalize expects 12 channels");
    }
    Image out = image;
    const std::size_t plane = image.height * image.width;
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        for (std::size_t i = 0; i < plane; ++i) {
            out.data[ch * plane + i] = image.data[ch * plane + i] * stats.std[ch] + stats.mean[ch];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

void AugmentConfig::validate() const {
    const std::pair<const char*, double> probs[] = {{"augment.p_crop", p_crop},
                                                    {"augment.p_vflip", p_vflip},
                                                    {"augment.p_rot", p_rot},
                                                    {"augment.p_hflip", p_hflip},
                                                    {"augment.p_channel_shuffle", p_channel_shuffle}};
    for (const auto& [field, p] : probs) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError(field, "probability must lie in [0, 1]");
        }
    }
    if (crop_size == 0) {
        throw ConfigError("augment.crop_size", "must be positive");
    }
}

json AugmentConfig::to_json() const {
    return {{"p_crop", p_crop},   {"crop_size", crop_size}, {"p_vflip", p_vflip},
            {"p_rot", p_rot},     {"p_hflip", p_hflip},     {"p_channel_shuffle", p_channel_shuffle}};
}

AugmentConfig AugmentConfig::from_json(const json& j) {
    AugmentConfig c;
    try {
        if (j.contains("p_crop")) c.p_crop = j.at("p_crop").get<double>();
        if (j.contains("crop_size")) c.crop_size = j.at("crop_size").get<std::size_t>();
        if (j.contains("p_vflip")) c.p_vflip = j.at("p_vflip").get<double>();
        if (j.contains("p_rot")) c.p_rot = j.at("p_rot").get<double>();
        if (j.contains("p_hflip")) c.p_hflip = j.at("p_hflip").get<double>();
        if (j.contains("p_channel_shuffle")) c.p_channel_shuffle = j.at("p_channel_shuffle").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError("augment", std::string("wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

AugmentConfig AugmentConfig::crop_only() const {
    AugmentConfig c = *this;
    c.p_crop = 1.0;
    c.p_vflip = c.p_rot = c.p_hflip = c.p_channel_shuffle = 0.0;
    return c;
}

Augmented augment(const TileSample& sample, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t n = cfg.crop_size;
    if (n > sample.height || n > sample.width) {
        throw ArgumentError("crop " + std::to_string(n) + " exceeds tile " + std::to_string(sample.height) + "x" +
                            std::to_string(sample.width));
    }
    AugmentRecord rec;
    const bool crop = rng.bernoulli(cfg.p_crop);
    const auto row = static_cast<std::size_t>(rng.below(sample.height - n + 1));
    const auto col = static_cast<std::size_t>(rng.below(sample.width - n + 1));
    rec.vflip = rng.bernoulli(cfg.p_vflip);
    const bool rotate = rng.bernoulli(cfg.p_rot);
    const int quarters = 1 + static_cast<int>(rng.below(3));
    rec.hflip = rng.bernoulli(cfg.p_hflip);
    rec.channel_shuffle = rng.bernoulli(cfg.p_channel_shuffle);
    const auto perm = rng.permutation(kChannels);

    rec.cropped = crop;
    rec.crop_row = crop ? row : (sample.height - n) / 2;
    rec.crop_col = crop ? col : (sample.width - n) / 2;
    rec.rot_quarters = rotate ? quarters : 0;

    Augmented out;
    TileSample& t = out.sample;
    t = TileSample(n, n);
    t.provenance = sample.provenance;
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
        for (std::size_t r = 0; r < n; ++r) {
            const float* src = &sample.pixels[(ch * sample.height + rec.crop_row + r) * sample.width + rec.crop_col];
            std::copy(src, src + n, &t.at(ch, r, 0));
        }
    }
    t.mask = sample.mask.crop(rec.crop_row, rec.crop_col, n, n);

    if (rec.vflip) {
        for_each_plane(t, [n](auto plane) { flip_rows(plane, n, n); });
    }
    if (rec.rot_quarters != 0) {
        for_each_plane(t, [n, k = rec.rot_quarters](auto plane) { rotate_quarters(plane, n, k); });
    }
    if (rec.hflip) {
        for_each_plane(t, [n](auto plane) { flip_cols(plane, n, n); });
    }
    for (std::size_t i = 0; i < kChannels; ++i) {
        rec.channel_order[i] = rec.channel_shuffle ? perm[i] : i;
    }
    if (rec.channel_shuffle) {
        std::vector<float> src = t.pixels;
        const std::size_t plane = n * n;
        for (std::size_t i = 0; i < kChannels; ++i) {
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(perm[i] * plane), plane,
                        t.pixels.begin() + static_cast<std::ptrdiff_t>(i * plane));
        }
    }
    out.record = rec;
    return out;
}

std::uint64_t id_hash(std::string_view id) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char ch : id) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001B3ull;
    }
    return h;
}

Rng sample_rng(std::uint64_t seed, std::uint64_t epoch, std::string_view sample_id, std::uint64_t purpose) {
    return Rng(seed, {purpose, epoch, id_hash(sample_id)});
}

}  // namespace mineseg

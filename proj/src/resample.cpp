#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "mineseg/catalog.hpp"
#include "mineseg/errors.hpp"

namespace mineseg {
namespace {

constexpr double kCubicA = -0.5;

struct Taps {
    std::array<std::size_t, 4> index;  // i-1, i, i+1, i+2 (clamped)
    std::array<double, 4> weight;
};

// Tap positions and weights for each output sample along one axis.
std::vector<Taps> axis_taps(std::size_t n_in, int factor) {
    const std::size_t n_out = n_in * static_cast<std::size_t>(factor);
    std::vector<Taps> taps(n_out);
    const auto last = static_cast<long>(n_in) - 1;
    for (std::size_t o = 0; o < n_out; ++o) {
        const double src = (static_cast<double>(o) + 0.5) / factor - 0.5;
        const double base = std::floor(src);
        const double t = src - base;
        const long i = static_cast<long>(base);
        Taps& tp = taps[o];
        for (int k = 0; k < 4; ++k) {
            tp.index[k] = static_cast<std::size_t>(std::clamp(i - 1 + k, 0L, last));
        }
        tp.weight = {catmull_rom(1.0 + t), catmull_rom(t), catmull_rom(1.0 - t), catmull_rom(2.0 - t)};
    }
    return taps;
}

// Weights sum to one, so interpolating differences from the nearest-left tap
// keeps constant signals bit-exact.
template <typename Get>
double interpolate(const Taps& tp, Get&& get) {
    const double center = get(tp.index[1]);
    return center + tp.weight[0] * (get(tp.index[0]) - center) + tp.weight[2] * (get(tp.index[2]) - center) +
           tp.weight[3] * (get(tp.index[3]) - center);
}

}  // namespace

double catmull_rom(double t) noexcept {
    const double x = std::abs(t);
    if (x <= 1.0) {
        return ((kCubicA + 2.0) * x - (kCubicA + 3.0)) * x * x + 1.0;
    }
    if (x < 2.0) {
        return ((kCubicA * x - 5.0 * kCubicA) * x + 8.0 * kCubicA) * x - 4.0 * kCubicA;
    }
    return 0.0;
}

Grid<float> upsample_band(const Grid<float>& band, int factor) {
    if (factor != 2 && factor != 6) {
        throw ArgumentError("upsampling factor must be 2 or 6, got " + std::to_string(factor));
    }
    if (band.empty()) {
        return {};
    }
    const std::size_t rows = band.rows();
    const std::size_t cols = band.cols();
    const auto col_taps = axis_taps(cols, factor);
    const auto row_taps = axis_taps(rows, factor);
    const std::size_t out_cols = col_taps.size();

    std::vector<double> horizontal(rows * out_cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const float* src = &band(r, 0);
        double* dst = &horizontal[r * out_cols];
        for (std::size_t c = 0; c < out_cols; ++c) {
            dst[c] = interpolate(col_taps[c], [src](std::size_t i) { return static_cast<double>(src[i]); });
        }
    }

    Grid<float> out(row_taps.size(), out_cols);
    for (std::size_t r = 0; r < row_taps.size(); ++r) {
        for (std::size_t c = 0; c < out_cols; ++c) {
            out(r, c) = static_cast<float>(
                interpolate(row_taps[r], [&](std::size_t i) { return horizontal[i * out_cols + c]; }));
        }
    }
    return out;
}

}  // namespace mineseg

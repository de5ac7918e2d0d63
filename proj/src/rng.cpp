#include "mineseg/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace mineseg {

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::truncated_normal(double sigma, double bound) {
    for (;;) {
        const double z = normal();
        if (std::abs(z) <= bound) {
            return z * sigma;
        }
    }
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(below(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

}  // namespace mineseg

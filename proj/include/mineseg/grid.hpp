#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mineseg/errors.hpp"

namespace mineseg {

/// Dense row-major 2-D array.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<T> values() noexcept { return data_; }
    [[nodiscard]] std::span<const T> values() const noexcept { return data_; }
    [[nodiscard]] std::vector<T>& storage() noexcept { return data_; }
    [[nodiscard]] const std::vector<T>& storage() const noexcept { return data_; }

    template <typename U>
    [[nodiscard]] bool same_shape(const Grid<U>& other) const noexcept {
        return rows_ == other.rows() && cols_ == other.cols();
    }

    /// Copy of the window [row, row+h) x [col, col+w).
    [[nodiscard]] Grid crop(std::size_t row, std::size_t col, std::size_t h, std::size_t w) const {
        if (row + h > rows_ || col + w > cols_) {
            throw ArgumentError("crop window exceeds grid bounds");
        }
        Grid out(h, w);
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                out(r, c) = (*this)(row + r, col + c);
            }
        }
        return out;
    }

    bool operator==(const Grid&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

}  // namespace mineseg

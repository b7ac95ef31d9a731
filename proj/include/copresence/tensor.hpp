#pragma once

#include "copresence/errors.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace copresence {

/// Extents of a rank-2 array. Vectors are 1×n or n×1, scalars 1×1.
struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    [[nodiscard]] constexpr std::size_t numel() const noexcept { return rows * cols; }
    friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

[[nodiscard]] inline std::string to_string(const Shape& s) {
    return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

/// Dense row-major array of doubles.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.numel(), fill) {}
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0) : Tensor(Shape{rows, cols}, fill) {}

    Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.numel()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             to_string(shape_));
        }
    }

    /// 1×n row vector.
    static Tensor row(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor(Shape{1, n}, std::move(values));
    }

    /// n×1 column vector.
    static Tensor column(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor(Shape{n, 1}, std::move(values));
    }

    static Tensor scalar(double v) { return Tensor(Shape{1, 1}, std::vector<double>{v}); }

    static Tensor identity(std::size_t n) {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            t(i, i) = 1.0;
        }
        return t;
    }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rows() const noexcept { return shape_.rows; }
    [[nodiscard]] std::size_t cols() const noexcept { return shape_.cols; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    [[nodiscard]] double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * shape_.cols + c]; }
    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_.cols + c]; }
    [[nodiscard]] double& operator[](std::size_t i) noexcept { return data_[i]; }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return data_[i]; }

    [[nodiscard]] std::span<double> values() noexcept { return data_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
    [[nodiscard]] std::vector<double>& storage() noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& storage() const noexcept { return data_; }

    [[nodiscard]] std::span<const double> row_span(std::size_t r) const noexcept {
        return {data_.data() + r * shape_.cols, shape_.cols};
    }

    /// Same data, new extents with equal element count.
    [[nodiscard]] Tensor reshaped(Shape s) const {
        if (s.numel() != shape_.numel()) {
            throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(s));
        }
        return Tensor(s, data_);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Tensor&, const Tensor&) = default;

  private:
    Shape shape_{};
    std::vector<double> data_;
};

namespace detail {

/// out[r×c] += a[r×k] · b[k×c], sequential accumulation over k.
inline void gemm_nn_acc(const double* a, const double* b, double* out, std::size_t r, std::size_t k,
                        std::size_t c) noexcept {
    for (std::size_t i = 0; i < r; ++i) {
        double* out_row = out + i * c;
        const double* a_row = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a_row[p];
            if (av == 0.0) {
                continue;
            }
            const double* b_row = b + p * c;
            for (std::size_t j = 0; j < c; ++j) {
                out_row[j] += av * b_row[j];
            }
        }
    }
}

/// out[r×c] += a[r×k] · b[c×k]ᵀ.
inline void gemm_nt_acc(const double* a, const double* b, double* out, std::size_t r, std::size_t k,
                        std::size_t c) noexcept {
    for (std::size_t i = 0; i < r; ++i) {
        const double* a_row = a + i * k;
        for (std::size_t j = 0; j < c; ++j) {
            const double* b_row = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += a_row[p] * b_row[p];
            }
            out[i * c + j] += acc;
        }
    }
}

/// out[k×c] += a[r×k]ᵀ · b[r×c].
inline void gemm_tn_acc(const double* a, const double* b, double* out, std::size_t r, std::size_t k,
                        std::size_t c) noexcept {
    for (std::size_t i = 0; i < r; ++i) {
        const double* a_row = a + i * k;
        const double* b_row = b + i * c;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a_row[p];
            if (av == 0.0) {
                continue;
            }
            double* out_row = out + p * c;
            for (std::size_t j = 0; j < c; ++j) {
                out_row[j] += av * b_row[j];
            }
        }
    }
}

}  // namespace detail

/// Plain (non-differentiable) matrix product.
[[nodiscard]] inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul shape mismatch: " + to_string(a.shape()) + " x " + to_string(b.shape()));
    }
    Tensor out(a.rows(), b.cols());
    detail::gemm_nn_acc(a.values().data(), b.values().data(), out.values().data(), a.rows(), a.cols(), b.cols());
    return out;
}

[[nodiscard]] inline Tensor transpose(const Tensor& a) {
    Tensor out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

}  // namespace copresence

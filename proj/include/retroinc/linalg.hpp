#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace retroinc {

// Small dense row-major matrix; plenty for the <= 31-parameter models here.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Inverse by LU decomposition with partial pivoting; empty when singular.
std::optional<Matrix> invert(const Matrix& a);

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x);

} // namespace retroinc

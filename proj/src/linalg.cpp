#include "retroinc/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace retroinc {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

std::optional<Matrix> invert(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("invert needs a square matrix");
    }
    const std::size_t n = a.rows();
    Matrix lu = a;
    Matrix inv = Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::abs(lu(col, col));
        for (std::size_t row = col + 1; row < n; ++row) {
            if (std::abs(lu(row, col)) > best) {
                best = std::abs(lu(row, col));
                pivot = row;
            }
        }
        if (!(best > 0.0) || !std::isfinite(best)) {
            return std::nullopt;
        }
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(lu(col, j), lu(pivot, j));
                std::swap(inv(col, j), inv(pivot, j));
            }
        }
        const double diag = lu(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            lu(col, j) /= diag;
            inv(col, j) /= diag;
        }
        for (std::size_t row = 0; row < n; ++row) {
            if (row == col) {
                continue;
            }
            const double factor = lu(row, col);
            if (factor == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                lu(row, j) -= factor * lu(col, j);
                inv(row, j) -= factor * inv(col, j);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(inv(i, j))) {
                return std::nullopt;
            }
        }
    }
    return inv;
}

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            sum += a(i, j) * x[j];
        }
        out[i] = sum;
    }
    return out;
}

} // namespace retroinc

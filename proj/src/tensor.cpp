#include "csft/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "csft/error.hpp"

namespace csft {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw DimensionError("tensor of shape " + csft::shape_string(rows, cols) + " given " +
                             std::to_string(values_.size()) + " values");
    }
}

Tensor2 Tensor2::from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n == 0 ? 0 : rows.front().size();
    Tensor2 out(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != m) {
            throw DimensionError("ragged rows: row 0 has " + std::to_string(m) + " columns, row " +
                                 std::to_string(i) + " has " + std::to_string(rows[i].size()));
        }
        std::copy(rows[i].begin(), rows[i].end(), out.row(i).begin());
    }
    return out;
}

void Tensor2::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor2::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor2::shape_string() const { return csft::shape_string(rows_, cols_); }

std::string shape_string(std::size_t rows, std::size_t cols) {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

} // namespace csft

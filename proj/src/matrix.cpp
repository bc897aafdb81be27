#include "bljust/matrix.hpp"

#include <cmath>
#include <string>

#include "bljust/errors.hpp"

namespace bljust {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw InvalidArgument("matrix data size " + std::to_string(data.size()) +
                          " != " + std::to_string(r) + "x" + std::to_string(c));
  }
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = m.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

bool all_finite(const Matrix& m) {
  for (double x : m.data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace bljust

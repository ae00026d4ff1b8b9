#include "hyperproto/matrix.hpp"

#include <string>

#include "hyperproto/errors.hpp"

namespace hyperproto {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  Matrix m;
  for (const auto& r : rows) m.push_row(r);
  return m;
}

void Matrix::push_row(std::span<const double> r) {
  if (rows_ == 0 && data_.empty()) {
    cols_ = r.size();
  } else if (r.size() != cols_) {
    throw DimensionError("row of length " + std::to_string(r.size()) + " pushed into matrix with " +
                         std::to_string(cols_) + " columns");
  }
  data_.insert(data_.end(), r.begin(), r.end());
  ++rows_;
}

}  // namespace hyperproto

//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/array.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace msde {

std::string shape_str(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i > 0)
      os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

int64_t shape_size(const Shape &shape) {
  int64_t n = 1;
  for (int64_t d: shape) {
    if (d <= 0)
      throw ShapeError("non-positive dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

Array::Array(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) { }

Array::Array(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != static_cast<int64_t>(data_.size()))
    throw ShapeError("shape " + shape_str(shape_) + " does not match "
                     + std::to_string(data_.size()) + " values");
}

Array Array::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const auto nrows = static_cast<int64_t>(rows.size());
  const auto ncols = nrows == 0 ? 0 : static_cast<int64_t>(rows.begin()->size());
  std::vector<double> data;
  data.reserve(nrows * ncols);
  for (const auto &row: rows) {
    if (static_cast<int64_t>(row.size()) != ncols)
      throw ShapeError("ragged rows in Array::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Array({ nrows, ncols }, std::move(data));
}

double Array::item() const {
  if (data_.size() != 1)
    throw ShapeError("item() on array of shape " + shape_str(shape_));
  return data_[0];
}

Array Array::reshaped(Shape shape) const {
  if (shape_size(shape) != size())
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to "
                     + shape_str(shape));
  return Array(std::move(shape), data_);
}

void Array::fill(double v) {
  std::fill(data_.begin(), data_.end(), v);
}

bool Array::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

} // namespace msde

//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_ARRAY_H_
#define MSDE_ARRAY_H_

#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msde {

class Error: public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ShapeError: public Error {
public:
  using Error::Error;
};

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape &shape);

// Dense row-major array of doubles. Rank-2 arrays are the working currency
// of the differentiation tape; scalars are 1x1.
class Array {
public:
  Array() = default;
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> data);

  static Array scalar(double v) { return Array({ 1, 1 }, { v }); }
  static Array matrix(int64_t rows, int64_t cols, double fill = 0.0) {
    return Array({ rows, cols }, fill);
  }
  static Array from_rows(std::initializer_list<std::initializer_list<double>>
                             rows);

  const Shape &shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }

  int64_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
  int64_t cols() const {
    return shape_.size() < 2 ? 1 : shape_[shape_.size() - 1];
  }

  double *data() { return data_.data(); }
  const double *data() const { return data_.data(); }
  std::vector<double> &values() { return data_; }
  const std::vector<double> &values() const { return data_; }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }

  double &operator[](int64_t i) { return data_[i]; }
  double operator[](int64_t i) const { return data_[i]; }

  double &operator()(int64_t r, int64_t c) { return data_[r * cols() + c]; }
  double operator()(int64_t r, int64_t c) const {
    return data_[r * cols() + c];
  }

  double item() const;

  Array reshaped(Shape shape) const;
  void fill(double v);
  bool all_finite() const;

  bool operator==(const Array &other) const = default;

private:
  Shape shape_;
  std::vector<double> data_;
};

using NamedArrays = std::map<std::string, Array>;

int64_t shape_size(const Shape &shape);

} // namespace msde

#endif // MSDE_ARRAY_H_

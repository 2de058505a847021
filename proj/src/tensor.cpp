#include "advtag/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace advtag {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

ShapeError::ShapeError(std::string primitive, Shape lhs, Shape rhs)
    : std::invalid_argument(primitive + ": incompatible shapes " +
                            shape_to_string(lhs) + " and " +
                            shape_to_string(rhs)),
      primitive_(std::move(primitive)),
      lhs_(std::move(lhs)),
      rhs_(std::move(rhs)) {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor", shape_, Shape{data_.size()});
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const {
  return rank() == 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const {
  return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 1);
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item", shape_, Shape{1});
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::axpy(double scale, const Tensor& other) {
  if (other.shape_ != shape_) throw ShapeError("axpy", shape_, other.shape_);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

}  // namespace advtag

#include "emo/core/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "emo/core/errors.hpp"

namespace emo {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
  if (shape_size(shape_) != values_.size())
    throw ShapeError("shape " + shape_string(shape_) + " does not match " + std::to_string(values_.size()) +
                     " values");
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != values_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  shape_ = std::move(shape);
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "tensor add");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

}  // namespace emo

#include "pasta/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "pasta/error.hpp"

namespace pasta {

Shape::Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {
  if (dims_.size() > 4) throw ShapeError("tensor rank above 4: " + str());
}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.size() > 4) throw ShapeError("tensor rank above 4: " + str());
}

std::size_t Shape::numel() const noexcept {
  std::size_t n = 1;
  for (auto d : dims_) n *= d;
  return n;
}

std::string Shape::str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims_[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_.numel())
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_.str());
}

double& Tensor::at(std::size_t b, std::size_t i, std::size_t j, std::size_t c) {
  return data_[((b * shape_[1] + i) * shape_[2] + j) * shape_[3] + c];
}

double Tensor::at(std::size_t b, std::size_t i, std::size_t j, std::size_t c) const {
  return data_[((b * shape_[1] + i) * shape_[2] + j) * shape_[3] + c];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != data_.size())
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace pasta

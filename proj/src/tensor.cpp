#include "cgl/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace cgl {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

ShapeError::ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs)
    : std::invalid_argument(op + ": shape mismatch between " + to_string(lhs) + " and " +
                            to_string(rhs)) {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("tensor of shape " + to_string(shape_) + " cannot hold " +
                     std::to_string(data_.size()) + " values");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(shape_));
  }
  return shape_[axis];
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item", shape_, Shape{});
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size()) throw ShapeError("reshape", shape_, shape);
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace cgl

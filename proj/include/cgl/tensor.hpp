#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgl {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Raised when operand shapes do not conform. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs);
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor({}, std::vector<double>{value}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D access; no bounds checks beyond the debug assert in the caller.
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  double item() const;
  Tensor reshaped(Shape shape) const;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace cgl

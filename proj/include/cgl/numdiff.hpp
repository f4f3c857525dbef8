#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cgl/tape.hpp"
#include "cgl/tensor.hpp"

namespace cgl {

using ScalarFn = std::function<double(std::span<const double>)>;
using VectorFn = std::function<std::vector<double>(std::span<const double>)>;
/// Builds a scalar loss on `tape` from the parameter leaf `theta`.
using TapeFn = std::function<Var(Tape& tape, Var theta)>;

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Value of a tape-built function at theta.
double tape_value(const TapeFn& fn, std::span<const double> theta);
/// Reverse-mode gradient of a tape-built function at theta.
std::vector<double> tape_gradient(const TapeFn& fn, std::span<const double> theta);

/// max_i |analytic_i - central_i| / (|analytic_i| + |central_i| + 1e-12)
double grad_check(const ScalarFn& f, std::span<const double> analytic,
                  std::span<const double> theta, double h);
double grad_check(const TapeFn& fn, std::span<const double> theta, double h);

/// Central-difference Jacobian, shape [outputs, inputs].
Tensor jacobian_fd(const VectorFn& f, std::span<const double> z, double h);

}  // namespace cgl

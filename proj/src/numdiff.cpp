#include "cgl/numdiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cgl {

double tape_value(const TapeFn& fn, std::span<const double> theta) {
  Tape tape;
  Var leaf = tape.leaf(Tensor({theta.size()}, std::vector<double>(theta.begin(), theta.end())), false);
  return fn(tape, leaf).value().item();
}

std::vector<double> tape_gradient(const TapeFn& fn, std::span<const double> theta) {
  Tape tape;
  Var leaf = tape.leaf(Tensor({theta.size()}, std::vector<double>(theta.begin(), theta.end())));
  Var loss = fn(tape, leaf);
  tape.backward(loss);
  return tape.grad(leaf).values();
}

double grad_check(const ScalarFn& f, std::span<const double> analytic,
                  std::span<const double> theta, double h) {
  if (analytic.size() != theta.size()) {
    throw ShapeError("grad_check", Shape{analytic.size()}, Shape{theta.size()});
  }
  std::vector<double> probe(theta.begin(), theta.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(probe);
    probe[i] = saved - h;
    const double down = f(probe);
    probe[i] = saved;
    const double central = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[i] - central) / (std::abs(analytic[i]) + std::abs(central) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

double grad_check(const TapeFn& fn, std::span<const double> theta, double h) {
  const std::vector<double> analytic = tape_gradient(fn, theta);
  return grad_check([&](std::span<const double> t) { return tape_value(fn, t); }, analytic, theta, h);
}

Tensor jacobian_fd(const VectorFn& f, std::span<const double> z, double h) {
  std::vector<double> probe(z.begin(), z.end());
  const std::size_t inputs = probe.size();
  std::vector<std::vector<double>> columns;
  columns.reserve(inputs);
  std::size_t outputs = 0;
  for (std::size_t d = 0; d < inputs; ++d) {
    const double saved = probe[d];
    probe[d] = saved + h;
    std::vector<double> up = f(probe);
    probe[d] = saved - h;
    const std::vector<double> down = f(probe);
    probe[d] = saved;
    if (d == 0) outputs = up.size();
    if (up.size() != outputs || down.size() != outputs) {
      throw ShapeError("jacobian_fd: output size changed while probing input " + std::to_string(d));
    }
    for (std::size_t n = 0; n < outputs; ++n) {
      if (!std::isfinite(up[n]) || !std::isfinite(down[n])) {
        throw NonFiniteError("jacobian_fd: non-finite output " + std::to_string(n) +
                             " when perturbing input coordinate " + std::to_string(d));
      }
      up[n] = (up[n] - down[n]) / (2.0 * h);
    }
    columns.push_back(std::move(up));
  }
  Tensor jac({outputs, inputs});
  for (std::size_t d = 0; d < inputs; ++d) {
    for (std::size_t n = 0; n < outputs; ++n) jac.at(n, d) = columns[d][n];
  }
  return jac;
}

}  // namespace cgl

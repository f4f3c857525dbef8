#include "cgl/adam.hpp"

#include <cmath>
#include <string>

#include "cgl/tensor.hpp"

namespace cgl {

AdamState::AdamState(std::size_t size, AdamHyper hyper)
    : hyper_(hyper), m_(size, 0.0), v_(size, 0.0) {}

void AdamState::step(std::span<double> theta, std::span<const double> grad) {
  if (theta.size() != m_.size() || grad.size() != m_.size()) {
    throw ShapeError("adam_step", Shape{theta.size()}, Shape{grad.size()});
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NonFiniteGradient("adam_step: non-finite gradient at index " + std::to_string(i) +
                              " (step " + std::to_string(step_ + 1) + ")");
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(hyper_.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper_.beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = hyper_.beta1 * m_[i] + (1.0 - hyper_.beta1) * grad[i];
    v_[i] = hyper_.beta2 * v_[i] + (1.0 - hyper_.beta2) * grad[i] * grad[i];
    const double m_hat = m_[i] / correction1;
    const double v_hat = v_[i] / correction2;
    theta[i] -= hyper_.lr * m_hat / (std::sqrt(v_hat) + hyper_.eps);
  }
}

}  // namespace cgl

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace cgl {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Raised when a non-finite gradient reaches the optimizer.
class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bias-corrected Adam over one flat parameter vector.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t size, AdamHyper hyper);

  /// theta <- theta - lr * mhat / (sqrt(vhat) + eps). Throws NonFiniteGradient
  /// (leaving theta and the moments untouched) if any gradient is NaN or Inf.
  void step(std::span<double> theta, std::span<const double> grad);

  std::int64_t steps() const noexcept { return step_; }
  const AdamHyper& hyper() const noexcept { return hyper_; }
  void set_lr(double lr) noexcept { hyper_.lr = lr; }
  std::span<const double> first_moment() const noexcept { return m_; }
  std::span<const double> second_moment() const noexcept { return v_; }

 private:
  AdamHyper hyper_;
  std::int64_t step_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace cgl

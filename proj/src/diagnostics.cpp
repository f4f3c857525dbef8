#include "cgl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

#include "cgl/random.hpp"

namespace cgl {
namespace {

void check_layout(const Tensor& jacobian, SlotLayout layout) {
  if (jacobian.rank() != 2 || jacobian.dim(1) != layout.inputs()) {
    throw ShapeError("jacobian vs slot layout", jacobian.shape(), Shape{layout.slots, layout.slot_dim});
  }
}

// |d f_n / d z_k| for every output n and slot k, as an [outputs, K] table.
std::vector<double> slot_norms(const Tensor& jacobian, SlotLayout layout) {
  check_layout(jacobian, layout);
  const std::size_t outputs = jacobian.dim(0);
  std::vector<double> norms(outputs * layout.slots, 0.0);
  for (std::size_t n = 0; n < outputs; ++n) {
    for (std::size_t k = 0; k < layout.slots; ++k) {
      double s = 0.0;
      for (std::size_t d = 0; d < layout.slot_dim; ++d) {
        const double v = jacobian.at(n, k * layout.slot_dim + d);
        s += v * v;
      }
      norms[n * layout.slots + k] = std::sqrt(s);
    }
  }
  return norms;
}

Tensor select_rows(const Tensor& m, const std::vector<std::size_t>& rows) {
  const std::size_t cols = m.dim(1);
  std::vector<double> out;
  out.reserve(rows.size() * cols);
  for (std::size_t r : rows) {
    for (std::size_t c = 0; c < cols; ++c) out.push_back(m.at(r, c));
  }
  return Tensor({rows.size(), cols}, std::move(out));
}

}  // namespace

double contrast_from_jacobian(const Tensor& jacobian, SlotLayout layout) {
  const std::vector<double> norms = slot_norms(jacobian, layout);
  const std::size_t outputs = jacobian.dim(0);
  double total = 0.0;
  for (std::size_t n = 0; n < outputs; ++n) {
    const double* row = norms.data() + n * layout.slots;
    for (std::size_t k = 0; k < layout.slots; ++k) {
      for (std::size_t j = k + 1; j < layout.slots; ++j) total += row[k] * row[j];
    }
  }
  return total;
}

double comp_contrast(const VectorFn& f, std::span<const double> z, SlotLayout layout, double h) {
  return contrast_from_jacobian(jacobian_fd(f, z, h), layout);
}

bool InfluenceSets::disjoint() const {
  std::vector<std::size_t> all;
  for (const auto& s : sets) all.insert(all.end(), s.begin(), s.end());
  std::sort(all.begin(), all.end());
  return std::adjacent_find(all.begin(), all.end()) == all.end();
}

InfluenceSets influence_sets(const Tensor& jacobian, SlotLayout layout, double tau) {
  const std::vector<double> norms = slot_norms(jacobian, layout);
  InfluenceSets out;
  out.sets.resize(layout.slots);
  for (std::size_t n = 0; n < jacobian.dim(0); ++n) {
    for (std::size_t k = 0; k < layout.slots; ++k) {
      if (norms[n * layout.slots + k] > tau) out.sets[k].push_back(n);
    }
  }
  return out;
}

CompositionalityResult compositionality_check(const VectorFn& f, std::span<const double> z, SlotLayout layout,
                                              double tau, double h) {
  CompositionalityResult result;
  result.influence = influence_sets(jacobian_fd(f, z, h), layout, tau);
  result.compositional = result.influence.disjoint();
  return result;
}

std::size_t numerical_rank(const Tensor& matrix, double rel_tol) {
  if (matrix.rank() != 2) throw ShapeError("numerical_rank expects a matrix, got " + to_string(matrix.shape()));
  if (matrix.size() == 0) return 0;
  Eigen::MatrixXd m(matrix.dim(0), matrix.dim(1));
  for (std::size_t r = 0; r < matrix.dim(0); ++r) {
    for (std::size_t c = 0; c < matrix.dim(1); ++c) m(r, c) = matrix.at(r, c);
  }
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  if (!(smax > 0.0)) return 0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * smax) ++rank;
  }
  return rank;
}

IrreducibilityResult irreducibility_from_jacobian(const Tensor& jacobian, SlotLayout layout,
                                                  const IrreducibilityOptions& options) {
  const InfluenceSets influence = influence_sets(jacobian, layout, options.tau);
  IrreducibilityResult result;
  Rng rng(derive_seed(options.seed, "irreducibility"));

  for (std::size_t k = 0; k < layout.slots; ++k) {
    const std::vector<std::size_t>& set = influence.sets[k];
    if (set.empty()) {
      result.warnings.push_back("slot " + std::to_string(k) + " has an empty influence set");
      continue;
    }
    const std::size_t size = set.size();
    if (size == 1) continue;
    const std::size_t whole = numerical_rank(select_rows(jacobian, set));

    // Membership masks: true puts the pixel in S1. Each split is tested once per mask.
    auto test = [&](const std::vector<bool>& in_first) {
      std::vector<std::size_t> s1, s2;
      for (std::size_t i = 0; i < size; ++i) (in_first[i] ? s1 : s2).push_back(set[i]);
      ++result.partitions_checked;
      const std::size_t r1 = numerical_rank(select_rows(jacobian, s1));
      const std::size_t r2 = numerical_rank(select_rows(jacobian, s2));
      if (r1 + r2 > whole) return true;
      if (result.irreducible) {
        result.irreducible = false;
        result.failing_slot = k;
        result.failing_subset = s1;
      }
      return false;
    };

    if (options.exhaustive_small && size <= options.exhaustive_limit) {
      // Fix the last pixel in S2 so each unordered split appears once.
      const std::uint64_t count = std::uint64_t{1} << (size - 1);
      for (std::uint64_t mask = 1; mask < count; ++mask) {
        std::vector<bool> in_first(size, false);
        for (std::size_t i = 0; i + 1 < size; ++i) in_first[i] = (mask >> i) & 1U;
        test(in_first);
      }
      continue;
    }

    for (std::size_t i = 0; i < size; ++i) {
      std::vector<bool> in_first(size, false);
      in_first[i] = true;
      test(in_first);
    }
    for (std::size_t r = 0; r < options.random_partitions; ++r) {
      std::vector<bool> in_first(size);
      std::size_t first = 0;
      do {
        first = 0;
        for (std::size_t i = 0; i < size; ++i) {
          in_first[i] = rng.below(2) == 1;
          first += in_first[i];
        }
      } while (first == 0 || first == size);
      test(in_first);
    }
  }
  return result;
}

IrreducibilityResult irreducibility_check(const VectorFn& f, std::span<const double> z, SlotLayout layout,
                                          const IrreducibilityOptions& options) {
  return irreducibility_from_jacobian(jacobian_fd(f, z, options.h), layout, options);
}

double hessian_cross_check(const VectorFn& f, std::span<const double> z, SlotLayout layout, double h) {
  if (z.size() != layout.inputs()) {
    throw ShapeError("hessian_cross_check", Shape{z.size()}, Shape{layout.slots, layout.slot_dim});
  }
  std::vector<double> point(z.begin(), z.end());
  auto eval = [&](std::size_t p, double dp, std::size_t q, double dq) {
    point[p] = z[p] + dp;
    point[q] = z[q] + dq;
    std::vector<double> out = f(point);
    point[p] = z[p];
    point[q] = z[q];
    return out;
  };

  double worst = 0.0;
  const double denom = 4.0 * h * h;
  for (std::size_t p = 0; p < z.size(); ++p) {
    for (std::size_t q = p + 1; q < z.size(); ++q) {
      if (p / layout.slot_dim == q / layout.slot_dim) continue;
      const std::vector<double> pp = eval(p, h, q, h);
      const std::vector<double> pm = eval(p, h, q, -h);
      const std::vector<double> mp = eval(p, -h, q, h);
      const std::vector<double> mm = eval(p, -h, q, -h);
      for (std::size_t n = 0; n < pp.size(); ++n) {
        const double d2 = ((pp[n] - pm[n]) - (mp[n] - mm[n])) / denom;
        if (!std::isfinite(d2)) {
          throw NonFiniteError("hessian_cross_check: output " + std::to_string(n) + " at inputs " +
                               std::to_string(p) + "," + std::to_string(q));
        }
        worst = std::max(worst, std::abs(d2));
      }
    }
  }
  return worst;
}

VectorFn decoder_function(const SlotModel& model) {
  return [&model](std::span<const double> code) {
    const Tensor codes({1, code.size()}, std::vector<double>(code.begin(), code.end()));
    return model.decode(codes).recon.values();
  };
}

std::vector<Tensor> decoder_jacobians(const SlotModel& model, const Tensor& codes, double h) {
  const std::size_t batch = codes.dim(0);
  const std::size_t width = codes.dim(1);
  const std::size_t pixels = model.pixels();
  if (width != model.slots() * model.slot_dim()) {
    throw ShapeError("decoder_jacobians", codes.shape(), Shape{model.slots(), model.slot_dim()});
  }

  // Rows are ordered (point, input, sign) with sign 0 = +h, 1 = -h.
  std::vector<double> probes;
  probes.reserve(batch * width * 2 * width);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < width; ++i) {
      for (double sign : {1.0, -1.0}) {
        for (std::size_t c = 0; c < width; ++c) probes.push_back(codes.at(b, c) + (c == i ? sign * h : 0.0));
      }
    }
  }
  const Tensor recon = model.decode(Tensor({batch * width * 2, width}, std::move(probes))).recon;

  std::vector<Tensor> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor jac({pixels, width});
    for (std::size_t i = 0; i < width; ++i) {
      const std::size_t plus = (b * width + i) * 2;
      for (std::size_t n = 0; n < pixels; ++n) {
        const double d = (recon.at(plus, n) - recon.at(plus + 1, n)) / (2.0 * h);
        if (!std::isfinite(d)) {
          throw NonFiniteError("decoder Jacobian: output " + std::to_string(n) + " wrt input " + std::to_string(i) +
                               " of point " + std::to_string(b));
        }
        jac.at(n, i) = d;
      }
    }
    out.push_back(std::move(jac));
  }
  return out;
}

double decoder_contrast(const SlotModel& model, const Tensor& codes, double h) {
  if (codes.dim(0) == 0) throw std::invalid_argument("decoder_contrast: no codes");
  const SlotLayout layout{model.slots(), model.slot_dim()};
  double total = 0.0;
  for (const Tensor& jac : decoder_jacobians(model, codes, h)) total += contrast_from_jacobian(jac, layout);
  return total / static_cast<double>(codes.dim(0));
}

}  // namespace cgl

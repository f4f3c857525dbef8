#include "cgl/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "cgl/assignment.hpp"

namespace cgl {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> view(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("expected a matrix, got " + to_string(t.shape()));
  return {t.data().data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1))};
}

Tensor to_tensor(const Eigen::MatrixXd& m) {
  Tensor out({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.at(r, c) = m(r, c);
  }
  return out;
}

Eigen::MatrixXd squared_distances(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d = (-2.0 * a * b.transpose()).colwise() + na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

Tensor columns(const Tensor& m, std::size_t first, std::size_t count, std::size_t row_begin, std::size_t row_end) {
  Tensor out({row_end - row_begin, count});
  for (std::size_t r = row_begin; r < row_end; ++r) {
    for (std::size_t c = 0; c < count; ++c) out.at(r - row_begin, c) = m.at(r, first + c);
  }
  return out;
}

}  // namespace

double median_bandwidth(const Tensor& x) {
  const std::size_t n = x.dim(0);
  if (n < 2) throw std::invalid_argument("median_bandwidth: need at least two rows");
  const Eigen::MatrixXd xm = view(x);
  const Eigen::MatrixXd d2 = squared_distances(xm, xm);
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dist.push_back(std::sqrt(d2(i, j)));
  }
  // Lower median for an even count keeps the result one of the observed distances.
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>((dist.size() - 1) / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  return std::max(*mid, kBandwidthFloor);
}

KernelRidgeModel kernel_ridge_fit(const Tensor& x, const Tensor& y, double ridge, double bandwidth) {
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) != y.dim(0)) throw ShapeError("kernel_ridge_fit", x.shape(), y.shape());
  if (x.dim(0) < 2) throw std::invalid_argument("kernel_ridge_fit: need at least two rows");
  if (!(ridge > 0.0)) throw std::invalid_argument("kernel_ridge_fit: ridge must be positive");
  if (!x.all_finite() || !y.all_finite()) throw std::invalid_argument("kernel_ridge_fit: non-finite input");

  KernelRidgeModel model;
  model.ridge = ridge;
  model.bandwidth = bandwidth > 0.0 ? bandwidth : median_bandwidth(x);
  model.support = x;

  const Eigen::MatrixXd xm = view(x);
  Eigen::MatrixXd ym = view(y);
  const Eigen::RowVectorXd mean = ym.colwise().mean();
  ym.rowwise() -= mean;
  model.offset.assign(mean.data(), mean.data() + mean.size());

  Eigen::MatrixXd gram = (-squared_distances(xm, xm) / (2.0 * model.bandwidth * model.bandwidth)).array().exp();
  gram.diagonal().array() += ridge;
  model.dual = to_tensor(gram.llt().solve(ym));
  return model;
}

Tensor kernel_ridge_predict(const KernelRidgeModel& model, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != model.support.dim(1)) {
    throw ShapeError("kernel_ridge_predict", x.shape(), model.support.shape());
  }
  const double scale = 2.0 * model.bandwidth * model.bandwidth;
  const Eigen::MatrixXd cross = (-squared_distances(view(x), view(model.support)) / scale).array().exp();
  Eigen::MatrixXd pred = cross * Eigen::MatrixXd(view(model.dual));
  for (Eigen::Index c = 0; c < pred.cols(); ++c) pred.col(c).array() += model.offset[c];
  return to_tensor(pred);
}

double r2_score(const Tensor& y_true, const Tensor& y_pred) {
  if (y_true.shape() != y_pred.shape()) throw ShapeError("r2_score", y_true.shape(), y_pred.shape());
  const Tensor t = y_true.rank() == 1 ? y_true.reshaped({y_true.size(), 1}) : y_true;
  const Tensor p = y_pred.rank() == 1 ? y_pred.reshaped({y_pred.size(), 1}) : y_pred;
  const std::size_t n = t.dim(0);
  const std::size_t m = t.dim(1);
  if (n == 0 || m == 0) throw std::invalid_argument("r2_score: empty input");

  double total = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += t.at(r, c);
    mean /= static_cast<double>(n);
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double e = t.at(r, c) - p.at(r, c);
      const double d = t.at(r, c) - mean;
      sse += e * e;
      sst += d * d;
    }
    if (sst == 0.0) {
      total += sse == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    } else {
      total += 1.0 - sse / sst;
    }
  }
  return total / static_cast<double>(m);
}

IdentifiabilityResult slot_identifiability(const Tensor& inferred, std::size_t inferred_dim, const Tensor& truth,
                                           std::size_t truth_dim, std::size_t slots,
                                           const IdentifiabilityOptions& options) {
  if (inferred.rank() != 2 || truth.rank() != 2 || inferred.dim(0) != truth.dim(0) ||
      inferred.dim(1) != slots * inferred_dim || truth.dim(1) != slots * truth_dim) {
    throw ShapeError("slot_identifiability", inferred.shape(), truth.shape());
  }
  const std::size_t rows = std::min(inferred.dim(0), options.max_rows);
  if (rows < 100) throw std::invalid_argument("slot_identifiability: need at least 100 rows, got " + std::to_string(rows));
  const auto train = static_cast<std::size_t>(options.train_fraction * static_cast<double>(rows));

  std::vector<Tensor> y_train(slots), y_test(slots);
  for (std::size_t i = 0; i < slots; ++i) {
    y_train[i] = columns(truth, i * truth_dim, truth_dim, 0, train);
    y_test[i] = columns(truth, i * truth_dim, truth_dim, train, rows);
    for (std::size_t c = 0; c < truth_dim; ++c) {
      double lo = y_test[i].at(0, c), hi = lo;
      for (std::size_t r = 0; r < y_test[i].dim(0); ++r) {
        lo = std::min(lo, y_test[i].at(r, c));
        hi = std::max(hi, y_test[i].at(r, c));
      }
      if (hi == lo) {
        throw std::invalid_argument("slot_identifiability: ground-truth slot " + std::to_string(i) +
                                    " has zero variance in coordinate " + std::to_string(c));
      }
    }
  }

  Tensor r2({slots, slots});
  for (std::size_t j = 0; j < slots; ++j) {
    Tensor x_train = columns(inferred, j * inferred_dim, inferred_dim, 0, train);
    Tensor x_test = columns(inferred, j * inferred_dim, inferred_dim, train, rows);
    for (std::size_t c = 0; c < inferred_dim; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < train; ++r) mean += x_train.at(r, c);
      mean /= static_cast<double>(train);
      double var = 0.0;
      for (std::size_t r = 0; r < train; ++r) var += (x_train.at(r, c) - mean) * (x_train.at(r, c) - mean);
      const double sd = std::sqrt(var / static_cast<double>(train)) + 1e-12;
      for (std::size_t r = 0; r < train; ++r) x_train.at(r, c) = (x_train.at(r, c) - mean) / sd;
      for (std::size_t r = 0; r < x_test.dim(0); ++r) x_test.at(r, c) = (x_test.at(r, c) - mean) / sd;
    }
    for (std::size_t i = 0; i < slots; ++i) {
      const KernelRidgeModel model = kernel_ridge_fit(x_train, y_train[i], options.ridge);
      r2.at(i, j) = r2_score(y_test[i], kernel_ridge_predict(model, x_test));
    }
  }

  CostMatrix cost(slots, std::vector<double>(slots * slots));
  for (std::size_t i = 0; i < slots; ++i) {
    for (std::size_t j = 0; j < slots; ++j) {
      // A -inf entry cannot be matched by the solver; clamp it far below any real score.
      cost(i, j) = -std::max(r2.at(i, j), -1e12);
    }
  }
  const Assignment match = hungarian(cost);
  IdentifiabilityResult result;
  result.perm = match.perm;
  result.r2 = r2;
  for (std::size_t i = 0; i < slots; ++i) result.score += r2.at(i, match.perm[i]);
  result.score /= static_cast<double>(slots);
  return result;
}

}  // namespace cgl

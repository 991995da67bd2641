#include "painscore/regression.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace painscore {

namespace {

constexpr double kTau = 1e-12;  // curvature floor for the pair subproblem

// The 2l-variable dual: variables t < l are alpha, t >= l are alpha*, with
// signs s_t = +1 / -1, box [0, C], constraint sum_t s_t a_t = 0 and gradient
// G_t = s_t (K beta)_{t mod l} + p_t where beta_i = a_i - a_{l+i}.
struct WorkingSet {
  int i = -1;
  int j = -1;
  double violation = 0.0;
};

}  // namespace

SvrModel train_svr(const Eigen::MatrixXd& k_train, const std::vector<double>& labels,
                   const SvrParams& params, const std::vector<std::string>& training_ids) {
  const int l = static_cast<int>(labels.size());
  if (l < 2) throw std::invalid_argument("train_svr: need at least 2 training points");
  if (k_train.rows() != l || k_train.cols() != l) {
    throw std::invalid_argument("train_svr: kernel size does not match label count");
  }
  if (params.c <= 0.0) throw std::invalid_argument("train_svr: C must be positive");
  if (params.epsilon < 0.0) throw std::invalid_argument("train_svr: epsilon must be nonnegative");
  const double symmetry = (k_train - k_train.transpose()).cwiseAbs().maxCoeff();
  if (symmetry > 1e-8 * std::max(1.0, k_train.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("train_svr: kernel is not symmetric");
  }
  if (!training_ids.empty() && static_cast<int>(training_ids.size()) != l) {
    throw std::invalid_argument("train_svr: id count does not match label count");
  }

  const double c_bound = params.c;
  const int dim = 2 * l;
  std::vector<double> a(static_cast<std::size_t>(dim), 0.0);
  std::vector<double> grad(static_cast<std::size_t>(dim));
  std::vector<signed char> sign(static_cast<std::size_t>(dim));
  for (int t = 0; t < dim; ++t) {
    const int idx = t < l ? t : t - l;
    sign[static_cast<std::size_t>(t)] = t < l ? 1 : -1;
    grad[static_cast<std::size_t>(t)] =
        params.epsilon - (t < l ? labels[static_cast<std::size_t>(idx)]
                                : -labels[static_cast<std::size_t>(idx)]);
  }

  const double kernel_scale = std::max(1.0, k_train.diagonal().cwiseAbs().maxCoeff());
  const long max_iterations = 200'000 + 2'000L * l;
  double residual = std::numeric_limits<double>::infinity();
  long iteration = 0;

  for (; iteration < max_iterations; ++iteration) {
    // Maximal violating pair.
    double up_best = -std::numeric_limits<double>::infinity();
    double low_best = std::numeric_limits<double>::infinity();
    int up_idx = -1;
    int low_idx = -1;
    for (int t = 0; t < dim; ++t) {
      const std::size_t ts = static_cast<std::size_t>(t);
      const double score = -sign[ts] * grad[ts];
      const bool in_up = sign[ts] > 0 ? a[ts] < c_bound : a[ts] > 0.0;
      const bool in_low = sign[ts] > 0 ? a[ts] > 0.0 : a[ts] < c_bound;
      if (in_up && score > up_best) {
        up_best = score;
        up_idx = t;
      }
      if (in_low && score < low_best) {
        low_best = score;
        low_idx = t;
      }
    }
    residual = up_best - low_best;
    if (up_idx < 0 || low_idx < 0 || residual <= params.kkt_tolerance) break;

    const int i = up_idx;
    const int j = low_idx;
    const std::size_t is = static_cast<std::size_t>(i);
    const std::size_t js = static_cast<std::size_t>(j);
    const int ik = i < l ? i : i - l;
    const int jk = j < l ? j : j - l;
    const double kii = k_train(ik, ik);
    const double kjj = k_train(jk, jk);
    const double kij = k_train(ik, jk);
    double quad = kii + kjj - 2.0 * kij;  // identical for both sign cases
    if (quad < -1e-8 * std::max(1.0, kii + kjj)) {
      throw std::runtime_error(
          "train_svr: kernel appears indefinite; run kernel diagnostics");
    }
    if (quad <= kTau * kernel_scale) quad = kTau * kernel_scale;

    const double old_ai = a[is];
    const double old_aj = a[js];
    if (sign[is] != sign[js]) {
      // a_i and a_j move together.
      double delta = (-grad[is] - grad[js]) / quad;
      delta = std::min(delta, std::min(c_bound - old_ai, c_bound - old_aj));
      delta = std::max(delta, std::max(-old_ai, -old_aj));
      a[is] = old_ai + delta;
      a[js] = old_aj + delta;
    } else {
      // a_i grows while a_j shrinks.
      double delta = (grad[js] - grad[is]) / quad;
      delta = std::min(delta, std::min(c_bound - old_ai, old_aj));
      delta = std::max(delta, std::max(-old_ai, old_aj - c_bound));
      a[is] = old_ai + delta;
      a[js] = old_aj - delta;
    }

    const double w_i = sign[is] * (a[is] - old_ai);
    const double w_j = sign[js] * (a[js] - old_aj);
    if (w_i == 0.0 && w_j == 0.0) {
      // Numerically stuck pair; treat as converged at the current residual.
      break;
    }
    for (int t = 0; t < dim; ++t) {
      const std::size_t ts = static_cast<std::size_t>(t);
      const int tk = t < l ? t : t - l;
      grad[ts] += sign[ts] * (k_train(tk, ik) * w_i + k_train(tk, jk) * w_j);
    }
  }

  if (iteration >= max_iterations) {
    throw std::runtime_error("train_svr: no convergence after " +
                             std::to_string(max_iterations) +
                             " iterations (KKT residual " + std::to_string(residual) + ")");
  }

  SvrModel model;
  model.c = params.c;
  model.epsilon = params.epsilon;
  model.training_ids = training_ids;
  model.dual_coefficients.resize(static_cast<std::size_t>(l));
  for (int i = 0; i < l; ++i) {
    model.dual_coefficients[static_cast<std::size_t>(i)] =
        a[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i + l)];
    if (model.dual_coefficients[static_cast<std::size_t>(i)] != 0.0) {
      model.support_indices.push_back(static_cast<std::size_t>(i));
    }
  }

  // Bias from the KKT conditions: free variables pin f(x_i) - y_i to -eps
  // (alpha side) or +eps (alpha* side); averaged when several are free, the
  // midpoint of the feasibility interval otherwise.
  Eigen::Map<const Eigen::VectorXd> beta(model.dual_coefficients.data(), l);
  const Eigen::VectorXd kb = k_train * beta;
  double free_sum = 0.0;
  int free_count = 0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  for (int i = 0; i < l; ++i) {
    const std::size_t is = static_cast<std::size_t>(i);
    const std::size_t is2 = static_cast<std::size_t>(i + l);
    const double y = labels[is];
    const double without_bias = kb(i);
    if (a[is] > 0.0 && a[is] < c_bound) {
      free_sum += y - without_bias - params.epsilon;
      ++free_count;
    }
    if (a[is2] > 0.0 && a[is2] < c_bound) {
      free_sum += y - without_bias + params.epsilon;
      ++free_count;
    }
    if (a[is] == 0.0) lower = std::max(lower, y - without_bias - params.epsilon);
    if (a[is] == c_bound) upper = std::min(upper, y - without_bias - params.epsilon);
    if (a[is2] == 0.0) upper = std::min(upper, y - without_bias + params.epsilon);
    if (a[is2] == c_bound) lower = std::max(lower, y - without_bias + params.epsilon);
  }
  if (free_count > 0) {
    model.bias = free_sum / free_count;
  } else if (std::isfinite(lower) && std::isfinite(upper)) {
    model.bias = 0.5 * (lower + upper);
  } else if (std::isfinite(lower)) {
    model.bias = lower;
  } else if (std::isfinite(upper)) {
    model.bias = upper;
  }
  return model;
}

std::vector<double> predict(const SvrModel& model, const Eigen::MatrixXd& k_rows) {
  const Eigen::Index l = static_cast<Eigen::Index>(model.dual_coefficients.size());
  if (k_rows.cols() != l) {
    throw std::invalid_argument("predict: kernel row length " +
                                std::to_string(k_rows.cols()) +
                                " does not match training size " + std::to_string(l));
  }
  Eigen::Map<const Eigen::VectorXd> beta(model.dual_coefficients.data(), l);
  const Eigen::VectorXd out = k_rows * beta;
  std::vector<double> predictions(static_cast<std::size_t>(k_rows.rows()));
  for (Eigen::Index r = 0; r < k_rows.rows(); ++r) {
    predictions[static_cast<std::size_t>(r)] = out(r) + model.bias;
  }
  return predictions;
}

double mae(const std::vector<double>& truth, const std::vector<double>& predicted) {
  if (truth.empty() || truth.size() != predicted.size()) {
    throw std::invalid_argument("mae: length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    total += std::abs(truth[i] - predicted[i]);
  }
  return total / static_cast<double>(truth.size());
}

double rmse(const std::vector<double>& truth, const std::vector<double>& predicted) {
  if (truth.empty() || truth.size() != predicted.size()) {
    throw std::invalid_argument("rmse: length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double diff = truth[i] - predicted[i];
    total += diff * diff;
  }
  return std::sqrt(total / static_cast<double>(truth.size()));
}

void write_model(const SvrModel& model, std::ostream& out) {
  char buf[64];
  out << "svr_model v1\n";
  std::snprintf(buf, sizeof(buf), "%.17g", model.c);
  out << "C = " << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", model.epsilon);
  out << "epsilon = " << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", model.bias);
  out << "bias = " << buf << '\n';
  out << "training_size = " << model.dual_coefficients.size() << '\n';
  out << "support_count = " << model.support_indices.size() << '\n';
  for (std::size_t i = 0; i < model.dual_coefficients.size(); ++i) {
    const std::string id =
        i < model.training_ids.size() ? model.training_ids[i] : std::to_string(i);
    std::snprintf(buf, sizeof(buf), "%.17g", model.dual_coefficients[i]);
    out << id << ' ' << buf << '\n';
  }
}

}  // namespace painscore

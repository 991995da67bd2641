#include "painscore/curve_fitting.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace painscore {

namespace {

// Sequentially aligned copies of the trajectory factors: element i is the
// representative of G_i whose optimal alignment rotation against element
// i - 1 is the identity. All fitting happens on these chart values, so the
// gauge freedom of the factors never enters the least-squares problem.
std::vector<Eigen::MatrixXd> aligned_chart(const GramTrajectory& traj,
                                           const Metric& metric) {
  std::vector<Eigen::MatrixXd> chart;
  chart.reserve(traj.size());
  chart.push_back(traj.factor(0));
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const AlignmentRotation rot = (metric.use_closed_form_2d &&
                                   traj.factor(i).cols() == 2 &&
                                   metric.group == RotationGroup::SpecialOrthogonal)
                                      ? optimal_rotation(chart.back(), traj.factor(i),
                                                         metric.group)
                                      : optimal_rotation_svd(chart.back(),
                                                             traj.factor(i),
                                                             metric.group);
    chart.push_back(traj.factor(i) * rot.q);
  }
  return chart;
}

// Anchor positions balancing proximity to the chart data against discrete
// mean square acceleration:
//   min_p  lambda * sum_i ||p_i - x_i||^2 + sum_i ||p_{i-1} - 2 p_i + p_{i+1}||^2.
// One SPD solve shared by every matrix component. The coupling across the
// whole trajectory is what makes both objective terms move monotonically
// with lambda.
std::vector<Eigen::MatrixXd> solve_anchors(const std::vector<Eigen::MatrixXd>& chart,
                                           double lambda) {
  const int length = static_cast<int>(chart.size());
  if (length < 3) return chart;  // the penalty is empty; data wins outright

  Eigen::MatrixXd second_diff = Eigen::MatrixXd::Zero(length - 2, length);
  for (int i = 0; i < length - 2; ++i) {
    second_diff(i, i) = 1.0;
    second_diff(i, i + 1) = -2.0;
    second_diff(i, i + 2) = 1.0;
  }
  const Eigen::MatrixXd system =
      lambda * Eigen::MatrixXd::Identity(length, length) +
      second_diff.transpose() * second_diff;

  const Eigen::Index rows = chart[0].rows();
  const Eigen::Index cols = chart[0].cols();
  Eigen::MatrixXd data(length, rows * cols);
  for (int i = 0; i < length; ++i) {
    data.row(i) =
        Eigen::Map<const Eigen::VectorXd>(chart[static_cast<std::size_t>(i)].data(),
                                          rows * cols)
            .transpose();
  }
  // Solve for the correction p - x; curvature-free data then stays put
  // exactly.
  const Eigen::MatrixXd correction =
      system.ldlt().solve(-second_diff.transpose() * (second_diff * data));

  std::vector<Eigen::MatrixXd> anchors(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    const Eigen::VectorXd row = correction.row(i).transpose();
    anchors[static_cast<std::size_t>(i)] =
        chart[static_cast<std::size_t>(i)] +
        Eigen::Map<const Eigen::MatrixXd>(row.data(), rows, cols);
  }
  return anchors;
}

// Local interpolating curve through an anchor and its immediate neighbors;
// a quadratic in the interior, the chord at the ends. Blending two of these
// over each interval yields a piecewise cubic through all anchors.
struct LocalCurve {
  int lo = 0;
  int hi = 0;
  const std::vector<Eigen::MatrixXd>* anchors = nullptr;

  Eigen::MatrixXd eval(double t) const {
    const auto& p = *anchors;
    if (hi - lo == 1) {
      const double s = t - lo;
      return (1.0 - s) * p[static_cast<std::size_t>(lo)] +
             s * p[static_cast<std::size_t>(hi)];
    }
    // Lagrange quadratic on the nodes lo, lo + 1, lo + 2.
    const double u = t - lo;
    const double w0 = 0.5 * (u - 1.0) * (u - 2.0);
    const double w1 = u * (2.0 - u);
    const double w2 = 0.5 * u * (u - 1.0);
    return w0 * p[static_cast<std::size_t>(lo)] +
           w1 * p[static_cast<std::size_t>(lo + 1)] +
           w2 * p[static_cast<std::size_t>(lo + 2)];
  }
};

LocalCurve local_curve(const std::vector<Eigen::MatrixXd>& anchors, int i) {
  const int length = static_cast<int>(anchors.size());
  LocalCurve curve;
  curve.anchors = &anchors;
  if (length == 2) {
    curve.lo = 0;
    curve.hi = 1;
    return curve;
  }
  curve.lo = std::clamp(i - 1, 0, length - 3);
  curve.hi = curve.lo + 2;
  return curve;
}

}  // namespace

FittedTrajectory fit_trajectory(const GramTrajectory& traj, const FittingConfig& cfg) {
  if (cfg.lambda <= 0.0) {
    throw std::invalid_argument("fit_trajectory: lambda must be positive");
  }
  if (cfg.samples_per_interval < 1) {
    throw std::invalid_argument("fit_trajectory: samples_per_interval must be >= 1");
  }
  for (const auto& config : traj.configurations) {
    if (!config.a.allFinite()) {
      throw std::invalid_argument("fit_trajectory: non-finite factor in sequence '" +
                                  traj.sequence_id + "'");
    }
  }

  FittedTrajectory out;
  out.trajectory = traj;
  const int length = static_cast<int>(traj.size());
  if (length <= 1) return out;  // nothing to smooth

  const std::vector<Eigen::MatrixXd> chart = aligned_chart(traj, cfg.metric);
  const std::vector<Eigen::MatrixXd> anchors = solve_anchors(chart, cfg.lambda);

  std::vector<LocalCurve> curves;
  curves.reserve(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) curves.push_back(local_curve(anchors, i));

  // Sample the blended curve on [0, length - 1]. Anchor times are emitted
  // exactly; in between, gamma_i(s) = (1-s) c_i(i+s) + s c_{i+1}(i+s).
  const int spi = cfg.samples_per_interval;
  const int total = (length - 1) * spi + 1;
  out.trajectory.configurations.clear();
  out.trajectory.times.clear();
  out.trajectory.configurations.reserve(static_cast<std::size_t>(total));
  out.trajectory.times.reserve(static_cast<std::size_t>(total));

  for (int j = 0; j < total; ++j) {
    const double t = static_cast<double>(j) / spi;
    FacialConfiguration sample;
    if (j % spi == 0) {
      sample.a = anchors[static_cast<std::size_t>(j / spi)];
    } else {
      const int interval = std::min(j / spi, length - 2);
      const double s = t - interval;
      sample.a = (1.0 - s) * curves[static_cast<std::size_t>(interval)].eval(t) +
                 s * curves[static_cast<std::size_t>(interval + 1)].eval(t);
    }
    sample.frame_index = j;
    sample.rank_deficient = factor_rank_deficient(sample.a);
    out.trajectory.configurations.push_back(std::move(sample));
    out.trajectory.times.push_back(t);
  }

  // Diagnostics: proximity at the original data times, discrete mean square
  // acceleration of the sampled curve.
  double proximity = 0.0;
  for (int i = 0; i < length; ++i) {
    const Eigen::MatrixXd& fitted =
        out.trajectory.factor(static_cast<std::size_t>(i) * static_cast<std::size_t>(spi));
    const double dist = distance(fitted, traj.factor(static_cast<std::size_t>(i)), cfg.metric);
    proximity += dist * dist;
  }
  out.proximity_error = proximity;
  out.msa = out.trajectory.size() >= 3
                ? mean_square_acceleration(out.trajectory, cfg.metric)
                : 0.0;
  return out;
}

double mean_square_acceleration(const GramTrajectory& traj, const Metric& metric) {
  const std::size_t length = traj.size();
  if (length < 3) {
    throw std::invalid_argument("mean_square_acceleration: need at least 3 points");
  }
  double total = 0.0;
  for (std::size_t i = 1; i + 1 < length; ++i) {
    const Eigen::MatrixXd& base = traj.factor(i);
    const Eigen::MatrixXd fwd = log_map(base, traj.factor(i + 1), metric).direction;
    const Eigen::MatrixXd bwd = log_map(base, traj.factor(i - 1), metric).direction;
    total += (fwd + bwd).squaredNorm();
  }
  return total / static_cast<double>(length - 2);
}

}  // namespace painscore

#include "painscore/psd_manifold.hpp"

#include <cmath>
#include <stdexcept>

namespace painscore {

namespace {

// Cancellation floor for tr G_i + tr G_j - 2 * cross near coincident points.
constexpr double kRadicandClamp = -1e-9;
// Below this fraction of the trace scale the radicand is dominated by
// cancellation noise; the distance is then evaluated as the norm of the
// aligned difference instead.
constexpr double kCancellationThreshold = 1e-8;

void check_radicand(double radicand) {
  if (radicand < kRadicandClamp) {
    throw std::domain_error(
        "psd_manifold: squared distance is negative beyond the numerical "
        "clamp; inputs are likely broken (radicand=" +
        std::to_string(radicand) + ")");
  }
}

void check_shapes(const Eigen::MatrixXd& a_i, const Eigen::MatrixXd& a_j) {
  if (a_i.rows() != a_j.rows() || a_i.cols() != a_j.cols()) {
    throw std::invalid_argument("psd_manifold: factor shapes differ");
  }
}

Eigen::Matrix2d rotation_from_angle(double theta) {
  Eigen::Matrix2d q;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  q << c, -s, s, c;
  return q;
}

// SO(2)-optimal angle: with a_i^T a_j = [[a, b], [c, d]], the cross term
// cos(t)*(a+d) + sin(t)*(b-c) is maximal at atan2(b-c, a+d).
double optimal_angle_2d(const Eigen::Matrix2d& cross) {
  const double co = cross(0, 0) + cross(1, 1);
  const double si = cross(0, 1) - cross(1, 0);
  return std::atan2(si, co);
}

}  // namespace

AlignmentRotation optimal_rotation_svd(const Eigen::MatrixXd& a_i,
                                       const Eigen::MatrixXd& a_j,
                                       RotationGroup group) {
  check_shapes(a_i, a_j);
  const Eigen::MatrixXd cross = a_i.transpose() * a_j;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd u = svd.matrixU();
  Eigen::MatrixXd v = svd.matrixV();
  Eigen::MatrixXd q = v * u.transpose();
  if (group == RotationGroup::SpecialOrthogonal && q.determinant() < 0.0) {
    v.col(v.cols() - 1) *= -1.0;
    q = v * u.transpose();
  }
  AlignmentRotation rot;
  rot.q = q;
  rot.det_sign = q.determinant() < 0.0 ? -1 : 1;
  if (q.rows() == 2) rot.q_2d = q;
  return rot;
}

AlignmentRotation optimal_rotation(const Eigen::MatrixXd& a_i,
                                   const Eigen::MatrixXd& a_j,
                                   RotationGroup group) {
  if (group == RotationGroup::SpecialOrthogonal && a_i.cols() == 2) {
    check_shapes(a_i, a_j);
    const Eigen::Matrix2d cross = a_i.transpose() * a_j;
    const Eigen::Matrix2d q = rotation_from_angle(optimal_angle_2d(cross));
    AlignmentRotation rot;
    rot.q_2d = q;
    rot.q = q;
    rot.det_sign = 1;
    return rot;
  }
  return optimal_rotation_svd(a_i, a_j, group);
}

double distance_svd(const Eigen::MatrixXd& a_i, const Eigen::MatrixXd& a_j,
                    RotationGroup group) {
  check_shapes(a_i, a_j);
  const Eigen::MatrixXd cross = a_i.transpose() * a_j;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
  const Eigen::VectorXd sv = svd.singularValues();
  double cross_term = sv.sum();
  if (group == RotationGroup::SpecialOrthogonal && cross.determinant() < 0.0) {
    // Rotation-only alignment forfeits the smallest singular value twice.
    cross_term -= 2.0 * sv(sv.size() - 1);
  }
  const double trace_i = a_i.squaredNorm();
  const double trace_j = a_j.squaredNorm();
  const double radicand = trace_i + trace_j - 2.0 * cross_term;
  check_radicand(radicand);
  if (radicand <= kCancellationThreshold * (trace_i + trace_j)) {
    return (a_j * optimal_rotation_svd(a_i, a_j, group).q - a_i).norm();
  }
  return std::sqrt(radicand);
}

double distance_2d(const Eigen::MatrixXd& a_i, const Eigen::MatrixXd& a_j) {
  if (a_i.cols() != 2 || a_j.cols() != 2) {
    throw std::invalid_argument("distance_2d: factors must have 2 columns");
  }
  check_shapes(a_i, a_j);
  const Eigen::Matrix2d cross = a_i.transpose() * a_j;
  const double co = cross(0, 0) + cross(1, 1);
  const double si = cross(1, 0) - cross(0, 1);
  const double cross_term = std::hypot(co, si);
  const double trace_i = a_i.squaredNorm();
  const double trace_j = a_j.squaredNorm();
  const double radicand = trace_i + trace_j - 2.0 * cross_term;
  check_radicand(radicand);
  if (radicand <= kCancellationThreshold * (trace_i + trace_j)) {
    const Eigen::Matrix2d q = rotation_from_angle(std::atan2(-si, co));
    return (a_j * q - a_i).norm();
  }
  return std::sqrt(radicand);
}

double distance(const Eigen::MatrixXd& a_i, const Eigen::MatrixXd& a_j,
                const Metric& metric) {
  if (metric.use_closed_form_2d && a_i.cols() == 2 &&
      metric.group == RotationGroup::SpecialOrthogonal) {
    return distance_2d(a_i, a_j);
  }
  return distance_svd(a_i, a_j, metric.group);
}

TangentVector log_map(const Eigen::MatrixXd& base,
                      const Eigen::MatrixXd& target, const Metric& metric) {
  const AlignmentRotation rot = (metric.use_closed_form_2d && base.cols() == 2 &&
                                 metric.group == RotationGroup::SpecialOrthogonal)
                                    ? optimal_rotation(base, target, metric.group)
                                    : optimal_rotation_svd(base, target, metric.group);
  TangentVector tv;
  tv.base_factor = base;
  tv.direction = target * rot.q - base;
  return tv;
}

ExpMapResult exp_map(const Eigen::MatrixXd& base, const TangentVector& tangent) {
  if (tangent.base_factor.rows() != base.rows() ||
      tangent.base_factor.cols() != base.cols() ||
      (tangent.base_factor - base).norm() > 1e-9 * (1.0 + base.norm())) {
    throw std::invalid_argument("exp_map: tangent vector is not based at the given factor");
  }
  ExpMapResult out;
  out.factor = base + tangent.direction;
  out.rank_deficient = factor_rank_deficient(out.factor);
  return out;
}

bool factor_rank_deficient(const Eigen::MatrixXd& factor, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(factor);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv.size() == 0) return true;
  return sv(sv.size() - 1) <= rel_tol * sv(0);
}

}  // namespace painscore

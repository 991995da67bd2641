#ifndef PAINSCORE_PSD_MANIFOLD_HPP
#define PAINSCORE_PSD_MANIFOLD_HPP

#include <Eigen/Dense>

// Geometry of the manifold of m x m positive-semidefinite matrices of fixed
// rank d, modeled as the quotient of full-rank m x d factors by the
// orthogonal group O(d). Points are always carried by their factors; the
// m x m Gram matrix is never materialized here.

namespace painscore {

enum class RotationGroup {
  Orthogonal,         // O(d): rotations and reflections
  SpecialOrthogonal,  // SO(d): rotations only
};

// Metric configuration shared by every distance/log/exp call in a pipeline.
// The d = 2 closed form is the default; it is the SO(2) optimum and avoids a
// per-pair SVD.
struct Metric {
  RotationGroup group = RotationGroup::SpecialOrthogonal;
  bool use_closed_form_2d = true;
};

struct AlignmentRotation {
  Eigen::Matrix2d q_2d;     // valid when d == 2
  Eigen::MatrixXd q;        // d x d, always valid
  int det_sign = 1;         // sign of det(q)
};

struct TangentVector {
  Eigen::MatrixXd base_factor;  // m x d factor of the base point
  Eigen::MatrixXd direction;    // horizontal lift, same shape as base
};

struct ExpMapResult {
  Eigen::MatrixXd factor;
  bool rank_deficient = false;  // mapped point left the rank-d stratum
};

// Q minimizing ||a_j * Q - a_i||_F over the chosen group, from the SVD of
// a_i^T a_j. Kept as the reference path for any d and for cross-checks
// against the closed form below.
AlignmentRotation optimal_rotation_svd(const Eigen::MatrixXd& a_i,
                                       const Eigen::MatrixXd& a_j,
                                       RotationGroup group);

// Dispatching front end: d == 2 with SO(2) uses the closed-form angle,
// everything else falls back to the SVD path.
AlignmentRotation optimal_rotation(const Eigen::MatrixXd& a_i,
                                   const Eigen::MatrixXd& a_j,
                                   RotationGroup group);

// Quotient distance min_Q ||a_j * Q - a_i||_F via singular values of
// a_i^T a_j. Works for any d.
double distance_svd(const Eigen::MatrixXd& a_i, const Eigen::MatrixXd& a_j,
                    RotationGroup group);

// Closed form for d = 2:
//   sqrt(tr G_i + tr G_j - 2 * sqrt((a+d)^2 + (c-b)^2))
// with a_i^T a_j = [[a, b], [c, d]]. This is the SO(2)-optimal value; it
// coincides with the O(2) distance exactly when det(a_i^T a_j) >= 0.
double distance_2d(const Eigen::MatrixXd& a_i, const Eigen::MatrixXd& a_j);

// Metric-configured distance used by the pipeline.
double distance(const Eigen::MatrixXd& a_i, const Eigen::MatrixXd& a_j,
                const Metric& metric = Metric{});

// Horizontal lift of the geodesic direction from base towards target:
// direction = target * Q - base, with ||direction||_F = distance.
TangentVector log_map(const Eigen::MatrixXd& base,
                      const Eigen::MatrixXd& target,
                      const Metric& metric = Metric{});

// Maps a tangent vector back to a factor: base + direction. Flags the result
// when it is numerically rank deficient.
ExpMapResult exp_map(const Eigen::MatrixXd& base, const TangentVector& tangent);

// Rank check used by exp_map and the face representation: smallest singular
// value below rel_tol times the largest.
bool factor_rank_deficient(const Eigen::MatrixXd& factor, double rel_tol = 1e-12);

}  // namespace painscore

#endif

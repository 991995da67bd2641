#ifndef PAINSCORE_FACE_REPRESENTATION_HPP
#define PAINSCORE_FACE_REPRESENTATION_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "painscore/landmark_io.hpp"

// Turns a landmark sequence into centered configuration matrices
// (coordinates stacked on velocities) and the trajectory of their Gram
// matrices. Gram matrices are represented by their factors throughout.

namespace painscore {

struct FacialConfiguration {
  // m x 2 factor, m = 2n: rows [0, n) centered coordinates, rows [n, 2n)
  // centered velocities.
  Eigen::MatrixXd a;
  int frame_index = 0;
  bool rank_deficient = false;  // rank(a) < 2, degenerate configuration
};

// Gram matrix of a configuration, stored by its factor.
class GramMatrix {
 public:
  explicit GramMatrix(Eigen::MatrixXd factor) : factor_(std::move(factor)) {}
  const Eigen::MatrixXd& factor() const { return factor_; }
  // G = A A^T, symmetric PSD of rank <= 2.
  Eigen::MatrixXd materialize() const { return factor_ * factor_.transpose(); }
  double trace() const { return factor_.squaredNorm(); }

 private:
  Eigen::MatrixXd factor_;
};

struct GramTrajectory {
  std::vector<FacialConfiguration> configurations;
  std::vector<double> times;  // strictly increasing, t_i = i for raw data
  std::string sequence_id;
  std::string subject_id;
  double vas_label = 0.0;

  std::size_t size() const { return configurations.size(); }
  const Eigen::MatrixXd& factor(std::size_t i) const { return configurations[i].a; }
};

// Subtracts the column-wise mean from a k x 2 block.
Eigen::MatrixXd center(const Eigen::MatrixXd& block);

// Forward differences Z_{F+1} - Z_F, one per frame except the last.
std::vector<Eigen::MatrixXd> compute_velocities(const LandmarkSequence& seq);

// Gram matrix of a configuration factor. Throws on non-finite entries.
GramMatrix gram(const FacialConfiguration& config);

// Builds the Gram trajectory of a sequence: element F pairs frame F with its
// forward velocity, so the trajectory has frame_count - 1 elements.
GramTrajectory build_trajectory(const LandmarkSequence& seq);

}  // namespace painscore

#endif

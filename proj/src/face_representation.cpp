#include "painscore/face_representation.hpp"

#include <stdexcept>

#include "painscore/psd_manifold.hpp"

namespace painscore {

Eigen::MatrixXd center(const Eigen::MatrixXd& block) {
  if (block.rows() < 1) throw std::invalid_argument("center: empty block");
  return block.rowwise() - block.colwise().mean();
}

std::vector<Eigen::MatrixXd> compute_velocities(const LandmarkSequence& seq) {
  if (seq.frames.size() < 2) {
    throw std::invalid_argument("compute_velocities: sequence '" + seq.sequence_id +
                                "' has fewer than 2 frames");
  }
  std::vector<Eigen::MatrixXd> velocities;
  velocities.reserve(seq.frames.size() - 1);
  for (std::size_t f = 0; f + 1 < seq.frames.size(); ++f) {
    velocities.push_back(seq.frames[f + 1] - seq.frames[f]);
  }
  return velocities;
}

GramMatrix gram(const FacialConfiguration& config) {
  if (!config.a.allFinite()) {
    throw std::invalid_argument("gram: configuration has non-finite entries");
  }
  return GramMatrix(config.a);
}

GramTrajectory build_trajectory(const LandmarkSequence& seq) {
  const auto velocities = compute_velocities(seq);
  GramTrajectory traj;
  traj.sequence_id = seq.sequence_id;
  traj.subject_id = seq.subject_id;
  traj.vas_label = seq.vas_label;
  traj.configurations.reserve(velocities.size());
  traj.times.reserve(velocities.size());
  // The last frame has no forward velocity, so the trajectory is one element
  // shorter than the sequence.
  for (std::size_t f = 0; f < velocities.size(); ++f) {
    const Eigen::Index n = seq.frames[f].rows();
    FacialConfiguration config;
    config.a.resize(2 * n, 2);
    config.a.topRows(n) = center(seq.frames[f]);
    config.a.bottomRows(n) = center(velocities[f]);
    config.frame_index = static_cast<int>(f);
    config.rank_deficient = factor_rank_deficient(config.a, 1e-12);
    traj.configurations.push_back(std::move(config));
    traj.times.push_back(static_cast<double>(f));
  }
  return traj;
}

}  // namespace painscore

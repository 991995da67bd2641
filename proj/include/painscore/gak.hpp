#ifndef PAINSCORE_GAK_HPP
#define PAINSCORE_GAK_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "painscore/face_representation.hpp"
#include "painscore/psd_manifold.hpp"

// Global Alignment Kernel between Gram trajectories, and assembly of the
// full similarity matrix K. The per-pair score sums, over every monotone
// alignment path, the product of local kernel values
//   k(i, j) = ktilde / (1 - ktilde),  ktilde = 0.5 * exp(-D(i, j) / sigma^2),
// via the dynamic program
//   M[i][j] = (M[i][j-1] + M[i-1][j-1] + M[i-1][j]) * k(i, j)
// on a (tau1+1) x (tau2+1) table with M[0][0] = 1. The recursion is carried
// in the log domain so long sequences cannot underflow; the linear-domain
// table is kept alongside and returned whenever it stays in range, which
// keeps short benign cases exact.

namespace painscore {

struct CrossDistanceMatrix {
  Eigen::MatrixXd d;  // tau1 x tau2, nonnegative
};

struct SimilarityKernel {
  Eigen::MatrixXd k;                      // n_seq x n_seq, symmetric
  double sigma = 0.8;
  double distance_scale = 1.0;            // divisor applied to D before Eq. of k
  bool kernel_normalized = false;         // K(p,q) / sqrt(K(p,p) K(q,q))
  double jitter = 0.0;                    // diagonal jitter applied, 0 = none
  double min_eigenvalue = 0.0;            // before jitter
  double max_eigenvalue = 0.0;
  std::vector<std::string> sequence_ids;  // ordered as the rows of k
  // Provenance of the trajectories, recorded in the cache so a reload can be
  // checked against the requested pipeline parameters. 0 = unspecified.
  double fitting_lambda = 0.0;
  int frame_stride = 0;

  std::size_t size() const { return sequence_ids.size(); }
};

struct GakOptions {
  double sigma = 0.8;
  // Divide all cross distances by their dataset median before the local
  // kernel. Off by default: sigma then applies to raw distances.
  bool normalize_distances = false;
  // Rescale the assembled kernel to unit diagonal (computed from the
  // log-domain scores, so it is safe even when the raw scores over- or
  // underflow a double).
  bool normalize_kernel = false;
  int workers = 1;
  Metric metric;
};

// Pairwise manifold distances between the elements of two trajectories.
CrossDistanceMatrix cross_distance_matrix(const GramTrajectory& t1,
                                          const GramTrajectory& t2,
                                          const Metric& metric = Metric{});

// Local kernel values k in (0, 1]; k = 1 iff D = 0.
Eigen::MatrixXd local_kernel(const CrossDistanceMatrix& d, double sigma);

struct GakScore {
  double similarity = 0.0;      // exp(log_similarity) or the exact linear value
  double log_similarity = 0.0;
  bool linear_exact = false;    // the linear-domain table never left range
};

GakScore gak_score_from_distances(const Eigen::MatrixXd& d, double sigma);

double gak_similarity(const GramTrajectory& t1, const GramTrajectory& t2,
                      double sigma, const Metric& metric = Metric{});
double gak_log_similarity(const GramTrajectory& t1, const GramTrajectory& t2,
                          double sigma, const Metric& metric = Metric{});

// Assembles the full symmetric kernel over a dataset of trajectories, with
// eigenvalue diagnostics. The upper triangle is computed once; a diagonal
// jitter is added (and recorded) only when min_eig < -1e-6 * max_eig.
SimilarityKernel build_kernel_matrix(const std::vector<GramTrajectory>& trajectories,
                                     const GakOptions& options);

// Binary cache, little-endian; reload reproduces the kernel bitwise.
void save_kernel_cache(const SimilarityKernel& kernel, std::ostream& out);
SimilarityKernel load_kernel_cache(std::istream& in);

// Text export: header row of ids, then one row per sequence.
void write_kernel_csv(const SimilarityKernel& kernel, std::ostream& out);

}  // namespace painscore

#endif

#ifndef PAINSCORE_CURVE_FITTING_HPP
#define PAINSCORE_CURVE_FITTING_HPP

#include "painscore/face_representation.hpp"
#include "painscore/psd_manifold.hpp"

// Smooths a Gram trajectory with composite cubic blended curves. The factors
// are first carried into a common gauge by sequential optimal alignment;
// anchor points then solve one coupled least-squares problem balancing
// proximity to the data against discrete mean-square acceleration, and the
// continuous curve blends local interpolants through neighboring anchors:
// gamma_i(s) = (1-s) c_i(i+s) + s c_{i+1}(i+s) on [i, i+1]. Large lambda
// approaches interpolation of the data, small lambda approaches the flattest
// admissible curve.

namespace painscore {

struct FittingConfig {
  double lambda = 1000.0;        // proximity weight, > 0
  int samples_per_interval = 1;  // 1 = resample at the original t_i only
  Metric metric;
};

struct FittedTrajectory {
  GramTrajectory trajectory;
  double proximity_error = 0.0;  // sum of d(beta(t_i), G_i)^2 at data times
  double msa = 0.0;              // discrete mean square acceleration
};

FittedTrajectory fit_trajectory(const GramTrajectory& traj, const FittingConfig& cfg);

// Discrete second differences in tangent spaces:
//   a_i = log_{G_i}(G_{i+1}) + log_{G_i}(G_{i-1}),
// averaged as ||a_i||_F^2 over interior points. Length must be >= 3.
double mean_square_acceleration(const GramTrajectory& traj, const Metric& metric = Metric{});

}  // namespace painscore

#endif

#ifndef PAINSCORE_REGRESSION_HPP
#define PAINSCORE_REGRESSION_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

// Epsilon-insensitive support vector regression on a precomputed kernel.
// The dual is solved by sequential optimization of maximal-violating pairs,
// libsvm style, to a first-order KKT tolerance.

namespace painscore {

struct SvrParams {
  double c = 1.0;
  double epsilon = 0.1;
  double kkt_tolerance = 1e-3;
};

struct SvrModel {
  std::vector<double> dual_coefficients;  // alpha_i - alpha_i*, |.| <= C
  double bias = 0.0;
  std::vector<std::size_t> support_indices;
  double c = 1.0;
  double epsilon = 0.1;
  std::vector<std::string> training_ids;
};

struct PredictionRow {
  std::string sequence_id;
  std::string subject_id;
  double true_vas = 0.0;
  double predicted_raw = 0.0;
  double predicted_clipped = 0.0;  // clamped to [0, 10]
  int fold = 0;
};

struct PredictionReport {
  std::vector<PredictionRow> rows;
  double mae = 0.0;           // on raw predictions
  double rmse = 0.0;
  double mae_rounded = 0.0;   // clipped predictions rounded to integer VAS
};

// Trains on the training block of the kernel. K must be square, symmetric
// within 1e-8, and PSD up to jitter; labels in [0, 10].
SvrModel train_svr(const Eigen::MatrixXd& k_train, const std::vector<double>& labels,
                   const SvrParams& params,
                   const std::vector<std::string>& training_ids = {});

// prediction = sum_i dual_i * k_row(i) + bias, one output per row of k_rows.
std::vector<double> predict(const SvrModel& model, const Eigen::MatrixXd& k_rows);

double mae(const std::vector<double>& truth, const std::vector<double>& predicted);
double rmse(const std::vector<double>& truth, const std::vector<double>& predicted);

// Text dump (ids, duals, bias, hyperparameters) for reproducibility.
void write_model(const SvrModel& model, std::ostream& out);

}  // namespace painscore

#endif

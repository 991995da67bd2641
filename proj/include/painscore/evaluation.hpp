#ifndef PAINSCORE_EVALUATION_HPP
#define PAINSCORE_EVALUATION_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "painscore/curve_fitting.hpp"
#include "painscore/gak.hpp"
#include "painscore/landmark_io.hpp"
#include "painscore/regression.hpp"

// Cross-validation protocols and the end-to-end pipeline:
// downsample -> trajectory -> curve fit -> kernel -> SVR -> pooled metrics.
// The kernel is computed once per parameter setting and sliced per fold.

namespace painscore {

enum class ProtocolKind {
  LeaveOneSequenceOut,
  LeaveOneSubjectOut,
  FiveFoldBySubject,
};

std::string protocol_name(ProtocolKind kind);

struct SvrSearchConfig {
  SvrParams params;
  // Grid search over C x epsilon on an inner 80/20 split carved from the
  // training sequences of each fold; test data is never touched.
  bool grid_search = false;
};

struct ProtocolSpec {
  ProtocolKind kind = ProtocolKind::FiveFoldBySubject;
  int frame_stride = 4;  // 1 = all frames, 4 = 25% of frames
  FittingConfig fitting;
  GakOptions gak;
  SvrSearchConfig svr;
  bool macro_average = false;  // headline metrics pooled by default
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct FoldPlan {
  std::vector<Fold> folds;
  bool remainder_fold = false;  // subject count not divisible by 5
};

struct FoldSummary {
  int fold = 0;
  std::size_t test_count = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double svr_c = 1.0;
  double svr_epsilon = 0.1;
};

struct ProtocolResult {
  PredictionReport report;  // pooled over all fold test predictions
  std::vector<FoldSummary> folds;
  double baseline_mae = 0.0;   // predict-training-mean baseline, pooled
  double baseline_rmse = 0.0;
  double macro_mae = 0.0;      // mean of per-fold MAEs
  FoldPlan plan;
  SimilarityKernel kernel;
  std::vector<std::string> notes;
};

// Test sets partition the dataset; leave-one-subject-out folds never share a
// subject between train and test.
FoldPlan make_folds(const Dataset& dataset, ProtocolKind kind);

// downsample -> build_trajectory -> fit_trajectory for every sequence.
std::vector<GramTrajectory> prepare_trajectories(const Dataset& dataset, int stride,
                                                 const FittingConfig& fitting);

ProtocolResult run_protocol(const Dataset& dataset, const ProtocolSpec& spec);

// Same, reusing a previously assembled kernel (ids must match the dataset).
ProtocolResult run_protocol(const Dataset& dataset, const ProtocolSpec& spec,
                            const SimilarityKernel& kernel);

// CSV rows `sequence_id,subject_id,true_vas,predicted_raw,predicted_clipped,
// fold`, preceded by a comment header with the least-squares line of
// predicted against true.
void export_predictions(const PredictionReport& report, std::ostream& out);

// Least-squares line of predicted (raw) against true VAS.
struct LeastSquaresLine {
  double slope = 0.0;
  double intercept = 0.0;
  bool degenerate = false;  // fewer than 2 points or no spread in truth
};
LeastSquaresLine prediction_trend(const PredictionReport& report);

// Summary table: Protocol, % of frames, MAE, RMSE.
void write_summary(const ProtocolResult& result, const ProtocolSpec& spec,
                   std::ostream& out);

}  // namespace painscore

#endif

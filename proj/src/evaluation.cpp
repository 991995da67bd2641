#include "painscore/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "parallel.hpp"

namespace painscore {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Eigen::MatrixXd slice_kernel(const Eigen::MatrixXd& k,
                             const std::vector<std::size_t>& rows,
                             const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          k(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
    }
  }
  return out;
}

struct FoldOutcome {
  std::vector<PredictionRow> rows;
  double baseline_mean = 0.0;
  FoldSummary summary;
};

const std::vector<double>& grid_c_values() {
  static const std::vector<double> v{0.1, 1.0, 10.0, 100.0};
  return v;
}

const std::vector<double>& grid_epsilon_values() {
  static const std::vector<double> v{0.01, 0.1, 0.5, 1.0};
  return v;
}

// Inner 80/20 split by sequence: every fifth training sequence validates.
SvrParams grid_search_params(const Eigen::MatrixXd& kernel,
                             const std::vector<std::size_t>& train,
                             const std::vector<double>& labels,
                             const SvrParams& base) {
  std::vector<std::size_t> inner_train;
  std::vector<std::size_t> inner_val;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (i % 5 == 4) {
      inner_val.push_back(train[i]);
    } else {
      inner_train.push_back(train[i]);
    }
  }
  if (inner_val.empty() || inner_train.size() < 2) return base;

  std::vector<double> y_train;
  y_train.reserve(inner_train.size());
  for (auto i : inner_train) y_train.push_back(labels[i]);
  std::vector<double> y_val;
  y_val.reserve(inner_val.size());
  for (auto i : inner_val) y_val.push_back(labels[i]);

  const Eigen::MatrixXd k_inner = slice_kernel(kernel, inner_train, inner_train);
  const Eigen::MatrixXd k_val = slice_kernel(kernel, inner_val, inner_train);

  SvrParams best = base;
  double best_mae = std::numeric_limits<double>::infinity();
  for (double c : grid_c_values()) {
    for (double eps : grid_epsilon_values()) {
      SvrParams candidate = base;
      candidate.c = c;
      candidate.epsilon = eps;
      try {
        const SvrModel model = train_svr(k_inner, y_train, candidate);
        const double score = mae(y_val, predict(model, k_val));
        if (score < best_mae) {
          best_mae = score;
          best = candidate;
        }
      } catch (const std::exception&) {
        // A candidate that fails to converge is simply skipped.
      }
    }
  }
  return best;
}

void finalize_metrics(PredictionReport& report) {
  std::vector<double> truth;
  std::vector<double> raw;
  std::vector<double> rounded;
  truth.reserve(report.rows.size());
  raw.reserve(report.rows.size());
  rounded.reserve(report.rows.size());
  for (const auto& row : report.rows) {
    truth.push_back(row.true_vas);
    raw.push_back(row.predicted_raw);
    rounded.push_back(std::round(row.predicted_clipped));
  }
  report.mae = mae(truth, raw);
  report.rmse = rmse(truth, raw);
  report.mae_rounded = mae(truth, rounded);
}

}  // namespace

std::string protocol_name(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::LeaveOneSequenceOut:
      return "Leave-One-Sequence-Out";
    case ProtocolKind::LeaveOneSubjectOut:
      return "Leave-One-Subject-Out";
    case ProtocolKind::FiveFoldBySubject:
      return "5-fold cross validation";
  }
  return "unknown";
}

FoldPlan make_folds(const Dataset& dataset, ProtocolKind kind) {
  const std::size_t n = dataset.size();
  if (n == 0) throw std::invalid_argument("make_folds: empty dataset");
  FoldPlan plan;

  std::unordered_map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < n; ++i) {
    by_subject[dataset.sequences[i].subject_id].push_back(i);
  }

  auto complement = [n](const std::vector<std::size_t>& test) {
    std::vector<bool> is_test(n, false);
    for (auto i : test) is_test[i] = true;
    std::vector<std::size_t> train;
    train.reserve(n - test.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_test[i]) train.push_back(i);
    }
    return train;
  };

  switch (kind) {
    case ProtocolKind::LeaveOneSequenceOut:
      for (std::size_t i = 0; i < n; ++i) {
        Fold fold;
        fold.test = {i};
        fold.train = complement(fold.test);
        plan.folds.push_back(std::move(fold));
      }
      break;
    case ProtocolKind::LeaveOneSubjectOut:
      for (const auto& subject : dataset.subjects) {
        Fold fold;
        fold.test = by_subject.at(subject);
        fold.train = complement(fold.test);
        plan.folds.push_back(std::move(fold));
      }
      break;
    case ProtocolKind::FiveFoldBySubject: {
      const std::size_t subjects = dataset.subjects.size();
      if (subjects < 5) {
        throw std::invalid_argument(
            "make_folds: 5-fold-by-subject needs at least 5 subjects, got " +
            std::to_string(subjects));
      }
      plan.remainder_fold = subjects % 5 != 0;
      for (std::size_t start = 0; start < subjects; start += 5) {
        const std::size_t stop = std::min(start + 5, subjects);
        Fold fold;
        for (std::size_t s = start; s < stop; ++s) {
          const auto& ids = by_subject.at(dataset.subjects[s]);
          fold.test.insert(fold.test.end(), ids.begin(), ids.end());
        }
        std::sort(fold.test.begin(), fold.test.end());
        fold.train = complement(fold.test);
        plan.folds.push_back(std::move(fold));
      }
      break;
    }
  }

  // Structural guarantees: disjoint train/test per fold, test sets partition
  // the dataset.
  std::vector<int> seen(n, 0);
  for (const auto& fold : plan.folds) {
    std::set<std::size_t> train_set(fold.train.begin(), fold.train.end());
    for (auto i : fold.test) {
      if (train_set.count(i) > 0) {
        throw std::logic_error("make_folds: train and test overlap");
      }
      seen[i] += 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i] != 1) {
      throw std::logic_error("make_folds: test sets do not partition the dataset");
    }
  }
  return plan;
}

std::vector<GramTrajectory> prepare_trajectories(const Dataset& dataset, int stride,
                                                 const FittingConfig& fitting) {
  std::vector<GramTrajectory> out;
  out.reserve(dataset.size());
  for (const auto& seq : dataset.sequences) {
    try {
      const LandmarkSequence reduced = downsample(seq, stride);
      out.push_back(fit_trajectory(build_trajectory(reduced), fitting).trajectory);
    } catch (const std::exception& e) {
      throw std::runtime_error("sequence '" + seq.sequence_id + "': " + e.what());
    }
  }
  return out;
}

ProtocolResult run_protocol(const Dataset& dataset, const ProtocolSpec& spec) {
  GakOptions gak = spec.gak;
  gak.metric = spec.fitting.metric;
  const std::vector<GramTrajectory> trajectories =
      prepare_trajectories(dataset, spec.frame_stride, spec.fitting);
  SimilarityKernel kernel = build_kernel_matrix(trajectories, gak);
  kernel.fitting_lambda = spec.fitting.lambda;
  kernel.frame_stride = spec.frame_stride;
  return run_protocol(dataset, spec, kernel);
}

ProtocolResult run_protocol(const Dataset& dataset, const ProtocolSpec& spec,
                            const SimilarityKernel& kernel) {
  const std::size_t n = dataset.size();
  if (kernel.size() != n) {
    throw std::invalid_argument("run_protocol: kernel size " +
                                std::to_string(kernel.size()) +
                                " does not match dataset size " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (kernel.sequence_ids[i] != dataset.sequences[i].sequence_id) {
      throw std::invalid_argument("run_protocol: kernel ids do not match dataset (at '" +
                                  dataset.sequences[i].sequence_id + "')");
    }
  }
  if (spec.frame_stride < 1) {
    throw std::invalid_argument("run_protocol: stride must be >= 1");
  }

  ProtocolResult result;
  result.kernel = kernel;
  if (spec.frame_stride != 1 && spec.frame_stride != 4) {
    result.notes.push_back("nonstandard frame stride " +
                           std::to_string(spec.frame_stride));
  }
  result.plan = make_folds(dataset, spec.kind);

  std::vector<double> labels;
  labels.reserve(n);
  for (const auto& seq : dataset.sequences) labels.push_back(seq.vas_label);

  std::vector<FoldOutcome> outcomes(result.plan.folds.size());
  detail::parallel_for(result.plan.folds.size(), spec.gak.workers, [&](std::size_t f) {
    const Fold& fold = result.plan.folds[f];
    FoldOutcome& outcome = outcomes[f];
    try {
      std::vector<double> train_labels;
      train_labels.reserve(fold.train.size());
      for (auto i : fold.train) train_labels.push_back(labels[i]);

      std::vector<std::string> train_ids;
      train_ids.reserve(fold.train.size());
      for (auto i : fold.train) {
        train_ids.push_back(dataset.sequences[i].sequence_id);
      }

      const Eigen::MatrixXd k_train = slice_kernel(kernel.k, fold.train, fold.train);
      SvrParams params = spec.svr.params;
      if (spec.svr.grid_search) {
        params = grid_search_params(kernel.k, fold.train, labels, spec.svr.params);
      }
      const SvrModel model = train_svr(k_train, train_labels, params, train_ids);

      const Eigen::MatrixXd k_test = slice_kernel(kernel.k, fold.test, fold.train);
      const std::vector<double> predictions = predict(model, k_test);

      double mean_label = 0.0;
      for (double y : train_labels) mean_label += y;
      mean_label /= static_cast<double>(train_labels.size());
      outcome.baseline_mean = mean_label;

      std::vector<double> truth;
      truth.reserve(fold.test.size());
      for (std::size_t t = 0; t < fold.test.size(); ++t) {
        const auto& seq = dataset.sequences[fold.test[t]];
        PredictionRow row;
        row.sequence_id = seq.sequence_id;
        row.subject_id = seq.subject_id;
        row.true_vas = seq.vas_label;
        row.predicted_raw = predictions[t];
        row.predicted_clipped = std::clamp(predictions[t], 0.0, 10.0);
        row.fold = static_cast<int>(f);
        outcome.rows.push_back(std::move(row));
        truth.push_back(seq.vas_label);
      }
      outcome.summary.fold = static_cast<int>(f);
      outcome.summary.test_count = fold.test.size();
      outcome.summary.mae = mae(truth, predictions);
      outcome.summary.rmse = rmse(truth, predictions);
      outcome.summary.svr_c = params.c;
      outcome.summary.svr_epsilon = params.epsilon;
    } catch (const std::exception& e) {
      throw std::runtime_error("fold " + std::to_string(f) + ": " + e.what());
    }
  });

  std::vector<double> truth_all;
  std::vector<double> baseline_all;
  truth_all.reserve(n);
  baseline_all.reserve(n);
  double macro_sum = 0.0;
  for (auto& outcome : outcomes) {
    for (auto& row : outcome.rows) {
      truth_all.push_back(row.true_vas);
      baseline_all.push_back(outcome.baseline_mean);
      result.report.rows.push_back(std::move(row));
    }
    macro_sum += outcome.summary.mae;
    result.folds.push_back(outcome.summary);
  }
  finalize_metrics(result.report);
  result.baseline_mae = mae(truth_all, baseline_all);
  result.baseline_rmse = rmse(truth_all, baseline_all);
  result.macro_mae = macro_sum / static_cast<double>(outcomes.size());
  return result;
}

LeastSquaresLine prediction_trend(const PredictionReport& report) {
  LeastSquaresLine line;
  const std::size_t n = report.rows.size();
  if (n < 2) {
    line.degenerate = true;
    return line;
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& row : report.rows) {
    sx += row.true_vas;
    sy += row.predicted_raw;
    sxx += row.true_vas * row.true_vas;
    sxy += row.true_vas * row.predicted_raw;
  }
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  if (std::abs(denom) < 1e-12 * std::max(1.0, sxx * static_cast<double>(n))) {
    line.degenerate = true;  // no spread in the true labels
    return line;
  }
  line.slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
  line.intercept = (sy - line.slope * sx) / static_cast<double>(n);
  return line;
}

void export_predictions(const PredictionReport& report, std::ostream& out) {
  if (report.rows.empty()) {
    throw std::invalid_argument("export_predictions: empty report");
  }
  const LeastSquaresLine line = prediction_trend(report);
  if (line.degenerate) {
    out << "# least_squares: degenerate\n";
  } else {
    out << "# least_squares: slope=" << format_double(line.slope)
        << " intercept=" << format_double(line.intercept) << '\n';
  }
  out << "sequence_id,subject_id,true_vas,predicted_raw,predicted_clipped,fold\n";
  for (const auto& row : report.rows) {
    out << row.sequence_id << ',' << row.subject_id << ','
        << format_double(row.true_vas) << ',' << format_double(row.predicted_raw)
        << ',' << format_double(row.predicted_clipped) << ',' << row.fold << '\n';
  }
}

void write_summary(const ProtocolResult& result, const ProtocolSpec& spec,
                   std::ostream& out) {
  char buf[256];
  const double percent = 100.0 / spec.frame_stride;
  out << "Protocol                                 % of frames  MAE       RMSE\n";
  std::snprintf(buf, sizeof(buf), "%-40s %5.6g%%      %-9.6g %-9.6g\n",
                protocol_name(spec.kind).c_str(), percent,
                spec.macro_average ? result.macro_mae : result.report.mae,
                result.report.rmse);
  out << buf;
  std::snprintf(buf, sizeof(buf), "# folds=%zu baseline_mae=%.6g mae_rounded=%.6g\n",
                result.folds.size(), result.baseline_mae, result.report.mae_rounded);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "# kernel: sigma=%.6g distance_scale=%.9g normalized=%d "
                "min_eig=%.6g max_eig=%.6g jitter=%.6g\n",
                result.kernel.sigma, result.kernel.distance_scale,
                result.kernel.kernel_normalized ? 1 : 0, result.kernel.min_eigenvalue,
                result.kernel.max_eigenvalue, result.kernel.jitter);
  out << buf;
  for (const auto& note : result.notes) out << "# note: " << note << '\n';
}

}  // namespace painscore

#include "painscore/evaluation.hpp"

#include <random>
#include <set>
#include <sstream>

#include "doctest.h"

using namespace painscore;

namespace {

Dataset small_dataset(int subjects = 6, int seqs = 3, std::uint64_t seed = 7) {
  GeneratorSpec spec;
  spec.subjects = subjects;
  spec.seqs_per_subject = seqs;
  spec.frames_min = 9;
  spec.frames_max = 13;
  spec.landmarks = 6;
  spec.noise_sigma = 0.05;
  return generate_synthetic(spec, seed);
}

ProtocolSpec small_spec(ProtocolKind kind) {
  ProtocolSpec spec;
  spec.kind = kind;
  spec.frame_stride = 1;
  spec.fitting.lambda = 1000.0;
  spec.gak.sigma = 0.8;
  spec.gak.normalize_distances = true;
  spec.gak.normalize_kernel = true;
  spec.svr.params.kkt_tolerance = 1e-6;
  return spec;
}

}  // namespace

TEST_CASE("fold counts per protocol") {
  const Dataset d = small_dataset(25, 8);
  REQUIRE(d.size() == 200);

  const FoldPlan seq_plan = make_folds(d, ProtocolKind::LeaveOneSequenceOut);
  CHECK(seq_plan.folds.size() == 200);
  for (const auto& fold : seq_plan.folds) {
    CHECK(fold.test.size() == 1);
    CHECK(fold.train.size() == 199);
  }

  const FoldPlan subj_plan = make_folds(d, ProtocolKind::LeaveOneSubjectOut);
  CHECK(subj_plan.folds.size() == 25);

  const FoldPlan five_plan = make_folds(d, ProtocolKind::FiveFoldBySubject);
  CHECK(five_plan.folds.size() == 5);
  CHECK_FALSE(five_plan.remainder_fold);
  for (const auto& fold : five_plan.folds) CHECK(fold.test.size() == 40);

  // Five consecutive subjects in dataset order make up each fold.
  for (std::size_t f = 0; f < five_plan.folds.size(); ++f) {
    std::set<std::string> fold_subjects;
    for (auto i : five_plan.folds[f].test) {
      fold_subjects.insert(d.sequences[i].subject_id);
    }
    REQUIRE(fold_subjects.size() == 5);
    for (std::size_t s = 0; s < 5; ++s) {
      CHECK(fold_subjects.count(d.subjects[5 * f + s]) == 1);
    }
  }
}

TEST_CASE("no subject overlap in leave-one-subject-out folds") {
  const Dataset d = small_dataset(7, 2);
  const FoldPlan plan = make_folds(d, ProtocolKind::LeaveOneSubjectOut);
  REQUIRE(plan.folds.size() == 7);
  for (const auto& fold : plan.folds) {
    std::set<std::string> test_subjects;
    for (auto i : fold.test) test_subjects.insert(d.sequences[i].subject_id);
    REQUIRE(test_subjects.size() == 1);
    for (auto i : fold.train) {
      CHECK(test_subjects.count(d.sequences[i].subject_id) == 0);
    }
  }
}

TEST_CASE("five-fold handles remainders and tiny subject counts") {
  CHECK_THROWS_AS(make_folds(small_dataset(4, 2), ProtocolKind::FiveFoldBySubject),
                  std::invalid_argument);
  const Dataset d = small_dataset(7, 2);
  const FoldPlan plan = make_folds(d, ProtocolKind::FiveFoldBySubject);
  CHECK(plan.folds.size() == 2);
  CHECK(plan.remainder_fold);
  CHECK(plan.folds[0].test.size() == 10);
  CHECK(plan.folds[1].test.size() == 4);
}

TEST_CASE("pipeline runs and pools predictions") {
  const Dataset d = small_dataset();
  const ProtocolSpec spec = small_spec(ProtocolKind::FiveFoldBySubject);
  const ProtocolResult result = run_protocol(d, spec);

  CHECK(result.report.rows.size() == d.size());
  CHECK(result.folds.size() == 2);  // 6 subjects -> fold of 5 + remainder
  CHECK(result.plan.remainder_fold);

  // Pooled MAE equals the plain mean absolute error of the concatenation.
  double manual = 0.0;
  for (const auto& row : result.report.rows) {
    manual += std::abs(row.true_vas - row.predicted_raw);
  }
  manual /= static_cast<double>(result.report.rows.size());
  CHECK(result.report.mae == doctest::Approx(manual).epsilon(1e-12));
  CHECK(result.report.rmse >= result.report.mae);
  CHECK(result.baseline_mae > 0.0);

  for (const auto& row : result.report.rows) {
    CHECK(row.predicted_clipped >= 0.0);
    CHECK(row.predicted_clipped <= 10.0);
  }

  // Every sequence appears exactly once.
  std::set<std::string> ids;
  for (const auto& row : result.report.rows) ids.insert(row.sequence_id);
  CHECK(ids.size() == d.size());
}

TEST_CASE("clean amplitude-coded data regresses below the mean baseline") {
  GeneratorSpec gen;
  gen.subjects = 7;
  gen.seqs_per_subject = 3;
  gen.frames_min = 14;
  gen.frames_max = 14;
  gen.landmarks = 6;
  gen.noise_sigma = 0.0;
  const Dataset d = generate_synthetic(gen, 21);

  ProtocolSpec spec = small_spec(ProtocolKind::FiveFoldBySubject);
  spec.gak.sigma = 10.0;
  const ProtocolResult result = run_protocol(d, spec);
  CHECK(result.report.mae < result.baseline_mae);
}

TEST_CASE("changing test labels does not change their fold's predictions") {
  const Dataset d = small_dataset();
  const ProtocolSpec spec = small_spec(ProtocolKind::FiveFoldBySubject);
  const ProtocolResult base = run_protocol(d, spec);

  // Alter the labels of fold 0's test sequences only.
  Dataset altered = d;
  const FoldPlan plan = make_folds(d, ProtocolKind::FiveFoldBySubject);
  for (auto i : plan.folds[0].test) {
    altered.sequences[i].vas_label =
        altered.sequences[i].vas_label >= 5.0 ? 0.0 : 10.0;
  }
  // Labels do not enter the kernel, so the cached kernel is reusable.
  const ProtocolResult changed = run_protocol(altered, spec, base.kernel);

  for (std::size_t r = 0; r < base.report.rows.size(); ++r) {
    if (base.report.rows[r].fold == 0) {
      CHECK(base.report.rows[r].predicted_raw == changed.report.rows[r].predicted_raw);
    }
  }
}

TEST_CASE("leave-one-subject-out results are stable under dataset reordering") {
  const Dataset d = small_dataset(5, 2);
  ProtocolSpec spec = small_spec(ProtocolKind::LeaveOneSubjectOut);

  Dataset reversed;
  reversed.sequences.assign(d.sequences.rbegin(), d.sequences.rend());
  std::set<std::string> seen;
  for (const auto& seq : reversed.sequences) {
    if (seen.insert(seq.subject_id).second) reversed.subjects.push_back(seq.subject_id);
  }

  const ProtocolResult a = run_protocol(d, spec);
  const ProtocolResult b = run_protocol(reversed, spec);
  CHECK(a.report.mae == doctest::Approx(b.report.mae).epsilon(1e-4));
  CHECK(a.report.rmse == doctest::Approx(b.report.rmse).epsilon(1e-4));
}

TEST_CASE("stride four and stride one both complete") {
  GeneratorSpec gen;
  gen.subjects = 7;
  gen.seqs_per_subject = 2;
  gen.frames_min = 17;
  gen.frames_max = 21;
  gen.landmarks = 6;
  const Dataset d = generate_synthetic(gen, 3);

  for (int stride : {1, 4}) {
    ProtocolSpec spec = small_spec(ProtocolKind::FiveFoldBySubject);
    spec.frame_stride = stride;
    const ProtocolResult result = run_protocol(d, spec);
    CHECK(result.report.rows.size() == d.size());
    if (stride == 4) {
      CHECK(result.kernel.frame_stride == 4);
    }
  }
}

TEST_CASE("a fold with no training data reports its fold id") {
  // Five subjects under the five-fold protocol leave a single all-test fold.
  const Dataset d = small_dataset(5, 2);
  const ProtocolSpec spec = small_spec(ProtocolKind::FiveFoldBySubject);
  CHECK_THROWS_WITH_AS(run_protocol(d, spec), doctest::Contains("fold 0"),
                       std::runtime_error);
}

TEST_CASE("grid search stays within the candidate grid") {
  const Dataset d = small_dataset(7, 3);
  ProtocolSpec spec = small_spec(ProtocolKind::FiveFoldBySubject);
  spec.svr.grid_search = true;
  const ProtocolResult result = run_protocol(d, spec);
  const std::set<double> c_grid{0.1, 1.0, 10.0, 100.0};
  const std::set<double> eps_grid{0.01, 0.1, 0.5, 1.0};
  for (const auto& fold : result.folds) {
    CHECK(c_grid.count(fold.svr_c) == 1);
    CHECK(eps_grid.count(fold.svr_epsilon) == 1);
  }
}

TEST_CASE("mismatched kernels are rejected") {
  const Dataset d = small_dataset(5, 2);
  const ProtocolSpec spec = small_spec(ProtocolKind::LeaveOneSubjectOut);
  const ProtocolResult result = run_protocol(d, spec);

  SimilarityKernel wrong = result.kernel;
  wrong.sequence_ids[0] = "other";
  CHECK_THROWS_AS(run_protocol(d, spec, wrong), std::invalid_argument);
}

TEST_CASE("prediction export and trend line") {
  PredictionReport report;
  SUBCASE("degenerate single row") {
    report.rows.push_back({"s", "p", 3.0, 3.0, 3.0, 0});
    const LeastSquaresLine line = prediction_trend(report);
    CHECK(line.degenerate);
    std::ostringstream out;
    export_predictions(report, out);
    CHECK(out.str().find("degenerate") != std::string::npos);
    CHECK(out.str().find("s,p,3,3,3,0") != std::string::npos);
  }

  SUBCASE("perfect predictions give the identity line") {
    for (int i = 0; i <= 10; ++i) {
      const double v = static_cast<double>(i);
      report.rows.push_back({"s" + std::to_string(i), "p", v, v, v, 0});
    }
    const LeastSquaresLine line = prediction_trend(report);
    CHECK_FALSE(line.degenerate);
    CHECK(std::abs(line.slope - 1.0) < 1e-9);
    CHECK(std::abs(line.intercept) < 1e-9);
  }

  SUBCASE("random rows match the closed-form normal equations") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> value(0.0, 10.0);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = 40;
    for (int i = 0; i < n; ++i) {
      const double x = value(rng);
      const double y = value(rng);
      report.rows.push_back({"s" + std::to_string(i), "p", x, y, y, 0});
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    const LeastSquaresLine line = prediction_trend(report);
    CHECK(line.slope == doctest::Approx(slope).epsilon(1e-12));
    CHECK(line.intercept == doctest::Approx(intercept).epsilon(1e-12));
  }

  SUBCASE("no spread in the truth is degenerate") {
    report.rows.push_back({"a", "p", 5.0, 4.0, 4.0, 0});
    report.rows.push_back({"b", "p", 5.0, 6.0, 6.0, 0});
    CHECK(prediction_trend(report).degenerate);
  }

  SUBCASE("empty reports cannot be exported") {
    std::ostringstream out;
    CHECK_THROWS_AS(export_predictions(report, out), std::invalid_argument);
  }
}

TEST_CASE("summary table carries protocol, frame share, and errors") {
  ProtocolSpec spec = small_spec(ProtocolKind::FiveFoldBySubject);
  spec.frame_stride = 4;
  // Enough frames for stride 4 and enough subjects for two folds.
  GeneratorSpec gen;
  gen.subjects = 7;
  gen.seqs_per_subject = 2;
  gen.frames_min = 17;
  gen.frames_max = 20;
  gen.landmarks = 6;
  const Dataset d4 = generate_synthetic(gen, 5);
  const ProtocolResult result = run_protocol(d4, spec);
  std::ostringstream out;
  write_summary(result, spec, out);
  const std::string text = out.str();
  CHECK(text.find("5-fold cross validation") != std::string::npos);
  CHECK(text.find("25%") != std::string::npos);
  CHECK(text.find("MAE") != std::string::npos);
  CHECK(text.find("RMSE") != std::string::npos);
}

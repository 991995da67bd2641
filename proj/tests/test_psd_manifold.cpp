#include "painscore/psd_manifold.hpp"

#include <random>

#include "doctest.h"
#include "oracles.hpp"

using namespace painscore;

namespace {
const Metric kSvdO2{RotationGroup::Orthogonal, false};
const Metric kSvdSo2{RotationGroup::SpecialOrthogonal, false};
}  // namespace

TEST_CASE("optimal rotation undoes an applied rotation") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd a = oracle::random_factor(rng);
    const double theta = 2.0 * std::numbers::pi * trial / 20.0;
    const Eigen::MatrixXd b = a * oracle::rotation(theta);

    for (auto group : {RotationGroup::Orthogonal, RotationGroup::SpecialOrthogonal}) {
      const AlignmentRotation rot = optimal_rotation_svd(a, b, group);
      CHECK((b * rot.q - a).norm() < 1e-10);
      CHECK((rot.q.transpose() * rot.q - Eigen::Matrix2d::Identity()).norm() < 1e-10);
    }
    const AlignmentRotation closed = optimal_rotation(a, b, RotationGroup::SpecialOrthogonal);
    CHECK((b * closed.q - a).norm() < 1e-10);
    CHECK(closed.det_sign == 1);
  }
}

TEST_CASE("optimal rotation of a point with itself is the identity") {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd a = oracle::random_factor(rng);
  const AlignmentRotation rot = optimal_rotation(a, a, RotationGroup::SpecialOrthogonal);
  CHECK((rot.q - Eigen::Matrix2d::Identity()).norm() < 1e-12);
  CHECK((a * rot.q - a).norm() < 1e-12);
}

TEST_CASE("svd rotation matches the brute-force grid") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::MatrixXd a = oracle::random_factor(rng);
    const Eigen::MatrixXd b = oracle::random_factor(rng);

    const AlignmentRotation o2 = optimal_rotation_svd(a, b, RotationGroup::Orthogonal);
    const double svd_residual = (b * o2.q - a).norm();
    const double grid_residual = oracle::grid_distance(a, b, /*allow_reflection=*/true);
    CHECK(svd_residual <= grid_residual + 1e-12);  // continuum beats any grid point
    CHECK(grid_residual - svd_residual < 1e-4);
  }
}

TEST_CASE("distance is zero on the same fiber") {
  std::mt19937_64 rng(14);
  const Eigen::MatrixXd a = oracle::random_factor(rng);
  CHECK(distance(a, a) == 0.0);
  CHECK(distance_2d(a, a * oracle::rotation(1.234)) < 1e-6);
  const Eigen::Matrix2d flip = Eigen::Vector2d(1.0, -1.0).asDiagonal();
  CHECK(distance_svd(a, a * (oracle::rotation(0.5) * flip), RotationGroup::Orthogonal) < 1e-6);
}

TEST_CASE("distance matches the brute-force grid") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::MatrixXd a = oracle::random_factor(rng);
    const Eigen::MatrixXd b = oracle::random_factor(rng);
    const double o2 = distance_svd(a, b, RotationGroup::Orthogonal);
    const double o2_grid = oracle::grid_distance(a, b, true);
    CHECK(o2 <= o2_grid + 1e-12);
    CHECK(o2_grid - o2 < 1e-4);
    const double so2 = distance_svd(a, b, RotationGroup::SpecialOrthogonal);
    const double so2_grid = oracle::grid_distance(a, b, false);
    CHECK(so2 <= so2_grid + 1e-12);
    CHECK(so2_grid - so2 < 1e-4);
  }
}

TEST_CASE("closed form equals the O(2) distance when det >= 0") {
  std::mt19937_64 rng(16);
  int seen_pos = 0;
  int seen_neg = 0;
  while (seen_pos < 50 || seen_neg < 50) {
    const Eigen::MatrixXd a = oracle::random_factor(rng);
    Eigen::MatrixXd b = oracle::random_factor(rng);
    const double det = (a.transpose() * b).determinant();
    const double closed = distance_2d(a, b);
    const double via_o2 = distance_svd(a, b, RotationGroup::Orthogonal);
    const double via_so2 = distance_svd(a, b, RotationGroup::SpecialOrthogonal);
    if (det >= 0.0) {
      ++seen_pos;
      CHECK(std::abs(closed - via_o2) < 1e-8);
    } else {
      ++seen_neg;
      CHECK(closed >= via_o2 - 1e-10);  // a reflection can only help
    }
    // The closed form is the SO(2) optimum for every determinant sign.
    CHECK(std::abs(closed - via_so2) < 1e-8);
  }
}

TEST_CASE("singular value sum identity behind the closed form") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int seen = 0;
  while (seen < 200) {
    Eigen::Matrix2d m;
    m << gauss(rng), gauss(rng), gauss(rng), gauss(rng);
    if (m.determinant() < 0.0) continue;
    ++seen;
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(m);
    const double sum = svd.singularValues().sum();
    const double closed = std::hypot(m(0, 0) + m(1, 1), m(1, 0) - m(0, 1));
    CHECK(sum == doctest::Approx(closed).epsilon(1e-10));
  }
}

TEST_CASE("log map norm equals the distance") {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd a = oracle::random_factor(rng);
    const Eigen::MatrixXd b = oracle::random_factor(rng);
    for (const Metric& metric : {Metric{}, kSvdO2, kSvdSo2}) {
      const TangentVector tv = log_map(a, b, metric);
      CHECK(tv.direction.norm() ==
            doctest::Approx(distance(a, b, metric)).epsilon(1e-10));
    }
  }
}

TEST_CASE("log map of the base point and of fiber mates vanishes") {
  std::mt19937_64 rng(19);
  const Eigen::MatrixXd a = oracle::random_factor(rng);
  CHECK(log_map(a, a).direction.norm() < 1e-12);
  CHECK(log_map(a, a * oracle::rotation(0.77)).direction.norm() < 1e-9);
}

TEST_CASE("exp map round trip and geodesic speed") {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::MatrixXd a = oracle::random_factor(rng);
    const Eigen::MatrixXd b = oracle::random_factor(rng);

    TangentVector zero;
    zero.base_factor = a;
    zero.direction = Eigen::MatrixXd::Zero(a.rows(), a.cols());
    CHECK((exp_map(a, zero).factor - a).norm() == 0.0);

    const TangentVector tv = log_map(a, b);
    const ExpMapResult mapped = exp_map(a, tv);
    CHECK(distance(mapped.factor, b) < 1e-10);

    const double full = distance(a, b);
    for (double s : {0.25, 0.5, 0.75, 1.0}) {
      TangentVector scaled = tv;
      scaled.direction *= s;
      CHECK(distance(a, exp_map(a, scaled).factor) ==
            doctest::Approx(s * full).epsilon(1e-10));
    }
  }
}

TEST_CASE("exp map flags rank-deficient results") {
  Eigen::MatrixXd a(4, 2);
  a << 1, 0, 0, 1, 0, 0, 0, 0;
  TangentVector tv;
  tv.base_factor = a;
  tv.direction = -a;  // lands on the zero factor
  CHECK(exp_map(a, tv).rank_deficient);
  tv.direction = 0.5 * a;
  CHECK_FALSE(exp_map(a, tv).rank_deficient);
}

TEST_CASE("metric axioms hold on sampled factors") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd a = oracle::random_factor(rng);
    const Eigen::MatrixXd b = oracle::random_factor(rng);
    const Eigen::MatrixXd c = oracle::random_factor(rng);
    for (const Metric& metric : {Metric{}, kSvdO2}) {
      const double ab = distance(a, b, metric);
      const double ba = distance(b, a, metric);
      const double ac = distance(a, c, metric);
      const double cb = distance(c, b, metric);
      CHECK(ab >= 0.0);
      CHECK(std::abs(ab - ba) < 1e-10);
      CHECK(ab <= ac + cb + 1e-8);
    }
  }
}

TEST_CASE("quotient invariance under group members") {
  std::mt19937_64 rng(22);
  const Eigen::Matrix2d flip = Eigen::Vector2d(1.0, -1.0).asDiagonal();
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd a = oracle::random_factor(rng);
    const Eigen::MatrixXd b = oracle::random_factor(rng);
    const Eigen::Matrix2d q1 = oracle::rotation(0.1 + trial);
    const Eigen::Matrix2d q2 = oracle::rotation(2.0 - trial);
    CHECK(std::abs(distance_2d(a * q1, b * q2) - distance_2d(a, b)) < 1e-9);
    const double o2 = distance_svd(a, b, RotationGroup::Orthogonal);
    CHECK(std::abs(distance_svd(a * q1, b * (q2 * flip), RotationGroup::Orthogonal) - o2) <
          1e-9);
  }
}

TEST_CASE("distance_2d rejects factors with the wrong column count") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(distance_2d(a, a), std::invalid_argument);
}

TEST_CASE("svd paths work for d = 3") {
  std::mt19937_64 rng(23);
  const Eigen::MatrixXd a = oracle::random_factor(rng, 7, 3);
  const Eigen::MatrixXd b = oracle::random_factor(rng, 7, 3);
  const AlignmentRotation rot =
      optimal_rotation_svd(a, b, RotationGroup::SpecialOrthogonal);
  CHECK(rot.q.determinant() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK((b * rot.q - a).norm() ==
        doctest::Approx(distance_svd(a, b, RotationGroup::SpecialOrthogonal))
            .epsilon(1e-10));
}

#include "painscore/gak.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "parallel.hpp"

namespace painscore {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// The linear-domain table is abandoned once a cell leaves this range.
constexpr double kLinearLo = 1e-280;
constexpr double kLinearHi = 1e280;

double log_sum_exp3(double a, double b, double c) {
  const double m = std::max(a, std::max(b, c));
  if (m == kNegInf) return kNegInf;
  return m + std::log(std::exp(a - m) + std::exp(b - m) + std::exp(c - m));
}

struct LocalKernelValue {
  double linear;
  double log_value;
};

LocalKernelValue local_kernel_value(double dist, double sigma) {
  const double z = dist / (sigma * sigma);
  const double ktilde = 0.5 * std::exp(-z);
  LocalKernelValue out;
  out.linear = ktilde / (1.0 - ktilde);
  // log k = -z - log 2 - log(1 - ktilde); stays finite for any distance.
  out.log_value = -z - M_LN2 - std::log1p(-ktilde);
  return out;
}

}  // namespace

CrossDistanceMatrix cross_distance_matrix(const GramTrajectory& t1,
                                          const GramTrajectory& t2,
                                          const Metric& metric) {
  if (t1.size() == 0 || t2.size() == 0) {
    throw std::invalid_argument("cross_distance_matrix: empty trajectory");
  }
  if (t1.factor(0).rows() != t2.factor(0).rows() ||
      t1.factor(0).cols() != t2.factor(0).cols()) {
    throw std::invalid_argument(
        "cross_distance_matrix: configuration shapes differ between '" +
        t1.sequence_id + "' and '" + t2.sequence_id + "'");
  }
  CrossDistanceMatrix out;
  out.d.resize(static_cast<Eigen::Index>(t1.size()), static_cast<Eigen::Index>(t2.size()));
  for (std::size_t i = 0; i < t1.size(); ++i) {
    for (std::size_t j = 0; j < t2.size(); ++j) {
      out.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          distance(t1.factor(i), t2.factor(j), metric);
    }
  }
  return out;
}

Eigen::MatrixXd local_kernel(const CrossDistanceMatrix& d, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("local_kernel: sigma must be positive");
  Eigen::MatrixXd k(d.d.rows(), d.d.cols());
  for (Eigen::Index i = 0; i < d.d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.d.cols(); ++j) {
      k(i, j) = local_kernel_value(d.d(i, j), sigma).linear;
    }
  }
  return k;
}

GakScore gak_score_from_distances(const Eigen::MatrixXd& d, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("gak: sigma must be positive");
  if (!d.allFinite()) throw std::invalid_argument("gak: non-finite distance entry");
  const Eigen::Index rows = d.rows();
  const Eigen::Index cols = d.cols();
  if (rows == 0 || cols == 0) throw std::invalid_argument("gak: empty distance matrix");

  // Rolling rows over the (rows+1) x (cols+1) table. Row 0 is (1, 0, ..., 0)
  // in the linear domain.
  std::vector<double> prev_lin(static_cast<std::size_t>(cols) + 1, 0.0);
  std::vector<double> cur_lin(prev_lin.size(), 0.0);
  std::vector<double> prev_log(prev_lin.size(), kNegInf);
  std::vector<double> cur_log(prev_lin.size(), kNegInf);
  prev_lin[0] = 1.0;
  prev_log[0] = 0.0;

  bool linear_valid = true;
  for (Eigen::Index i = 1; i <= rows; ++i) {
    cur_lin[0] = 0.0;
    cur_log[0] = kNegInf;
    for (Eigen::Index j = 1; j <= cols; ++j) {
      const auto k = local_kernel_value(d(i - 1, j - 1), sigma);
      const std::size_t jj = static_cast<std::size_t>(j);
      if (linear_valid) {
        const double sum = cur_lin[jj - 1] + prev_lin[jj - 1] + prev_lin[jj];
        const double value = sum * k.linear;
        cur_lin[jj] = value;
        if (!(value >= kLinearLo && value <= kLinearHi)) linear_valid = false;
      }
      cur_log[jj] =
          log_sum_exp3(cur_log[jj - 1], prev_log[jj - 1], prev_log[jj]) + k.log_value;
    }
    std::swap(prev_lin, cur_lin);
    std::swap(prev_log, cur_log);
  }

  GakScore score;
  score.log_similarity = prev_log[static_cast<std::size_t>(cols)];
  score.linear_exact = linear_valid;
  score.similarity = linear_valid ? prev_lin[static_cast<std::size_t>(cols)]
                                  : std::exp(score.log_similarity);
  if (std::isnan(score.similarity) || std::isnan(score.log_similarity)) {
    throw std::domain_error("gak: similarity is NaN");
  }
  return score;
}

double gak_similarity(const GramTrajectory& t1, const GramTrajectory& t2,
                      double sigma, const Metric& metric) {
  return gak_score_from_distances(cross_distance_matrix(t1, t2, metric).d, sigma)
      .similarity;
}

double gak_log_similarity(const GramTrajectory& t1, const GramTrajectory& t2,
                          double sigma, const Metric& metric) {
  return gak_score_from_distances(cross_distance_matrix(t1, t2, metric).d, sigma)
      .log_similarity;
}

namespace {

// Dataset median of cross distances over unordered pairs p < q. Entries are
// decimated with a fixed stride when the total would not fit the cap, which
// keeps the result independent of the dataset ordering.
double median_cross_distance(const std::vector<GramTrajectory>& trajectories,
                             const Metric& metric, int workers) {
  const std::size_t n = trajectories.size();
  std::size_t total = 0;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      total += trajectories[p].size() * trajectories[q].size();
    }
  }
  if (total == 0) return 1.0;
  constexpr std::size_t kCap = 40'000'000;
  const std::size_t stride = (total + kCap - 1) / kCap;

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) pairs.emplace_back(p, q);
  }
  std::vector<std::vector<float>> samples(pairs.size());
  detail::parallel_for(pairs.size(), workers, [&](std::size_t idx) {
    auto [p, q] = pairs[idx];
    // Canonical orientation so the sample multiset is independent of the
    // dataset ordering.
    if (trajectories[q].sequence_id < trajectories[p].sequence_id) std::swap(p, q);
    const CrossDistanceMatrix cross =
        cross_distance_matrix(trajectories[p], trajectories[q], metric);
    const double* data = cross.d.data();
    const std::size_t count = static_cast<std::size_t>(cross.d.size());
    auto& out = samples[idx];
    out.reserve(count / stride + 1);
    for (std::size_t i = 0; i < count; i += stride) {
      out.push_back(static_cast<float>(data[i]));
    }
  });

  std::vector<float> values;
  values.reserve(total / stride + pairs.size());
  for (auto& s : samples) values.insert(values.end(), s.begin(), s.end());
  if (values.empty()) return 1.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  const double median = static_cast<double>(values[mid]);
  return median > 0.0 ? median : 1.0;
}

}  // namespace

SimilarityKernel build_kernel_matrix(const std::vector<GramTrajectory>& trajectories,
                                     const GakOptions& options) {
  const std::size_t n = trajectories.size();
  if (n < 2) {
    throw std::invalid_argument("build_kernel_matrix: need at least 2 trajectories");
  }
  if (options.sigma <= 0.0) {
    throw std::invalid_argument("build_kernel_matrix: sigma must be positive");
  }
  for (const auto& t : trajectories) {
    if (t.size() == 0) {
      throw std::invalid_argument("build_kernel_matrix: empty trajectory '" +
                                  t.sequence_id + "'");
    }
    if (t.factor(0).rows() != trajectories[0].factor(0).rows()) {
      throw std::invalid_argument("build_kernel_matrix: configuration size of '" +
                                  t.sequence_id + "' differs from '" +
                                  trajectories[0].sequence_id + "'");
    }
  }

  SimilarityKernel kernel;
  kernel.sigma = options.sigma;
  kernel.kernel_normalized = options.normalize_kernel;
  kernel.sequence_ids.reserve(n);
  for (const auto& t : trajectories) kernel.sequence_ids.push_back(t.sequence_id);

  if (options.normalize_distances) {
    kernel.distance_scale =
        median_cross_distance(trajectories, options.metric, options.workers);
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n + 1) / 2);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p; q < n; ++q) pairs.emplace_back(p, q);
  }

  Eigen::MatrixXd linear(n, n);
  Eigen::MatrixXd logs(n, n);
  detail::parallel_for(pairs.size(), options.workers, [&](std::size_t idx) {
    auto [p, q] = pairs[idx];
    // Canonical orientation: the DP value is symmetric, but evaluating each
    // unordered pair the same way keeps K bitwise covariant under dataset
    // permutations.
    if (trajectories[q].sequence_id < trajectories[p].sequence_id) std::swap(p, q);
    CrossDistanceMatrix cross =
        cross_distance_matrix(trajectories[p], trajectories[q], options.metric);
    if (kernel.distance_scale != 1.0) cross.d /= kernel.distance_scale;
    GakScore score;
    try {
      score = gak_score_from_distances(cross.d, options.sigma);
    } catch (const std::exception& e) {
      throw std::domain_error("build_kernel_matrix: pair ('" +
                              trajectories[p].sequence_id + "', '" +
                              trajectories[q].sequence_id + "'): " + e.what());
    }
    const Eigen::Index pi = static_cast<Eigen::Index>(p);
    const Eigen::Index qi = static_cast<Eigen::Index>(q);
    linear(pi, qi) = linear(qi, pi) = score.similarity;
    logs(pi, qi) = logs(qi, pi) = score.log_similarity;
  });

  if (options.normalize_kernel) {
    kernel.k.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p; q < n; ++q) {
        const Eigen::Index pi = static_cast<Eigen::Index>(p);
        const Eigen::Index qi = static_cast<Eigen::Index>(q);
        const double v =
            std::exp(logs(pi, qi) - 0.5 * (logs(pi, pi) + logs(qi, qi)));
        kernel.k(pi, qi) = kernel.k(qi, pi) = v;
      }
    }
  } else {
    kernel.k = linear;
  }

  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p; q < n; ++q) {
      const double v = kernel.k(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
      if (!std::isfinite(v)) {
        throw std::domain_error("build_kernel_matrix: non-finite similarity for pair ('" +
                                trajectories[p].sequence_id + "', '" +
                                trajectories[q].sequence_id + "')");
      }
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kernel.k,
                                                     Eigen::EigenvaluesOnly);
  kernel.min_eigenvalue = eig.eigenvalues().minCoeff();
  kernel.max_eigenvalue = eig.eigenvalues().maxCoeff();
  if (kernel.min_eigenvalue < -1e-6 * kernel.max_eigenvalue) {
    kernel.jitter = -kernel.min_eigenvalue + 1e-12 * kernel.max_eigenvalue;
    kernel.k.diagonal().array() += kernel.jitter;
  }
  return kernel;
}

namespace {

constexpr char kCacheMagic[8] = {'P', 'S', 'K', 'C', 'A', 'C', 'H', 'E'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (sizeof(T) > 1) {
    if (std::endian::native == std::endian::big) {
      std::reverse(bytes, bytes + sizeof(T));
    }
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw std::runtime_error("kernel cache: truncated file");
  }
  if constexpr (sizeof(T) > 1) {
    if (std::endian::native == std::endian::big) {
      std::reverse(bytes, bytes + sizeof(T));
    }
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_kernel_cache(const SimilarityKernel& kernel, std::ostream& out) {
  out.write(kCacheMagic, sizeof(kCacheMagic));
  write_le(out, kCacheVersion);
  std::uint32_t flags = 0;
  if (kernel.kernel_normalized) flags |= 1u;
  if (kernel.distance_scale != 1.0) flags |= 2u;
  write_le(out, flags);
  write_le(out, kernel.sigma);
  write_le(out, kernel.distance_scale);
  write_le(out, kernel.jitter);
  write_le(out, kernel.min_eigenvalue);
  write_le(out, kernel.max_eigenvalue);
  write_le(out, kernel.fitting_lambda);
  write_le(out, static_cast<std::int32_t>(kernel.frame_stride));
  write_le(out, static_cast<std::uint64_t>(kernel.size()));
  for (const auto& id : kernel.sequence_ids) {
    write_le(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  for (Eigen::Index i = 0; i < kernel.k.rows(); ++i) {
    for (Eigen::Index j = 0; j < kernel.k.cols(); ++j) {
      write_le(out, kernel.k(i, j));
    }
  }
  if (!out) throw std::runtime_error("kernel cache: write failed");
}

SimilarityKernel load_kernel_cache(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCacheMagic, 8) != 0) {
    throw std::runtime_error("kernel cache: bad magic");
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCacheVersion) {
    throw std::runtime_error("kernel cache: unsupported version " +
                             std::to_string(version));
  }
  const auto flags = read_le<std::uint32_t>(in);
  SimilarityKernel kernel;
  kernel.kernel_normalized = (flags & 1u) != 0;
  kernel.sigma = read_le<double>(in);
  kernel.distance_scale = read_le<double>(in);
  kernel.jitter = read_le<double>(in);
  kernel.min_eigenvalue = read_le<double>(in);
  kernel.max_eigenvalue = read_le<double>(in);
  kernel.fitting_lambda = read_le<double>(in);
  kernel.frame_stride = static_cast<int>(read_le<std::int32_t>(in));
  const auto n = read_le<std::uint64_t>(in);
  kernel.sequence_ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto len = read_le<std::uint32_t>(in);
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) {
      throw std::runtime_error("kernel cache: truncated id");
    }
    kernel.sequence_ids.push_back(std::move(id));
  }
  kernel.k.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < kernel.k.rows(); ++i) {
    for (Eigen::Index j = 0; j < kernel.k.cols(); ++j) {
      kernel.k(i, j) = read_le<double>(in);
    }
  }
  return kernel;
}

void write_kernel_csv(const SimilarityKernel& kernel, std::ostream& out) {
  out << "sequence_id";
  for (const auto& id : kernel.sequence_ids) out << ',' << id;
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < kernel.k.rows(); ++i) {
    out << kernel.sequence_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < kernel.k.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", kernel.k(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace painscore

#include "painscore/landmark_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace painscore {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, std::size_t line_no, const char* what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what +
                     " value '" + s + "'");
  }
}

long parse_long(const std::string& s, std::size_t line_no, const char* what) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what +
                     " value '" + s + "'");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct RawPoint {
  long landmark = 0;
  double x = 0.0;
  double y = 0.0;
};

struct RawSequence {
  std::string subject_id;
  // frame_index -> landmark points
  std::map<long, std::vector<RawPoint>> frames;
};

}  // namespace

LabelTable parse_label_csv(std::istream& in) {
  LabelTable table;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip(line);
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (!header_seen) {
      if (fields.size() < 2 || strip(fields[0]) != "sequence_id" ||
          strip(fields[1]) != "vas") {
        throw ParseError("label CSV: expected header 'sequence_id,vas'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 2) {
      throw ParseError("label CSV line " + std::to_string(line_no) +
                       ": expected 2 fields, got " + std::to_string(fields.size()));
    }
    const std::string id = strip(fields[0]);
    const double vas = parse_double(strip(fields[1]), line_no, "vas");
    if (!table.emplace(id, vas).second) {
      throw ParseError("label CSV line " + std::to_string(line_no) +
                       ": duplicate label for sequence '" + id + "'");
    }
  }
  if (!header_seen) throw ParseError("label CSV: empty input");
  return table;
}

Dataset parse_landmark_csv(std::istream& in,
                           const std::optional<LabelTable>& labels) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::map<std::string, RawSequence> raw;  // keyed by sequence_id, sorted

  while (std::getline(in, line)) {
    ++line_no;
    line = strip(line);
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (!header_seen) {
      if (fields.size() < 6 || strip(fields[0]) != "sequence_id" ||
          strip(fields[1]) != "subject_id" || strip(fields[2]) != "frame_index" ||
          strip(fields[3]) != "landmark_index" || strip(fields[4]) != "x" ||
          strip(fields[5]) != "y") {
        throw ParseError(
            "landmark CSV: expected header "
            "'sequence_id,subject_id,frame_index,landmark_index,x,y'");
      }
      if (fields.size() == 7 && strip(fields[6]) != "z") {
        throw ParseError("landmark CSV: seventh header column must be 'z'");
      }
      if (fields.size() > 7) {
        throw ParseError("landmark CSV: too many header columns");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 6 && fields.size() != 7) {
      throw ParseError("landmark CSV line " + std::to_string(line_no) +
                       ": expected 6 or 7 fields, got " +
                       std::to_string(fields.size()));
    }
    const std::string seq_id = strip(fields[0]);
    const std::string subj_id = strip(fields[1]);
    const long frame = parse_long(strip(fields[2]), line_no, "frame_index");
    const long landmark = parse_long(strip(fields[3]), line_no, "landmark_index");
    const double x = parse_double(strip(fields[4]), line_no, "x");
    const double y = parse_double(strip(fields[5]), line_no, "y");
    if (seq_id.empty() || subj_id.empty()) {
      throw ParseError("landmark CSV line " + std::to_string(line_no) +
                       ": empty sequence_id or subject_id");
    }
    if (frame < 0 || landmark < 0) {
      throw ParseError("landmark CSV line " + std::to_string(line_no) +
                       ": negative frame_index or landmark_index");
    }
    auto& rs = raw[seq_id];
    if (rs.subject_id.empty()) {
      rs.subject_id = subj_id;
    } else if (rs.subject_id != subj_id) {
      throw ParseError("sequence '" + seq_id + "': conflicting subject ids '" +
                       rs.subject_id + "' and '" + subj_id + "'");
    }
    rs.frames[frame].push_back(RawPoint{landmark, x, y});
  }
  if (!header_seen) throw ParseError("landmark CSV: empty input");

  Dataset dataset;
  std::unordered_set<std::string> subject_seen;
  for (auto& [seq_id, rs] : raw) {
    LandmarkSequence seq;
    seq.sequence_id = seq_id;
    seq.subject_id = rs.subject_id;

    // n is fixed by the largest landmark index of the sequence; every frame
    // must carry exactly landmarks 0..n-1.
    long n = 0;
    for (const auto& [frame, points] : rs.frames) {
      for (const auto& p : points) n = std::max(n, p.landmark + 1);
    }
    if (n < 3) {
      throw ParseError("sequence '" + seq_id + "': fewer than 3 landmarks");
    }
    if (rs.frames.size() < 2) {
      throw ParseError("sequence '" + seq_id +
                       "': fewer than 2 frames (velocities undefined)");
    }
    seq.landmark_count = static_cast<int>(n);
    for (auto& [frame, points] : rs.frames) {
      std::vector<bool> present(static_cast<std::size_t>(n), false);
      Eigen::MatrixXd m(n, 2);
      for (const auto& p : points) {
        if (p.landmark >= n) continue;  // unreachable, n is the max
        if (present[static_cast<std::size_t>(p.landmark)]) {
          throw ParseError("sequence '" + seq_id + "' frame " +
                           std::to_string(frame) + ": duplicate landmark " +
                           std::to_string(p.landmark));
        }
        present[static_cast<std::size_t>(p.landmark)] = true;
        m(p.landmark, 0) = p.x;
        m(p.landmark, 1) = p.y;
      }
      for (long i = 0; i < n; ++i) {
        if (!present[static_cast<std::size_t>(i)]) {
          throw ParseError("sequence '" + seq_id + "' frame " +
                           std::to_string(frame) + ": missing landmark " +
                           std::to_string(i));
        }
      }
      seq.frames.push_back(std::move(m));
    }

    if (!labels.has_value()) {
      throw ParseError("sequence '" + seq_id + "': no label table provided");
    }
    auto it = labels->find(seq_id);
    if (it == labels->end()) {
      throw ParseError("sequence '" + seq_id + "': label absent");
    }
    if (!(it->second >= 0.0 && it->second <= 10.0)) {
      throw ParseError("sequence '" + seq_id + "': label " +
                       std::to_string(it->second) + " outside [0, 10]");
    }
    seq.vas_label = it->second;

    if (subject_seen.insert(seq.subject_id).second) {
      dataset.subjects.push_back(seq.subject_id);
    }
    dataset.sequences.push_back(std::move(seq));
  }
  return dataset;
}

void write_landmark_csv(const Dataset& dataset, std::ostream& out) {
  out << "sequence_id,subject_id,frame_index,landmark_index,x,y\n";
  for (const auto& seq : dataset.sequences) {
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
      const auto& m = seq.frames[f];
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out << seq.sequence_id << ',' << seq.subject_id << ',' << f << ',' << i
            << ',' << format_double(m(i, 0)) << ',' << format_double(m(i, 1))
            << '\n';
      }
    }
  }
}

void write_label_csv(const Dataset& dataset, std::ostream& out) {
  out << "sequence_id,vas\n";
  for (const auto& seq : dataset.sequences) {
    out << seq.sequence_id << ',' << format_double(seq.vas_label) << '\n';
  }
}

LandmarkSequence downsample(const LandmarkSequence& seq, int stride) {
  if (stride < 1) throw std::invalid_argument("downsample: stride must be >= 1");
  if (stride == 1) return seq;
  if (seq.frames.size() < static_cast<std::size_t>(stride) + 1) {
    throw std::invalid_argument("downsample: sequence '" + seq.sequence_id +
                                "' would keep fewer than 2 frames");
  }
  LandmarkSequence out = seq;
  out.frames.clear();
  for (std::size_t f = 0; f < seq.frames.size(); f += static_cast<std::size_t>(stride)) {
    out.frames.push_back(seq.frames[f]);
  }
  return out;
}

GeneratorSpec parse_generator_config(std::istream& in) {
  GeneratorSpec spec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("generator config line " + std::to_string(line_no) +
                       ": expected 'key = value'");
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key == "subjects") {
      spec.subjects = static_cast<int>(parse_long(value, line_no, "subjects"));
    } else if (key == "seqs_per_subject") {
      spec.seqs_per_subject =
          static_cast<int>(parse_long(value, line_no, "seqs_per_subject"));
    } else if (key == "frames_min") {
      spec.frames_min = static_cast<int>(parse_long(value, line_no, "frames_min"));
    } else if (key == "frames_max") {
      spec.frames_max = static_cast<int>(parse_long(value, line_no, "frames_max"));
    } else if (key == "n") {
      spec.landmarks = static_cast<int>(parse_long(value, line_no, "n"));
    } else if (key == "noise_sigma") {
      spec.noise_sigma = parse_double(value, line_no, "noise_sigma");
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(parse_long(value, line_no, "seed"));
    } else {
      throw ParseError("generator config line " + std::to_string(line_no) +
                       ": unknown key '" + key + "'");
    }
  }
  return spec;
}

Dataset generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed) {
  if (spec.subjects < 1) {
    throw std::invalid_argument("generate_synthetic: need at least 1 subject");
  }
  if (spec.seqs_per_subject < 1) {
    throw std::invalid_argument("generate_synthetic: need at least 1 sequence per subject");
  }
  if (spec.landmarks < 3) {
    throw std::invalid_argument("generate_synthetic: need n >= 3 landmarks");
  }
  if (spec.frames_min < 2 || spec.frames_max < spec.frames_min) {
    throw std::invalid_argument("generate_synthetic: bad frame-count range");
  }
  if (spec.noise_sigma < 0.0) {
    throw std::invalid_argument("generate_synthetic: negative noise_sigma");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> frame_count_dist(spec.frames_min, spec.frames_max);

  const int n = spec.landmarks;
  const int moving_from = n / 2;  // the oscillating landmark subset
  const double omega = 2.0 * std::numbers::pi / 24.0;  // radians per frame

  Dataset dataset;
  int width_subj = static_cast<int>(std::to_string(spec.subjects - 1).size());
  int width_seq = static_cast<int>(std::to_string(spec.seqs_per_subject - 1).size());

  long global_index = 0;
  for (int s = 0; s < spec.subjects; ++s) {
    // Per-subject geometry: scale, shape jitter, rigid pose.
    const double scale = spec.base_scale * (1.0 + spec.subject_scale_jitter * unit(rng));
    std::vector<double> radius(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      radius[static_cast<std::size_t>(i)] =
          scale * (1.0 + spec.subject_shape_jitter * unit(rng));
    }
    const double pose_angle = angle(rng);
    const double tx = 100.0 * unit(rng);
    const double ty = 100.0 * unit(rng);
    const double cp = std::cos(pose_angle);
    const double sp = std::sin(pose_angle);

    char subj_buf[32];
    std::snprintf(subj_buf, sizeof(subj_buf), "subj%0*d", width_subj, s);
    const std::string subject_id = subj_buf;
    dataset.subjects.push_back(subject_id);

    for (int k = 0; k < spec.seqs_per_subject; ++k, ++global_index) {
      const double vas = static_cast<double>(global_index % 9);
      const int frames = frame_count_dist(rng);
      const double phase = spec.randomize_phase ? angle(rng) : 0.0;
      // Oscillation amplitude grows strictly with the label.
      const double amplitude = scale * (0.02 + 0.045 * vas);

      LandmarkSequence seq;
      char seq_buf[64];
      std::snprintf(seq_buf, sizeof(seq_buf), "%s_seq%0*d", subject_id.c_str(),
                    width_seq, k);
      seq.sequence_id = seq_buf;
      seq.subject_id = subject_id;
      seq.vas_label = vas;
      seq.landmark_count = n;

      for (int f = 0; f < frames; ++f) {
        Eigen::MatrixXd m(n, 2);
        const double wave = std::sin(omega * f + phase);
        for (int i = 0; i < n; ++i) {
          const double theta = 2.0 * std::numbers::pi * i / n;
          double r = radius[static_cast<std::size_t>(i)];
          if (i >= moving_from) r += amplitude * wave;
          double x = r * std::cos(theta);
          double y = r * std::sin(theta);
          // Rigid pose: rotation then translation.
          const double xr = cp * x - sp * y + tx;
          const double yr = sp * x + cp * y + ty;
          m(i, 0) = xr + spec.noise_sigma * gauss(rng);
          m(i, 1) = yr + spec.noise_sigma * gauss(rng);
        }
        seq.frames.push_back(std::move(m));
      }
      dataset.sequences.push_back(std::move(seq));
    }
  }
  return dataset;
}

}  // namespace painscore

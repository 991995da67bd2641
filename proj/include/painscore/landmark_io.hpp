#ifndef PAINSCORE_LANDMARK_IO_HPP
#define PAINSCORE_LANDMARK_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

// Ingests landmark time series from CSV, downsamples frames, and generates
// labeled synthetic datasets.
//
// Landmark CSV: header `sequence_id,subject_id,frame_index,landmark_index,x,y`
// (an optional trailing z column is tolerated and ignored). Row order is
// free; frames and landmarks are sorted on load. Label CSV: `sequence_id,vas`.

namespace painscore {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LandmarkSequence {
  std::string sequence_id;
  std::string subject_id;
  std::vector<Eigen::MatrixXd> frames;  // each n x 2, pixel units
  double vas_label = 0.0;               // in [0, 10]
  int landmark_count = 0;               // n, shared by all frames

  std::size_t frame_count() const { return frames.size(); }
};

struct Dataset {
  std::vector<LandmarkSequence> sequences;  // sorted by sequence_id
  std::vector<std::string> subjects;        // distinct, in dataset order

  std::size_t size() const { return sequences.size(); }
};

using LabelTable = std::map<std::string, double>;

// Parses the label CSV (`sequence_id,vas`).
LabelTable parse_label_csv(std::istream& in);

// Parses the landmark CSV and attaches labels. Every sequence must have a
// label in [0, 10]; frames must all carry landmarks 0..n-1 for a shared n.
// Sequences are ordered lexicographically by sequence_id so the dataset
// order does not depend on row order.
Dataset parse_landmark_csv(std::istream& in,
                           const std::optional<LabelTable>& labels);

// Canonical writers; parse(serialize(dataset)) round-trips exactly.
void write_landmark_csv(const Dataset& dataset, std::ostream& out);
void write_label_csv(const Dataset& dataset, std::ostream& out);

// Keeps frames whose position is congruent to 0 mod stride. stride = 1 is
// the identity, stride = 4 keeps 25% of the frames.
LandmarkSequence downsample(const LandmarkSequence& seq, int stride);

// Synthetic data: landmarks on a ring; a subset oscillates radially with an
// amplitude that grows monotonically with the VAS label. Subjects differ by
// rigid pose and a small scale factor; coordinates get additive noise.
struct GeneratorSpec {
  int subjects = 25;
  int seqs_per_subject = 8;
  int frames_min = 28;
  int frames_max = 40;
  int landmarks = 10;        // n >= 3
  double noise_sigma = 0.05; // pixels
  std::uint64_t seed = 7;

  // Motion-model knobs, fixed defaults; not part of the config file format.
  double base_scale = 40.0;          // pixels
  double subject_scale_jitter = 0.05;
  double subject_shape_jitter = 0.1;  // per-landmark radius variation
  bool randomize_phase = true;
};

// Reads a generator config file: `key = value` lines with keys subjects,
// seqs_per_subject, frames_min, frames_max, n, noise_sigma, seed.
GeneratorSpec parse_generator_config(std::istream& in);

// Deterministic for a fixed (spec, seed); labels cycle through 0..8.
Dataset generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed);

}  // namespace painscore

#endif

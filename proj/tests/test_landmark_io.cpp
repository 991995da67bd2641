#include "painscore/landmark_io.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"

using namespace painscore;

namespace {

Dataset parse_strings(const std::string& landmarks, const std::string& labels) {
  std::istringstream label_in(labels);
  const LabelTable table = parse_label_csv(label_in);
  std::istringstream data_in(landmarks);
  return parse_landmark_csv(data_in, table);
}

std::string serialize(const Dataset& dataset) {
  std::ostringstream landmarks;
  std::ostringstream labels;
  write_landmark_csv(dataset, landmarks);
  write_label_csv(dataset, labels);
  return landmarks.str() + "\x1f" + labels.str();
}

}  // namespace

TEST_CASE("smallest legal input parses") {
  const std::string landmarks =
      "sequence_id,subject_id,frame_index,landmark_index,x,y\n"
      "s1,p1,0,0,0,0\n"
      "s1,p1,0,1,1,0\n"
      "s1,p1,0,2,0,1\n"
      "s1,p1,1,0,0.5,0\n"
      "s1,p1,1,1,1.5,0\n"
      "s1,p1,1,2,0.5,1\n";
  const Dataset d = parse_strings(landmarks, "sequence_id,vas\ns1,0\n");
  REQUIRE(d.size() == 1);
  CHECK(d.sequences[0].frame_count() == 2);
  CHECK(d.sequences[0].landmark_count == 3);
  CHECK(d.sequences[0].vas_label == 0.0);
  CHECK(d.subjects == std::vector<std::string>{"p1"});
}

TEST_CASE("missing landmark names the frame") {
  // Frame 5 lacks landmark 1.
  std::string landmarks = "sequence_id,subject_id,frame_index,landmark_index,x,y\n";
  for (int f = 0; f < 6; ++f) {
    for (int i = 0; i < 3; ++i) {
      if (f == 5 && i == 1) continue;
      landmarks += "s1,p1," + std::to_string(f) + "," + std::to_string(i) + ",1,2\n";
    }
  }
  CHECK_THROWS_WITH_AS(parse_strings(landmarks, "sequence_id,vas\ns1,3\n"),
                       doctest::Contains("frame 5"), ParseError);
}

TEST_CASE("inconsistent landmark count across frames is an error") {
  // Frame 1 carries a fourth landmark, so frames 0 lacks index 3.
  const std::string landmarks =
      "sequence_id,subject_id,frame_index,landmark_index,x,y\n"
      "s1,p1,0,0,0,0\ns1,p1,0,1,1,0\ns1,p1,0,2,0,1\n"
      "s1,p1,1,0,0,0\ns1,p1,1,1,1,0\ns1,p1,1,2,0,1\ns1,p1,1,3,1,1\n";
  CHECK_THROWS_AS(parse_strings(landmarks, "sequence_id,vas\ns1,3\n"), ParseError);
}

TEST_CASE("labels are validated") {
  const std::string landmarks =
      "sequence_id,subject_id,frame_index,landmark_index,x,y\n"
      "s1,p1,0,0,0,0\ns1,p1,0,1,1,0\ns1,p1,0,2,0,1\n"
      "s1,p1,1,0,0,0\ns1,p1,1,1,1,0\ns1,p1,1,2,0,1\n";
  CHECK_THROWS_WITH_AS(parse_strings(landmarks, "sequence_id,vas\nother,3\n"),
                       doctest::Contains("label absent"), ParseError);
  CHECK_THROWS_WITH_AS(parse_strings(landmarks, "sequence_id,vas\ns1,11\n"),
                       doctest::Contains("outside"), ParseError);
  CHECK_THROWS_WITH_AS(parse_strings(landmarks, "sequence_id,vas\ns1,-0.5\n"),
                       doctest::Contains("outside"), ParseError);
  std::istringstream data_in(landmarks);
  CHECK_THROWS_AS(parse_landmark_csv(data_in, std::nullopt), ParseError);
  // Fractional labels inside the range are fine.
  const Dataset d = parse_strings(landmarks, "sequence_id,vas\ns1,7.5\n");
  CHECK(d.sequences[0].vas_label == 7.5);
}

TEST_CASE("duplicate rows and bad headers are rejected") {
  CHECK_THROWS_AS(parse_strings("wrong,header\n", "sequence_id,vas\n"), ParseError);
  const std::string dup =
      "sequence_id,subject_id,frame_index,landmark_index,x,y\n"
      "s1,p1,0,0,0,0\ns1,p1,0,0,1,1\ns1,p1,0,1,1,0\ns1,p1,0,2,0,1\n"
      "s1,p1,1,0,0,0\ns1,p1,1,1,1,0\ns1,p1,1,2,0,1\n";
  CHECK_THROWS_WITH_AS(parse_strings(dup, "sequence_id,vas\ns1,0\n"),
                       doctest::Contains("duplicate"), ParseError);
}

TEST_CASE("a z column is tolerated and ignored") {
  const std::string landmarks =
      "sequence_id,subject_id,frame_index,landmark_index,x,y,z\n"
      "s1,p1,0,0,0,0,9\ns1,p1,0,1,1,0,9\ns1,p1,0,2,0,1,9\n"
      "s1,p1,1,0,0,0,9\ns1,p1,1,1,1,0,9\ns1,p1,1,2,0,1,9\n";
  const Dataset d = parse_strings(landmarks, "sequence_id,vas\ns1,2\n");
  CHECK(d.sequences[0].frames[0].cols() == 2);
}

TEST_CASE("row order does not matter") {
  GeneratorSpec spec;
  spec.subjects = 3;
  spec.seqs_per_subject = 2;
  spec.frames_min = 3;
  spec.frames_max = 5;
  spec.landmarks = 4;
  const Dataset d = generate_synthetic(spec, 9);
  std::ostringstream landmarks;
  write_landmark_csv(d, landmarks);
  std::ostringstream labels;
  write_label_csv(d, labels);

  // Shuffle all data rows behind the header.
  std::vector<std::string> lines;
  std::istringstream in(landmarks.str());
  std::string line;
  std::getline(in, line);
  const std::string header = line;
  while (std::getline(in, line)) lines.push_back(line);
  std::shuffle(lines.begin(), lines.end(), std::mt19937_64(4));
  std::string shuffled = header + "\n";
  for (const auto& l : lines) shuffled += l + "\n";

  std::istringstream label_in(labels.str());
  const LabelTable table = parse_label_csv(label_in);
  std::istringstream data_in(shuffled);
  const Dataset reparsed = parse_landmark_csv(data_in, table);
  CHECK(serialize(reparsed) == serialize(d));
}

TEST_CASE("serialize then parse round-trips exactly") {
  GeneratorSpec spec;
  spec.subjects = 4;
  spec.seqs_per_subject = 3;
  spec.frames_min = 3;
  spec.frames_max = 6;
  spec.landmarks = 5;
  spec.noise_sigma = 0.25;
  const Dataset d = generate_synthetic(spec, 123);

  std::ostringstream landmarks;
  write_landmark_csv(d, landmarks);
  std::ostringstream labels;
  write_label_csv(d, labels);
  std::istringstream label_in(labels.str());
  std::istringstream data_in(landmarks.str());
  const Dataset reparsed = parse_landmark_csv(data_in, parse_label_csv(label_in));

  REQUIRE(reparsed.size() == d.size());
  CHECK(reparsed.subjects == d.subjects);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(reparsed.sequences[i].sequence_id == d.sequences[i].sequence_id);
    CHECK(reparsed.sequences[i].subject_id == d.sequences[i].subject_id);
    CHECK(reparsed.sequences[i].vas_label == d.sequences[i].vas_label);
    REQUIRE(reparsed.sequences[i].frame_count() == d.sequences[i].frame_count());
    for (std::size_t f = 0; f < d.sequences[i].frame_count(); ++f) {
      CHECK((reparsed.sequences[i].frames[f] - d.sequences[i].frames[f]).norm() == 0.0);
    }
  }
}

TEST_CASE("downsample keeps every stride-th frame") {
  std::mt19937_64 rng(42);
  LandmarkSequence seq;
  seq.sequence_id = "s";
  seq.subject_id = "p";
  seq.landmark_count = 3;
  for (int f = 0; f < 8; ++f) {
    Eigen::MatrixXd m(3, 2);
    m.setConstant(f);
    seq.frames.push_back(m);
  }

  SUBCASE("8 frames, stride 4 keeps frames 0 and 4") {
    const LandmarkSequence out = downsample(seq, 4);
    REQUIRE(out.frame_count() == 2);
    CHECK(out.frames[0](0, 0) == 0.0);
    CHECK(out.frames[1](0, 0) == 4.0);
  }

  SUBCASE("stride 1 is the identity") {
    const LandmarkSequence out = downsample(seq, 1);
    REQUIRE(out.frame_count() == 8);
    for (std::size_t f = 0; f < 8; ++f) {
      CHECK((out.frames[f] - seq.frames[f]).norm() == 0.0);
    }
  }

  SUBCASE("9 frames, stride 4 keeps frames 0, 4, 8") {
    Eigen::MatrixXd m(3, 2);
    m.setConstant(8.0);
    seq.frames.push_back(m);
    const LandmarkSequence out = downsample(seq, 4);
    REQUIRE(out.frame_count() == 3);
    CHECK(out.frames[2](0, 0) == 8.0);
  }

  SUBCASE("too few frames is an error") {
    LandmarkSequence tiny = seq;
    tiny.frames.resize(4);  // needs stride + 1 = 5
    CHECK_THROWS_AS(downsample(tiny, 4), std::invalid_argument);
  }

  SUBCASE("composition equals the product stride") {
    const LandmarkSequence ab = downsample(downsample(seq, 2), 2);
    const LandmarkSequence prod = downsample(seq, 4);
    REQUIRE(ab.frame_count() == prod.frame_count());
    for (std::size_t f = 0; f < ab.frame_count(); ++f) {
      CHECK((ab.frames[f] - prod.frames[f]).norm() == 0.0);
    }
  }
}

TEST_CASE("generator determinism and shape") {
  GeneratorSpec spec;
  spec.subjects = 25;
  spec.seqs_per_subject = 8;
  spec.frames_min = 4;
  spec.frames_max = 6;
  spec.landmarks = 4;
  const Dataset a = generate_synthetic(spec, 7);
  const Dataset b = generate_synthetic(spec, 7);
  CHECK(serialize(a) == serialize(b));

  CHECK(a.size() == 200);
  CHECK(a.subjects.size() == 25);

  // Labels cycle through 0..8.
  std::set<double> labels;
  for (const auto& seq : a.sequences) labels.insert(seq.vas_label);
  for (int v = 0; v <= 8; ++v) CHECK(labels.count(v) == 1);

  const Dataset c = generate_synthetic(spec, 8);
  CHECK(serialize(a) != serialize(c));

  // The exported dataset re-parses with its full shape intact.
  std::ostringstream landmarks;
  std::ostringstream labels_out;
  write_landmark_csv(a, landmarks);
  write_label_csv(a, labels_out);
  std::istringstream label_in(labels_out.str());
  std::istringstream data_in(landmarks.str());
  const Dataset reparsed = parse_landmark_csv(data_in, parse_label_csv(label_in));
  CHECK(reparsed.size() == 200);
  CHECK(reparsed.subjects.size() == 25);
}

TEST_CASE("degenerate generator specs are rejected") {
  GeneratorSpec spec;
  spec.subjects = 0;
  CHECK_THROWS_AS(generate_synthetic(spec, 1), std::invalid_argument);
  spec.subjects = 2;
  spec.landmarks = 2;
  CHECK_THROWS_AS(generate_synthetic(spec, 1), std::invalid_argument);
  spec.landmarks = 5;
  spec.frames_min = 6;
  spec.frames_max = 5;
  CHECK_THROWS_AS(generate_synthetic(spec, 1), std::invalid_argument);
}

TEST_CASE("generator config file parsing") {
  std::istringstream in(
      "# comment\n"
      "subjects = 5\n"
      "seqs_per_subject = 2\n"
      "frames_min = 10\n"
      "frames_max = 12\n"
      "n = 7\n"
      "noise_sigma = 0.5\n"
      "seed = 99\n");
  const GeneratorSpec spec = parse_generator_config(in);
  CHECK(spec.subjects == 5);
  CHECK(spec.seqs_per_subject == 2);
  CHECK(spec.frames_min == 10);
  CHECK(spec.frames_max == 12);
  CHECK(spec.landmarks == 7);
  CHECK(spec.noise_sigma == 0.5);
  CHECK(spec.seed == 99);

  std::istringstream bad("unknown_key = 3\n");
  CHECK_THROWS_AS(parse_generator_config(bad), ParseError);
}

// painscore: VAS pain estimation from facial-landmark dynamics.
//
// Subcommands: generate (synthetic datasets), kernel (GAK similarity matrix
// with caching), evaluate (cross-validation protocols), diagnose (kernel and
// dataset inspection).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "painscore/evaluation.hpp"

namespace fs = std::filesystem;
using namespace painscore;

namespace {

// Writes through a temp file in the same directory, then renames.
void atomic_write(const fs::path& path, const std::function<void(std::ostream&)>& writer,
                  bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    writer(out);
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

Dataset load_dataset(const std::string& data_path, const std::string& labels_path) {
  std::ifstream labels_in(labels_path);
  if (!labels_in) throw std::runtime_error("cannot open labels file '" + labels_path + "'");
  const LabelTable labels = parse_label_csv(labels_in);
  std::ifstream data_in(data_path);
  if (!data_in) throw std::runtime_error("cannot open landmark file '" + data_path + "'");
  return parse_landmark_csv(data_in, labels);
}

SimilarityKernel load_kernel_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open kernel cache '" + path + "'");
  return load_kernel_cache(in);
}

struct CommonPipelineFlags {
  double lambda = 1000.0;
  double sigma = 0.8;
  int stride = 4;
  bool normalize_distances = false;
  bool normalize_kernel = false;
  int workers = 1;
};

// Flat `key = value` config files. Flags given on the command line take
// precedence over file values, which take precedence over defaults.
// (CLI11's own set_config only fires on the top-level app, not on
// subcommands, so the application is done by hand here.)
class ConfigFile {
 public:
  ConfigFile(CLI::App* cmd, const std::string& path) : cmd_(cmd) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto strip = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
      };
      line = strip(line);
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": expected 'key = value'");
      }
      std::string key = strip(line.substr(0, eq));
      for (auto& c : key) {
        if (c == '-') c = '_';
      }
      values_[key] = strip(line.substr(eq + 1));
    }
  }

  ~ConfigFile() = default;

  // Each accessor consumes its key; check() rejects leftovers.
  void number(const char* flag, const char* key, double& target) {
    apply(flag, key, [&](const std::string& v) { target = std::stod(v); });
  }
  void integer(const char* flag, const char* key, int& target) {
    apply(flag, key, [&](const std::string& v) { target = std::stoi(v); });
  }
  void uinteger(const char* flag, const char* key, std::uint64_t& target) {
    apply(flag, key, [&](const std::string& v) { target = std::stoull(v); });
  }
  void text(const char* flag, const char* key, std::string& target) {
    apply(flag, key, [&](const std::string& v) { target = v; });
  }
  void boolean(const char* flag, const char* key, bool& target) {
    apply(flag, key, [&](const std::string& v) {
      if (v == "true" || v == "1" || v == "yes" || v == "on") {
        target = true;
      } else if (v == "false" || v == "0" || v == "no" || v == "off") {
        target = false;
      } else {
        throw std::runtime_error("config key '" + std::string(key) +
                                 "': expected a boolean, got '" + v + "'");
      }
    });
  }
  void check() const {
    if (!values_.empty()) {
      throw std::runtime_error("config file: unknown key '" + values_.begin()->first +
                               "'");
    }
  }

 private:
  void apply(const char* flag, const char* key,
             const std::function<void(const std::string&)>& setter) {
    const auto it = values_.find(key);
    if (it == values_.end()) return;
    if (cmd_->count(flag) == 0) {
      try {
        setter(it->second);
      } catch (const std::runtime_error&) {
        throw;
      } catch (const std::exception&) {
        throw std::runtime_error("config key '" + std::string(key) +
                                 "': bad value '" + it->second + "'");
      }
    }
    values_.erase(it);
  }

  CLI::App* cmd_;
  std::map<std::string, std::string> values_;
};

void apply_pipeline_config(ConfigFile& config, CommonPipelineFlags& flags) {
  config.number("--lambda", "lambda", flags.lambda);
  config.number("--sigma", "sigma", flags.sigma);
  config.integer("--stride", "stride", flags.stride);
  config.boolean("--normalize-distances", "normalize_distances",
                 flags.normalize_distances);
  config.boolean("--normalize-kernel", "normalize_kernel", flags.normalize_kernel);
  config.integer("--workers", "workers", flags.workers);
}

void add_pipeline_flags(CLI::App* cmd, CommonPipelineFlags& flags) {
  cmd->add_option("--lambda", flags.lambda, "Curve-fitting proximity weight")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--sigma", flags.sigma, "Gaussian width of the alignment kernel")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--stride", flags.stride,
                  "Frame downsampling stride (1 = all frames, 4 = 25%)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--normalize-distances", flags.normalize_distances,
                "Divide cross distances by their dataset median");
  cmd->add_flag("--normalize-kernel", flags.normalize_kernel,
                "Rescale the kernel to unit diagonal");
  cmd->add_option("--workers", flags.workers, "Worker threads for pairwise work")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

SimilarityKernel assemble_kernel(const Dataset& dataset, const CommonPipelineFlags& flags) {
  FittingConfig fitting;
  fitting.lambda = flags.lambda;
  GakOptions gak;
  gak.sigma = flags.sigma;
  gak.normalize_distances = flags.normalize_distances;
  gak.normalize_kernel = flags.normalize_kernel;
  gak.workers = flags.workers;
  const auto trajectories = prepare_trajectories(dataset, flags.stride, fitting);
  SimilarityKernel kernel = build_kernel_matrix(trajectories, gak);
  kernel.fitting_lambda = flags.lambda;
  kernel.frame_stride = flags.stride;
  return kernel;
}

void print_kernel_info(const SimilarityKernel& kernel, std::ostream& out) {
  out << "kernel: n_seq=" << kernel.size() << " sigma=" << kernel.sigma
      << " distance_scale=" << kernel.distance_scale
      << " normalized=" << (kernel.kernel_normalized ? 1 : 0)
      << " lambda=" << kernel.fitting_lambda << " stride=" << kernel.frame_stride
      << "\nkernel: min_eigenvalue=" << kernel.min_eigenvalue
      << " max_eigenvalue=" << kernel.max_eigenvalue << " jitter=" << kernel.jitter
      << std::endl;
}

int run_generate(const GeneratorSpec& spec, std::uint64_t seed, const std::string& out_dir) {
  const Dataset dataset = generate_synthetic(spec, seed);
  atomic_write(fs::path(out_dir) / "landmarks.csv",
               [&](std::ostream& out) { write_landmark_csv(dataset, out); });
  atomic_write(fs::path(out_dir) / "labels.csv",
               [&](std::ostream& out) { write_label_csv(dataset, out); });
  std::cout << "generate: wrote " << dataset.size() << " sequences / "
            << dataset.subjects.size() << " subjects to " << out_dir << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VAS pain estimation from facial-landmark dynamics"};
  app.require_subcommand(1);

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "Generate a labeled synthetic dataset");
  GeneratorSpec gen_spec;
  std::string gen_out = "data";
  std::string gen_config_file;
  gen->add_option("--config", gen_config_file,
                  "Config file (key = value, same keys as the flags)");
  gen->add_option("--subjects", gen_spec.subjects, "Number of subjects")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen->add_option("--seqs,--seqs_per_subject", gen_spec.seqs_per_subject,
                  "Sequences per subject")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen->add_option("--frames-min,--frames_min", gen_spec.frames_min, "Minimum frame count")
      ->capture_default_str()
      ->check(CLI::Range(2, 1 << 20));
  gen->add_option("--frames-max,--frames_max", gen_spec.frames_max, "Maximum frame count")
      ->capture_default_str()
      ->check(CLI::Range(2, 1 << 20));
  gen->add_option("--n", gen_spec.landmarks, "Landmarks per frame (>= 3)")
      ->capture_default_str()
      ->check(CLI::Range(3, 1 << 16));
  gen->add_option("--noise,--noise_sigma", gen_spec.noise_sigma,
                  "Additive coordinate noise (pixels)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_spec.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->capture_default_str();
  gen->callback([&]() {
    ConfigFile config(gen, gen_config_file);
    config.integer("--subjects", "subjects", gen_spec.subjects);
    config.integer("--seqs", "seqs_per_subject", gen_spec.seqs_per_subject);
    config.integer("--frames-min", "frames_min", gen_spec.frames_min);
    config.integer("--frames-max", "frames_max", gen_spec.frames_max);
    config.integer("--n", "n", gen_spec.landmarks);
    config.number("--noise", "noise_sigma", gen_spec.noise_sigma);
    config.uinteger("--seed", "seed", gen_spec.seed);
    config.text("--out", "out", gen_out);
    config.check();
    run_generate(gen_spec, gen_spec.seed, gen_out);
  });

  // ---- kernel ----
  auto* ker = app.add_subcommand("kernel", "Build and cache the similarity kernel");
  std::string ker_data;
  std::string ker_labels;
  std::string ker_out = "out";
  std::string ker_config_file;
  bool ker_csv = false;
  CommonPipelineFlags ker_flags;
  ker->add_option("--config", ker_config_file,
                  "Config file (key = value, same keys as the flags)");
  ker->add_option("--data", ker_data, "Landmark CSV")->required();
  ker->add_option("--labels", ker_labels, "Label CSV")->required();
  add_pipeline_flags(ker, ker_flags);
  ker->add_option("--out", ker_out, "Output directory")->capture_default_str();
  ker->add_flag("--csv", ker_csv, "Also export the kernel as CSV");
  ker->callback([&]() {
    ConfigFile config(ker, ker_config_file);
    apply_pipeline_config(config, ker_flags);
    config.text("--out", "out", ker_out);
    config.boolean("--csv", "csv", ker_csv);
    config.check();
    const Dataset dataset = load_dataset(ker_data, ker_labels);
    const SimilarityKernel kernel = assemble_kernel(dataset, ker_flags);
    atomic_write(fs::path(ker_out) / "kernel.bin",
                 [&](std::ostream& out) { save_kernel_cache(kernel, out); }, true);
    if (ker_csv) {
      atomic_write(fs::path(ker_out) / "kernel.csv",
                   [&](std::ostream& out) { write_kernel_csv(kernel, out); });
    }
    print_kernel_info(kernel, std::cout);
    std::cout << "kernel: wrote " << (fs::path(ker_out) / "kernel.bin").string()
              << std::endl;
  });

  // ---- evaluate ----
  auto* eval = app.add_subcommand("evaluate", "Run a cross-validation protocol");
  std::string eval_data;
  std::string eval_labels;
  std::string eval_kernel_path;
  std::string eval_out = "out";
  std::string eval_protocol = "5fold";
  std::string eval_config_file;
  eval->add_option("--config", eval_config_file,
                   "Config file (key = value, same keys as the flags)");
  CommonPipelineFlags eval_flags;
  double svr_c = 1.0;
  double svr_eps = 0.1;
  bool grid = false;
  bool macro_average = false;
  bool dump_models = false;
  std::uint64_t eval_seed = 7;
  eval->add_option("--data", eval_data, "Landmark CSV")->required();
  eval->add_option("--labels", eval_labels, "Label CSV")->required();
  eval->add_option("--kernel", eval_kernel_path,
                   "Reuse a kernel cache instead of recomputing");
  eval->add_option("--protocol", eval_protocol, "Cross-validation protocol")
      ->capture_default_str()
      ->check(CLI::IsMember({"loso-seq", "loso-subject", "5fold"}));
  add_pipeline_flags(eval, eval_flags);
  eval->add_option("--svr-c", svr_c, "SVR regularization C")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval->add_option("--svr-eps", svr_eps, "SVR epsilon tube")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  eval->add_flag("--grid", grid, "Grid-search C and epsilon on an inner split");
  eval->add_flag("--macro-average", macro_average,
                 "Report the mean of per-fold MAEs instead of the pooled MAE");
  eval->add_flag("--dump-models", dump_models, "Write per-fold SVR model dumps");
  eval->add_option("--seed", eval_seed, "Seed (reserved for future randomized options)")
      ->capture_default_str();
  eval->add_option("--out", eval_out, "Output directory")->capture_default_str();
  eval->callback([&]() {
    ConfigFile config(eval, eval_config_file);
    apply_pipeline_config(config, eval_flags);
    config.text("--protocol", "protocol", eval_protocol);
    config.number("--svr-c", "svr_c", svr_c);
    config.number("--svr-eps", "svr_eps", svr_eps);
    config.boolean("--grid", "grid", grid);
    config.boolean("--macro-average", "macro_average", macro_average);
    config.boolean("--dump-models", "dump_models", dump_models);
    config.uinteger("--seed", "seed", eval_seed);
    config.text("--kernel", "kernel", eval_kernel_path);
    config.text("--out", "out", eval_out);
    config.check();
    if (eval_protocol != "loso-seq" && eval_protocol != "loso-subject" &&
        eval_protocol != "5fold") {
      throw CLI::ValidationError(
          "--protocol", "must be one of loso-seq, loso-subject, 5fold");
    }
    const Dataset dataset = load_dataset(eval_data, eval_labels);
    ProtocolSpec spec;
    if (eval_protocol == "loso-seq") {
      spec.kind = ProtocolKind::LeaveOneSequenceOut;
    } else if (eval_protocol == "loso-subject") {
      spec.kind = ProtocolKind::LeaveOneSubjectOut;
    } else {
      spec.kind = ProtocolKind::FiveFoldBySubject;
    }
    spec.frame_stride = eval_flags.stride;
    spec.fitting.lambda = eval_flags.lambda;
    spec.gak.sigma = eval_flags.sigma;
    spec.gak.normalize_distances = eval_flags.normalize_distances;
    spec.gak.normalize_kernel = eval_flags.normalize_kernel;
    spec.gak.workers = eval_flags.workers;
    spec.svr.params.c = svr_c;
    spec.svr.params.epsilon = svr_eps;
    spec.svr.grid_search = grid;
    spec.macro_average = macro_average;

    ProtocolResult result;
    if (!eval_kernel_path.empty()) {
      const SimilarityKernel kernel = load_kernel_file(eval_kernel_path);
      if (kernel.sigma != eval_flags.sigma ||
          (kernel.fitting_lambda != 0.0 && kernel.fitting_lambda != eval_flags.lambda) ||
          (kernel.frame_stride != 0 && kernel.frame_stride != eval_flags.stride) ||
          kernel.kernel_normalized != eval_flags.normalize_kernel) {
        throw std::runtime_error(
            "kernel cache parameters do not match the requested flags "
            "(sigma/lambda/stride/normalize-kernel)");
      }
      result = run_protocol(dataset, spec, kernel);
    } else {
      result = run_protocol(dataset, spec);
      atomic_write(fs::path(eval_out) / "kernel.bin",
                   [&](std::ostream& out) { save_kernel_cache(result.kernel, out); },
                   true);
    }

    atomic_write(fs::path(eval_out) / "predictions.csv",
                 [&](std::ostream& out) { export_predictions(result.report, out); });
    atomic_write(fs::path(eval_out) / "summary.txt",
                 [&](std::ostream& out) { write_summary(result, spec, out); });
    atomic_write(fs::path(eval_out) / "folds.csv", [&](std::ostream& out) {
      out << "fold,test_count,mae,rmse,svr_c,svr_epsilon\n";
      for (const auto& fold : result.folds) {
        out << fold.fold << ',' << fold.test_count << ',' << fold.mae << ','
            << fold.rmse << ',' << fold.svr_c << ',' << fold.svr_epsilon << '\n';
      }
    });
    if (dump_models) {
      // Models are refit per fold here only for the dump; the evaluation
      // itself already ran above.
      std::vector<double> labels;
      for (const auto& seq : dataset.sequences) labels.push_back(seq.vas_label);
      for (std::size_t f = 0; f < result.plan.folds.size(); ++f) {
        const auto& fold = result.plan.folds[f];
        std::vector<double> train_labels;
        std::vector<std::string> ids;
        Eigen::MatrixXd k_train(fold.train.size(), fold.train.size());
        for (std::size_t r = 0; r < fold.train.size(); ++r) {
          train_labels.push_back(labels[fold.train[r]]);
          ids.push_back(dataset.sequences[fold.train[r]].sequence_id);
          for (std::size_t c = 0; c < fold.train.size(); ++c) {
            k_train(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                result.kernel.k(static_cast<Eigen::Index>(fold.train[r]),
                                static_cast<Eigen::Index>(fold.train[c]));
          }
        }
        SvrParams params;
        params.c = result.folds[f].svr_c;
        params.epsilon = result.folds[f].svr_epsilon;
        const SvrModel model = train_svr(k_train, train_labels, params, ids);
        atomic_write(fs::path(eval_out) / "models" /
                         ("fold_" + std::to_string(f) + ".txt"),
                     [&](std::ostream& out) { write_model(model, out); });
      }
    }

    write_summary(result, spec, std::cout);
    print_kernel_info(result.kernel, std::cout);
    std::cout << "evaluate: wrote predictions.csv, summary.txt, folds.csv to "
              << eval_out << std::endl;
  });

  // ---- diagnose ----
  auto* diag = app.add_subcommand("diagnose", "Inspect a kernel cache or dataset");
  std::string diag_kernel;
  std::string diag_data;
  std::string diag_labels;
  diag->add_option("--kernel", diag_kernel, "Kernel cache file");
  diag->add_option("--data", diag_data, "Landmark CSV");
  diag->add_option("--labels", diag_labels, "Label CSV");
  diag->callback([&]() {
    if (diag_kernel.empty() && diag_data.empty()) {
      throw CLI::ValidationError("diagnose", "pass --kernel and/or --data");
    }
    if (!diag_kernel.empty()) {
      const SimilarityKernel kernel = load_kernel_file(diag_kernel);
      print_kernel_info(kernel, std::cout);
      const double asym = (kernel.k - kernel.k.transpose()).cwiseAbs().maxCoeff();
      std::cout << "kernel: symmetry_residual=" << asym
                << " diag_min=" << kernel.k.diagonal().minCoeff() << std::endl;
    }
    if (!diag_data.empty()) {
      if (diag_labels.empty()) {
        throw CLI::ValidationError("diagnose", "--data requires --labels");
      }
      const Dataset dataset = load_dataset(diag_data, diag_labels);
      std::size_t min_frames = SIZE_MAX;
      std::size_t max_frames = 0;
      for (const auto& seq : dataset.sequences) {
        min_frames = std::min(min_frames, seq.frame_count());
        max_frames = std::max(max_frames, seq.frame_count());
      }
      std::cout << "dataset: sequences=" << dataset.size()
                << " subjects=" << dataset.subjects.size() << " frames=[" << min_frames
                << ", " << max_frames << "] n="
                << (dataset.size() > 0 ? dataset.sequences[0].landmark_count : 0)
                << std::endl;
      std::map<double, int> histogram;
      for (const auto& seq : dataset.sequences) histogram[seq.vas_label] += 1;
      std::cout << "labels:";
      for (const auto& [vas, count] : histogram) {
        std::cout << ' ' << vas << "x" << count;
      }
      std::cout << std::endl;
    }
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

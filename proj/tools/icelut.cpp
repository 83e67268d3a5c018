#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "icelut/engine.hpp"
#include "icelut/image_io.hpp"
#include "icelut/lutgen.hpp"
#include "icelut/metrics.hpp"
#include "icelut/model.hpp"
#include "icelut/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace icelut;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDataset = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitBundle = 5;
constexpr int kExitVerification = 6;

[[noreturn]] void fail(int code, const std::string& message) {
  std::cerr << "error: " << message << "\n";
  std::exit(code);
}

// Runs one phase of a command; any failure inside maps to that phase's
// exit code (0 ok, 2 config, 3 dataset, 4 checkpoint, 5 bundle, 6
// verification).
template <typename Fn>
auto phase(int exit_code, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    fail(exit_code, e.what());
  } catch (const std::exception& e) {
    fail(exit_code, e.what());
  }
}

int thread_budget() {
  int threads = static_cast<int>(
      std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("ICELUT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 1024) {
      threads = static_cast<int>(v);
    }
  }
  return threads;
}

std::vector<fs::path> list_images(const std::string& dir, int exit_code) {
  if (!fs::is_directory(dir)) {
    fail(exit_code, "not a directory: " + dir);
  }
  std::vector<fs::path> files;
  for (const fs::directory_entry& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::IoFailure, "cannot open config file: " + path);
  }
  return json::parse(in);  // throws on malformed input
}

void require_keys(const json& j, const char* where,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    raise(ErrorCode::InvalidConfig, std::string(where) + " must be an object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      raise(ErrorCode::InvalidConfig,
            "unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

json finite_or_text(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

model::BranchMode parse_branch_mode(const std::string& name) {
  if (name == "parallel-nibbles") return model::BranchMode::kParallelNibbles;
  if (name == "single-byte") return model::BranchMode::kSingleByte;
  raise(ErrorCode::InvalidConfig, "unknown branch mode: " + name);
}

model::LatticeCoupling parse_coupling(const std::string& name) {
  if (name == "full") return model::LatticeCoupling::kFull;
  if (name == "per-channel") return model::LatticeCoupling::kPerChannel;
  raise(ErrorCode::InvalidConfig, "unknown lattice coupling: " + name);
}

void apply_model_json(const json& j, model::ModelConfig& cfg) {
  require_keys(j, "model",
               {"channels", "groups", "group_length", "basis_count",
                "lattice_bins", "layer_widths", "train_resolution",
                "first_layer_kernel", "branch_mode", "coupling"});
  if (j.contains("channels")) cfg.channels = j.at("channels").get<int>();
  if (j.contains("groups")) cfg.groups = j.at("groups").get<int>();
  if (j.contains("group_length"))
    cfg.group_length = j.at("group_length").get<int>();
  if (j.contains("basis_count"))
    cfg.basis_count = j.at("basis_count").get<int>();
  if (j.contains("lattice_bins"))
    cfg.lattice_bins = j.at("lattice_bins").get<int>();
  if (j.contains("layer_widths"))
    cfg.layer_widths = j.at("layer_widths").get<std::vector<int>>();
  if (j.contains("train_resolution"))
    cfg.train_resolution = j.at("train_resolution").get<int>();
  if (j.contains("first_layer_kernel"))
    cfg.first_layer_kernel = j.at("first_layer_kernel").get<int>();
  if (j.contains("branch_mode"))
    cfg.branch_mode = parse_branch_mode(j.at("branch_mode").get<std::string>());
  if (j.contains("coupling"))
    cfg.coupling = parse_coupling(j.at("coupling").get<std::string>());
}

void apply_train_json(const json& j, model::TrainConfig& cfg) {
  require_keys(j, "train",
               {"epochs", "learning_rate", "batch_size", "seed", "beta1",
                "beta2", "epsilon", "max_steps"});
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("learning_rate"))
    cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("beta1")) cfg.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) cfg.beta2 = j.at("beta2").get<double>();
  if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
  if (j.contains("max_steps")) cfg.max_steps = j.at("max_steps").get<long>();
}

std::vector<model::ImagePair> load_pairs(const std::string& input_dir,
                                         const std::string& target_dir) {
  std::vector<fs::path> inputs = list_images(input_dir, kExitDataset);
  if (inputs.empty()) {
    fail(kExitDataset, "no .png/.ppm images in " + input_dir);
  }
  if (!fs::is_directory(target_dir)) {
    fail(kExitDataset, "not a directory: " + target_dir);
  }
  std::vector<model::ImagePair> pairs;
  pairs.reserve(inputs.size());
  for (const fs::path& input_path : inputs) {
    const fs::path target_path = fs::path(target_dir) / input_path.filename();
    if (!fs::is_regular_file(target_path)) {
      fail(kExitDataset, "missing target image: " + target_path.string());
    }
    model::ImagePair pair;
    pair.input = imaging::load_image(input_path.string());
    pair.target = imaging::load_image(target_path.string());
    if (!pair.input.same_size(pair.target)) {
      fail(kExitDataset, "size mismatch for pair: " + input_path.string());
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

json storage_json(const lutgen::StorageReport& report) {
  return json{{"weight_lut_bytes", report.weight_lut_bytes},
              {"channel_lut_bytes", report.channel_lut_bytes},
              {"basis_bytes", report.basis_bytes},
              {"header_bytes", report.header_bytes},
              {"total_bytes", report.total_bytes}};
}

json stage_json(const engine::StageStats& stats) {
  return json{{"median_ms", stats.median_ms},
              {"p10_ms", stats.p10_ms},
              {"p90_ms", stats.p90_ms}};
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::string input_dir;
  std::string target_dir;
  std::string checkpoint_out = "model.ckpt";
  std::string loss_csv;
  int epochs = 0;
  double learning_rate = 0.0;
  int batch_size = 0;
  std::uint64_t seed = 0;
  long max_steps = 0;
  int channels = 0;
  int groups = 0;
  int group_length = 0;
  int basis_count = 0;
  int lattice_bins = 0;
  int train_resolution = 0;
  int first_layer_kernel = 0;
  std::vector<int> widths;
  std::string branch_mode;
  std::string coupling;
};

int run_train(const TrainArgs& args, const CLI::App& cmd) {
  model::ModelConfig model_cfg;
  model::TrainConfig train_cfg;
  std::string input_dir = args.input_dir;
  std::string target_dir = args.target_dir;
  std::string checkpoint_out = args.checkpoint_out;
  std::string loss_csv = args.loss_csv;

  phase(kExitConfig, [&] {
    if (!args.config_path.empty()) {
      const json j = load_json_file(args.config_path);
      require_keys(j, "config", {"model", "train", "data", "output"});
      if (j.contains("model")) apply_model_json(j.at("model"), model_cfg);
      if (j.contains("train")) apply_train_json(j.at("train"), train_cfg);
      if (j.contains("data")) {
        require_keys(j.at("data"), "data", {"input_dir", "target_dir"});
        if (j.at("data").contains("input_dir"))
          input_dir = j.at("data").at("input_dir").get<std::string>();
        if (j.at("data").contains("target_dir"))
          target_dir = j.at("data").at("target_dir").get<std::string>();
      }
      if (j.contains("output")) {
        require_keys(j.at("output"), "output", {"checkpoint", "loss_csv"});
        if (j.at("output").contains("checkpoint"))
          checkpoint_out = j.at("output").at("checkpoint").get<std::string>();
        if (j.at("output").contains("loss_csv"))
          loss_csv = j.at("output").at("loss_csv").get<std::string>();
      }
    }
    // flags win over the config file
    if (cmd.count("--input-dir")) input_dir = args.input_dir;
    if (cmd.count("--target-dir")) target_dir = args.target_dir;
    if (cmd.count("--checkpoint-out")) checkpoint_out = args.checkpoint_out;
    if (cmd.count("--loss-csv")) loss_csv = args.loss_csv;
    if (cmd.count("--epochs")) train_cfg.epochs = args.epochs;
    if (cmd.count("--learning-rate"))
      train_cfg.learning_rate = args.learning_rate;
    if (cmd.count("--batch-size")) train_cfg.batch_size = args.batch_size;
    if (cmd.count("--seed")) train_cfg.seed = args.seed;
    if (cmd.count("--max-steps")) train_cfg.max_steps = args.max_steps;
    if (cmd.count("--channels")) model_cfg.channels = args.channels;
    if (cmd.count("--groups")) model_cfg.groups = args.groups;
    if (cmd.count("--group-length"))
      model_cfg.group_length = args.group_length;
    if (cmd.count("--basis-count")) model_cfg.basis_count = args.basis_count;
    if (cmd.count("--lattice-bins"))
      model_cfg.lattice_bins = args.lattice_bins;
    if (cmd.count("--train-resolution"))
      model_cfg.train_resolution = args.train_resolution;
    if (cmd.count("--first-layer-kernel"))
      model_cfg.first_layer_kernel = args.first_layer_kernel;
    if (cmd.count("--widths")) model_cfg.layer_widths = args.widths;
    if (cmd.count("--branch-mode"))
      model_cfg.branch_mode = parse_branch_mode(args.branch_mode);
    if (cmd.count("--coupling"))
      model_cfg.coupling = parse_coupling(args.coupling);

    model_cfg.validate();
    train_cfg.validate();
    if (input_dir.empty() || target_dir.empty()) {
      raise(ErrorCode::InvalidConfig,
            "train needs --input-dir and --target-dir (or a config file)");
    }
    return 0;
  });

  std::vector<model::ImagePair> dataset =
      phase(kExitDataset, [&] { return load_pairs(input_dir, target_dir); });

  model::TrainResult result = phase(kExitDataset, [&] {
    return model::train(dataset, model_cfg, train_cfg);
  });

  phase(kExitCheckpoint, [&] {
    model::save_checkpoint(result.model, checkpoint_out);
    if (!loss_csv.empty()) {
      std::ofstream csv(loss_csv, std::ios::binary);
      if (!csv) {
        raise(ErrorCode::IoFailure, "cannot write " + loss_csv);
      }
      csv << "step,loss\n";
      csv.precision(12);
      for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
        csv << (i + 1) << "," << result.loss_history[i] << "\n";
      }
    }
    return 0;
  });

  const double final_loss =
      result.loss_history.empty() ? 0.0 : result.loss_history.back();
  json summary{{"steps", result.loss_history.size()},
               {"final_loss", final_loss},
               {"checkpoint", checkpoint_out}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

struct BakeArgs {
  std::string config_path;
  std::string checkpoint;
  std::string out = "model.lut";
  double delta_s = 2.0;
  double offset = 16.0;
};

int run_bake(const BakeArgs& args, const CLI::App& cmd) {
  lutgen::QuantSpec spec;
  phase(kExitConfig, [&] {
    if (!args.config_path.empty()) {
      const json j = load_json_file(args.config_path);
      require_keys(j, "config", {"delta_s", "offset"});
      if (j.contains("delta_s")) spec.sampling_interval = j.at("delta_s").get<double>();
      if (j.contains("offset")) spec.offset = j.at("offset").get<double>();
    }
    if (cmd.count("--delta-s")) spec.sampling_interval = args.delta_s;
    if (cmd.count("--offset")) spec.offset = args.offset;
    spec.validate();
    return 0;
  });

  model::TrainableModel trained = phase(kExitCheckpoint, [&] {
    return model::load_checkpoint(args.checkpoint);
  });

  lutgen::LutBundle bundle =
      phase(kExitConfig, [&] { return lutgen::bake(trained, spec); });

  phase(kExitBundle, [&] {
    lutgen::export_bundle(bundle, args.out);
    return 0;
  });

  json report = storage_json(lutgen::bundle_storage(bundle));
  report["bundle"] = args.out;
  std::cout << report.dump(2) << "\n";
  return 0;
}

struct RetouchArgs {
  std::string bundle;
  std::string input_dir;
  std::string output_dir;
  std::string target_dir;
  std::string metrics_csv;
  int working_size = 32;
};

int run_retouch(const RetouchArgs& args) {
  phase(kExitConfig, [&] {
    if (args.working_size < 1) {
      raise(ErrorCode::InvalidConfig, "--working-size must be >= 1");
    }
    return 0;
  });

  lutgen::LutBundle bundle = phase(kExitBundle, [&] {
    return lutgen::import_bundle(args.bundle);
  });

  std::vector<fs::path> inputs = list_images(args.input_dir, kExitDataset);
  if (inputs.empty()) {
    fail(kExitDataset, "no .png/.ppm images in " + args.input_dir);
  }
  std::error_code ec;
  fs::create_directories(args.output_dir, ec);

  const int threads = thread_budget();
  int succeeded = 0;
  double psnr_sum = 0.0, ssim_sum = 0.0, de_sum = 0.0;
  int metric_count = 0;
  std::ofstream csv;
  if (!args.metrics_csv.empty()) {
    csv.open(args.metrics_csv, std::ios::binary);
    csv << "file,psnr,ssim,delta_e\n";
    csv.precision(10);
  }

  for (const fs::path& path : inputs) {
    try {
      const imaging::ImageU8 input = imaging::load_image(path.string());
      const imaging::ImageU8 output =
          engine::retouch(bundle, input, args.working_size, nullptr, threads);
      const fs::path out_path = fs::path(args.output_dir) / path.filename();
      imaging::save_image(output, out_path.string());
      ++succeeded;

      if (!args.target_dir.empty()) {
        const fs::path target_path =
            fs::path(args.target_dir) / path.filename();
        const imaging::ImageU8 target =
            imaging::load_image(target_path.string());
        const metrics::MetricReport m = metrics::evaluate(output, target);
        psnr_sum += m.psnr;
        ssim_sum += m.ssim;
        de_sum += m.delta_e;
        ++metric_count;
        if (csv.is_open()) {
          csv << path.filename().string() << "," << m.psnr << "," << m.ssim
              << "," << m.delta_e << "\n";
        }
      }
    } catch (const std::exception& e) {
      std::cerr << "warning: " << path.string() << ": " << e.what() << "\n";
    }
  }

  if (succeeded == 0) {
    fail(kExitDataset, "no image could be processed");
  }
  json summary{{"processed", succeeded},
               {"failed", static_cast<int>(inputs.size()) - succeeded}};
  if (metric_count > 0) {
    summary["mean_psnr"] = finite_or_text(psnr_sum / metric_count);
    summary["mean_ssim"] = finite_or_text(ssim_sum / metric_count);
    summary["mean_delta_e"] = finite_or_text(de_sum / metric_count);
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

struct VerifyArgs {
  std::string checkpoint;
  std::string bundle;
  std::string image_dir;
  int working_size = 32;
};

int run_verify(const VerifyArgs& args) {
  model::TrainableModel trained = phase(kExitCheckpoint, [&] {
    return model::load_checkpoint(args.checkpoint);
  });
  lutgen::LutBundle bundle = phase(kExitBundle, [&] {
    return lutgen::import_bundle(args.bundle);
  });

  std::vector<fs::path> paths = list_images(args.image_dir, kExitDataset);
  if (paths.empty()) {
    fail(kExitConfig, "verify needs at least one image in " + args.image_dir);
  }
  std::vector<imaging::ImageU8> images = phase(kExitDataset, [&] {
    std::vector<imaging::ImageU8> loaded;
    for (const fs::path& p : paths) {
      loaded.push_back(imaging::load_image(p.string()));
    }
    return loaded;
  });

  const engine::EquivalenceReport report = engine::verify_equivalence(
      trained, bundle, images, args.working_size);

  const bool ok = report.max_weight_deviation <= report.weight_bound + 1e-12 &&
                  report.max_pixel_deviation <= 1;
  json out{{"max_weight_deviation", report.max_weight_deviation},
           {"weight_bound", report.weight_bound},
           {"max_pixel_deviation", report.max_pixel_deviation},
           {"images", report.images},
           {"within_bounds", ok}};
  std::cout << out.dump(2) << "\n";
  return ok ? 0 : kExitVerification;
}

struct BenchArgs {
  std::string bundle;
  std::string image_dir;
  std::string compare_checkpoint;
  int repeats = 5;
  int working_size = 32;
};

int run_bench(const BenchArgs& args) {
  phase(kExitConfig, [&] {
    if (args.repeats < 3) {
      raise(ErrorCode::InvalidConfig, "--repeats must be >= 3");
    }
    return 0;
  });
  lutgen::LutBundle bundle = phase(kExitBundle, [&] {
    return lutgen::import_bundle(args.bundle);
  });
  std::vector<fs::path> paths = list_images(args.image_dir, kExitDataset);
  if (paths.empty()) {
    fail(kExitDataset, "no .png/.ppm images in " + args.image_dir);
  }
  std::vector<imaging::ImageU8> images = phase(kExitDataset, [&] {
    std::vector<imaging::ImageU8> loaded;
    for (const fs::path& p : paths) {
      loaded.push_back(imaging::load_image(p.string()));
    }
    return loaded;
  });

  std::optional<model::TrainableModel> network;
  if (!args.compare_checkpoint.empty()) {
    network = phase(kExitCheckpoint, [&] {
      return model::load_checkpoint(args.compare_checkpoint);
    });
  }

  const engine::BenchReport report =
      engine::bench(bundle, images, args.repeats,
                    network ? &*network : nullptr, args.working_size);

  json out{{"weight_stage", stage_json(report.weight_stage)},
           {"interpolation_stage", stage_json(report.interpolation_stage)},
           {"images", report.images},
           {"repeats", report.repeats},
           {"working_size", args.working_size}};
  if (report.network_weight_stage) {
    out["network_weight_stage"] = stage_json(*report.network_weight_stage);
    const double lut_ms = report.weight_stage.median_ms;
    out["ratio"] = finite_or_text(
        lut_ms > 0.0 ? report.network_weight_stage->median_ms / lut_ms
                     : std::numeric_limits<double>::infinity());
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct MetricsArgs {
  std::string a;
  std::string b;
  std::string csv;
};

int run_metrics(const MetricsArgs& args) {
  const bool dir_mode = fs::is_directory(args.a);
  if (dir_mode != fs::is_directory(args.b)) {
    fail(kExitConfig, "metrics expects two files or two directories");
  }

  if (!dir_mode) {
    const metrics::MetricReport m = phase(kExitDataset, [&] {
      const imaging::ImageU8 a = imaging::load_image(args.a);
      const imaging::ImageU8 b = imaging::load_image(args.b);
      return metrics::evaluate(a, b);
    });
    json out{{"psnr", finite_or_text(m.psnr)},
             {"ssim", finite_or_text(m.ssim)},
             {"delta_e", finite_or_text(m.delta_e)}};
    std::cout << out.dump(2) << "\n";
    return 0;
  }

  std::vector<fs::path> lhs = list_images(args.a, kExitDataset);
  if (lhs.empty()) {
    fail(kExitDataset, "no .png/.ppm images in " + args.a);
  }
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!args.csv.empty()) {
    file.open(args.csv, std::ios::binary);
    out = &file;
  }
  out->precision(10);
  *out << "file,psnr,ssim,delta_e\n";
  double psnr_sum = 0.0, ssim_sum = 0.0, de_sum = 0.0;
  int count = 0;
  for (const fs::path& path : lhs) {
    const fs::path other = fs::path(args.b) / path.filename();
    if (!fs::is_regular_file(other)) {
      fail(kExitDataset, "missing counterpart: " + other.string());
    }
    const metrics::MetricReport m = phase(kExitDataset, [&] {
      const imaging::ImageU8 a = imaging::load_image(path.string());
      const imaging::ImageU8 b = imaging::load_image(other.string());
      return metrics::evaluate(a, b);
    });
    *out << path.filename().string() << "," << m.psnr << "," << m.ssim << ","
         << m.delta_e << "\n";
    psnr_sum += m.psnr;
    ssim_sum += m.ssim;
    de_sum += m.delta_e;
    ++count;
  }
  *out << "mean," << (psnr_sum / count) << "," << (ssim_sum / count) << ","
       << (de_sum / count) << "\n";
  return 0;
}

struct SynthArgs {
  std::string out_dir;
  int count = 20;
  int size = 64;
  std::string transform = "gamma:0.8";
  std::uint64_t seed = 1;
};

int run_synth(const SynthArgs& args) {
  phase(kExitConfig, [&] {
    if (args.count < 1) raise(ErrorCode::InvalidConfig, "--count must be >= 1");
    if (args.size < 2) raise(ErrorCode::InvalidConfig, "--size must be >= 2");
    if (!synth::is_known_transform(args.transform)) {
      raise(ErrorCode::InvalidConfig, "unknown transform: " + args.transform);
    }
    return 0;
  });

  return phase(kExitDataset, [&] {
    const fs::path input_dir = fs::path(args.out_dir) / "input";
    const fs::path target_dir = fs::path(args.out_dir) / "target";
    fs::create_directories(input_dir);
    fs::create_directories(target_dir);
    std::vector<model::ImagePair> pairs =
        synth::make_dataset(args.seed, args.count, args.size, args.transform);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "%04zu.png", i + 1);
      imaging::save_image(pairs[i].input, (input_dir / name).string());
      imaging::save_image(pairs[i].target, (target_dir / name).string());
    }
    json summary{{"pairs", pairs.size()},
                 {"size", args.size},
                 {"transform", args.transform},
                 {"seed", args.seed},
                 {"out_dir", args.out_dir}};
    std::cout << summary.dump(2) << "\n";
    return 0;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"table-driven image color retouching pipeline"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a retouching model on paired images");
  train_cmd->add_option("--config", train_args.config_path,
                        "JSON config file (flags override it)");
  train_cmd->add_option("--input-dir", train_args.input_dir, "input images");
  train_cmd->add_option("--target-dir", train_args.target_dir,
                        "target (retouched) images, paired by filename");
  train_cmd->add_option("--checkpoint-out", train_args.checkpoint_out,
                        "checkpoint output path");
  train_cmd->add_option("--loss-csv", train_args.loss_csv,
                        "per-step loss history CSV");
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
  train_cmd->add_option("--learning-rate", train_args.learning_rate,
                        "Adam learning rate");
  train_cmd->add_option("--batch-size", train_args.batch_size, "batch size");
  train_cmd->add_option("--seed", train_args.seed, "RNG seed");
  train_cmd->add_option("--max-steps", train_args.max_steps,
                        "stop after this many optimizer steps (0 = all)");
  train_cmd->add_option("--channels", train_args.channels,
                        "pooled feature width C");
  train_cmd->add_option("--groups", train_args.groups, "split head groups K");
  train_cmd->add_option("--group-length", train_args.group_length,
                        "features per group L");
  train_cmd->add_option("--basis-count", train_args.basis_count,
                        "basis lattice count N");
  train_cmd->add_option("--lattice-bins", train_args.lattice_bins,
                        "lattice vertices per axis M");
  train_cmd->add_option("--train-resolution", train_args.train_resolution,
                        "working-image side during training");
  train_cmd->add_option("--first-layer-kernel", train_args.first_layer_kernel,
                        "first layer kernel (1 or 3)");
  train_cmd->add_option("--widths", train_args.widths, "hidden layer widths")
      ->delimiter(',');
  train_cmd->add_option("--branch-mode", train_args.branch_mode,
                        "parallel-nibbles | single-byte");
  train_cmd->add_option("--coupling", train_args.coupling,
                        "full | per-channel");

  BakeArgs bake_args;
  CLI::App* bake_cmd =
      app.add_subcommand("bake", "convert a checkpoint into lookup tables");
  bake_cmd->add_option("--config", bake_args.config_path,
                       "JSON config file (flags override it)");
  bake_cmd->add_option("--checkpoint", bake_args.checkpoint, "checkpoint path")
      ->required();
  bake_cmd->add_option("--out", bake_args.out, "bundle output path");
  bake_cmd->add_option("--delta-s", bake_args.delta_s,
                       "feature quantization steps per unit");
  bake_cmd->add_option("--offset", bake_args.offset,
                       "feature quantization clamp radius");

  RetouchArgs retouch_args;
  CLI::App* retouch_cmd =
      app.add_subcommand("retouch", "apply a baked bundle to a directory");
  retouch_cmd->add_option("--bundle", retouch_args.bundle, "bundle path")
      ->required();
  retouch_cmd->add_option("--in", retouch_args.input_dir, "input directory")
      ->required();
  retouch_cmd->add_option("--out", retouch_args.output_dir, "output directory")
      ->required();
  retouch_cmd->add_option("--target", retouch_args.target_dir,
                          "reference directory for metrics");
  retouch_cmd->add_option("--metrics-csv", retouch_args.metrics_csv,
                          "per-file metrics CSV (needs --target)");
  retouch_cmd->add_option("--working-size", retouch_args.working_size,
                          "weight-stage working image side");

  VerifyArgs verify_args;
  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "check a bundle against its source checkpoint");
  verify_cmd->add_option("--checkpoint", verify_args.checkpoint, "checkpoint")
      ->required();
  verify_cmd->add_option("--bundle", verify_args.bundle, "bundle")->required();
  verify_cmd->add_option("--images", verify_args.image_dir, "probe images")
      ->required();
  verify_cmd->add_option("--working-size", verify_args.working_size,
                         "weight-stage working image side");

  BenchArgs bench_args;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "time the weight and mapping stages");
  bench_cmd->add_option("--bundle", bench_args.bundle, "bundle")->required();
  bench_cmd->add_option("--images", bench_args.image_dir, "image directory")
      ->required();
  bench_cmd->add_option("--repeats", bench_args.repeats, "timing repeats");
  bench_cmd->add_option("--compare-checkpoint", bench_args.compare_checkpoint,
                        "also time the network weight stage");
  bench_cmd->add_option("--working-size", bench_args.working_size,
                        "weight-stage working image side");

  MetricsArgs metrics_args;
  CLI::App* metrics_cmd =
      app.add_subcommand("metrics", "PSNR/SSIM/color distance between images");
  metrics_cmd->add_option("--a", metrics_args.a, "image or directory")
      ->required();
  metrics_cmd->add_option("--b", metrics_args.b, "image or directory")
      ->required();
  metrics_cmd->add_option("--csv", metrics_args.csv, "write CSV here");

  SynthArgs synth_args;
  CLI::App* synth_cmd = app.add_subcommand(
      "synth", "generate a paired synthetic retouching dataset");
  synth_cmd->add_option("--out", synth_args.out_dir, "dataset root")
      ->required();
  synth_cmd->add_option("--count", synth_args.count, "pair count");
  synth_cmd->add_option("--size", synth_args.size, "image side");
  synth_cmd->add_option("--transform", synth_args.transform,
                        "gamma:<g> | channel-mix | channel-swap | warm-tone | "
                        "adaptive-gamma, chained with '+'");
  synth_cmd->add_option("--seed", synth_args.seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*train_cmd) return run_train(train_args, *train_cmd);
  if (*bake_cmd) return run_bake(bake_args, *bake_cmd);
  if (*retouch_cmd) return run_retouch(retouch_args);
  if (*verify_cmd) return run_verify(verify_args);
  if (*bench_cmd) return run_bench(bench_args);
  if (*metrics_cmd) return run_metrics(metrics_args);
  if (*synth_cmd) return run_synth(synth_args);
  return kExitConfig;
}

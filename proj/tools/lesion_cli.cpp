// Command-line front end: synth, train, eval, gradcam.
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric abort.

#include <cstdio>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lesion/lesion.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Failure {
  int code;
};

int exit_code(lsn_status status) {
  switch (status) {
    case LSN_OK: return 0;
    case LSN_ERR_INVALID_ARGUMENT: return kExitUsage;
    case LSN_ERR_NUMERIC: return kExitNumeric;
    default: return kExitData;
  }
}

void check(lsn_status status, const char* context) {
  if (status == LSN_OK) return;
  std::cerr << "error: " << context << ": " << lsn_last_error() << '\n';
  throw Failure{exit_code(status)};
}

template <typename Fn>
std::string read_string(Fn&& fn) {
  size_t needed = 0;
  check(fn(nullptr, 0, &needed), "formatting output");
  std::string text(needed + 1, '\0');
  check(fn(text.data(), text.size(), &needed), "formatting output");
  text.resize(needed);
  return text;
}

struct ConfigDeleter {
  void operator()(lsn_config* c) const { lsn_config_destroy(c); }
};
struct DatasetDeleter {
  void operator()(lsn_dataset* d) const { lsn_dataset_destroy(d); }
};
struct ModelDeleter {
  void operator()(lsn_model* m) const { lsn_model_destroy(m); }
};
using ConfigPtr = std::unique_ptr<lsn_config, ConfigDeleter>;
using DatasetPtr = std::unique_ptr<lsn_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<lsn_model, ModelDeleter>;

void print_report(const lsn_model* model, const lsn_dataset* data, bool lines) {
  lsn_metrics metrics{};
  const size_t k = lsn_model_num_classes(model);
  std::vector<int64_t> confusion(k * k);
  check(lsn_evaluate(model, data, &metrics, confusion.data(), confusion.size()), "evaluation");
  std::cout << read_string([&](char* b, size_t c, size_t* n) { return lsn_metrics_table(&metrics, b, c, n); });
  if (lines)
    std::cout << read_string(
        [&](char* b, size_t c, size_t* n) { return lsn_metrics_lines(&metrics, confusion.data(), b, c, n); });
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  size_t n = 100;
  uint64_t seed = 0;
  std::vector<double> imbalance{60, 30, 10};
  std::vector<size_t> size{32, 32};
  size_t patch = 4;
};

int run_synth(const SynthArgs& args) {
  if (args.size.size() != 2 || args.size[0] == 0 || args.size[1] == 0) {
    std::cerr << "error: --size needs two positive values H W\n";
    return kExitUsage;
  }
  if (args.patch == 0 || args.size[0] % args.patch || args.size[1] % args.patch) {
    std::cerr << "error: image size " << args.size[0] << "x" << args.size[1] << " is not divisible by patch "
              << args.patch << '\n';
    return kExitUsage;
  }
  lsn_dataset* raw = nullptr;
  check(lsn_dataset_synth(args.n, args.seed, args.size[0], args.size[1], args.imbalance.data(), args.imbalance.size(),
                          &raw),
        "generating synthetic data");
  DatasetPtr data(raw);
  check(lsn_dataset_write(data.get(), args.out.c_str()), "writing dataset");
  std::vector<size_t> counts(args.imbalance.size());
  check(lsn_dataset_class_counts(data.get(), counts.data(), counts.size()), "counting classes");
  std::cout << "wrote " << args.n << " samples to " << args.out << " (class counts";
  for (size_t c : counts) std::cout << ' ' << c;
  std::cout << ")\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string data;
  std::vector<std::string> config;
  std::string out;
  std::string log;
  std::string resume;
  uint64_t steps = 0;
  bool dump_config = false;
};

struct ProgressContext {
  const lsn_model* model = nullptr;
  const lsn_dataset* eval = nullptr;
  uint64_t eval_every = 0;
  uint64_t steps_seen = 0;
};

int on_step(const lsn_step_log* log, void* user) {
  auto* ctx = static_cast<ProgressContext*>(user);
  ++ctx->steps_seen;
  if (ctx->eval_every && ctx->eval && lsn_dataset_size(ctx->eval) > 0 && log->step % ctx->eval_every == 0) {
    lsn_metrics m{};
    if (lsn_evaluate(ctx->model, ctx->eval, &m, nullptr, 0) != LSN_OK) return 1;
    std::fprintf(stderr, "step %llu  l_ce=%.5f l_attn=%.5f total=%.5f  eval acc=%.4f auc=%.4f\n",
                 static_cast<unsigned long long>(log->step), log->l_ce, log->l_attn, log->total, m.acc, m.auc);
  }
  return 0;
}

int run_train(const TrainArgs& args) {
  ConfigPtr config;
  ModelPtr model;
  if (!args.resume.empty()) {
    lsn_model* m = nullptr;
    check(lsn_model_load(args.resume.c_str(), &m), "loading checkpoint to resume");
    model.reset(m);
    lsn_config* c = nullptr;
    check(lsn_model_config(model.get(), &c), "reading checkpoint config");
    config.reset(c);
    if (!args.config.empty()) {
      std::cerr << "error: --config cannot be combined with --resume (the checkpoint fixes the configuration)\n";
      return kExitUsage;
    }
  } else {
    lsn_config* c = nullptr;
    check(lsn_config_create(&c), "creating config");
    config.reset(c);
    for (const auto& kv : args.config) check(lsn_config_set_assignment(config.get(), kv.c_str()), "--config");
  }

  const std::string resolved =
      read_string([&](char* b, size_t cap, size_t* n) { return lsn_config_dump(config.get(), b, cap, n); });
  if (args.dump_config) std::cout << resolved;

  std::istringstream lines(resolved);
  std::string line;
  double eval_fraction = 0.2;
  uint64_t seed = 0, eval_every = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("eval_fraction=", 0) == 0) eval_fraction = std::stod(line.substr(14));
    if (line.rfind("seed=", 0) == 0) seed = std::stoull(line.substr(5));
    if (line.rfind("eval_every=", 0) == 0) eval_every = std::stoull(line.substr(11));
  }

  lsn_dataset* raw = nullptr;
  check(lsn_dataset_load(args.data.c_str(), config.get(), &raw), "loading data");
  DatasetPtr all(raw);
  lsn_dataset *train_raw = nullptr, *eval_raw = nullptr;
  check(lsn_dataset_split(all.get(), eval_fraction, seed, &train_raw, &eval_raw), "splitting data");
  DatasetPtr train(train_raw), eval(eval_raw);
  if (lsn_dataset_size(train.get()) == 0) {
    std::cerr << "error: training split is empty\n";
    return kExitData;
  }

  if (!model) {
    lsn_model* m = nullptr;
    check(lsn_model_create(config.get(), &m), "creating model");
    model.reset(m);
  }

  ProgressContext ctx{model.get(), eval.get(), eval_every, 0};
  check(lsn_train(model.get(), train.get(), args.steps, args.log.empty() ? nullptr : args.log.c_str(), on_step, &ctx),
        "training");
  check(lsn_model_save(model.get(), args.out.c_str()), "saving checkpoint");
  std::cout << "trained " << lsn_model_global_step(model.get()) << " steps; checkpoint " << args.out << '\n';
  if (lsn_dataset_size(eval.get()) > 0) {
    std::cout << "eval split (" << lsn_dataset_size(eval.get()) << " samples):\n";
    print_report(model.get(), eval.get(), false);
  }
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string data;
  std::string ckpt;
  bool lines = false;
};

int run_eval(const EvalArgs& args) {
  lsn_model* m = nullptr;
  check(lsn_model_load(args.ckpt.c_str(), &m), "loading checkpoint");
  ModelPtr model(m);
  lsn_config* c = nullptr;
  check(lsn_model_config(model.get(), &c), "reading checkpoint config");
  ConfigPtr config(c);
  lsn_dataset* raw = nullptr;
  check(lsn_dataset_load(args.data.c_str(), config.get(), &raw), "loading data");
  DatasetPtr data(raw);
  print_report(model.get(), data.get(), args.lines);
  return 0;
}

// ---- gradcam ----

struct GradcamArgs {
  std::string image;
  std::string ckpt;
  size_t target_class = 0;
  std::string out;
};

int run_gradcam(const GradcamArgs& args) {
  lsn_model* m = nullptr;
  check(lsn_model_load(args.ckpt.c_str(), &m), "loading checkpoint");
  ModelPtr model(m);
  size_t row = 0, col = 0;
  check(lsn_gradcam_files(model.get(), args.image.c_str(), args.target_class, args.out.c_str(), &row, &col),
        "grad-cam");
  std::cout << "argmax=" << row << ',' << col << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale vision transformer for lesion classification"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic lesion dataset (PPM images, PGM masks, manifest.csv)");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--n", synth.n, "Number of samples")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--imbalance", synth.imbalance, "Class proportions, e.g. 60,30,10")->delimiter(',');
  synth_cmd->add_option("--size", synth.size, "Image height and width")->expected(2);
  synth_cmd->add_option("--patch", synth.patch, "Patch size the images must divide into");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train on a manifest and write a checkpoint");
  train_cmd->add_option("--data", train.data, "manifest.csv")->required();
  train_cmd->add_option("--config", train.config, "KEY=VAL setting (repeatable)");
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--log", train.log, "Step log (step,epoch,l_ce,l_attn,total)");
  train_cmd->add_option("--resume", train.resume, "Continue training from a checkpoint");
  train_cmd->add_option("--steps", train.steps, "Stop after this many steps (0 = run to the end)");
  train_cmd->add_flag("--dump-config", train.dump_config, "Print the resolved configuration");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  eval_cmd->add_option("--data", eval.data, "manifest.csv")->required();
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint")->required();
  eval_cmd->add_flag("--lines", eval.lines, "Also print metric=value lines");

  GradcamArgs cam;
  auto* cam_cmd = app.add_subcommand("gradcam", "Write a Grad-CAM heatmap and overlay for one image");
  cam_cmd->add_option("--image", cam.image, "PPM/PGM image")->required();
  cam_cmd->add_option("--ckpt", cam.ckpt, "Checkpoint")->required();
  cam_cmd->add_option("--class", cam.target_class, "Target class");
  cam_cmd->add_option("--out", cam.out, "Output prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    if (*cam_cmd) return run_gradcam(cam);
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

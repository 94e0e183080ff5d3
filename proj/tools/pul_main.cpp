// Command-line front end: synthetic benchmark generation, original-model
// training, progressive adaptation runs, and retrieval evaluation.

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pul/config_file.hpp"
#include "pul/data_io.hpp"
#include "pul/errors.hpp"
#include "pul/evaluation.hpp"
#include "pul/loop.hpp"
#include "pul/rng.hpp"
#include "pul/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInvalidInput = 2;
constexpr int kExitIterationCap = 3;
constexpr int kExitIoError = 4;

std::string timestamp_utc() {
  char buf[32];
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const pul::PulConfig& c) {
  return json{
      {"pul",
       {{"k", c.k},
        {"lambda", c.lambda},
        {"max_iters", c.max_pul_iters},
        {"kmeans_max_iters", c.kmeans_max_iters},
        {"seed", c.seed},
        {"fine_tune_from_original", c.fine_tune_from_original},
        {"selection_enabled", c.selection_enabled}}},
      {"sgd",
       {{"learning_rate", c.sgd.learning_rate},
        {"momentum", c.sgd.momentum},
        {"epochs_per_iter", c.sgd.epochs_per_iter},
        {"batch_size", c.sgd.batch_size},
        {"init_epochs", c.sgd.init_epochs}}},
      {"convergence", {{"patience", c.convergence.patience}, {"rel_tol", c.convergence.rel_tol}}},
      {"embed",
       {{"hidden_dim", c.embed.hidden_dim},
        {"embed_dim", c.embed.embed_dim},
        {"linear", c.embed.linear}}}};
}

json to_json(const pul::SyntheticSpec& s) {
  auto domain = [](const pul::DomainParams& d) {
    return json{{"num_ids", d.num_ids},
                {"samples_per_id", d.samples_per_id},
                {"dim", d.dim},
                {"sigma_within", d.sigma_within},
                {"sigma_between", d.sigma_between}};
  };
  return json{{"source", domain(s.source)},
              {"target", domain(s.target)},
              {"shift",
               {{"rotate", s.shift.rotate},
                {"rotation_seed", s.shift.rotation_seed},
                {"translation_scale", s.shift.translation_scale},
                {"sigma_extra", s.shift.sigma_extra}}},
              {"cameras_per_id", s.cameras_per_id},
              {"query_per_id", s.query_per_id},
              {"gallery_per_id", s.gallery_per_id},
              {"semi_label_ids", s.semi_label_ids},
              {"share_source_prototypes", s.share_source_prototypes},
              {"seed", s.seed}};
}

json to_json(const pul::EvalMetrics& m) {
  return json{{"rank1", m.rank1},       {"rank5", m.rank5},
              {"rank10", m.rank10},     {"rank20", m.rank20},
              {"mAP", m.map},           {"num_queries", m.num_queries},
              {"num_skipped", m.num_skipped}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw pul::IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw pul::IoError("write failure on " + path.string());
}

struct GenerateArgs {
  std::string spec_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& args) {
  pul::SyntheticSpec spec;
  if (!args.spec_path.empty())
    spec = pul::synthetic_spec_from(pul::parse_config_file(args.spec_path));
  if (args.seed) spec.seed = *args.seed;

  const pul::SyntheticData data = pul::generate_synthetic(spec);
  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);

  json files = json::array();
  auto emit = [&](const char* name, const pul::Dataset& ds) {
    pul::save_dataset((dir / name).string(), ds);
    files.push_back(name);
    std::cout << name << ": " << ds.n() << " x " << ds.dim() << "\n";
  };
  emit("source.bin", data.source);
  emit("target_train.bin", data.target_train);
  emit("target_query.bin", data.target_query);
  emit("target_gallery.bin", data.target_gallery);
  if (data.target_semi) emit("target_semi.bin", *data.target_semi);

  const json manifest{{"command", "generate"},
                      {"spec", to_json(spec)},
                      {"files", files},
                      {"created", timestamp_utc()}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

struct InitArgs {
  std::string source_path;
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
};

int cmd_init(const InitArgs& args) {
  pul::PulConfig config;
  if (!args.config_path.empty())
    config = pul::pul_config_from(pul::parse_config_file(args.config_path));
  if (args.seed) config.seed = *args.seed;
  if (config.k < 1) config.k = 1;  // unused by init; keeps validate() satisfied

  const pul::Dataset source = pul::load_dataset(args.source_path);
  pul::Rng rng(config.seed);
  const pul::EmbedModel model = pul::init_original_model(source, config, rng);
  pul::save_model(args.out_path, model);
  std::cout << "original model: " << source.n() << " samples, " << model.num_classes
            << " identities, saved to " << args.out_path << "\n";
  return kExitOk;
}

struct RunArgs {
  std::string target_path;
  std::string model_path;
  std::string config_path;
  std::string out_dir;
  std::string semi_path;
  bool no_selection = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::optional<double> lambda;
  std::optional<int> max_iters;
};

int cmd_run(const RunArgs& args) {
  pul::PulConfig config;
  if (!args.config_path.empty())
    config = pul::pul_config_from(pul::parse_config_file(args.config_path));
  if (args.seed) config.seed = *args.seed;
  if (args.k) config.k = *args.k;
  if (args.lambda) config.lambda = *args.lambda;
  if (args.max_iters) config.max_pul_iters = *args.max_iters;
  if (args.no_selection) config.selection_enabled = false;
  pul::validate(config);

  const pul::Dataset target = pul::load_dataset(args.target_path);
  const pul::EmbedModel original = pul::load_model(args.model_path);
  std::optional<pul::Dataset> labeled;
  if (!args.semi_path.empty()) labeled = pul::load_dataset(args.semi_path);

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  const std::string history_path = (dir / "history.jsonl").string();
  if (fs::exists(history_path)) fs::remove(history_path);
  pul::HistoryWriter history(history_path);

  pul::RunHooks hooks;
  hooks.on_iteration = [&](const pul::IterationRecord& rec) {
    history.append(rec);
    std::cout << "iter " << rec.iter << ": selected " << rec.selected_count << "/" << target.n()
              << ", kmeans objective " << rec.kmeans_objective << ", train loss "
              << rec.train_loss << "\n";
  };

  pul::Rng rng(config.seed);
  const pul::PulRunState state =
      labeled ? pul::run_semi_supervised(target, *labeled, original, config, rng, hooks)
              : pul::run_pul(target, original, config, rng, hooks);

  pul::save_model((dir / "model.bin").string(), state.current);

  const json manifest{{"command", "run"},
                      {"config", to_json(config)},
                      {"inputs",
                       {{"target", args.target_path},
                        {"model", args.model_path},
                        {"semi", args.semi_path.empty() ? json(nullptr) : json(args.semi_path)}}},
                      {"outputs", {{"model", "model.bin"}, {"history", "history.jsonl"}}},
                      {"iterations", state.iteration},
                      {"converged", state.converged},
                      {"created", timestamp_utc()}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  if (!state.converged) {
    std::cout << "stopped at the iteration cap (" << state.iteration << " iterations)\n";
    return kExitIterationCap;
  }
  std::cout << "converged after " << state.iteration << " iterations\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model_path;
  std::string query_path;
  std::string gallery_path;
  std::string out_path;
  bool no_camera_filter = false;
};

int cmd_eval(const EvalArgs& args) {
  const pul::EmbedModel model = pul::load_model(args.model_path);
  const pul::Dataset query = pul::load_dataset(args.query_path);
  const pul::Dataset gallery = pul::load_dataset(args.gallery_path);
  pul::EvalProtocol protocol;
  protocol.camera_filter = !args.no_camera_filter;

  const pul::EvalMetrics m = pul::evaluate(query, gallery, model, protocol);

  std::printf("%8s %8s %8s %8s %8s\n", "rank-1", "rank-5", "rank-10", "rank-20", "mAP");
  std::printf("%7.1f%% %7.1f%% %7.1f%% %7.1f%% %7.1f%%\n", 100.0 * m.rank1, 100.0 * m.rank5,
              100.0 * m.rank10, 100.0 * m.rank20, 100.0 * m.map);
  std::printf("queries: %d evaluated, %d skipped\n", m.num_queries, m.num_skipped);

  const std::string record = to_json(m).dump();
  std::cout << record << "\n";
  if (!args.out_path.empty()) write_text(args.out_path, record + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive pseudo-label adaptation of a feature embedder"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate the synthetic benchmark splits");
  generate->add_option("--spec", gen.spec_path, "Benchmark spec file (key = value sections)");
  generate->add_option("--out", gen.out_dir, "Output directory")->required();
  generate->add_option("--seed", gen.seed, "Override the spec seed");

  InitArgs init;
  auto* init_cmd = app.add_subcommand("init", "Train the original model on a labeled source set");
  init_cmd->add_option("--source", init.source_path, "Labeled source dataset")->required();
  init_cmd->add_option("--config", init.config_path, "Config file");
  init_cmd->add_option("--out", init.out_path, "Output model checkpoint")->required();
  init_cmd->add_option("--seed", init.seed, "Override the config seed");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Adapt a model to an unlabeled target set");
  run_cmd->add_option("--target", run.target_path, "Unlabeled target dataset")->required();
  run_cmd->add_option("--model", run.model_path, "Original model checkpoint")->required();
  run_cmd->add_option("--config", run.config_path, "Config file");
  run_cmd->add_option("--out", run.out_dir, "Output directory")->required();
  run_cmd->add_option("--semi", run.semi_path, "Labeled subset joined into every iteration");
  run_cmd->add_flag("--no-selection", run.no_selection,
                    "Train on all samples instead of reliable ones");
  run_cmd->add_option("--seed", run.seed, "Override the config seed");
  run_cmd->add_option("--k", run.k, "Override the cluster count");
  run_cmd->add_option("--lambda", run.lambda, "Override the reliability threshold");
  run_cmd->add_option("--max-iters", run.max_iters, "Override the iteration cap");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Single-query retrieval metrics");
  eval_cmd->add_option("--model", eval.model_path, "Model checkpoint")->required();
  eval_cmd->add_option("--query", eval.query_path, "Labeled query dataset")->required();
  eval_cmd->add_option("--gallery", eval.gallery_path, "Labeled gallery dataset")->required();
  eval_cmd->add_option("--out", eval.out_path, "Also write the metrics record here");
  eval_cmd->add_flag("--no-camera-filter", eval.no_camera_filter,
                     "Keep same-identity same-camera gallery entries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen);
    if (init_cmd->parsed()) return cmd_init(init);
    if (run_cmd->parsed()) return cmd_run(run);
    return cmd_eval(eval);
  } catch (const pul::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
}

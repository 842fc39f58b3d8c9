#include "CLI11.hpp"

#include "marl/cli/bench.hpp"
#include "marl/cli/plot.hpp"
#include "marl/finetune/dataset.hpp"
#include "marl/trainer/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

std::string fmt(marl::Scalar v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6g", v);
  return buffer;
}

int run_train(const std::string& config_path, bool seed_given, uint64_t seed,
              const std::string& output_root) {
  marl::trainer::ExperimentConfig config = marl::trainer::load_config(config_path);
  if (seed_given) {
    // Keep env.seed tied to training.seed unless the config pinned it apart.
    if (config.env.seed == config.training.seed) config.env.seed = seed;
    config.training.seed = seed;
  }
  const marl::trainer::TrainResult result = marl::trainer::train(config, output_root);
  std::cout << "experiment_dir: " << result.paths.dir.string() << "\n"
            << "final_eval_mean_return: " << fmt(result.final_eval.mean_return) << "\n"
            << "final_eval_std_return: " << fmt(result.final_eval.std_return) << "\n"
            << "expert_queries: " << result.expert_queries << "\n"
            << "fallbacks: " << result.fallbacks << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint_path, int episodes, uint64_t seed,
             const std::string& out_path) {
  const marl::nn::Checkpoint checkpoint = marl::nn::Checkpoint::load(checkpoint_path);
  const marl::trainer::ExperimentConfig config =
      marl::trainer::parse_config(checkpoint.text("config_yaml"));
  marl::qmix::Learner learner(config.env, config.algorithm, 0);
  learner.load(checkpoint);
  const marl::trainer::EvalResult result =
      marl::trainer::evaluate_policy(learner, config.env, episodes, seed);

  std::string report;
  report += "mean_return: " + fmt(result.mean_return) + "\n";
  report += "std_return: " + fmt(result.std_return) + "\n";
  report += "collision_rate: " + fmt(result.collision_rate) + "\n";
  std::cout << report;

  std::filesystem::path out = out_path.empty()
      ? std::filesystem::path(checkpoint_path).parent_path() / "eval_result.txt"
      : std::filesystem::path(out_path);
  std::ofstream file(out);
  if (!file) throw std::runtime_error("cannot write eval result: " + out.string());
  file << report;
  std::cout << "written: " << out.string() << "\n";
  return 0;
}

int run_gen_finetune(const std::string& config_path, int64_t n, const std::string& out_path) {
  const marl::trainer::ExperimentConfig config = marl::trainer::load_config(config_path);
  const marl::finetune::GenerationSummary summary =
      marl::finetune::generate_dataset(config, n, out_path);
  const marl::finetune::ValidationReport report = marl::finetune::validate_dataset(summary.path);
  if (!report.ok()) {
    throw std::runtime_error("generated dataset failed validation: " +
                             std::to_string(report.violations.size()) + " bad records");
  }
  std::cout << "records: " << summary.records << "\n"
            << "episodes: " << summary.episodes << "\n"
            << "path: " << summary.path.string() << "\n";
  return 0;
}

int run_bench(const std::string& config_path, const std::string& expert, int n_states,
              bool allow_fallback) {
  const marl::trainer::ExperimentConfig config = marl::trainer::load_config(config_path);
  const marl::trainer::ExpertKind kind = marl::trainer::expert_kind_from_string(expert);
  const marl::cli::BenchReport report =
      marl::cli::bench_expert(config, kind, n_states, allow_fallback);
  std::cout << marl::cli::format_report(report);
  return 0;
}

int run_plot(const std::vector<std::string>& csvs, const std::string& out_image) {
  std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
  const marl::cli::PlotPaths result = marl::cli::plot_metrics(paths, out_image);
  std::cout << "image: " << result.image.string() << "\n"
            << "points: " << result.points.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QMIX trainer with uncertainty-gated expert guidance"};
  app.name("marl");  // stable usage line regardless of the invocation path
  app.require_subcommand(1);

  std::string train_config;
  uint64_t train_seed = 0;
  std::string output_root = "experiments";
  CLI::App* train_cmd = app.add_subcommand("train", "Train a policy from a YAML config");
  train_cmd->add_option("--config", train_config, "experiment config file (YAML)")
      ->required()
      ->check(CLI::ExistingFile);
  CLI::Option* seed_opt =
      train_cmd->add_option("--seed", train_seed, "override the config's training seed");
  train_cmd->add_option("--output-root", output_root, "directory collecting experiment runs")
      ->capture_default_str();

  std::string eval_checkpoint;
  int eval_episodes = 10;
  uint64_t eval_seed = 0;
  std::string eval_out;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint greedily");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file from a training run")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--episodes", eval_episodes, "number of evaluation episodes")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eval_seed, "evaluation episode key")->capture_default_str();
  eval_cmd->add_option("--out", eval_out,
                       "result file (default: eval_result.txt beside the checkpoint)");

  std::string gen_config;
  int64_t gen_n = 1000;
  std::string gen_out = "finetune_dataset.jsonl";
  CLI::App* gen_cmd =
      app.add_subcommand("gen-finetune", "Generate an expert-labeled fine-tuning dataset");
  gen_cmd->add_option("--config", gen_config, "experiment config file (YAML)")
      ->required()
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--n", gen_n, "number of records")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", gen_out, "output JSONL path")->capture_default_str();

  std::string bench_config;
  std::string bench_kind;
  int bench_n = 100;
  bool allow_fallback = false;
  CLI::App* bench_cmd =
      app.add_subcommand("bench-expert", "Score an expert planner on random states");
  bench_cmd->add_option("--config", bench_config, "experiment config file (YAML)")
      ->required()
      ->check(CLI::ExistingFile);
  bench_cmd->add_option("--expert", bench_kind, "which planner to benchmark")
      ->required()
      ->check(CLI::IsMember({"a-star", "llm"}));
  bench_cmd->add_option("--n", bench_n, "number of sampled states")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--allow-fallback", allow_fallback,
                      "keep benchmarking when the LLM endpoint is unreachable");

  std::vector<std::string> plot_csvs;
  std::string plot_out;
  CLI::App* plot_cmd = app.add_subcommand("plot", "Render evaluation curves to an SVG");
  plot_cmd->add_option("csvs", plot_csvs, "metrics_eval.csv files, one series each")
      ->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot_out, "output image path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (app.got_subcommand(train_cmd)) {
      return run_train(train_config, !seed_opt->empty(), train_seed, output_root);
    }
    if (app.got_subcommand(eval_cmd)) {
      return run_eval(eval_checkpoint, eval_episodes, eval_seed, eval_out);
    }
    if (app.got_subcommand(gen_cmd)) return run_gen_finetune(gen_config, gen_n, gen_out);
    if (app.got_subcommand(bench_cmd)) {
      return run_bench(bench_config, bench_kind, bench_n, allow_fallback);
    }
    if (app.got_subcommand(plot_cmd)) return run_plot(plot_csvs, plot_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

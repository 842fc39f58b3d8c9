#include "marl/trainer/experiment.hpp"

#include <ctime>
#include <fstream>

#ifndef MARL_VERSION
#define MARL_VERSION "unknown"
#endif

namespace marl::trainer {

namespace {

std::tm utc_parts(std::chrono::system_clock::time_point t) {
  const std::time_t seconds = std::chrono::system_clock::to_time_t(t);
  std::tm parts{};
  gmtime_r(&seconds, &parts);
  return parts;
}

}  // namespace

std::string timestamp_compact(std::chrono::system_clock::time_point t) {
  const std::tm parts = utc_parts(t);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y%m%d-%H%M%S", &parts);
  return buffer;
}

std::string timestamp_iso8601(std::chrono::system_clock::time_point t) {
  const std::tm parts = utc_parts(t);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &parts);
  return buffer;
}

ExperimentPaths create_experiment_dir(const std::filesystem::path& root, const std::string& name,
                                      uint64_t seed, std::chrono::system_clock::time_point now) {
  std::filesystem::create_directories(root);
  const std::string base =
      name + "_" + std::to_string(seed) + "_" + timestamp_compact(now);
  std::filesystem::path dir = root / base;
  for (int suffix = 1; std::filesystem::exists(dir); ++suffix) {
    dir = root / (base + "-" + std::to_string(suffix));
  }
  std::filesystem::create_directory(dir);
  return ExperimentPaths{dir};
}

void write_metadata(const ExperimentPaths& paths, const ExperimentConfig& resolved,
                    std::chrono::system_clock::time_point created) {
  save_config(paths.config(), resolved);
  std::ofstream out(paths.metadata());
  if (!out) throw std::runtime_error("cannot write " + paths.metadata().string());
  out << "experiment_name: " << resolved.experiment_name << "\n"
      << "seed: " << resolved.training.seed << "\n"
      << "code_version: " << MARL_VERSION << "\n"
      << "created: " << timestamp_iso8601(created) << "\n"
      << "config_file: config.yaml\n";
  if (!out) throw std::runtime_error("failed writing " + paths.metadata().string());
}

void register_experiment(const std::filesystem::path& root, const std::string& name,
                         const std::filesystem::path& dir,
                         std::chrono::system_clock::time_point when) {
  std::ofstream out(root / "experiments.txt", std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + (root / "experiments.txt").string());
  out << name << ", " << timestamp_iso8601(when) << ", " << dir.string() << "\n";
  if (!out) throw std::runtime_error("failed writing experiments.txt");
}

}  // namespace marl::trainer

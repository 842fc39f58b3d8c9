#pragma once

#include "marl/common.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace marl::trainer {

/// Full-precision, locale-independent number rendering; identical inputs
/// give identical bytes, which the determinism contract for metrics files
/// relies on.
std::string format_scalar(Scalar value);

struct TrainMetricsRow {
  int64_t step = 0;
  Scalar loss = 0.0;
  Scalar ensemble_std = 0.0;
  int64_t expert_queries = 0;  // cumulative
  int64_t fallbacks = 0;       // cumulative
};

struct EvalMetricsRow {
  int64_t step = 0;
  Scalar mean_return = 0.0;
  Scalar std_return = 0.0;
  Scalar collision_rate = 0.0;  // colliding pairs per env step
};

/// Incremental CSV writing for one experiment: metrics_train.csv and
/// metrics_eval.csv with fixed headers. Timestamps deliberately live in the
/// experiment metadata, not here, so reruns are byte-comparable.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& directory);

  void append(const TrainMetricsRow& row);
  void append(const EvalMetricsRow& row);

  const std::filesystem::path& train_path() const { return train_path_; }
  const std::filesystem::path& eval_path() const { return eval_path_; }

  static constexpr const char* kTrainHeader = "step,loss,ensemble_std,expert_queries,fallbacks";
  static constexpr const char* kEvalHeader = "step,mean_return,std_return,collision_rate";

 private:
  std::filesystem::path train_path_, eval_path_;
  std::ofstream train_, eval_;
};

/// Small all-numeric CSV reader for plotting and checks.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Scalar>> rows;

  std::optional<size_t> column_index(const std::string& name) const;
  std::vector<Scalar> column(const std::string& name) const;  // throws if absent
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace marl::trainer

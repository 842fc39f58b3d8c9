#include "marl/trainer/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace marl::trainer {

std::string format_scalar(Scalar value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& directory)
    : train_path_(directory / "metrics_train.csv"), eval_path_(directory / "metrics_eval.csv") {
  train_.open(train_path_);
  eval_.open(eval_path_);
  if (!train_ || !eval_) {
    throw std::runtime_error("cannot create metrics files in " + directory.string());
  }
  train_ << kTrainHeader << '\n' << std::flush;
  eval_ << kEvalHeader << '\n' << std::flush;
}

void MetricsWriter::append(const TrainMetricsRow& row) {
  train_ << row.step << ',' << format_scalar(row.loss) << ',' << format_scalar(row.ensemble_std)
         << ',' << row.expert_queries << ',' << row.fallbacks << '\n'
         << std::flush;
  if (!train_) throw std::runtime_error("failed writing " + train_path_.string());
}

void MetricsWriter::append(const EvalMetricsRow& row) {
  eval_ << row.step << ',' << format_scalar(row.mean_return) << ','
        << format_scalar(row.std_return) << ',' << format_scalar(row.collision_rate) << '\n'
        << std::flush;
  if (!eval_) throw std::runtime_error("failed writing " + eval_path_.string());
}

std::optional<size_t> CsvTable::column_index(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  return std::nullopt;
}

std::vector<Scalar> CsvTable::column(const std::string& name) const {
  const auto index = column_index(name);
  if (!index) throw std::runtime_error("csv has no column '" + name + "'");
  std::vector<Scalar> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[*index]);
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv file " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv file " + path.string());
  std::istringstream header(line);
  std::string field;
  while (std::getline(header, field, ',')) table.columns.push_back(field);

  size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::vector<Scalar> row;
    while (std::getline(cells, field, ',')) {
      try {
        row.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_number) +
                                 ": non-numeric cell '" + field + "'");
      }
    }
    if (row.size() != table.columns.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_number) +
                               ": expected " + std::to_string(table.columns.size()) + " cells");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace marl::trainer

#include "marl/finetune/dataset.hpp"

#include "marl/experts/expert.hpp"
#include "marl/experts/prompt.hpp"
#include "marl/rng.hpp"

#include "json.hpp"

#include <cctype>
#include <fstream>
#include <optional>

namespace marl::finetune {

namespace {

using ordered_json = nlohmann::ordered_json;

// Episode-seed stream for dataset rollouts; disjoint from training and
// evaluation episode streams.
constexpr uint64_t kDatasetEpisodeStream = 0x66696E6574756E65ULL;

}  // namespace

GenerationSummary generate_dataset(const trainer::ExperimentConfig& config, int64_t n_samples,
                                   const std::filesystem::path& output_path) {
  if (n_samples < 1) throw ConfigError("fine-tune sample count must be >= 1");
  env::validate(config.env);

  const std::filesystem::path temp = output_path.string() + ".tmp";
  if (output_path.has_parent_path()) std::filesystem::create_directories(output_path.parent_path());
  std::ofstream out(temp, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset file " + temp.string());

  experts::GridSpec grid;
  grid.bounds = config.env.world_half_extent;
  experts::AStarExpert expert(grid);
  GenerationSummary summary;
  summary.path = output_path;

  const uint64_t episode_stream = mix_seed(kDatasetEpisodeStream, config.env.seed);
  int64_t episode_index = 0;
  while (summary.records < n_samples) {
    auto [state, observation] = env::reset(
        config.env, mix_seed(episode_stream, static_cast<uint64_t>(episode_index)));
    ++summary.episodes;
    for (int step_index = 0; step_index < config.env.horizon && summary.records < n_samples;
         ++step_index) {
      const experts::ExpertPlan plan = expert.plan(state);
      ordered_json record = {
          {"messages",
           ordered_json::array(
               {{{"role", "user"}, {"content", experts::build_prompt(observation, config.env.n_agents)}},
                {{"role", "assistant"}, {"content", experts::render_action_list(plan.actions)}}})},
          {"episode_index", episode_index},
          {"step_index", step_index},
      };
      out << record.dump() << '\n';
      ++summary.records;
      const env::StepResult result = env::step(config.env, state, plan.actions);
      observation = result.next_observation;
    }
    ++episode_index;
  }
  out.flush();
  if (!out) throw std::runtime_error("failed writing dataset file " + temp.string());
  out.close();
  std::filesystem::rename(temp, output_path);
  return summary;
}

namespace {

/// The prompt ends "...with length N."; N is the expected action count.
std::optional<int> expected_length_from_prompt(const std::string& prompt) {
  const std::string marker = "with length ";
  const size_t pos = prompt.rfind(marker);
  if (pos == std::string::npos) return std::nullopt;
  size_t i = pos + marker.size();
  int value = 0;
  bool any = false;
  while (i < prompt.size() && std::isdigit(static_cast<unsigned char>(prompt[i]))) {
    value = value * 10 + (prompt[i] - '0');
    any = true;
    ++i;
  }
  if (!any || value < 1) return std::nullopt;
  return value;
}

}  // namespace

ValidationReport validate_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path.string());

  ValidationReport report;
  std::string line;
  int64_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) {
      report.violations.push_back({line_number, "empty line"});
      continue;
    }
    ++report.records;
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded()) {
      report.violations.push_back({line_number, "not valid JSON"});
      continue;
    }
    if (!record.contains("messages") || !record["messages"].is_array() ||
        record["messages"].size() != 2) {
      report.violations.push_back({line_number, "missing or malformed messages array"});
      continue;
    }
    const auto& user = record["messages"][0];
    const auto& assistant = record["messages"][1];
    if (user.value("role", "") != "user" || assistant.value("role", "") != "assistant" ||
        !user.contains("content") || !assistant.contains("content") ||
        !user["content"].is_string() || !assistant["content"].is_string()) {
      report.violations.push_back({line_number, "messages must be [user, assistant] with text content"});
      continue;
    }
    const auto expected = expected_length_from_prompt(user["content"].get<std::string>());
    if (!expected) {
      report.violations.push_back({line_number, "prompt does not state the action-list length"});
      continue;
    }
    const experts::ParseResult parsed =
        experts::parse_actions(assistant["content"].get<std::string>(), *expected);
    if (!parsed.ok()) {
      report.violations.push_back(
          {line_number, "completion failed action parsing: " + to_string(*parsed.failure)});
    }
  }
  report.empty = report.records == 0;
  return report;
}

}  // namespace marl::finetune

#include "marl/cli/bench.hpp"

#include "marl/experts/llm_client.hpp"
#include "marl/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace marl::cli {

namespace {

constexpr uint64_t kBenchStream = 0x62656E6368ULL;

Scalar percentile_nearest_rank(std::vector<Scalar> samples, double pct) {
  if (samples.empty()) return 0;
  std::sort(samples.begin(), samples.end());
  auto rank = static_cast<size_t>(std::ceil(pct / 100.0 * static_cast<double>(samples.size())));
  rank = std::clamp<size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

std::string field(const char* name, Scalar value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return std::string(name) + ": " + buffer + "\n";
}

}  // namespace

BenchReport bench_expert(const trainer::ExperimentConfig& config, trainer::ExpertKind kind,
                         int n_states, bool allow_fallback) {
  if (kind == trainer::ExpertKind::none) {
    throw ConfigError("bench-expert needs an expert kind of a-star or llm");
  }
  if (n_states < 1) throw ConfigError("bench-expert needs at least one state");

  trainer::ExperimentConfig bench_config = config;
  bench_config.expert.kind = kind;
  std::unique_ptr<experts::Expert> expert = trainer::make_expert(bench_config, std::nullopt);
  auto* llm = dynamic_cast<experts::LlmExpert*>(expert.get());

  if (llm != nullptr) {
    env::WorldState probe =
        env::reset(config.env, mix_seed(kBenchStream, 0xFFFFFFFFULL)).first;
    llm->plan(probe);
    const experts::LlmStats& stats = llm->stats();
    if (!allow_fallback && stats.requests > 0 && stats.transport_errors == stats.requests) {
      throw std::runtime_error("LLM endpoint unreachable at " +
                               experts::with_env_overrides(config.expert.llm).base_url +
                               " (pass --allow-fallback to benchmark the fallback planner)");
    }
  }

  const std::vector<int> noop(config.env.n_agents, 0);
  std::vector<Scalar> latencies_ms;
  int64_t total_plans = 0;
  int64_t fallback_plans = 0;
  Scalar one_step_sum = 0;
  Scalar rollout_sum = 0;

  for (int i = 0; i < n_states; ++i) {
    env::WorldState rollout_state =
        env::reset(config.env, mix_seed(kBenchStream, static_cast<uint64_t>(i))).first;
    const env::WorldState initial = rollout_state;
    Scalar rollout_return = 0;
    bool first = true;
    while (true) {
      const auto t0 = std::chrono::steady_clock::now();
      const experts::ExpertPlan plan = expert->plan(rollout_state);
      const auto t1 = std::chrono::steady_clock::now();
      latencies_ms.push_back(std::chrono::duration<Scalar, std::milli>(t1 - t0).count());
      ++total_plans;
      if (plan.source == experts::ExpertSource::fallback) ++fallback_plans;

      if (first) {
        env::WorldState planned = initial;
        env::WorldState idle = initial;
        const Scalar planned_reward = env::step(config.env, planned, plan.actions).reward;
        const Scalar idle_reward = env::step(config.env, idle, noop).reward;
        one_step_sum += planned_reward - idle_reward;
        first = false;
      }

      const env::StepResult step_result = env::step(config.env, rollout_state, plan.actions);
      rollout_return += step_result.reward;
      if (step_result.terminated || step_result.truncated) break;
    }
    rollout_sum += rollout_return;
  }

  BenchReport report;
  report.states = n_states;
  report.mean_one_step_improvement = one_step_sum / static_cast<Scalar>(n_states);
  report.mean_rollout_return = rollout_sum / static_cast<Scalar>(n_states);
  if (llm != nullptr) {
    const experts::LlmStats& stats = llm->stats();
    if (stats.requests > 0) {
      report.invalid_rate =
          static_cast<Scalar>(stats.parse_failures) / static_cast<Scalar>(stats.requests);
    }
  }
  report.fallback_rate = static_cast<Scalar>(fallback_plans) / static_cast<Scalar>(total_plans);
  report.latency_p50_ms = percentile_nearest_rank(latencies_ms, 50.0);
  report.latency_p95_ms = percentile_nearest_rank(latencies_ms, 95.0);
  return report;
}

std::string format_report(const BenchReport& report) {
  std::string out = "states: " + std::to_string(report.states) + "\n";
  out += field("one_step_improvement", report.mean_one_step_improvement);
  out += field("rollout_return", report.mean_rollout_return);
  out += field("invalid_rate", report.invalid_rate);
  out += field("fallback_rate", report.fallback_rate);
  out += field("latency_p50_ms", report.latency_p50_ms);
  out += field("latency_p95_ms", report.latency_p95_ms);
  return out;
}

}  // namespace marl::cli

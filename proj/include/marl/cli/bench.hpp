#pragma once

#include "marl/trainer/config.hpp"

#include <string>

namespace marl::cli {

// Planner quality probe: samples random world states, asks the expert for a
// plan in each, and scores it two ways — the immediate reward gain over doing
// nothing, and the return of following the expert greedily to the end of the
// episode. Latencies cover every plan() call made.
struct BenchReport {
  int states = 0;
  Scalar mean_one_step_improvement = 0;
  Scalar mean_rollout_return = 0;
  Scalar invalid_rate = 0;
  Scalar fallback_rate = 0;
  Scalar latency_p50_ms = 0;
  Scalar latency_p95_ms = 0;
};

// `allow_fallback` keeps going when an LLM endpoint is unreachable (every
// request dies at transport); otherwise that aborts with an error.
BenchReport bench_expert(const trainer::ExperimentConfig& config, trainer::ExpertKind kind,
                         int n_states, bool allow_fallback = false);

std::string format_report(const BenchReport& report);

}  // namespace marl::cli

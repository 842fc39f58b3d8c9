#pragma once

#include "marl/experts/expert.hpp"
#include "marl/experts/prompt.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

namespace marl::experts {

/// Connection settings for a chat-completions-compatible server.
struct LlmEndpointConfig {
  std::string base_url = "http://localhost:8000";
  std::string model_name = "vicuna-7b-v1.5";
  Scalar timeout_seconds = 30.0;
  int max_retries = 2;      // attempts = 1 + max_retries
  Scalar temperature = 0.0;

  bool operator==(const LlmEndpointConfig&) const = default;
};

void validate(const LlmEndpointConfig& config);

/// Applies LLM_BASE_URL and LLM_MODEL_NAME when set (non-empty).
LlmEndpointConfig with_env_overrides(LlmEndpointConfig config);

struct LlmStats {
  int64_t requests = 0;          // HTTP attempts sent
  int64_t transport_errors = 0;  // connect/timeout/non-200/bad envelope
  int64_t parse_failures = 0;    // model replied, action list unusable
  int64_t fallbacks = 0;         // plans delegated to the fallback expert
};

/// One planning query: prompt -> POST /v1/chat/completions -> parse. Every
/// transport or parse failure is retried up to max_retries, then the
/// fallback expert answers and the plan is tagged source=fallback. Each
/// attempt is appended to `transcript` (when given) as one JSON line.
ExpertPlan llm_plan(const Vector& joint_observation, int n_agents,
                    const LlmEndpointConfig& endpoint, Expert& fallback,
                    LlmStats* stats = nullptr, std::ostream* transcript = nullptr);

class LlmExpert final : public Expert {
 public:
  LlmExpert(LlmEndpointConfig config, std::unique_ptr<Expert> fallback,
            std::optional<std::filesystem::path> transcript_path = std::nullopt);

  ExpertPlan plan(const env::WorldState& state) override;
  std::string name() const override { return "llm"; }

  const LlmStats& stats() const { return stats_; }
  const LlmEndpointConfig& endpoint() const { return config_; }

 private:
  LlmEndpointConfig config_;
  std::unique_ptr<Expert> fallback_;
  LlmStats stats_;
  std::optional<std::ofstream> transcript_;
};

}  // namespace marl::experts

#include "marl/experts/llm_client.hpp"

#include "httplib.h"
#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <utility>

namespace marl::experts {

using json = nlohmann::json;

void validate(const LlmEndpointConfig& config) {
  if (config.base_url.empty()) throw ConfigError("llm base_url must not be empty");
  if (config.model_name.empty()) throw ConfigError("llm model_name must not be empty");
  if (!(config.timeout_seconds > 0)) throw ConfigError("llm timeout_seconds must be > 0");
  if (config.max_retries < 0) throw ConfigError("llm max_retries must be >= 0");
  if (config.temperature < 0) throw ConfigError("llm temperature must be >= 0");
}

LlmEndpointConfig with_env_overrides(LlmEndpointConfig config) {
  if (const char* url = std::getenv("LLM_BASE_URL"); url != nullptr && *url != '\0') {
    config.base_url = url;
  }
  if (const char* model = std::getenv("LLM_MODEL_NAME"); model != nullptr && *model != '\0') {
    config.model_name = model;
  }
  return config;
}

namespace {

/// "http://host:port/prefix/" -> {"http://host:port", "/prefix"}
std::pair<std::string, std::string> split_base_url(std::string base_url) {
  while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
  const size_t scheme_end = base_url.find("://");
  const size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const size_t path_start = base_url.find('/', host_start);
  if (path_start == std::string::npos) return {base_url, ""};
  return {base_url.substr(0, path_start), base_url.substr(path_start)};
}

void log_attempt(std::ostream* transcript, int attempt, const std::string& prompt,
                 std::optional<int> status, const std::optional<std::string>& response,
                 const std::optional<std::string>& failure) {
  if (transcript == nullptr) return;
  json line = {{"attempt", attempt}, {"prompt", prompt}};
  line["status"] = status ? json(*status) : json(nullptr);
  line["response"] = response ? json(*response) : json(nullptr);
  line["failure"] = failure ? json(*failure) : json(nullptr);
  *transcript << line.dump() << '\n';
  transcript->flush();
}

}  // namespace

ExpertPlan llm_plan(const Vector& joint_observation, int n_agents,
                    const LlmEndpointConfig& endpoint, Expert& fallback, LlmStats* stats,
                    std::ostream* transcript) {
  validate(endpoint);
  LlmStats local;
  LlmStats& s = stats != nullptr ? *stats : local;
  const std::string prompt = build_prompt(joint_observation, n_agents);
  const auto [origin, prefix] = split_base_url(endpoint.base_url);
  const std::string path = prefix + "/v1/chat/completions";
  const std::string body = json{{"model", endpoint.model_name},
                                {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                                {"temperature", endpoint.temperature}}
                               .dump();

  httplib::Client client(origin);
  const auto timeout = std::chrono::milliseconds(
      static_cast<int64_t>(endpoint.timeout_seconds * 1000.0));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  std::optional<std::string> last_response;
  const int attempts = 1 + endpoint.max_retries;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    ++s.requests;
    auto result = client.Post(path, body, "application/json");
    if (!result) {
      ++s.transport_errors;
      log_attempt(transcript, attempt, prompt, std::nullopt, std::nullopt,
                  "transport: " + httplib::to_string(result.error()));
      continue;
    }
    if (result->status != 200) {
      ++s.transport_errors;
      log_attempt(transcript, attempt, prompt, result->status, result->body,
                  "http-status-" + std::to_string(result->status));
      continue;
    }
    std::string content;
    try {
      content = json::parse(result->body).at("choices").at(0).at("message").at("content");
    } catch (const json::exception&) {
      ++s.transport_errors;
      log_attempt(transcript, attempt, prompt, result->status, result->body, "bad-envelope");
      continue;
    }
    last_response = content;
    const ParseResult parsed = parse_actions(content, n_agents);
    if (parsed.ok()) {
      log_attempt(transcript, attempt, prompt, result->status, content, std::nullopt);
      ExpertPlan plan;
      plan.actions = parsed.actions;
      plan.source = ExpertSource::llm;
      plan.valid = true;
      plan.raw_response = content;
      return plan;
    }
    ++s.parse_failures;
    log_attempt(transcript, attempt, prompt, result->status, content, to_string(*parsed.failure));
  }

  ++s.fallbacks;
  ExpertPlan plan = fallback.plan(env::state_from_observation(joint_observation, n_agents));
  plan.source = ExpertSource::fallback;
  plan.raw_response = last_response;
  return plan;
}

LlmExpert::LlmExpert(LlmEndpointConfig config, std::unique_ptr<Expert> fallback,
                     std::optional<std::filesystem::path> transcript_path)
    : config_(std::move(config)), fallback_(std::move(fallback)) {
  validate(config_);
  if (fallback_ == nullptr) throw ConfigError("LlmExpert needs a fallback expert");
  if (transcript_path) {
    transcript_.emplace(*transcript_path, std::ios::app);
    if (!*transcript_) {
      throw std::runtime_error("cannot open llm transcript file " + transcript_path->string());
    }
  }
}

ExpertPlan LlmExpert::plan(const env::WorldState& state) {
  return llm_plan(env::joint_observation(state), state.n_agents(), config_, *fallback_, &stats_,
                  transcript_ ? &*transcript_ : nullptr);
}

}  // namespace marl::experts

#include "doctest.h"

#include "marl/experts/llm_client.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

using namespace marl;
using nlohmann::json;

namespace {

/// Scripted chat-completions endpoint running on a loopback port.
class MockServer {
 public:
  using Script = std::function<std::string(const json& request_body, int call_index)>;

  explicit MockServer(Script script) : script_(std::move(script)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      const json body = json::parse(req.body);
      const int call = calls_++;
      const std::string content = script_(body, call);
      if (content == "!http500") {
        res.status = 500;
        res.set_content("boom", "text/plain");
        return;
      }
      if (content == "!badjson") {
        res.set_content("{\"not\": \"a chat envelope\"}", "application/json");
        return;
      }
      const json reply = {{"choices", {{{"message", {{"content", content}}}}}}};
      res.set_content(reply.dump(), "application/json");
      const std::lock_guard<std::mutex> lock(mutex_);
      last_body_ = body;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int calls() const { return calls_; }
  json last_body() const {
    const std::lock_guard<std::mutex> lock(mutex_);
    return last_body_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  Script script_;
  std::atomic<int> calls_{0};
  int port_ = 0;
  mutable std::mutex mutex_;
  json last_body_;
};

env::WorldConfig world3() {
  env::WorldConfig config;
  config.seed = 3;
  return config;
}

experts::LlmEndpointConfig endpoint_for(const MockServer& server, int max_retries = 0) {
  experts::LlmEndpointConfig config;
  config.base_url = server.base_url();
  config.model_name = "test-model";
  config.timeout_seconds = 5.0;
  config.max_retries = max_retries;
  config.temperature = 0.25;
  return config;
}

}  // namespace

TEST_CASE("endpoint config validation") {
  experts::LlmEndpointConfig config;
  CHECK_NOTHROW(experts::validate(config));
  config.base_url = "";
  CHECK_THROWS_AS(experts::validate(config), ConfigError);
  config = {};
  config.timeout_seconds = 0.0;
  CHECK_THROWS_AS(experts::validate(config), ConfigError);
  config = {};
  config.max_retries = -1;
  CHECK_THROWS_AS(experts::validate(config), ConfigError);
  config = {};
  config.temperature = -0.1;
  CHECK_THROWS_AS(experts::validate(config), ConfigError);
}

TEST_CASE("environment variables override the endpoint") {
  experts::LlmEndpointConfig config;
  ::setenv("LLM_BASE_URL", "http://somewhere:9", 1);
  ::setenv("LLM_MODEL_NAME", "other-model", 1);
  const auto overridden = experts::with_env_overrides(config);
  CHECK(overridden.base_url == "http://somewhere:9");
  CHECK(overridden.model_name == "other-model");
  ::unsetenv("LLM_BASE_URL");
  ::unsetenv("LLM_MODEL_NAME");
  const auto untouched = experts::with_env_overrides(config);
  CHECK(untouched.base_url == config.base_url);
  CHECK(untouched.model_name == config.model_name);
}

TEST_CASE("a well-formed response becomes an llm plan") {
  MockServer server([](const json&, int) { return "[1, 2, 3]"; });
  experts::AStarExpert fallback{experts::GridSpec{}};
  experts::LlmStats stats;

  auto [state, obs] = env::reset(world3(), 0);
  const experts::ExpertPlan plan =
      experts::llm_plan(obs, 3, endpoint_for(server), fallback, &stats);

  REQUIRE(plan.valid);
  CHECK(plan.source == experts::ExpertSource::llm);
  CHECK(plan.actions == std::vector<int>{1, 2, 3});
  REQUIRE(plan.raw_response.has_value());
  CHECK(*plan.raw_response == "[1, 2, 3]");
  CHECK(stats.requests == 1);
  CHECK(stats.transport_errors == 0);
  CHECK(stats.parse_failures == 0);
  CHECK(stats.fallbacks == 0);

  // the request body is a single-user-message chat completion
  const json body = server.last_body();
  CHECK(body.at("model") == "test-model");
  CHECK(body.at("temperature") == doctest::Approx(0.25));
  REQUIRE(body.at("messages").size() == 1);
  CHECK(body.at("messages")[0].at("role") == "user");
  CHECK(body.at("messages")[0].at("content") == experts::build_prompt(obs, 3));
}

TEST_CASE("unusable responses retry and then fall back") {
  MockServer server([](const json&, int) { return "I cannot answer that."; });
  experts::AStarExpert fallback{experts::GridSpec{}};
  experts::LlmStats stats;

  auto [state, obs] = env::reset(world3(), 1);
  const experts::ExpertPlan plan =
      experts::llm_plan(obs, 3, endpoint_for(server, 2), fallback, &stats);

  REQUIRE(plan.valid);  // the A* fallback answered
  CHECK(plan.source == experts::ExpertSource::fallback);
  CHECK(plan.actions.size() == 3);
  CHECK(server.calls() == 3);  // 1 + max_retries attempts
  CHECK(stats.requests == 3);
  CHECK(stats.parse_failures == 3);
  CHECK(stats.fallbacks == 1);
  REQUIRE(plan.raw_response.has_value());
  CHECK(*plan.raw_response == "I cannot answer that.");
}

TEST_CASE("a garbage first attempt can be rescued by a retry") {
  MockServer server([](const json&, int call) {
    return call == 0 ? "hmm, let me think" : "[0, 0, 4]";
  });
  experts::AStarExpert fallback{experts::GridSpec{}};
  experts::LlmStats stats;

  auto [state, obs] = env::reset(world3(), 2);
  const experts::ExpertPlan plan =
      experts::llm_plan(obs, 3, endpoint_for(server, 1), fallback, &stats);

  CHECK(plan.source == experts::ExpertSource::llm);
  CHECK(plan.actions == std::vector<int>{0, 0, 4});
  CHECK(stats.requests == 2);
  CHECK(stats.parse_failures == 1);
  CHECK(stats.fallbacks == 0);
}

TEST_CASE("http errors and malformed envelopes count as transport failures") {
  SUBCASE("500 status") {
    MockServer server([](const json&, int) { return "!http500"; });
    experts::AStarExpert fallback{experts::GridSpec{}};
    experts::LlmStats stats;
    auto [state, obs] = env::reset(world3(), 3);
    const experts::ExpertPlan plan =
        experts::llm_plan(obs, 3, endpoint_for(server), fallback, &stats);
    CHECK(plan.source == experts::ExpertSource::fallback);
    CHECK(stats.transport_errors == 1);
    CHECK(stats.fallbacks == 1);
  }
  SUBCASE("missing choices") {
    MockServer server([](const json&, int) { return "!badjson"; });
    experts::AStarExpert fallback{experts::GridSpec{}};
    experts::LlmStats stats;
    auto [state, obs] = env::reset(world3(), 4);
    const experts::ExpertPlan plan =
        experts::llm_plan(obs, 3, endpoint_for(server), fallback, &stats);
    CHECK(plan.source == experts::ExpertSource::fallback);
    CHECK(stats.transport_errors == 1);
  }
}

TEST_CASE("an unreachable endpoint falls back without throwing") {
  experts::LlmEndpointConfig config;
  config.base_url = "http://127.0.0.1:1";  // nothing listens here
  config.timeout_seconds = 2.0;
  config.max_retries = 1;
  experts::AStarExpert fallback{experts::GridSpec{}};
  experts::LlmStats stats;

  auto [state, obs] = env::reset(world3(), 5);
  const experts::ExpertPlan plan = experts::llm_plan(obs, 3, config, fallback, &stats);
  REQUIRE(plan.valid);
  CHECK(plan.source == experts::ExpertSource::fallback);
  CHECK(stats.requests == 2);
  CHECK(stats.transport_errors == 2);
  CHECK(stats.fallbacks == 1);
}

TEST_CASE("the transcript logs one json line per attempt") {
  MockServer server([](const json&, int call) {
    return call == 0 ? "garbage" : "[2, 2, 2]";
  });
  experts::AStarExpert fallback{experts::GridSpec{}};
  experts::LlmStats stats;
  std::ostringstream transcript;

  auto [state, obs] = env::reset(world3(), 6);
  experts::llm_plan(obs, 3, endpoint_for(server, 1), fallback, &stats, &transcript);

  std::istringstream lines(transcript.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const json entry = json::parse(line);  // every line is standalone json
    CHECK(entry.at("attempt") == count);
    CHECK(entry.at("prompt") == experts::build_prompt(obs, 3));
    CHECK(entry.contains("response"));
    ++count;
  }
  CHECK(count == 2);
}

TEST_CASE("the llm expert accumulates stats and writes its transcript file") {
  MockServer server([](const json&, int call) {
    return call % 2 == 0 ? "[4, 4, 4]" : "nope";
  });
  const auto transcript_path =
      std::filesystem::temp_directory_path() / "marl_llm_transcript_test.jsonl";
  std::filesystem::remove(transcript_path);

  {
    experts::LlmExpert expert(endpoint_for(server, 0),
                              std::make_unique<experts::AStarExpert>(experts::GridSpec{}),
                              transcript_path);
    auto [state, obs] = env::reset(world3(), 7);

    const experts::ExpertPlan first = expert.plan(state);
    CHECK(first.source == experts::ExpertSource::llm);
    CHECK(first.actions == std::vector<int>{4, 4, 4});

    const experts::ExpertPlan second = expert.plan(state);
    CHECK(second.source == experts::ExpertSource::fallback);

    CHECK(expert.stats().requests == 2);
    CHECK(expert.stats().parse_failures == 1);
    CHECK(expert.stats().fallbacks == 1);
    CHECK(expert.name() == "llm");
  }

  std::ifstream in(transcript_path);
  REQUIRE(in);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const json entry = json::parse(line);
    CHECK(entry.contains("prompt"));
    ++lines;
  }
  CHECK(lines == 2);
  std::filesystem::remove(transcript_path);
}

TEST_CASE("the llm expert requires a fallback") {
  CHECK_THROWS_AS(experts::LlmExpert(experts::LlmEndpointConfig{}, nullptr), ConfigError);
}

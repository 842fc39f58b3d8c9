#include "marl/trainer/trainer.hpp"

#include "marl/finetune/dataset.hpp"
#include "marl/trainer/metrics.hpp"

#include "doctest.h"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

using namespace marl;
using namespace marl::trainer;

namespace {

// Unique temp directory, removed (recursively) on scope exit.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("marl_trainer_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Transition make_transition(Scalar tag) {
  Transition t;
  t.observation = Vector::Constant(4, tag);
  t.actions = {0, 1};
  t.reward = tag;
  t.next_observation = Vector::Constant(4, tag + 0.5);
  t.terminal = false;
  return t;
}

template <typename Fn>
std::string error_message(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";  // no throw
}

env::WorldConfig small_world() {
  env::WorldConfig world;
  world.n_agents = 3;
  world.n_landmarks = 3;
  return world;
}

qmix::AlgorithmConfig small_algo() {
  qmix::AlgorithmConfig algo;
  algo.hidden_dim = 8;
  algo.mixer_embed_dim = 4;
  algo.batch_size = 16;
  algo.ensemble_size = 2;
  algo.uncertainty_threshold = 0.0;
  return algo;
}

ExperimentConfig smoke_config(const std::string& name, uint64_t seed) {
  ExperimentConfig config;
  config.experiment_name = name;
  config.env = small_world();
  config.env.seed = seed;
  config.algorithm = small_algo();
  config.algorithm.ensemble_size = 1;
  config.algorithm.uncertainty_threshold = std::numeric_limits<Scalar>::infinity();
  config.training.total_steps = 120;
  config.training.eval_interval = 40;
  config.training.eval_episodes = 2;
  config.training.replay_capacity = 500;
  config.training.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("replay buffer validates capacity and rejects empty sampling") {
  CHECK_THROWS_AS(ReplayBuffer(0), ConfigError);

  ReplayBuffer buffer(4);
  Rng rng(1, 2);
  CHECK_THROWS_AS(buffer.sample(1, rng), std::logic_error);
}

TEST_CASE("replay buffer is a fixed-capacity FIFO ring") {
  ReplayBuffer buffer(3);
  CHECK(buffer.capacity() == 3);

  for (int i = 1; i <= 3; ++i) buffer.push(make_transition(i));
  CHECK(buffer.size() == 3);
  CHECK(buffer[0].reward == 1.0);
  CHECK(buffer[1].reward == 2.0);
  CHECK(buffer[2].reward == 3.0);

  // Overwrites proceed oldest-first and wrap around.
  buffer.push(make_transition(4));
  CHECK(buffer.size() == 3);
  CHECK(buffer[0].reward == 4.0);
  CHECK(buffer[1].reward == 2.0);
  buffer.push(make_transition(5));
  buffer.push(make_transition(6));
  CHECK(buffer[1].reward == 5.0);
  CHECK(buffer[2].reward == 6.0);
  buffer.push(make_transition(7));
  CHECK(buffer[0].reward == 7.0);

  // Stored fields survive the ring intact.
  CHECK(buffer[1].observation(0) == 5.0);
  CHECK(buffer[1].next_observation(0) == 5.5);
  CHECK(buffer[1].actions == std::vector<int>{0, 1});
}

TEST_CASE("replay sampling is uniform with replacement") {
  ReplayBuffer buffer(10);
  for (int i = 0; i < 10; ++i) buffer.push(make_transition(i));

  // Batches larger than the buffer are legal (sampling is with replacement).
  Rng rng(7, 7);
  ReplayBuffer two(2);
  two.push(make_transition(0));
  two.push(make_transition(1));
  const auto oversized = two.sample(10, rng);
  CHECK(oversized.size() == 10);
  for (const Transition* t : oversized) {
    CHECK((t == &two[0] || t == &two[1]));
  }

  // Index frequencies over many draws stay within 5 sigma of uniform.
  const int n_draws = 50000;
  std::vector<int> counts(10, 0);
  const auto sampled = buffer.sample(n_draws, rng);
  for (const Transition* t : sampled) counts[static_cast<int>(t->reward)]++;
  const double expected = n_draws / 10.0;
  const double sigma = std::sqrt(n_draws * 0.1 * 0.9);
  for (int i = 0; i < 10; ++i) {
    CHECK(std::abs(counts[i] - expected) < 5 * sigma);
  }
}

TEST_CASE("config parsing fills unspecified fields with defaults") {
  const ExperimentConfig config = parse_config("experiment_name: smoke");
  CHECK(config.experiment_name == "smoke");
  CHECK(config.env.n_agents == 3);
  CHECK(config.env.horizon == 25);
  CHECK(config.algorithm.trunk == qmix::TrunkKind::attention);
  CHECK(config.algorithm.gamma == 0.99);
  CHECK(config.algorithm.batch_size == 32);
  CHECK(config.algorithm.ensemble_size == 2);
  CHECK(config.algorithm.uncertainty_threshold == 0.5);
  CHECK(config.expert.kind == ExpertKind::none);
  CHECK(config.fine_tune_vicuna == false);
  CHECK(config.fine_tune_samples == 1000);
  CHECK(config.training.total_steps == 20000);
  CHECK(config.training.eval_interval == 1000);
  CHECK(config.training.seed == 1);
  CHECK(config.env.seed == 1);  // follows training.seed when omitted
}

TEST_CASE("env seed defaults to the training seed only when omitted") {
  CHECK(parse_config("training: {seed: 9}").env.seed == 9);
  CHECK(parse_config("training: {seed: 9}\nenv: {seed: 4}").env.seed == 4);
}

TEST_CASE("config parsing rejects unknown keys by name and section") {
  const std::string top = error_message([] { (void)parse_config("fronk: 1"); });
  CHECK(top.find("fronk") != std::string::npos);

  const std::string nested =
      error_message([] { (void)parse_config("env:\n  frictoin: 0.5"); });
  CHECK(nested.find("frictoin") != std::string::npos);
  CHECK(nested.find("env") != std::string::npos);

  const std::string eps =
      error_message([] { (void)parse_config("algorithm:\n  epsilon:\n    stort: 1"); });
  CHECK(eps.find("stort") != std::string::npos);
  CHECK(eps.find("epsilon") != std::string::npos);
}

TEST_CASE("config parsing names the offending field on bad values") {
  const std::string bad = error_message([] { (void)parse_config("env:\n  n_agents: banana"); });
  CHECK(bad.find("env.n_agents") != std::string::npos);

  const std::string trunk =
      error_message([] { (void)parse_config("algorithm:\n  trunk: gru"); });
  CHECK(trunk.find("gru") != std::string::npos);

  const std::string kind = error_message([] { (void)parse_config("expert:\n  kind: oracle"); });
  CHECK(kind.find("oracle") != std::string::npos);

  const std::string malformed = error_message([] { (void)parse_config("a: [unclosed"); });
  CHECK(malformed.find("malformed YAML") != std::string::npos);

  CHECK_THROWS_AS((void)parse_config("- a\n- b"), ConfigError);  // not a mapping
}

TEST_CASE("config validation rejects inconsistent settings") {
  ExperimentConfig config;

  config.experiment_name = "";
  CHECK_THROWS_AS(validate(config), ConfigError);
  config.experiment_name = "a/b";
  CHECK_THROWS_AS(validate(config), ConfigError);
  config.experiment_name = "ok";
  CHECK_NOTHROW(validate(config));

  config.training.replay_capacity = config.algorithm.batch_size - 1;
  CHECK_THROWS_AS(validate(config), ConfigError);
  config.training.replay_capacity = 50000;

  config.training.total_steps = 0;
  CHECK_THROWS_AS(validate(config), ConfigError);
  config.training.total_steps = 100;

  config.training.eval_interval = 0;
  CHECK_THROWS_AS(validate(config), ConfigError);
  config.training.eval_interval = 10;

  config.training.eval_episodes = 0;
  CHECK_THROWS_AS(validate(config), ConfigError);
  config.training.eval_episodes = 1;

  config.fine_tune_samples = 0;
  CHECK_THROWS_AS(validate(config), ConfigError);
  config.fine_tune_samples = 1;

  // Section validators are wired in.
  config.env.n_agents = 0;
  CHECK_THROWS_AS(validate(config), ConfigError);
  config.env.n_agents = 3;
  config.algorithm.gamma = 1.5;
  CHECK_THROWS_AS(validate(config), ConfigError);
  config.algorithm.gamma = 0.99;
  config.expert.kind = ExpertKind::llm;
  config.expert.llm.base_url = "";
  CHECK_THROWS_AS(validate(config), ConfigError);
}

TEST_CASE("config round-trips through yaml exactly") {
  ExperimentConfig config;
  config.experiment_name = "roundtrip";
  config.env.n_agents = 4;
  config.env.n_landmarks = 5;
  config.env.world_half_extent = 1.25;
  config.env.step_size = 0.05;
  config.env.collision_radius = 0.21;
  config.env.collision_penalty = 2.5;
  config.env.horizon = 40;
  config.env.seed = 77;
  config.algorithm.trunk = qmix::TrunkKind::lstm;
  config.algorithm.gamma = 0.97;
  config.algorithm.learning_rate = 3.0e-4;
  config.algorithm.critic_learning_rate = 1.0 / 3.0;  // not exactly representable in decimal
  config.algorithm.batch_size = 48;
  config.algorithm.target_sync_interval = 123;
  config.algorithm.epsilon = {0.9, 0.02, 5000};
  config.algorithm.ensemble_size = 3;
  config.algorithm.uncertainty_threshold = 0.125;
  config.algorithm.hidden_dim = 96;
  config.algorithm.mixer_embed_dim = 24;
  config.algorithm.agent_id_onehot = false;
  config.expert.kind = ExpertKind::llm;
  config.expert.llm.base_url = "http://example.test:9999";
  config.expert.llm.model_name = "mini";
  config.expert.llm.timeout_seconds = 12.5;
  config.expert.llm.max_retries = 4;
  config.expert.llm.temperature = 0.3;
  config.fine_tune_vicuna = true;
  config.fine_tune_samples = 77;
  config.training.total_steps = 1234;
  config.training.eval_interval = 617;
  config.training.eval_episodes = 3;
  config.training.replay_capacity = 4096;
  config.training.seed = 42;

  const std::string yaml = config_to_yaml(config);
  const ExperimentConfig reparsed = parse_config(yaml);
  CHECK(reparsed == config);
  CHECK(config_to_yaml(reparsed) == yaml);
}

TEST_CASE("an infinite uncertainty threshold survives the yaml round trip") {
  ExperimentConfig config;
  config.algorithm.uncertainty_threshold = std::numeric_limits<Scalar>::infinity();
  const std::string yaml = config_to_yaml(config);
  CHECK(yaml.find(".inf") != std::string::npos);
  const ExperimentConfig reparsed = parse_config(yaml);
  CHECK(std::isinf(reparsed.algorithm.uncertainty_threshold));
  CHECK(reparsed.algorithm.uncertainty_threshold > 0);
}

TEST_CASE("load_config reads files and reports missing ones") {
  TempDir tmp;
  const auto path = tmp.path / "config.yaml";
  {
    std::ofstream out(path);
    out << "experiment_name: from_file\ntraining:\n  seed: 6\n";
  }
  const ExperimentConfig config = load_config(path);
  CHECK(config.experiment_name == "from_file");
  CHECK(config.training.seed == 6);

  CHECK_THROWS_AS((void)load_config(tmp.path / "absent.yaml"), ConfigError);
}

TEST_CASE("timestamps render as UTC") {
  using clock = std::chrono::system_clock;
  const auto epoch = clock::from_time_t(0);
  CHECK(timestamp_compact(epoch) == "19700101-000000");
  CHECK(timestamp_iso8601(epoch) == "1970-01-01T00:00:00Z");

  const auto t = clock::from_time_t(1700000000);
  CHECK(timestamp_compact(t) == "20231114-221320");
  CHECK(timestamp_iso8601(t) == "2023-11-14T22:13:20Z");
}

TEST_CASE("experiment directories encode name, seed, and launch time") {
  TempDir tmp;
  const auto t = std::chrono::system_clock::from_time_t(1700000000);

  const ExperimentPaths first = create_experiment_dir(tmp.path, "run", 7, t);
  CHECK(first.dir.filename().string() == "run_7_20231114-221320");
  CHECK(std::filesystem::is_directory(first.dir));

  // Same-second launches get numbered suffixes instead of clobbering.
  const ExperimentPaths second = create_experiment_dir(tmp.path, "run", 7, t);
  CHECK(second.dir.filename().string() == "run_7_20231114-221320-1");
  const ExperimentPaths third = create_experiment_dir(tmp.path, "run", 7, t);
  CHECK(third.dir.filename().string() == "run_7_20231114-221320-2");

  register_experiment(tmp.path, "run", first.dir, t);
  register_experiment(tmp.path, "run", second.dir, t);
  const std::string registry = read_file(tmp.path / "experiments.txt");
  const std::string expected_first =
      "run, 2023-11-14T22:13:20Z, " + first.dir.string() + "\n";
  CHECK(registry.find(expected_first) == 0);
  CHECK(registry.find(second.dir.string()) != std::string::npos);
}

TEST_CASE("metadata records the run and the config reloads to the resolved values") {
  TempDir tmp;
  const auto t = std::chrono::system_clock::from_time_t(1700000000);
  const ExperimentPaths paths = create_experiment_dir(tmp.path, "meta", 3, t);

  ExperimentConfig config;
  config.experiment_name = "meta";
  config.training.seed = 3;
  config.env.seed = 3;
  config.algorithm.uncertainty_threshold = std::numeric_limits<Scalar>::infinity();
  write_metadata(paths, config, t);

  CHECK(std::filesystem::exists(paths.config()));
  CHECK(load_config(paths.config()) == config);

  const std::string metadata = read_file(paths.metadata());
  CHECK(metadata.find("experiment_name: meta") != std::string::npos);
  CHECK(metadata.find("seed: 3") != std::string::npos);
  CHECK(metadata.find("created: 2023-11-14T22:13:20Z") != std::string::npos);
  CHECK(metadata.find("code_version: ") != std::string::npos);
  CHECK(metadata.find("config_file: config.yaml") != std::string::npos);
}

TEST_CASE("format_scalar round-trips doubles exactly") {
  // strtod instead of std::stod: stod throws on subnormals like 1e-308.
  const Scalar values[] = {0.0,       0.1,          1.0 / 3.0, -12345.6789,
                           1e-308,    1.7e308,      2.5,       0.1 + 0.2,
                           3.14159265358979323846};
  for (Scalar v : values) {
    CAPTURE(v);
    CHECK(std::strtod(format_scalar(v).c_str(), nullptr) == v);
  }
  CHECK(std::signbit(std::strtod(format_scalar(-0.0).c_str(), nullptr)));
}

TEST_CASE("metrics writer emits the fixed headers and readable rows") {
  TempDir tmp;
  {
    MetricsWriter writer(tmp.path);
    writer.append(TrainMetricsRow{1, 0.5, 0.25, 2, 1});
    writer.append(TrainMetricsRow{2, 1.0 / 3.0, 0.0, 3, 1});
    writer.append(EvalMetricsRow{40, -12.5, 0.75, 0.125});
  }

  const std::string train_text = read_file(tmp.path / "metrics_train.csv");
  CHECK(train_text.rfind(std::string(MetricsWriter::kTrainHeader) + "\n", 0) == 0);

  const CsvTable train = read_csv(tmp.path / "metrics_train.csv");
  CHECK(train.columns ==
        std::vector<std::string>{"step", "loss", "ensemble_std", "expert_queries", "fallbacks"});
  REQUIRE(train.rows.size() == 2);
  CHECK(train.column("step") == std::vector<Scalar>{1.0, 2.0});
  CHECK(train.column("loss")[1] == 1.0 / 3.0);  // full precision survives
  CHECK(train.column("fallbacks") == std::vector<Scalar>{1.0, 1.0});

  const CsvTable eval = read_csv(tmp.path / "metrics_eval.csv");
  CHECK(eval.columns ==
        std::vector<std::string>{"step", "mean_return", "std_return", "collision_rate"});
  REQUIRE(eval.rows.size() == 1);
  CHECK(eval.column("mean_return")[0] == -12.5);
  CHECK(!eval.column_index("loss").has_value());
  CHECK_THROWS_AS((void)eval.column("loss"), std::runtime_error);
}

TEST_CASE("read_csv rejects structural problems") {
  TempDir tmp;
  CHECK_THROWS_AS((void)read_csv(tmp.path / "absent.csv"), std::runtime_error);

  const auto ragged = tmp.path / "ragged.csv";
  {
    std::ofstream out(ragged);
    out << "a,b\n1,2\n3\n";
  }
  CHECK_THROWS_AS((void)read_csv(ragged), std::runtime_error);

  const auto text_cell = tmp.path / "text.csv";
  {
    std::ofstream out(text_cell);
    out << "a,b\n1,banana\n";
  }
  const std::string message = error_message([&] { (void)read_csv(text_cell); });
  CHECK(message.find("banana") != std::string::npos);
  CHECK(message.find(":2") != std::string::npos);  // 1-based line number

  const auto empty = tmp.path / "empty.csv";
  { std::ofstream out(empty); }
  CHECK_THROWS_AS((void)read_csv(empty), std::runtime_error);
}

TEST_CASE("collect_step tags the action source") {
  const env::WorldConfig world = small_world();
  experts::AStarExpert expert(experts::GridSpec{});
  Rng explore(3, 4);

  SUBCASE("no expert leaves the policy in charge") {
    qmix::Learner learner(world, small_algo(), 17);
    auto [state, obs] = env::reset(world, 5);
    const Vector before = env::joint_observation(state);

    const CollectResult result =
        collect_step(world, state, learner, nullptr, nullptr, 0.0, explore);
    CHECK(result.source == ActionSource::policy);
    CHECK(result.uncertainty == 0.0);  // gate off, so no ensemble pass
    CHECK((result.transition.observation.array() == before.array()).all());
    CHECK((result.transition.next_observation.array() ==
           env::joint_observation(state).array())
              .all());
    CHECK(result.transition.actions.size() == 3);
    for (int a : result.transition.actions) CHECK((a >= 0 && a < kNumActions));
    CHECK(std::isfinite(result.transition.reward));
    CHECK(!result.transition.terminal);
  }

  SUBCASE("a zero threshold routes every step through the expert") {
    qmix::Learner learner(world, small_algo(), 17);
    auto [state, obs] = env::reset(world, 5);
    const env::WorldState before = state;

    const CollectResult result =
        collect_step(world, state, learner, nullptr, &expert, 1.0, explore);
    CHECK(result.source == ActionSource::expert_a_star);
    CHECK(result.uncertainty > 0.0);
    // Expert actions are exactly the planner's recommendation for the
    // pre-step state; epsilon = 1 above must not have touched them.
    const experts::ExpertPlan plan = experts::a_star_plan(before, expert.grid());
    CHECK(result.transition.actions == plan.actions);
  }

  SUBCASE("an infinite threshold turns the gate off") {
    qmix::AlgorithmConfig algo = small_algo();
    algo.uncertainty_threshold = std::numeric_limits<Scalar>::infinity();
    qmix::Learner learner(world, algo, 17);
    auto [state, obs] = env::reset(world, 5);

    const CollectResult result =
        collect_step(world, state, learner, nullptr, &expert, 0.0, explore);
    CHECK(result.source == ActionSource::policy);
    CHECK(result.uncertainty == 0.0);
  }

  SUBCASE("a single-member ensemble cannot gate") {
    qmix::AlgorithmConfig algo = small_algo();
    algo.ensemble_size = 1;
    qmix::Learner learner(world, algo, 17);
    auto [state, obs] = env::reset(world, 5);

    const CollectResult result =
        collect_step(world, state, learner, nullptr, &expert, 0.0, explore);
    CHECK(result.source == ActionSource::policy);
  }

  SUBCASE("episodes end by truncation at the horizon") {
    qmix::Learner learner(world, small_algo(), 17);
    auto [state, obs] = env::reset(world, 5);
    for (int step = 0; step < world.horizon; ++step) {
      const CollectResult result =
          collect_step(world, state, learner, nullptr, nullptr, 0.0, explore);
      CHECK(result.episode_over == (step == world.horizon - 1));
      CHECK(!result.transition.terminal);  // truncation still bootstraps
    }
  }
}

TEST_CASE("evaluate_policy is deterministic and keyed by the episode set") {
  const env::WorldConfig world = small_world();
  qmix::Learner learner(world, small_algo(), 9);

  const EvalResult a = evaluate_policy(learner, world, 4, 0);
  const EvalResult b = evaluate_policy(learner, world, 4, 0);
  CHECK(a.mean_return == b.mean_return);
  CHECK(a.std_return == b.std_return);
  CHECK(a.collision_rate == b.collision_rate);
  CHECK(std::isfinite(a.mean_return));
  CHECK(a.std_return >= 0.0);
  CHECK(a.collision_rate >= 0.0);

  const EvalResult other = evaluate_policy(learner, world, 4, 1);
  CHECK(other.mean_return != a.mean_return);  // different fixed episode set

  CHECK_THROWS_AS((void)evaluate_policy(learner, world, 0, 0), ConfigError);
}

TEST_CASE("random_policy_return is deterministic per seed") {
  const env::WorldConfig world = small_world();
  const Scalar a = random_policy_return(world, 20, 11);
  CHECK(a == random_policy_return(world, 20, 11));
  CHECK(a != random_policy_return(world, 20, 12));
  CHECK(a < 0.0);  // distances are nonnegative, so returns cannot be positive
  CHECK_THROWS_AS((void)random_policy_return(world, 0, 1), ConfigError);
}

TEST_CASE("make_expert builds what the config asks for") {
  ExperimentConfig config;
  CHECK(make_expert(config) == nullptr);

  config.expert.kind = ExpertKind::a_star;
  CHECK(make_expert(config)->name() == "a-star");

  config.expert.kind = ExpertKind::llm;
  CHECK(make_expert(config)->name() == "llm");
}

TEST_CASE("train rejects invalid configs before touching the filesystem") {
  TempDir tmp;
  ExperimentConfig config = smoke_config("bad", 1);
  config.training.total_steps = 0;
  CHECK_THROWS_AS((void)train(config, tmp.path / "out"), ConfigError);
  CHECK(!std::filesystem::exists(tmp.path / "out"));
}

TEST_CASE("train produces the full experiment artifact set") {
  TempDir tmp;
  const ExperimentConfig config = smoke_config("smoke", 3);
  const TrainResult result = train(config, tmp.path);

  CHECK(std::filesystem::exists(result.paths.config()));
  CHECK(std::filesystem::exists(result.paths.metadata()));
  CHECK(std::filesystem::exists(result.paths.best_checkpoint()));
  CHECK(std::filesystem::exists(result.paths.final_checkpoint()));
  CHECK(std::filesystem::exists(tmp.path / "experiments.txt"));
  CHECK(!std::filesystem::exists(result.paths.llm_transcript()));
  CHECK(!std::filesystem::exists(result.paths.finetune_dataset()));
  CHECK(!std::filesystem::exists(result.paths.diagnostic()));
  CHECK(load_config(result.paths.config()) == config);

  // Updates start once the buffer can fill a batch and then run every step.
  const int64_t expected_updates =
      config.training.total_steps - config.algorithm.batch_size + 1;
  CHECK(result.updates == expected_updates);
  CHECK(result.expert_queries == 0);
  CHECK(result.fallbacks == 0);
  CHECK(result.best_eval_return.has_value());

  const CsvTable train_csv = read_csv(result.paths.dir / "metrics_train.csv");
  REQUIRE(static_cast<int64_t>(train_csv.rows.size()) == expected_updates);
  CHECK(train_csv.column("step").front() == config.algorithm.batch_size);
  CHECK(train_csv.column("step").back() == config.training.total_steps);
  for (Scalar loss : train_csv.column("loss")) CHECK(std::isfinite(loss));

  const CsvTable eval_csv = read_csv(result.paths.dir / "metrics_eval.csv");
  REQUIRE(eval_csv.rows.size() == 3);  // steps 40, 80, 120
  CHECK(eval_csv.column("step") == std::vector<Scalar>{40.0, 80.0, 120.0});
  const std::vector<Scalar> eval_returns = eval_csv.column("mean_return");
  CHECK(eval_returns.back() == result.final_eval.mean_return);
  CHECK(*result.best_eval_return ==
        *std::max_element(eval_returns.begin(), eval_returns.end()));

  // The final checkpoint reloads into a learner that reproduces the
  // recorded final evaluation.
  const nn::Checkpoint checkpoint = nn::Checkpoint::load(result.paths.final_checkpoint());
  const ExperimentConfig embedded = parse_config(checkpoint.text("config_yaml"));
  CHECK(embedded == config);
  qmix::Learner restored(embedded.env, embedded.algorithm, 0);
  restored.load(checkpoint);
  const EvalResult eval =
      evaluate_policy(restored, embedded.env, config.training.eval_episodes);
  CHECK(eval.mean_return == result.final_eval.mean_return);
}

TEST_CASE("train metrics are byte-identical across reruns") {
  ExperimentConfig config = smoke_config("det", 5);
  config.training.total_steps = 60;
  config.training.eval_interval = 30;

  SUBCASE("with the expert gate active") {
    config.expert.kind = ExpertKind::a_star;
    config.algorithm.ensemble_size = 2;
    config.algorithm.uncertainty_threshold = 0.05;
  }
  SUBCASE("without an expert") {}

  TempDir tmp;
  const TrainResult first = train(config, tmp.path / "a");
  const TrainResult second = train(config, tmp.path / "b");

  CHECK(read_file(first.paths.dir / "metrics_train.csv") ==
        read_file(second.paths.dir / "metrics_train.csv"));
  CHECK(read_file(first.paths.dir / "metrics_eval.csv") ==
        read_file(second.paths.dir / "metrics_eval.csv"));
  CHECK(read_file(first.paths.config()) == read_file(second.paths.config()));
  CHECK(read_file(first.paths.final_checkpoint()) ==
        read_file(second.paths.final_checkpoint()));
  CHECK(first.expert_queries == second.expert_queries);
  CHECK(first.fallbacks == second.fallbacks);
}

TEST_CASE("train generates the fine-tune dataset when configured") {
  TempDir tmp;
  ExperimentConfig config = smoke_config("finetune", 2);
  config.training.total_steps = 20;
  config.training.eval_interval = 20;
  config.fine_tune_vicuna = true;
  config.fine_tune_samples = 12;

  const TrainResult result = train(config, tmp.path);
  REQUIRE(std::filesystem::exists(result.paths.finetune_dataset()));
  const finetune::ValidationReport report =
      finetune::validate_dataset(result.paths.finetune_dataset());
  CHECK(report.ok());
  CHECK(report.records == 12);
}

TEST_CASE("train dumps diagnostics when the update produces non-finite values") {
  TempDir tmp;
  ExperimentConfig config = smoke_config("blowup", 4);
  config.training.total_steps = 40;
  config.training.eval_interval = 40;
  // Adam's step size is ~learning_rate no matter the gradient, so the rate
  // must be large enough that squaring a post-step parameter overflows.
  config.algorithm.learning_rate = 1e160;
  config.algorithm.critic_learning_rate = 1e160;

  CHECK_THROWS_AS((void)train(config, tmp.path), NumericError);

  bool found = false;
  for (const auto& entry : std::filesystem::directory_iterator(tmp.path)) {
    if (!entry.is_directory()) continue;
    const auto dump = entry.path() / "diagnostic_dump.txt";
    if (std::filesystem::exists(dump)) {
      found = true;
      const std::string text = read_file(dump);
      CHECK(text.find("env_step: ") != std::string::npos);
      CHECK(text.find("error: ") != std::string::npos);
      CHECK(text.find("parameter_norms:") != std::string::npos);
    }
  }
  CHECK(found);
}

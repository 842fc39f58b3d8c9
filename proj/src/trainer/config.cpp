#include "marl/trainer/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace marl::trainer {

std::string to_string(ExpertKind kind) {
  switch (kind) {
    case ExpertKind::none: return "none";
    case ExpertKind::a_star: return "a-star";
    case ExpertKind::llm: return "llm";
  }
  throw std::logic_error("unknown ExpertKind");
}

ExpertKind expert_kind_from_string(const std::string& text) {
  if (text == "none") return ExpertKind::none;
  if (text == "a-star") return ExpertKind::a_star;
  if (text == "llm") return ExpertKind::llm;
  throw ConfigError("expert.kind must be one of none, a-star, llm (got '" + text + "')");
}

void validate(const ExperimentConfig& config) {
  if (config.experiment_name.empty()) throw ConfigError("experiment_name must not be empty");
  if (config.experiment_name.find('/') != std::string::npos) {
    throw ConfigError("experiment_name must not contain '/'");
  }
  env::validate(config.env);
  qmix::validate(config.algorithm);
  if (config.expert.kind == ExpertKind::llm) experts::validate(config.expert.llm);
  if (config.training.total_steps < 1) throw ConfigError("training.total_steps must be >= 1");
  if (config.training.eval_interval < 1) throw ConfigError("training.eval_interval must be >= 1");
  if (config.training.eval_episodes < 1) throw ConfigError("training.eval_episodes must be >= 1");
  if (config.training.replay_capacity < config.algorithm.batch_size) {
    throw ConfigError("training.replay_capacity must be >= algorithm.batch_size");
  }
  if (config.fine_tune_samples < 1) throw ConfigError("fine_tune_samples must be >= 1");
}

namespace {

void reject_unknown_keys(const YAML::Node& node, const std::string& section,
                         const std::set<std::string>& allowed) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError(section + " must be a mapping");
  for (const auto& entry : node) {
    const std::string key = entry.first.as<std::string>();
    if (allowed.count(key) == 0) {
      throw ConfigError("unknown key '" + key + "' in " + section);
    }
  }
}

template <typename T>
void read_field(const YAML::Node& node, const std::string& section, const char* key, T& out) {
  if (!node || !node[key]) return;
  try {
    out = node[key].template as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("invalid value for " + section + "." + key);
  }
}

// A default-constructed Node is a *defined* null node; nested lookups need a
// genuinely undefined one when the parent section is absent.
YAML::Node child_node(const YAML::Node& parent, const char* key) {
  return parent ? parent[key] : YAML::Node(YAML::NodeType::Undefined);
}

}  // namespace

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed YAML: ") + e.what());
  }
  reject_unknown_keys(root, "config", {"experiment_name", "env", "algorithm", "expert",
                                       "fine_tune_vicuna", "fine_tune_samples", "training"});

  ExperimentConfig config;
  read_field(root, "config", "experiment_name", config.experiment_name);
  read_field(root, "config", "fine_tune_vicuna", config.fine_tune_vicuna);
  read_field(root, "config", "fine_tune_samples", config.fine_tune_samples);

  const YAML::Node training = root["training"];
  reject_unknown_keys(training, "training",
                      {"total_steps", "eval_interval", "eval_episodes", "replay_capacity", "seed"});
  read_field(training, "training", "total_steps", config.training.total_steps);
  read_field(training, "training", "eval_interval", config.training.eval_interval);
  read_field(training, "training", "eval_episodes", config.training.eval_episodes);
  read_field(training, "training", "replay_capacity", config.training.replay_capacity);
  read_field(training, "training", "seed", config.training.seed);

  const YAML::Node env = root["env"];
  reject_unknown_keys(env, "env",
                      {"n_agents", "n_landmarks", "world_half_extent", "step_size",
                       "collision_radius", "collision_penalty", "horizon", "seed"});
  read_field(env, "env", "n_agents", config.env.n_agents);
  read_field(env, "env", "n_landmarks", config.env.n_landmarks);
  read_field(env, "env", "world_half_extent", config.env.world_half_extent);
  read_field(env, "env", "step_size", config.env.step_size);
  read_field(env, "env", "collision_radius", config.env.collision_radius);
  read_field(env, "env", "collision_penalty", config.env.collision_penalty);
  read_field(env, "env", "horizon", config.env.horizon);
  if (env && env["seed"]) {
    read_field(env, "env", "seed", config.env.seed);
  } else {
    config.env.seed = config.training.seed;
  }

  const YAML::Node algorithm = root["algorithm"];
  reject_unknown_keys(algorithm, "algorithm",
                      {"gamma", "learning_rate", "critic_learning_rate", "batch_size",
                       "target_sync_interval", "epsilon", "ensemble_size", "uncertainty_threshold",
                       "trunk", "hidden_dim", "mixer_embed_dim", "agent_id_onehot"});
  read_field(algorithm, "algorithm", "gamma", config.algorithm.gamma);
  read_field(algorithm, "algorithm", "learning_rate", config.algorithm.learning_rate);
  read_field(algorithm, "algorithm", "critic_learning_rate", config.algorithm.critic_learning_rate);
  read_field(algorithm, "algorithm", "batch_size", config.algorithm.batch_size);
  read_field(algorithm, "algorithm", "target_sync_interval", config.algorithm.target_sync_interval);
  read_field(algorithm, "algorithm", "ensemble_size", config.algorithm.ensemble_size);
  read_field(algorithm, "algorithm", "uncertainty_threshold", config.algorithm.uncertainty_threshold);
  read_field(algorithm, "algorithm", "hidden_dim", config.algorithm.hidden_dim);
  read_field(algorithm, "algorithm", "mixer_embed_dim", config.algorithm.mixer_embed_dim);
  read_field(algorithm, "algorithm", "agent_id_onehot", config.algorithm.agent_id_onehot);
  if (algorithm && algorithm["trunk"]) {
    const std::string trunk = algorithm["trunk"].as<std::string>();
    if (trunk == "lstm") {
      config.algorithm.trunk = qmix::TrunkKind::lstm;
    } else if (trunk == "attention") {
      config.algorithm.trunk = qmix::TrunkKind::attention;
    } else {
      throw ConfigError("algorithm.trunk must be lstm or attention (got '" + trunk + "')");
    }
  }
  const YAML::Node epsilon = child_node(algorithm, "epsilon");
  reject_unknown_keys(epsilon, "algorithm.epsilon", {"start", "end", "decay_steps"});
  read_field(epsilon, "algorithm.epsilon", "start", config.algorithm.epsilon.start);
  read_field(epsilon, "algorithm.epsilon", "end", config.algorithm.epsilon.end);
  read_field(epsilon, "algorithm.epsilon", "decay_steps", config.algorithm.epsilon.decay_steps);

  const YAML::Node expert = root["expert"];
  reject_unknown_keys(expert, "expert", {"kind", "llm"});
  if (expert && expert["kind"]) {
    config.expert.kind = expert_kind_from_string(expert["kind"].as<std::string>());
  }
  const YAML::Node llm = child_node(expert, "llm");
  reject_unknown_keys(llm, "expert.llm",
                      {"base_url", "model_name", "timeout_seconds", "max_retries", "temperature"});
  read_field(llm, "expert.llm", "base_url", config.expert.llm.base_url);
  read_field(llm, "expert.llm", "model_name", config.expert.llm.model_name);
  read_field(llm, "expert.llm", "timeout_seconds", config.expert.llm.timeout_seconds);
  read_field(llm, "expert.llm", "max_retries", config.expert.llm.max_retries);
  read_field(llm, "expert.llm", "temperature", config.expert.llm.temperature);

  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

namespace {

void emit_scalar(YAML::Emitter& out, Scalar v) {
  // yaml-cpp's default double emission truncates; emit the shortest decimal
  // string that parses back exactly, and the YAML spelling of infinity.
  if (std::isinf(v)) {
    out << (v > 0 ? ".inf" : "-.inf");
    return;
  }
  std::string text;
  for (int precision = 15; precision <= 17; ++precision) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    text = s.str();
    if (std::stod(text) == v) break;
  }
  out << text;
}

}  // namespace

std::string config_to_yaml(const ExperimentConfig& config) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "experiment_name" << YAML::Value << config.experiment_name;

  out << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n_agents" << YAML::Value << config.env.n_agents;
  out << YAML::Key << "n_landmarks" << YAML::Value << config.env.n_landmarks;
  out << YAML::Key << "world_half_extent" << YAML::Value;
  emit_scalar(out, config.env.world_half_extent);
  out << YAML::Key << "step_size" << YAML::Value;
  emit_scalar(out, config.env.step_size);
  out << YAML::Key << "collision_radius" << YAML::Value;
  emit_scalar(out, config.env.collision_radius);
  out << YAML::Key << "collision_penalty" << YAML::Value;
  emit_scalar(out, config.env.collision_penalty);
  out << YAML::Key << "horizon" << YAML::Value << config.env.horizon;
  out << YAML::Key << "seed" << YAML::Value << config.env.seed;
  out << YAML::EndMap;

  out << YAML::Key << "algorithm" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "trunk" << YAML::Value
      << (config.algorithm.trunk == qmix::TrunkKind::lstm ? "lstm" : "attention");
  out << YAML::Key << "gamma" << YAML::Value;
  emit_scalar(out, config.algorithm.gamma);
  out << YAML::Key << "learning_rate" << YAML::Value;
  emit_scalar(out, config.algorithm.learning_rate);
  out << YAML::Key << "critic_learning_rate" << YAML::Value;
  emit_scalar(out, config.algorithm.critic_learning_rate);
  out << YAML::Key << "batch_size" << YAML::Value << config.algorithm.batch_size;
  out << YAML::Key << "target_sync_interval" << YAML::Value
      << config.algorithm.target_sync_interval;
  out << YAML::Key << "hidden_dim" << YAML::Value << config.algorithm.hidden_dim;
  out << YAML::Key << "mixer_embed_dim" << YAML::Value << config.algorithm.mixer_embed_dim;
  out << YAML::Key << "agent_id_onehot" << YAML::Value << config.algorithm.agent_id_onehot;
  out << YAML::Key << "ensemble_size" << YAML::Value << config.algorithm.ensemble_size;
  out << YAML::Key << "uncertainty_threshold" << YAML::Value;
  emit_scalar(out, config.algorithm.uncertainty_threshold);
  out << YAML::Key << "epsilon" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "start" << YAML::Value;
  emit_scalar(out, config.algorithm.epsilon.start);
  out << YAML::Key << "end" << YAML::Value;
  emit_scalar(out, config.algorithm.epsilon.end);
  out << YAML::Key << "decay_steps" << YAML::Value << config.algorithm.epsilon.decay_steps;
  out << YAML::EndMap;
  out << YAML::EndMap;

  out << YAML::Key << "expert" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(config.expert.kind);
  out << YAML::Key << "llm" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "base_url" << YAML::Value << config.expert.llm.base_url;
  out << YAML::Key << "model_name" << YAML::Value << config.expert.llm.model_name;
  out << YAML::Key << "timeout_seconds" << YAML::Value;
  emit_scalar(out, config.expert.llm.timeout_seconds);
  out << YAML::Key << "max_retries" << YAML::Value << config.expert.llm.max_retries;
  out << YAML::Key << "temperature" << YAML::Value;
  emit_scalar(out, config.expert.llm.temperature);
  out << YAML::EndMap;
  out << YAML::EndMap;

  out << YAML::Key << "fine_tune_vicuna" << YAML::Value << config.fine_tune_vicuna;
  out << YAML::Key << "fine_tune_samples" << YAML::Value << config.fine_tune_samples;

  out << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "total_steps" << YAML::Value << config.training.total_steps;
  out << YAML::Key << "eval_interval" << YAML::Value << config.training.eval_interval;
  out << YAML::Key << "eval_episodes" << YAML::Value << config.training.eval_episodes;
  out << YAML::Key << "replay_capacity" << YAML::Value << config.training.replay_capacity;
  out << YAML::Key << "seed" << YAML::Value << config.training.seed;
  out << YAML::EndMap;

  out << YAML::EndMap;
  if (!out.good()) throw std::runtime_error("yaml emission failed");
  return std::string(out.c_str()) + "\n";
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file " + path.string());
  out << config_to_yaml(config);
  if (!out) throw std::runtime_error("failed writing config file " + path.string());
}

}  // namespace marl::trainer

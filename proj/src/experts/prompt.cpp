#include "marl/experts/prompt.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace marl::experts {

Scalar round_half_even_2(Scalar value) {
  const Scalar scaled = value * 100.0;
  const Scalar floor_v = std::floor(scaled);
  const Scalar diff = scaled - floor_v;
  Scalar k;
  if (diff > 0.5) {
    k = floor_v + 1;
  } else if (diff < 0.5) {
    k = floor_v;
  } else {
    k = std::fmod(floor_v, 2.0) == 0.0 ? floor_v : floor_v + 1;
  }
  Scalar out = k / 100.0;
  if (out == 0.0 && std::signbit(value)) out = -0.0;
  return out;
}

std::string repr_rounded(Scalar value) {
  const long long hundredths = std::llround(std::abs(value) * 100.0);
  std::string out = std::signbit(value) ? "-" : "";
  out += std::to_string(hundredths / 100);
  out += '.';
  const long long frac = hundredths % 100;
  if (frac == 0) {
    out += '0';
  } else if (frac % 10 == 0) {
    out += std::to_string(frac / 10);
  } else {
    if (frac < 10) out += '0';
    out += std::to_string(frac);
  }
  return out;
}

std::string render_float_list(std::span<const Scalar> values) {
  std::string out = "[";
  for (size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += repr_rounded(round_half_even_2(values[i]));
  }
  out += ']';
  return out;
}

std::string render_action_list(std::span<const int> actions) {
  std::string out = "[";
  for (size_t i = 0; i < actions.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(actions[i]);
  }
  out += ']';
  return out;
}

namespace {

std::string ordinal(int one_based) {
  static const char* words[] = {"first", "second",  "third", "fourth", "fifth",    "sixth",
                                "seventh", "eighth", "ninth", "tenth",  "eleventh", "twelfth"};
  if (one_based >= 1 && one_based <= 12) return words[one_based - 1];
  const int last_two = one_based % 100;
  const int last = one_based % 10;
  const char* suffix = "th";
  if (last_two < 11 || last_two > 13) {
    if (last == 1) suffix = "st";
    else if (last == 2) suffix = "nd";
    else if (last == 3) suffix = "rd";
  }
  return std::to_string(one_based) + suffix;
}

}  // namespace

std::string build_prompt(const Vector& joint_observation, int n_agents) {
  if (n_agents < 1) throw std::invalid_argument("build_prompt: n_agents must be >= 1");
  const Index len = joint_observation.size();
  if (len < 2 * n_agents + 2 || len % 2 != 0) {
    throw std::invalid_argument("build_prompt: observation length does not fit the layout");
  }
  const std::string n = std::to_string(n_agents);
  std::string prompt =
      "There are " + n +
      " agents in the environment. The agents are working in a grid world and all agents are "
      "globally rewarded based on how far the closest agent is to each landmark. "
      "Locally, the agents are penalized if they collide with other agents. The possible actions "
      "are: 0: nothing, 1: left, 2: right, 3: down, and 4: up. "
      "Please help the agents to plan the next actions given agents' current observations. The "
      "actions should be displayed in a list. Do not explain the reasoning. ";
  const std::span<const Scalar> flat(joint_observation.data(), static_cast<size_t>(len));
  const std::string landmarks = render_float_list(flat.subspan(2 * n_agents));
  for (int a = 0; a < n_agents; ++a) {
    prompt += "The " + ordinal(a + 1) + " agent is at position " +
              render_float_list(flat.subspan(2 * a, 2)) + ", the closest landmarks are at " +
              landmarks + ". ";
  }
  prompt += "What are the next actions for the agents? The output should be a list of integers "
            "with length " + n + ".";
  return prompt;
}

std::string to_string(ParseFailure failure) {
  switch (failure) {
    case ParseFailure::no_list_found: return "no-list-found";
    case ParseFailure::wrong_length: return "wrong-length";
    case ParseFailure::out_of_range: return "out-of-range";
  }
  throw std::logic_error("unknown ParseFailure");
}

namespace {

/// Parses "  -12 " into an integer; nullopt when the token is not a plain
/// optionally-signed decimal integer.
std::optional<long long> parse_int_token(const std::string& token) {
  size_t i = 0;
  while (i < token.size() && std::isspace(static_cast<unsigned char>(token[i]))) ++i;
  size_t end = token.size();
  while (end > i && std::isspace(static_cast<unsigned char>(token[end - 1]))) --end;
  if (i == end) return std::nullopt;
  bool negative = false;
  if (token[i] == '-' || token[i] == '+') {
    negative = token[i] == '-';
    ++i;
  }
  if (i == end) return std::nullopt;
  long long value = 0;
  for (; i < end; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(token[i]))) return std::nullopt;
    value = value * 10 + (token[i] - '0');
    if (value > 1000000) return std::nullopt;  // far beyond any action id
  }
  return negative ? -value : value;
}

std::optional<std::vector<long long>> try_integer_list(const std::string& body) {
  std::vector<long long> values;
  size_t start = 0;
  while (true) {
    const size_t comma = body.find(',', start);
    const std::string token =
        comma == std::string::npos ? body.substr(start) : body.substr(start, comma - start);
    const auto value = parse_int_token(token);
    if (!value) return std::nullopt;
    values.push_back(*value);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return values;
}

}  // namespace

ParseResult parse_actions(const std::string& text, int n_agents) {
  size_t pos = 0;
  while ((pos = text.find('[', pos)) != std::string::npos) {
    const size_t close = text.find(']', pos + 1);
    if (close == std::string::npos) break;
    const auto values = try_integer_list(text.substr(pos + 1, close - pos - 1));
    if (!values) {
      ++pos;
      continue;
    }
    ParseResult result;
    if (static_cast<int>(values->size()) != n_agents) {
      result.failure = ParseFailure::wrong_length;
      return result;
    }
    for (long long v : *values) {
      if (v < 0 || v >= kNumActions) {
        result.failure = ParseFailure::out_of_range;
        return result;
      }
    }
    result.actions.assign(values->begin(), values->end());
    return result;
  }
  ParseResult result;
  result.failure = ParseFailure::no_list_found;
  return result;
}

}  // namespace marl::experts

#pragma once

#include "marl/common.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace marl::experts {

/// Round to 2 decimal places with ties to even, keeping the sign of zero
/// (matching Python's round(x, 2) on the scaled value).
Scalar round_half_even_2(Scalar value);

/// Renders an already-rounded value the way Python repr() prints it inside a
/// list: shortest decimal form, at least one fractional digit, "-0.0" kept.
std::string repr_rounded(Scalar value);

/// "[0.12, -0.5, 1.0]" — rounds each entry, then reprs it.
std::string render_float_list(std::span<const Scalar> values);

/// "[1, 2, 3]"
std::string render_action_list(std::span<const int> actions);

/// The planning prompt for the cooperative-navigation world: a single
/// paragraph naming each agent's position (ordinal phrasing) and the shared
/// landmark list, then asking for one integer action per agent. The
/// observation layout is [agent xy pairs..., landmark xy pairs...].
std::string build_prompt(const Vector& joint_observation, int n_agents);

enum class ParseFailure { no_list_found, wrong_length, out_of_range };

std::string to_string(ParseFailure failure);

struct ParseResult {
  std::vector<int> actions;
  std::optional<ParseFailure> failure;

  bool ok() const { return !failure.has_value(); }
};

/// Extracts the first bracketed comma-separated integer list from the text;
/// succeeds iff its length is n_agents and every entry is a valid action.
ParseResult parse_actions(const std::string& text, int n_agents);

}  // namespace marl::experts

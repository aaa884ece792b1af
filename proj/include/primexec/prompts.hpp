#pragma once

#include "primexec/geometry.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace primexec {

/// Values substituted into the bundled prompt templates.
struct PromptFields {
  std::string task_desc;
  std::vector<std::string> historical_decisions;
  std::optional<Destination> robot_arm_pos;
  std::optional<std::string> scene_desc;
};

/// Ids of the bundled templates: "system", "instruction-1" .. "instruction-10", "gpt4v-icl".
const std::vector<std::string>& template_ids();

/// Verbatim template text. Throws UnknownTemplateError.
std::string_view template_text(std::string_view id);

/// True when the template mentions `{name}` for one of the substitution fields.
bool template_uses(std::string_view id, std::string_view field);

/// Rendering of the history: "none" when empty, otherwise the decisions joined by ", ".
std::string render_history(const std::vector<std::string>& decisions);

/// Substitutes {task_desc}, {historical_decisions}, {robot_arm_pos} and {scene_desc}; other braces
/// (e.g. {pos}, {object}) are part of the template text and stay literal.
/// Throws UnknownTemplateError, or MissingFieldError when a referenced optional field is absent.
std::string render_template(std::string_view id, const PromptFields& fields);

}  // namespace primexec

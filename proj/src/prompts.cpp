#include "primexec/prompts.hpp"

#include "primexec/errors.hpp"
#include "primexec/skill.hpp"
#include "prompt_assets.hpp"

#include <algorithm>

namespace primexec {

namespace {

constexpr std::string_view kFields[] = {"task_desc", "historical_decisions", "robot_arm_pos", "scene_desc"};

}  // namespace

const std::vector<std::string>& template_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> out;
    for (const auto& asset : detail::kPromptAssets) out.emplace_back(asset.id);
    return out;
  }();
  return ids;
}

std::string_view template_text(std::string_view id) {
  for (const auto& asset : detail::kPromptAssets) {
    if (asset.id == id) return asset.text;
  }
  throw UnknownTemplateError("unknown prompt template '" + std::string(id) + "'");
}

bool template_uses(std::string_view id, std::string_view field) {
  const std::string needle = "{" + std::string(field) + "}";
  return template_text(id).find(needle) != std::string_view::npos;
}

std::string render_history(const std::vector<std::string>& decisions) {
  if (decisions.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (i) out += ", ";
    out += decisions[i];
  }
  return out;
}

std::string render_template(std::string_view id, const PromptFields& fields) {
  const std::string_view text = template_text(id);
  auto value_of = [&](std::string_view name) -> std::string {
    if (name == "task_desc") return fields.task_desc;
    if (name == "historical_decisions") return render_history(fields.historical_decisions);
    if (name == "robot_arm_pos") {
      if (!fields.robot_arm_pos) throw MissingFieldError("template " + std::string(id) + " needs robot_arm_pos");
      return format_destination(*fields.robot_arm_pos);
    }
    if (!fields.scene_desc) throw MissingFieldError("template " + std::string(id) + " needs scene_desc");
    return *fields.scene_desc;
  };

  std::string out;
  out.reserve(text.size() + 128);
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const std::size_t close = text.find('}', i);
      if (close != std::string_view::npos) {
        const std::string_view name = text.substr(i + 1, close - i - 1);
        if (std::find(std::begin(kFields), std::end(kFields), name) != std::end(kFields)) {
          out += value_of(name);
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

}  // namespace primexec

#pragma once

// Field accessors that report failures as SchemaError with a path.

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace primexec::jsonutil {

nlohmann::json parse_document(std::string_view text);

/// Checks {"schema": version, "kind": kind}.
void expect_header(const nlohmann::json& doc, std::string_view kind, int version);

const nlohmann::json& get(const nlohmann::json& j, std::string_view path, const char* key);
const nlohmann::json& get_array(const nlohmann::json& j, std::string_view path, const char* key);
std::string get_string(const nlohmann::json& j, std::string_view path, const char* key);
std::optional<std::string> get_optional_string(const nlohmann::json& j, std::string_view path, const char* key);
double get_number(const nlohmann::json& j, std::string_view path, const char* key);
std::size_t get_index(const nlohmann::json& j, std::string_view path, const char* key);
bool get_bool(const nlohmann::json& j, std::string_view path, const char* key, bool fallback);

}  // namespace primexec::jsonutil

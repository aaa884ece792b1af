#include "primexec/json_util.hpp"

#include "primexec/errors.hpp"

namespace primexec::jsonutil {

using nlohmann::json;

namespace {

std::string join(std::string_view path, const char* key) { return std::string(path) + "/" + key; }

}  // namespace

json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", e.what());
  }
}

void expect_header(const json& doc, std::string_view kind, int version) {
  if (!doc.is_object()) throw SchemaError("", "document must be an object");
  const json& schema = get(doc, "", "schema");
  if (!schema.is_number_integer() || schema.get<long long>() != version) {
    throw SchemaError("/schema", "unsupported schema version (expected " + std::to_string(version) + ")");
  }
  if (get_string(doc, "", "kind") != kind) throw SchemaError("/kind", "expected \"" + std::string(kind) + "\"");
}

const json& get(const json& j, std::string_view path, const char* key) {
  if (!j.is_object()) throw SchemaError(std::string(path), "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(join(path, key), "missing field");
  return *it;
}

const json& get_array(const json& j, std::string_view path, const char* key) {
  const json& v = get(j, path, key);
  if (!v.is_array()) throw SchemaError(join(path, key), "expected an array");
  return v;
}

std::string get_string(const json& j, std::string_view path, const char* key) {
  const json& v = get(j, path, key);
  if (!v.is_string()) throw SchemaError(join(path, key), "expected a string");
  return v.get<std::string>();
}

std::optional<std::string> get_optional_string(const json& j, std::string_view path, const char* key) {
  if (!j.is_object()) throw SchemaError(std::string(path), "expected an object");
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(join(path, key), "expected a string");
  return it->get<std::string>();
}

double get_number(const json& j, std::string_view path, const char* key) {
  const json& v = get(j, path, key);
  if (!v.is_number()) throw SchemaError(join(path, key), "expected a number");
  return v.get<double>();
}

std::size_t get_index(const json& j, std::string_view path, const char* key) {
  const json& v = get(j, path, key);
  if (!v.is_number_unsigned()) throw SchemaError(join(path, key), "expected a non-negative integer");
  return v.get<std::size_t>();
}

bool get_bool(const json& j, std::string_view path, const char* key, bool fallback) {
  if (!j.is_object()) throw SchemaError(std::string(path), "expected an object");
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw SchemaError(join(path, key), "expected a boolean");
  return it->get<bool>();
}

}  // namespace primexec::jsonutil

#pragma once

#include <string>

#include <json.hpp>

#include "dapt/prompt.hpp"
#include "dapt/tensor.hpp"

namespace dapt {

using json = nlohmann::json;

// Matrices serialize as a shape header plus a flat row-major value array.
// Doubles go through the library's shortest-round-trip encoder, so every
// finite value reloads bit-exactly.
json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, const std::string& what);

json params_to_json(const PromptParams& p);
PromptParams params_from_json(const json& j, const std::string& what);

/// Parses a JSON document, converting library errors into ParseError with the
/// file path and byte position in the message.
json parse_json_file(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// Field access helpers that raise ParseError naming the missing/ill-typed key.
template <typename T>
T require_field(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) throw ParseError(ctx + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(ctx + ": field '" + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const std::string& key, T fallback, const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(ctx + ": field '" + key + "': " + e.what());
  }
}

}  // namespace dapt

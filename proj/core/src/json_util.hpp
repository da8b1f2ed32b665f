#pragma once

// Internal helpers shared by io.cpp and config.cpp.

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "plk/error.hpp"

namespace plk::detail {

using nlohmann::json;

/// Parses text, turning nlohmann errors into ParseError naming the source
/// and byte offset.
json parse_json(std::string_view text, std::string_view source);

/// Rejects keys of `obj` outside `allowed`. `where` names the object.
void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view source, std::string_view where);

/// Typed lookup that keeps `fallback` when the key is missing and raises
/// ParseError naming source/key on a type mismatch.
template <typename T>
T get_or(const json& obj, std::string_view key, const T& fallback, std::string_view source) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return fallback;
  try {
    return it->template get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError,
                std::string(source) + ": key '" + std::string(key) + "': " + e.what());
  }
}

const json& require_object(const json& j, std::string_view source, std::string_view where);

}  // namespace plk::detail

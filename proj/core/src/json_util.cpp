#include "json_util.hpp"

#include <algorithm>

namespace plk::detail {

json parse_json(std::string_view text, std::string_view source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string(source) + ": byte offset " +
                                           std::to_string(e.byte) + ": " + e.what());
  }
}

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view source, std::string_view where) {
  for (const auto& item : obj.items()) {
    const std::string& key = item.key();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::ParseError, std::string(source) + ": unknown key '" + key +
                                             "' in " + std::string(where));
    }
  }
}

const json& require_object(const json& j, std::string_view source, std::string_view where) {
  if (!j.is_object()) {
    throw Error(ErrorCode::ParseError,
                std::string(source) + ": " + std::string(where) + " must be a JSON object");
  }
  return j;
}

}  // namespace plk::detail

#include "toolsmith/wire.hpp"

#include "toolsmith/error.hpp"

namespace toolsmith::wire {

nlohmann::json make_input(const std::string& tool, const nlohmann::json& inputs) {
  return nlohmann::json{{"tool", tool}, {"inputs", inputs}};
}

Output parse_output(std::string_view text, int exit_code) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);  // rejects trailing documents
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, text.empty() ? "tool produced no output" : std::string("malformed wire output: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ParseFailure, "wire output is not an object");
  if (!doc.contains("ok") || !doc.at("ok").is_boolean()) throw Error(ErrorCode::ParseFailure, "wire output lacks boolean ok");

  Output out;
  out.ok = doc.at("ok").get<bool>();
  if (out.ok) {
    if (!doc.contains("outputs") || !doc.at("outputs").is_object()) {
      throw Error(ErrorCode::ParseFailure, "ok=true without an outputs record");
    }
    if (doc.contains("error_type")) throw Error(ErrorCode::ParseFailure, "ok=true carries error_type");
    if (exit_code != 0) throw Error(ErrorCode::ParseFailure, "ok=true with nonzero exit " + std::to_string(exit_code));
    out.outputs = doc.at("outputs");
    return out;
  }
  if (doc.contains("outputs")) throw Error(ErrorCode::ParseFailure, "ok=false accompanied by outputs");
  if (!doc.contains("error_type") || !doc.at("error_type").is_string() || doc.at("error_type").get<std::string>().empty()) {
    throw Error(ErrorCode::ParseFailure, "ok=false without error_type");
  }
  if (!doc.contains("message") || !doc.at("message").is_string()) {
    throw Error(ErrorCode::ParseFailure, "ok=false without message");
  }
  if (exit_code == 0) throw Error(ErrorCode::ParseFailure, "ok=false with exit 0");
  out.failure.error_type = doc.at("error_type").get<std::string>();
  out.failure.message = doc.at("message").get<std::string>();
  if (doc.contains("detail") && doc.at("detail").is_string()) out.failure.detail = doc.at("detail").get<std::string>();
  return out;
}

nlohmann::json to_json(const Output& o) {
  if (o.ok) return {{"ok", true}, {"outputs", o.outputs}};
  nlohmann::json j{{"ok", false}, {"error_type", o.failure.error_type}, {"message", o.failure.message}};
  if (o.failure.detail) j["detail"] = *o.failure.detail;
  return j;
}

}  // namespace toolsmith::wire

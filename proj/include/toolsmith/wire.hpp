#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace toolsmith::wire {

// Document written to the shim's stdin.
nlohmann::json make_input(const std::string& tool, const nlohmann::json& inputs);

struct Failure {
  std::string error_type;
  std::string message;
  std::optional<std::string> detail;
};

struct Output {
  bool ok = false;
  nlohmann::json outputs;  // ok only
  Failure failure;         // !ok only
};

/// Parses the shim's stdout against the wire contract: exactly one JSON
/// object; `{ok:true, outputs:{...}}` with exit 0, or
/// `{ok:false, error_type, message[, detail]}` with a nonzero exit and no
/// outputs. Throws Error{ParseFailure} describing the first violation.
Output parse_output(std::string_view stdout_text, int exit_code);

nlohmann::json to_json(const Output& o);

}  // namespace toolsmith::wire

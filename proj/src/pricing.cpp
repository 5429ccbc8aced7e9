#include "toolsmith/pricing.hpp"

#include "toolsmith/error.hpp"

#include <cmath>
#include <set>

namespace toolsmith {

void to_json(nlohmann::json& j, const TokenUsage& u) {
  j = nlohmann::json{{"input", u.input}, {"cache_write", u.cache_write}, {"cache_read", u.cache_read},
                     {"output", u.output}};
}

void from_json(const nlohmann::json& j, TokenUsage& u) {
  auto get = [&](const char* key) -> int64_t {
    if (!j.contains(key)) return 0;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<int64_t>() < 0) {
      throw Error(ErrorCode::ParseFailure, std::string("token usage field ") + key + " must be a nonnegative integer");
    }
    return v.get<int64_t>();
  };
  u.input = get("input");
  u.cache_write = get("cache_write");
  u.cache_read = get("cache_read");
  u.output = get("output");
}

int64_t Usd::rounded_cents() const {
  constexpr int64_t kNanoPerCent = 10'000'000;
  const int64_t half = kNanoPerCent / 2;
  if (nano_ >= 0) return (nano_ + half) / kNanoPerCent;
  return -((-nano_ + half) / kNanoPerCent);
}

std::string Usd::to_string() const {
  const int64_t cents = rounded_cents();
  const int64_t a = cents < 0 ? -cents : cents;
  std::string frac = std::to_string(a % 100);
  if (frac.size() < 2) frac.insert(0, "0");
  return (cents < 0 ? "-" : "") + std::to_string(a / 100) + "." + frac;
}

Usd account_cost(const TokenUsage& usage, const PricingEntry& price, CacheTtl ttl) {
  MilliUsdPerM cw = price.input_per_m;
  if (ttl == CacheTtl::OneHour && price.cache_write_1h_per_m) {
    cw = *price.cache_write_1h_per_m;
  } else if (price.cache_write_per_m) {
    cw = *price.cache_write_per_m;
  }
  // tokens * milli-USD per 1e6 tokens = nano-USD
  const int64_t nano = usage.input * price.input_per_m + usage.cache_write * cw +
                       usage.cache_read * price.cache_read_per_m + usage.output * price.output_per_m;
  return Usd::from_nano(nano);
}

MilliUsdPerM parse_rate(double usd_per_m, const std::string& field) {
  if (!std::isfinite(usd_per_m) || usd_per_m < 0) {
    throw Error(ErrorCode::ParseFailure, field + ": rate must be a nonnegative number");
  }
  const double milli = usd_per_m * 1000.0;
  const double rounded = std::round(milli);
  if (std::fabs(milli - rounded) > 1e-6) {
    throw Error(ErrorCode::ParseFailure, field + ": rates finer than 0.001 USD per 1M tokens are not supported");
  }
  return static_cast<MilliUsdPerM>(rounded);
}

namespace {

std::optional<MilliUsdPerM> optional_rate(const nlohmann::json& row, const char* key, const std::string& model) {
  if (!row.contains(key) || row.at(key).is_null()) return std::nullopt;
  if (!row.at(key).is_number()) throw Error(ErrorCode::ParseFailure, model + "." + key + " must be numeric");
  return parse_rate(row.at(key).get<double>(), model + "." + key);
}

MilliUsdPerM required_rate(const nlohmann::json& row, const char* key, const std::string& model) {
  auto r = optional_rate(row, key, model);
  if (!r) throw Error(ErrorCode::ParseFailure, model + ": missing " + key);
  return *r;
}

}  // namespace

std::vector<PricingEntry> load_pricing(const nlohmann::json& document) {
  if (document.is_null()) return {};
  const nlohmann::json* rows = &document;
  if (document.is_object()) {
    if (!document.contains("models")) throw Error(ErrorCode::ParseFailure, "pricing document has no \"models\" array");
    rows = &document.at("models");
  }
  if (!rows->is_array()) throw Error(ErrorCode::ParseFailure, "pricing models must be an array");

  std::vector<PricingEntry> out;
  std::set<std::string> seen;
  for (const auto& row : *rows) {
    if (!row.is_object() || !row.contains("model") || !row.at("model").is_string()) {
      throw Error(ErrorCode::ParseFailure, "pricing row without a model name");
    }
    PricingEntry e;
    e.model = row.at("model").get<std::string>();
    if (!seen.insert(e.model).second) throw Error(ErrorCode::DuplicateModel, e.model);
    e.provider = row.value("provider", "");
    e.input_per_m = required_rate(row, "input_per_m", e.model);
    e.cache_write_per_m = optional_rate(row, "cache_write_per_m", e.model);
    e.cache_write_1h_per_m = optional_rate(row, "cache_write_1h_per_m", e.model);
    e.cache_read_per_m = required_rate(row, "cache_read_per_m", e.model);
    e.output_per_m = required_rate(row, "output_per_m", e.model);
    if (row.contains("prompt_tokens_above")) e.prompt_tokens_above = row.at("prompt_tokens_above").get<int64_t>();
    if (row.contains("base_model")) e.base_model = row.at("base_model").get<std::string>();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<PricingEntry> load_pricing_text(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return {};
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("pricing document: ") + e.what());
  }
  return load_pricing(doc);
}

const std::string& default_pricing_document() {
  static const std::string doc = R"({
  "models": [
    {"model": "Claude Opus 4.6", "provider": "Anthropic", "input_per_m": 5.00,
     "cache_write_per_m": 6.25, "cache_write_1h_per_m": 10.00, "cache_read_per_m": 0.50, "output_per_m": 25.00},
    {"model": "Claude Sonnet 4.6", "provider": "Anthropic", "input_per_m": 3.00,
     "cache_write_per_m": 3.75, "cache_write_1h_per_m": 6.00, "cache_read_per_m": 0.30, "output_per_m": 15.00},
    {"model": "GPT-5.2-Codex", "provider": "OpenAI", "input_per_m": 1.75,
     "cache_read_per_m": 0.175, "output_per_m": 14.00},
    {"model": "Gemini 3.1 Pro Preview", "provider": "Google", "input_per_m": 2.00,
     "cache_read_per_m": 0.20, "output_per_m": 12.00},
    {"model": "Gemini 3.1 Pro Preview >200k", "provider": "Google", "input_per_m": 4.00,
     "cache_read_per_m": 0.40, "output_per_m": 18.00,
     "prompt_tokens_above": 200000, "base_model": "Gemini 3.1 Pro Preview"},
    {"model": "Kimi K2.5", "provider": "Moonshot AI", "input_per_m": 0.45,
     "cache_read_per_m": 0.225, "output_per_m": 2.20}
  ]
}
)";
  return doc;
}

std::vector<PricingEntry> default_pricing() { return load_pricing_text(default_pricing_document()); }

std::optional<PricingEntry> select_price(const std::vector<PricingEntry>& table, const std::string& model,
                                         int64_t prompt_tokens) {
  const PricingEntry* base = nullptr;
  const PricingEntry* tier = nullptr;
  for (const auto& e : table) {
    if (e.model == model && !e.prompt_tokens_above) base = &e;
    if (e.base_model && *e.base_model == model && e.prompt_tokens_above && prompt_tokens > *e.prompt_tokens_above) {
      if (!tier || *e.prompt_tokens_above > *tier->prompt_tokens_above) tier = &e;
    }
  }
  if (tier) return *tier;
  if (base) return *base;
  // A tier entry requested by its own name still resolves.
  for (const auto& e : table) {
    if (e.model == model) return e;
  }
  return std::nullopt;
}

nlohmann::json to_json(const PricingEntry& e) {
  auto rate = [](MilliUsdPerM m) { return static_cast<double>(m) / 1000.0; };
  nlohmann::json j{{"model", e.model},
                   {"provider", e.provider},
                   {"input_per_m", rate(e.input_per_m)},
                   {"cache_read_per_m", rate(e.cache_read_per_m)},
                   {"output_per_m", rate(e.output_per_m)}};
  if (e.cache_write_per_m) j["cache_write_per_m"] = rate(*e.cache_write_per_m);
  if (e.cache_write_1h_per_m) j["cache_write_1h_per_m"] = rate(*e.cache_write_1h_per_m);
  if (e.prompt_tokens_above) j["prompt_tokens_above"] = *e.prompt_tokens_above;
  if (e.base_model) j["base_model"] = *e.base_model;
  return j;
}

}  // namespace toolsmith

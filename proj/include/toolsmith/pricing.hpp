#pragma once

#include "toolsmith/usage.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace toolsmith {

// Per-million-token rate in integer milli-USD (5.00 -> 5000, 0.175 -> 175).
using MilliUsdPerM = int64_t;

enum class CacheTtl { FiveMinutes, OneHour };

struct PricingEntry {
  std::string model;
  std::string provider;
  MilliUsdPerM input_per_m = 0;
  std::optional<MilliUsdPerM> cache_write_per_m;     // 5-minute TTL rate
  std::optional<MilliUsdPerM> cache_write_1h_per_m;  // 1-hour TTL rate
  MilliUsdPerM cache_read_per_m = 0;
  MilliUsdPerM output_per_m = 0;
  // Long-context tier: applies when the session prompt exceeds this many tokens.
  // `base_model` names the entry this tier belongs to.
  std::optional<int64_t> prompt_tokens_above;
  std::optional<std::string> base_model;
};

/// cost = (input*in + cache_write*cw + cache_read*cr + output*out) / 1e6, with
/// cw falling back to the input rate when the model has no cache-write price.
Usd account_cost(const TokenUsage& usage, const PricingEntry& price, CacheTtl ttl = CacheTtl::FiveMinutes);

/// Parses a pricing document: {"models": [ {model, provider, input_per_m, ...} ]}
/// or a bare array. Throws ParseFailure / DuplicateModel.
std::vector<PricingEntry> load_pricing(const nlohmann::json& document);
std::vector<PricingEntry> load_pricing_text(const std::string& text);

// Built-in rates for the models the engine knows about.
const std::string& default_pricing_document();
std::vector<PricingEntry> default_pricing();

/// Picks the entry for `model`, switching to a long-context tier entry when
/// the session's prompt token count exceeds that tier's threshold.
std::optional<PricingEntry> select_price(const std::vector<PricingEntry>& table, const std::string& model,
                                         int64_t prompt_tokens);

// Decimal USD rate -> milli-USD; rejects values finer than 0.001.
MilliUsdPerM parse_rate(double usd_per_m, const std::string& field);

nlohmann::json to_json(const PricingEntry& e);

}  // namespace toolsmith

#pragma once

#include <nlohmann/json.hpp>

#include <compare>
#include <cstdint>
#include <string>

namespace toolsmith {

struct TokenUsage {
  int64_t input = 0;
  int64_t cache_write = 0;
  int64_t cache_read = 0;
  int64_t output = 0;

  TokenUsage& operator+=(const TokenUsage& o) {
    input += o.input;
    cache_write += o.cache_write;
    cache_read += o.cache_read;
    output += o.output;
    return *this;
  }
  friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) { return a += b; }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;

  // Tokens that made up the prompt side of the session.
  int64_t prompt_tokens() const { return input + cache_write + cache_read; }
};

void to_json(nlohmann::json& j, const TokenUsage& u);
void from_json(const nlohmann::json& j, TokenUsage& u);

/// Exact USD amount in integer nano-dollars.
///
/// Table rates carry at most three decimals per million tokens, so
/// tokens x rate(milli-USD / 1M) is already an integer count of nano-dollars
/// and sums of costs stay exact.
class Usd {
 public:
  constexpr Usd() = default;
  static constexpr Usd from_nano(int64_t nano) { return Usd(nano); }
  static Usd from_cents(int64_t cents) { return Usd(cents * 10'000'000); }

  constexpr int64_t nano() const { return nano_; }
  double to_double() const { return static_cast<double>(nano_) / 1e9; }
  // Half-up (away from zero on ties) to whole cents.
  int64_t rounded_cents() const;
  // "0.75" style, two decimals, half-up.
  std::string to_string() const;

  Usd& operator+=(Usd o) {
    nano_ += o.nano_;
    return *this;
  }
  friend Usd operator+(Usd a, Usd b) { return a += b; }
  friend auto operator<=>(const Usd&, const Usd&) = default;

 private:
  constexpr explicit Usd(int64_t n) : nano_(n) {}
  int64_t nano_ = 0;
};

}  // namespace toolsmith

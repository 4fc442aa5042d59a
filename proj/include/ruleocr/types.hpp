#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ruleocr {

inline constexpr int kSeqLen = 5;      // digits per sequence image
inline constexpr int kNumDigits = 10;  // alphabet size

using Digit = std::uint8_t;  // value in [0, 9]

// An ordered tuple of exactly 5 digits.
using DigitString = std::array<Digit, kSeqLen>;

// The first four digits of a sequence, before the check digit is appended.
using DigitPrefix = std::array<Digit, kSeqLen - 1>;

enum class RuleId { Rule1, Rule2, Rule3 };

inline constexpr std::array<RuleId, 3> kAllRules = {RuleId::Rule1, RuleId::Rule2,
                                                    RuleId::Rule3};

// Per-position categorical distributions, rows[k][d] = p(digit d at position k).
using ProbTable = std::array<std::array<double, kNumDigits>, kSeqLen>;

// Raw per-position scores before softmax.
using Logits = std::array<std::array<double, kNumDigits>, kSeqLen>;

inline const char* rule_name(RuleId r) {
  switch (r) {
    case RuleId::Rule1: return "rule1";
    case RuleId::Rule2: return "rule2";
    case RuleId::Rule3: return "rule3";
  }
  return "?";
}

inline RuleId parse_rule_name(const std::string& s) {
  if (s == "rule1") return RuleId::Rule1;
  if (s == "rule2") return RuleId::Rule2;
  if (s == "rule3") return RuleId::Rule3;
  throw std::invalid_argument("unknown rule name: " + s);
}

inline std::string to_string(const DigitString& s) {
  std::string out(kSeqLen, '0');
  for (int k = 0; k < kSeqLen; ++k) out[k] = static_cast<char>('0' + s[k]);
  return out;
}

inline DigitString digit_string_from_text(const std::string& text) {
  if (text.size() != kSeqLen) throw std::invalid_argument("label must have 5 digits");
  DigitString s{};
  for (int k = 0; k < kSeqLen; ++k) {
    char c = text[k];
    if (c < '0' || c > '9') throw std::invalid_argument("label must be decimal digits");
    s[k] = static_cast<Digit>(c - '0');
  }
  return s;
}

}  // namespace ruleocr

#include <doctest.h>

#include <cmath>
#include <set>

#include "ruleocr/rng.hpp"
#include "ruleocr/rules.hpp"

using namespace ruleocr;

namespace {

// Independent reference validators, coded directly from the rule statements
// and kept free of the production ResidueAutomaton / check_digit paths.

bool ref_rule1(const DigitString& s) {
  return (s[0] + s[1] + s[2] + s[3]) % 10 == s[4];
}

bool ref_rule2(const DigitString& s) {
  int sum = 0;
  for (int pos = 0; pos < 4; ++pos) sum += s[pos] * static_cast<int>(std::pow(2.0, pos));
  int rem = sum % 11;
  int expected = (rem == 10) ? 0 : rem;
  return s[4] == expected;
}

// Textbook Luhn over the whole 5-digit string: starting from the rightmost
// digit, double every second digit, subtract 9 from two-digit products, and
// require the total to be divisible by 10.
bool ref_rule3(const DigitString& s) {
  int sum = 0;
  bool dbl = false;
  for (int k = 4; k >= 0; --k) {
    int v = s[k];
    if (dbl) {
      v *= 2;
      if (v > 9) v -= 9;
    }
    sum += v;
    dbl = !dbl;
  }
  return sum % 10 == 0;
}

bool ref_verify(RuleId rule, const DigitString& s) {
  switch (rule) {
    case RuleId::Rule1: return ref_rule1(s);
    case RuleId::Rule2: return ref_rule2(s);
    case RuleId::Rule3: return ref_rule3(s);
  }
  return false;
}

DigitString nth_string(int v) {
  DigitString s{};
  for (int k = 4; k >= 0; --k) {
    s[k] = static_cast<Digit>(v % 10);
    v /= 10;
  }
  return s;
}

}  // namespace

TEST_CASE("verify matches the stated examples") {
  CHECK(rules::verify(RuleId::Rule1, {0, 0, 0, 0, 0}));
  // 1*1 + 2*2 + 3*4 + 4*8 = 49, 49 mod 11 = 5
  CHECK(rules::verify(RuleId::Rule2, {1, 2, 3, 4, 5}));
  // doubled positions give 1+4+3+8 = 16, check = (10-6) mod 10 = 4
  CHECK(rules::verify(RuleId::Rule3, {1, 2, 3, 4, 4}));
  CHECK_FALSE(rules::verify(RuleId::Rule1, {1, 2, 3, 4, 1}));
  CHECK_FALSE(ref_rule1({1, 2, 3, 4, 1}));
  CHECK(ref_rule2({1, 2, 3, 4, 5}));
  CHECK(ref_rule3({1, 2, 3, 4, 4}));
}

TEST_CASE("check_digit matches the stated examples") {
  CHECK(rules::check_digit(RuleId::Rule2, {0, 1, 0, 1}) == 0);  // remainder 10 -> 0
  CHECK(rules::check_digit(RuleId::Rule1, {9, 9, 9, 9}) == 6);
  CHECK(rules::check_digit(RuleId::Rule3, {0, 0, 0, 0}) == 0);
}

TEST_CASE("verify agrees with the independent references on all 100000 strings") {
  for (RuleId rule : kAllRules) {
    for (int v = 0; v < 100000; ++v) {
      DigitString s = nth_string(v);
      REQUIRE(rules::verify(rule, s) == ref_verify(rule, s));
    }
  }
}

TEST_CASE("check_digit round-trip and uniqueness over all prefixes") {
  for (RuleId rule : kAllRules) {
    for (int v = 0; v < 10000; ++v) {
      DigitPrefix prefix{};
      int x = v;
      for (int k = 3; k >= 0; --k) {
        prefix[k] = static_cast<Digit>(x % 10);
        x /= 10;
      }
      Digit c = rules::check_digit(rule, prefix);
      int valid = 0;
      for (int d = 0; d < 10; ++d) {
        DigitString s{prefix[0], prefix[1], prefix[2], prefix[3], static_cast<Digit>(d)};
        if (rules::verify(rule, s)) {
          ++valid;
          REQUIRE(d == c);
        }
      }
      REQUIRE(valid == 1);
    }
  }
}

TEST_CASE("residue automaton equals verify on all 100000 strings") {
  for (RuleId rule : kAllRules) {
    const auto& a = rules::residue_automaton(rule);
    for (int v = 0; v < 100000; ++v) {
      DigitString s = nth_string(v);
      REQUIRE(a.accepts(s) == rules::verify(rule, s));
    }
  }
}

TEST_CASE("residue automaton structure") {
  const auto& a1 = rules::residue_automaton(RuleId::Rule1);
  CHECK(a1.modulus == 10);
  CHECK(a1.next_state(3, 2, 9) == 2);  // (3+9) mod 10
  CHECK(a1.accepts_check(7, 7));
  CHECK_FALSE(a1.accepts_check(7, 8));

  const auto& a2 = rules::residue_automaton(RuleId::Rule2);
  CHECK(a2.modulus == 11);
  CHECK(a2.next_state(0, 3, 9) == (9 * 8) % 11);
  CHECK(a2.accepts_check(10, 0));  // remainder 10 maps to check digit 0
  CHECK(a2.accepts_check(0, 0));

  // every state accepts exactly one check digit
  for (RuleId rule : kAllRules) {
    const auto& a = rules::residue_automaton(rule);
    for (int s = 0; s < a.modulus; ++s) {
      int accepted = 0;
      for (int c = 0; c < 10; ++c)
        if (a.accepts_check(s, static_cast<Digit>(c))) ++accepted;
      CHECK(accepted == 1);
    }
  }
}

TEST_CASE("count_valid is 10000 for every rule") {
  for (RuleId rule : kAllRules) CHECK(rules::count_valid(rule) == 10000);
}

TEST_CASE("expected_reward_exact on uniform and point-mass tables") {
  ProbTable uniform;
  for (auto& row : uniform) row.fill(0.1);
  for (RuleId rule : kAllRules)
    CHECK(rules::expected_reward_exact(rule, uniform) == doctest::Approx(0.1).epsilon(1e-12));

  ProbTable point{};
  for (auto& row : point) row.fill(0.0);
  for (int k = 0; k < kSeqLen; ++k) point[k][0] = 1.0;
  CHECK(rules::expected_reward_exact(RuleId::Rule1, point) == doctest::Approx(1.0));
  point[4][0] = 0.0;
  point[4][1] = 1.0;  // point mass on 00001, which violates rule 1
  CHECK(rules::expected_reward_exact(RuleId::Rule1, point) == doctest::Approx(0.0));
}

TEST_CASE("expected_reward_exact equals reward on random point masses") {
  Rng rng(20240501);
  for (int trial = 0; trial < 100; ++trial) {
    DigitString s{};
    ProbTable p{};
    for (int k = 0; k < kSeqLen; ++k) {
      s[k] = static_cast<Digit>(rng.below(10));
      p[k].fill(0.0);
      p[k][s[k]] = 1.0;
    }
    for (RuleId rule : kAllRules)
      REQUIRE(rules::expected_reward_exact(rule, p) == doctest::Approx(rules::reward(rule, s)));
  }
}

TEST_CASE("expected_reward_exact rejects malformed rows") {
  ProbTable p;
  for (auto& row : p) row.fill(0.1);
  p[2][5] = 0.2;  // row sums to 1.1
  CHECK_THROWS_AS(rules::expected_reward_exact(RuleId::Rule1, p), rules::InvalidProbTable);
}

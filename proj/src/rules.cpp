#include "ruleocr/rules.hpp"

#include <cmath>

namespace ruleocr::rules {

namespace {

// Luhn doubling step: 2d, minus 9 when the product exceeds 9.
inline int luhn_double(int d) {
  int v = 2 * d;
  return v > 9 ? v - 9 : v;
}

// Rule 3 doubles the digits at even 1-based positions of the 5-digit string,
// i.e. string positions 2 and 4, which are prefix indices 1 and 3.
inline bool rule3_doubled_position(int prefix_pos) { return prefix_pos % 2 == 1; }

inline int rule1_prefix_sum(const DigitPrefix& p) {
  return p[0] + p[1] + p[2] + p[3];
}

inline int rule2_weighted_sum(const DigitPrefix& p) {
  // Leading digit gets weight 2^0, increasing left to right.
  return p[0] * 1 + p[1] * 2 + p[2] * 4 + p[3] * 8;
}

inline int rule3_prefix_sum(const DigitPrefix& p) {
  int sum = 0;
  for (int k = 0; k < 4; ++k) sum += rule3_doubled_position(k) ? luhn_double(p[k]) : p[k];
  return sum;
}

ResidueAutomaton build_automaton(RuleId rule) {
  ResidueAutomaton a;
  switch (rule) {
    case RuleId::Rule1:
      a.modulus = 10;
      break;
    case RuleId::Rule2:
      a.modulus = 11;
      break;
    case RuleId::Rule3:
      a.modulus = 10;
      break;
  }
  a.transition.assign(static_cast<std::size_t>(a.modulus) * 4 * 10, 0);
  a.accept.assign(static_cast<std::size_t>(a.modulus) * 10, 0);
  for (int s = 0; s < a.modulus; ++s) {
    for (int pos = 0; pos < 4; ++pos) {
      for (int d = 0; d < 10; ++d) {
        int t = 0;
        switch (rule) {
          case RuleId::Rule1: t = (s + d) % 10; break;
          case RuleId::Rule2: t = (s + d * (1 << pos)) % 11; break;
          case RuleId::Rule3: t = (s + (rule3_doubled_position(pos) ? luhn_double(d) : d)) % 10; break;
        }
        a.transition[static_cast<std::size_t>((s * 4 + pos) * 10 + d)] =
            static_cast<std::uint8_t>(t);
      }
    }
    for (int c = 0; c < 10; ++c) {
      bool ok = false;
      switch (rule) {
        case RuleId::Rule1: ok = (c == s); break;
        case RuleId::Rule2: ok = (c == (s == 10 ? 0 : s)); break;
        case RuleId::Rule3: ok = ((s + c) % 10 == 0); break;
      }
      a.accept[static_cast<std::size_t>(s * 10 + c)] = ok ? 1 : 0;
    }
  }
  return a;
}

}  // namespace

Digit check_digit(RuleId rule, const DigitPrefix& prefix) {
  switch (rule) {
    case RuleId::Rule1:
      return static_cast<Digit>(rule1_prefix_sum(prefix) % 10);
    case RuleId::Rule2: {
      int r = rule2_weighted_sum(prefix) % 11;
      return static_cast<Digit>(r == 10 ? 0 : r);
    }
    case RuleId::Rule3:
      return static_cast<Digit>((10 - rule3_prefix_sum(prefix) % 10) % 10);
  }
  return 0;
}

bool verify(RuleId rule, const DigitString& s) {
  DigitPrefix prefix{s[0], s[1], s[2], s[3]};
  return s[4] == check_digit(rule, prefix);
}

double reward(RuleId rule, const DigitString& s) {
  return verify(rule, s) ? 1.0 : 0.0;
}

const ResidueAutomaton& residue_automaton(RuleId rule) {
  static const ResidueAutomaton r1 = build_automaton(RuleId::Rule1);
  static const ResidueAutomaton r2 = build_automaton(RuleId::Rule2);
  static const ResidueAutomaton r3 = build_automaton(RuleId::Rule3);
  switch (rule) {
    case RuleId::Rule1: return r1;
    case RuleId::Rule2: return r2;
    case RuleId::Rule3: return r3;
  }
  return r1;
}

double expected_reward_exact(RuleId rule, const ProbTable& p) {
  for (const auto& row : p) {
    double sum = 0.0;
    for (double v : row) sum += v;
    if (std::abs(sum - 1.0) > 1e-4)
      throw InvalidProbTable("probability row does not sum to 1");
  }
  const ResidueAutomaton& a = residue_automaton(rule);
  std::vector<double> dist(static_cast<std::size_t>(a.modulus), 0.0);
  std::vector<double> next(dist.size());
  dist[0] = 1.0;
  for (int pos = 0; pos < 4; ++pos) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < a.modulus; ++s) {
      if (dist[static_cast<std::size_t>(s)] == 0.0) continue;
      for (int d = 0; d < 10; ++d)
        next[a.next_state(s, pos, static_cast<Digit>(d))] +=
            dist[static_cast<std::size_t>(s)] * p[static_cast<std::size_t>(pos)][static_cast<std::size_t>(d)];
    }
    dist.swap(next);
  }
  double expected = 0.0;
  for (int s = 0; s < a.modulus; ++s) {
    double accept_mass = 0.0;
    for (int c = 0; c < 10; ++c)
      if (a.accepts_check(s, static_cast<Digit>(c))) accept_mass += p[4][static_cast<std::size_t>(c)];
    expected += dist[static_cast<std::size_t>(s)] * accept_mass;
  }
  return expected;
}

long count_valid(RuleId rule) {
  long count = 0;
  DigitString s{};
  for (int v = 0; v < 100000; ++v) {
    int x = v;
    for (int k = 4; k >= 0; --k) {
      s[k] = static_cast<Digit>(x % 10);
      x /= 10;
    }
    if (verify(rule, s)) ++count;
  }
  return count;
}

}  // namespace ruleocr::rules

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ruleocr/types.hpp"

namespace ruleocr::rules {

// Deterministic finite-state view of a check-digit rule. States are residues
// modulo `modulus`; consuming the four prefix digits walks the transition
// table and the fifth digit is judged by the acceptance table.
struct ResidueAutomaton {
  int modulus = 0;
  // transition[(state * 4 + position) * 10 + digit] -> next state
  std::vector<std::uint8_t> transition;
  // accept[state * 10 + check] -> accepted
  std::vector<std::uint8_t> accept;

  std::uint8_t next_state(int state, int position, Digit d) const {
    return transition[static_cast<std::size_t>((state * 4 + position) * 10 + d)];
  }
  bool accepts_check(int state, Digit check) const {
    return accept[static_cast<std::size_t>(state * 10 + check)] != 0;
  }
  bool accepts(const DigitString& s) const {
    int state = 0;
    for (int k = 0; k < 4; ++k) state = next_state(state, k, s[k]);
    return accepts_check(state, s[4]);
  }
};

struct InvalidProbTable : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

bool verify(RuleId rule, const DigitString& s);

// The unique digit c such that verify(rule, prefix ++ c) holds.
Digit check_digit(RuleId rule, const DigitPrefix& prefix);

// 1.0 if the string satisfies the rule, else 0.0.
double reward(RuleId rule, const DigitString& s);

const ResidueAutomaton& residue_automaton(RuleId rule);

// Exact E[r] under per-position sampling from p, by dynamic programming over
// automaton states. Rejects rows whose sums deviate from 1 by more than 1e-4.
double expected_reward_exact(RuleId rule, const ProbTable& p);

// Number of valid strings among all 10^5, by exhaustive enumeration.
long count_valid(RuleId rule);

}  // namespace ruleocr::rules

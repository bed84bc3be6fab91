#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <stdexcept>
#include <vector>

#include "palps/statespace.hpp"

namespace palps {

// Exhaustive-enumeration probability oracle. Deliberately separate from the
// value-iteration checker: bounded formulas run finite-horizon backward
// induction over exact rationals, unbounded reachability enumerates
// memoryless deterministic schedulers and solves each induced chain by
// Gaussian elimination. Used by the test suites as an independent reference.

using BigRat = boost::multiprecision::cpp_rational;

class TooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OptMode { Min, Max };

struct OracleInterval {
  BigRat lo{0}, hi{1};
  double lo_d() const { return lo.convert_to<double>(); }
  double hi_d() const { return hi.convert_to<double>(); }
  bool exact() const { return lo == hi; }
};

namespace oracle_detail {

inline void require_complete(const Mdp& mdp) {
  if (mdp.truncated)
    throw TooLarge("oracle requires a completely explored state space");
}

inline BigRat opt(OptMode mode, const BigRat& a, const BigRat& b) {
  if (mode == OptMode::Max) return a > b ? a : b;
  return a < b ? a : b;
}

}  // namespace oracle_detail

// one-step expectation; transition-free states stutter in place
inline OracleInterval oracle_next(const Mdp& mdp, const std::vector<bool>& phi, OptMode mode) {
  oracle_detail::require_complete(mdp);
  const auto& st = mdp.states[mdp.initial];
  OracleInterval out;
  if (st.choices.empty()) {
    out.lo = out.hi = phi[mdp.initial] ? 1 : 0;
    return out;
  }
  bool first = true;
  BigRat best = 0;
  for (const auto& c : st.choices) {
    BigRat v = 0;
    for (const auto& b : c.branches)
      if (phi[b.target]) v += BigRat(b.prob);
    best = first ? v : oracle_detail::opt(mode, best, v);
    first = false;
  }
  out.lo = out.hi = best;
  return out;
}

// Backward induction over (state, remaining tick budget) for `horizon`
// transitions. The returned interval brackets the true value: paths still
// unresolved at the horizon count as failure in `lo` and success in `hi`;
// the gap shrinks monotonically with the horizon.
inline OracleInterval oracle_bounded_until(const Mdp& mdp, const std::vector<bool>& phi1,
                                           const std::vector<bool>& phi2, int bound,
                                           OptMode mode, std::size_t horizon) {
  oracle_detail::require_complete(mdp);
  const std::size_t n = mdp.size();
  const int budgets = bound + 1;
  auto cell = [&](std::size_t s, int j) { return s * budgets + j; };

  std::vector<BigRat> lo(n * budgets), hi(n * budgets);
  for (std::size_t s = 0; s < n; ++s)
    for (int j = 0; j < budgets; ++j) {
      bool resolved_true = phi2[s];
      bool resolved_false = !phi2[s] && (!phi1[s] || mdp.states[s].choices.empty());
      lo[cell(s, j)] = resolved_true ? 1 : 0;
      hi[cell(s, j)] = resolved_true ? 1 : resolved_false ? 0 : 1;
    }

  std::vector<BigRat> nlo(n * budgets), nhi(n * budgets);
  for (std::size_t h = 0; h < horizon; ++h) {
    bool changed = false;
    for (std::size_t s = 0; s < n; ++s) {
      for (int j = 0; j < budgets; ++j) {
        if (phi2[s]) {
          nlo[cell(s, j)] = 1;
          nhi[cell(s, j)] = 1;
          continue;
        }
        if (!phi1[s] || mdp.states[s].choices.empty()) {
          nlo[cell(s, j)] = 0;
          nhi[cell(s, j)] = 0;
          continue;
        }
        bool first = true;
        BigRat blo = 0, bhi = 0;
        for (const auto& c : mdp.states[s].choices) {
          BigRat vlo = 0, vhi = 0;
          for (const auto& b : c.branches) {
            BigRat p(b.prob);
            if (c.tick) {
              if (j > 0) {
                vlo += p * lo[cell(b.target, j - 1)];
                vhi += p * hi[cell(b.target, j - 1)];
              }  // deadline passed: contributes zero to both bounds
            } else {
              vlo += p * lo[cell(b.target, j)];
              vhi += p * hi[cell(b.target, j)];
            }
          }
          if (first) {
            blo = vlo;
            bhi = vhi;
            first = false;
          } else {
            blo = oracle_detail::opt(mode, blo, vlo);
            bhi = oracle_detail::opt(mode, bhi, vhi);
          }
        }
        if (blo != lo[cell(s, j)] || bhi != hi[cell(s, j)]) changed = true;
        nlo[cell(s, j)] = std::move(blo);
        nhi[cell(s, j)] = std::move(bhi);
      }
    }
    lo.swap(nlo);
    hi.swap(nhi);
    if (!changed) break;
  }

  OracleInterval out;
  out.lo = lo[cell(mdp.initial, bound)];
  out.hi = hi[cell(mdp.initial, bound)];
  return out;
}

namespace oracle_detail {

// states from which some scheduler avoids phi2 forever (within phi1 paths);
// their minimum reachability is zero and must be pinned before policy
// iteration can be trusted
inline std::vector<bool> min_prob0(const Mdp& mdp, const std::vector<bool>& phi1,
                                   const std::vector<bool>& phi2) {
  const std::size_t n = mdp.size();
  std::vector<bool> avoid(n);
  for (std::size_t s = 0; s < n; ++s) avoid[s] = !phi2[s];
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t s = 0; s < n; ++s) {
      if (!avoid[s] || phi2[s]) continue;
      bool stays = !phi1[s] || mdp.states[s].choices.empty();
      if (!stays)
        for (const auto& c : mdp.states[s].choices) {
          bool all_in = true;
          for (const auto& b : c.branches)
            if (!avoid[b.target]) {
              all_in = false;
              break;
            }
          if (all_in) {
            stays = true;
            break;
          }
        }
      if (!stays) {
        avoid[s] = false;
        changed = true;
      }
    }
  }
  return avoid;
}

// per-state reachability values of phi1 U phi2 in the chain induced by one
// scheduler: restrict to states that can reach phi2, solve the linear system
// exactly (the least solution of the chain's equations)
inline std::vector<BigRat> solve_chain(const Mdp& mdp, const std::vector<std::size_t>& pick,
                                       const std::vector<bool>& phi1,
                                       const std::vector<bool>& phi2) {
  const std::size_t n = mdp.size();
  auto edges = [&](std::size_t s) -> const std::vector<Mdp::Branch>* {
    const auto& st = mdp.states[s];
    if (st.choices.empty()) return nullptr;
    return &st.choices[pick[s]].branches;
  };

  // states with positive reachability: backward closure through phi1
  std::vector<bool> plus(n, false);
  for (std::size_t s = 0; s < n; ++s) plus[s] = phi2[s];
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t s = 0; s < n; ++s) {
      if (plus[s] || !phi1[s] || phi2[s]) continue;
      const auto* br = edges(s);
      if (!br) continue;
      for (const auto& b : *br)
        if (plus[b.target] && b.prob > 0) {
          plus[s] = true;
          changed = true;
          break;
        }
    }
  }

  std::vector<int> unknown(n, -1);
  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < n; ++s)
    if (plus[s] && !phi2[s]) {
      unknown[s] = static_cast<int>(order.size());
      order.push_back(s);
    }
  std::vector<BigRat> values(n, 0);
  for (std::size_t s = 0; s < n; ++s)
    if (phi2[s]) values[s] = 1;
  const std::size_t u = order.size();
  if (u == 0) return values;

  // (I - A) x = b over exact rationals
  std::vector<std::vector<BigRat>> m(u, std::vector<BigRat>(u + 1, 0));
  for (std::size_t i = 0; i < u; ++i) {
    std::size_t s = order[i];
    m[i][i] = 1;
    for (const auto& b : *edges(s)) {
      BigRat p(b.prob);
      if (phi2[b.target])
        m[i][u] += p;
      else if (unknown[b.target] >= 0)
        m[i][unknown[b.target]] -= p;
    }
  }
  for (std::size_t col = 0; col < u; ++col) {
    std::size_t pivot = col;
    while (pivot < u && m[pivot][col] == 0) ++pivot;
    if (pivot == u) throw InternalError("singular reachability system");
    if (pivot != col) std::swap(m[pivot], m[col]);
    BigRat inv = m[col][col];
    for (std::size_t j = col; j <= u; ++j) m[col][j] /= inv;
    for (std::size_t row = 0; row < u; ++row) {
      if (row == col || m[row][col] == 0) continue;
      BigRat factor = m[row][col];
      for (std::size_t j = col; j <= u; ++j) m[row][j] -= factor * m[col][j];
    }
  }
  for (std::size_t i = 0; i < u; ++i) values[order[i]] = m[i][u];
  return values;
}

}  // namespace oracle_detail

// Unbounded until by exact policy iteration: evaluate the current memoryless
// scheduler by Gaussian elimination, switch any state where another choice is
// strictly better, repeat until stable. Minimization first pins the states
// whose minimum is zero, where greedy switching alone can stall.
inline OracleInterval oracle_until(const Mdp& mdp, const std::vector<bool>& phi1,
                                   const std::vector<bool>& phi2, OptMode mode,
                                   std::size_t max_rounds = 10000) {
  oracle_detail::require_complete(mdp);
  const std::size_t n = mdp.size();

  std::vector<bool> p1 = phi1, p2 = phi2;
  if (mode == OptMode::Min) {
    std::vector<bool> zero = oracle_detail::min_prob0(mdp, phi1, phi2);
    // pinned-zero states drop out of phi1: no path through them counts
    for (std::size_t s = 0; s < n; ++s)
      if (zero[s] && !phi2[s]) p1[s] = false;
    if (zero[mdp.initial] && !phi2[mdp.initial]) {
      OracleInterval out;
      out.lo = out.hi = 0;
      return out;
    }
  }

  std::vector<std::size_t> pick(n, 0);
  std::vector<BigRat> values = oracle_detail::solve_chain(mdp, pick, p1, p2);
  for (std::size_t round = 0; round < max_rounds; ++round) {
    bool improved = false;
    for (std::size_t s = 0; s < n; ++s) {
      const auto& choices = mdp.states[s].choices;
      if (choices.size() < 2 || !p1[s] || p2[s]) continue;
      BigRat cur = 0;
      for (const auto& b : choices[pick[s]].branches) cur += BigRat(b.prob) * values[b.target];
      for (std::size_t c = 0; c < choices.size(); ++c) {
        if (c == pick[s]) continue;
        BigRat v = 0;
        for (const auto& b : choices[c].branches) v += BigRat(b.prob) * values[b.target];
        if ((mode == OptMode::Max && v > cur) || (mode == OptMode::Min && v < cur)) {
          pick[s] = c;
          cur = v;
          improved = true;
        }
      }
    }
    if (!improved) break;
    values = oracle_detail::solve_chain(mdp, pick, p1, p2);
    if (round + 1 == max_rounds) throw InternalError("policy iteration did not stabilize");
  }

  OracleInterval out;
  out.lo = out.hi = values[mdp.initial];
  return out;
}

// Same quantity by brute-force enumeration of memoryless deterministic
// schedulers; feasible only on micro models, used to cross-check the policy
// iteration route.
inline OracleInterval oracle_until_enumerated(const Mdp& mdp, const std::vector<bool>& phi1,
                                              const std::vector<bool>& phi2, OptMode mode,
                                              std::size_t scheduler_cap = 4096) {
  oracle_detail::require_complete(mdp);
  const std::size_t n = mdp.size();
  std::vector<std::size_t> nondet;
  std::size_t combos = 1;
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t k = mdp.states[s].choices.size();
    if (k > 1) {
      nondet.push_back(s);
      if (combos > scheduler_cap / k + 1) throw TooLarge("scheduler space too large");
      combos *= k;
      if (combos > scheduler_cap) throw TooLarge("scheduler space too large");
    }
  }

  std::vector<std::size_t> pick(n, 0);
  bool first = true;
  BigRat best = 0;
  for (std::size_t combo = 0; combo < combos; ++combo) {
    std::size_t rest = combo;
    for (std::size_t i = 0; i < nondet.size(); ++i) {
      std::size_t k = mdp.states[nondet[i]].choices.size();
      pick[nondet[i]] = rest % k;
      rest /= k;
    }
    BigRat v = oracle_detail::solve_chain(mdp, pick, phi1, phi2)[mdp.initial];
    best = first ? v : oracle_detail::opt(mode, best, v);
    first = false;
  }
  OracleInterval out;
  out.lo = out.hi = best;
  return out;
}

}  // namespace palps

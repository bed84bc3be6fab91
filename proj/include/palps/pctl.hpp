#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "palps/pctl_formula.hpp"
#include "palps/statespace.hpp"

namespace palps {

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(std::size_t iterations, double residual)
      : std::runtime_error("value iteration did not converge after " +
                           std::to_string(iterations) +
                           " sweeps (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class UnregisteredAtom : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckOptions {
  std::optional<bool> force_max;  // override the per-bound scheduler quantifier
  double vi_tolerance = 1e-10;    // absolute, sup-norm
  std::size_t max_iterations = 1000000;
  double bound_tolerance = 1e-9;  // comparisons against the probability bound
};

struct ProbSubResult {
  FormulaPtr node;
  // scheduler-min/max values bracketed by truncation handling; lo == hi on
  // completely explored state spaces
  std::vector<double> pmin_lo, pmin_hi, pmax_lo, pmax_hi;
};

struct CheckResult {
  bool holds = false;        // verdict at the initial state
  bool approximate = false;  // truncation left the verdict undecided
  std::vector<bool> sat_lo, sat_hi;  // definite / possible satisfying states
  std::vector<ProbSubResult> prob_results;  // innermost first
};

// ---------------------------------------------------------------------------
// Value iteration engines (Jacobi sweeps, deterministic)

namespace vi {

// optimistic: unexpanded frontier states count as success, otherwise failure
inline std::vector<double> until_values(const Mdp& mdp, const std::vector<bool>& phi1,
                                        const std::vector<bool>& phi2, bool maximize,
                                        bool optimistic, const CheckOptions& opts) {
  const std::size_t n = mdp.size();
  std::vector<bool> target(n), zero(n);
  for (std::size_t s = 0; s < n; ++s) {
    target[s] = phi2[s] || (optimistic && mdp.states[s].truncated && phi1[s]);
    zero[s] = !target[s] && !phi1[s];
  }

  if (maximize) {
    // prob-0 for max: nothing outside the backward closure of the target
    std::vector<bool> reach = target;
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t s = 0; s < n; ++s) {
        if (reach[s] || zero[s]) continue;
        for (const auto& c : mdp.states[s].choices) {
          for (const auto& b : c.branches)
            if (reach[b.target]) {
              reach[s] = true;
              changed = true;
              break;
            }
          if (reach[s]) break;
        }
      }
    }
    for (std::size_t s = 0; s < n; ++s)
      if (!reach[s]) zero[s] = true;
  } else {
    // prob-0 for min: some scheduler avoids the target forever
    std::vector<bool> avoid(n);
    for (std::size_t s = 0; s < n; ++s) avoid[s] = !target[s];
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t s = 0; s < n; ++s) {
        if (!avoid[s] || target[s]) continue;
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
    for (std::size_t s = 0; s < n; ++s)
      if (avoid[s] && !target[s]) zero[s] = true;
  }

  std::vector<double> x(n, 0.0), y(n, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    if (target[s]) x[s] = 1.0;
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    double residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (target[s]) { y[s] = 1.0; continue; }
      if (zero[s]) { y[s] = 0.0; continue; }
      const auto& choices = mdp.states[s].choices;
      if (choices.empty()) { y[s] = 0.0; continue; }
      double best = maximize ? 0.0 : 2.0;
      for (const auto& c : choices) {
        double v = 0.0;
        for (const auto& b : c.branches) v += b.prob * x[b.target];
        best = maximize ? std::max(best, v) : std::min(best, v);
      }
      y[s] = best;
      residual = std::max(residual, std::abs(y[s] - x[s]));
    }
    x.swap(y);
    if (residual <= opts.vi_tolerance) return x;
  }
  double residual = 0.0;
  for (std::size_t s = 0; s < n; ++s) residual = std::max(residual, std::abs(x[s] - y[s]));
  throw NonConvergence(opts.max_iterations, residual);
}

// Tick-counted bound: layer j solves the non-tick fixpoint with tick moves
// exiting into layer j-1; layer -1 is everywhere zero.
inline std::vector<double> bounded_until_values(const Mdp& mdp, const std::vector<bool>& phi1,
                                                const std::vector<bool>& phi2, int bound,
                                                bool maximize, bool optimistic,
                                                const CheckOptions& opts) {
  const std::size_t n = mdp.size();
  std::vector<double> below(n, 0.0);  // V_{j-1}
  std::vector<double> x(n, 0.0), y(n, 0.0);
  for (int layer = 0; layer <= bound; ++layer) {
    // pin the layer's fixed values before sweeping so the first Bellman
    // update already sees them
    for (std::size_t s = 0; s < n; ++s)
      x[s] = phi2[s] ? 1.0
             : !phi1[s] ? 0.0
             : mdp.states[s].truncated ? (optimistic ? 1.0 : 0.0)
                                       : 0.0;
    bool converged = false;
    for (std::size_t it = 0; it < opts.max_iterations && !converged; ++it) {
      double residual = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        if (phi2[s]) { y[s] = 1.0; continue; }
        if (!phi1[s]) { y[s] = 0.0; continue; }
        if (mdp.states[s].truncated) { y[s] = optimistic ? 1.0 : 0.0; continue; }
        const auto& choices = mdp.states[s].choices;
        if (choices.empty()) { y[s] = 0.0; continue; }
        double best = maximize ? 0.0 : 2.0;
        for (const auto& c : choices) {
          const std::vector<double>& cont = c.tick ? below : x;
          double v = 0.0;
          for (const auto& b : c.branches) v += b.prob * cont[b.target];
          best = maximize ? std::max(best, v) : std::min(best, v);
        }
        y[s] = best;
        residual = std::max(residual, std::abs(y[s] - x[s]));
      }
      x.swap(y);
      if (residual <= opts.vi_tolerance) converged = true;
    }
    if (!converged) throw NonConvergence(opts.max_iterations, opts.vi_tolerance);
    below = x;
  }
  return below;
}

// One-step expectation; states without transitions keep their own valuation
// (the chain stutters in place).
inline std::vector<double> next_values(const Mdp& mdp, const std::vector<bool>& phi,
                                       bool maximize, bool optimistic) {
  const std::size_t n = mdp.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    if (mdp.states[s].truncated) {
      out[s] = optimistic ? 1.0 : 0.0;
      continue;
    }
    const auto& choices = mdp.states[s].choices;
    if (choices.empty()) {
      out[s] = phi[s] ? 1.0 : 0.0;
      continue;
    }
    double best = maximize ? 0.0 : 2.0;
    for (const auto& c : choices) {
      double v = 0.0;
      for (const auto& b : c.branches) v += b.prob * (phi[b.target] ? 1.0 : 0.0);
      best = maximize ? std::max(best, v) : std::min(best, v);
    }
    out[s] = best;
  }
  return out;
}

}  // namespace vi

// ---------------------------------------------------------------------------
// State-formula evaluation with definite/possible set pairs

namespace detail {

struct SatSets {
  std::vector<bool> lo, hi;
};

class Checker {
 public:
  Checker(const Mdp& mdp, const CheckOptions& opts) : mdp_(mdp), opts_(opts) {}

  SatSets eval(const FormulaPtr& f, std::vector<ProbSubResult>& results) {
    const std::size_t n = mdp_.size();
    using K = PctlFormula::Kind;
    switch (f->kind) {
      case K::True:
        return {std::vector<bool>(n, true), std::vector<bool>(n, true)};
      case K::Atom: {
        for (std::size_t a = 0; a < mdp_.atoms.size(); ++a)
          if (equal(mdp_.atoms[a], f->atom))
            return {mdp_.labels[a], mdp_.labels[a]};
        throw UnregisteredAtom(f->span.str() +
                               ": formula atom was not registered when the state space was built");
      }
      case K::Not: {
        SatSets a = eval(f->lhs, results);
        SatSets out;
        out.lo.resize(n);
        out.hi.resize(n);
        for (std::size_t s = 0; s < n; ++s) {
          out.lo[s] = !a.hi[s];
          out.hi[s] = !a.lo[s];
        }
        return out;
      }
      case K::And: {
        SatSets a = eval(f->lhs, results);
        SatSets b = eval(f->rhs, results);
        SatSets out;
        out.lo.resize(n);
        out.hi.resize(n);
        for (std::size_t s = 0; s < n; ++s) {
          out.lo[s] = a.lo[s] && b.lo[s];
          out.hi[s] = a.hi[s] && b.hi[s];
        }
        return out;
      }
      case K::Prob:
        return eval_prob(f, results);
    }
    throw InternalError("unreachable formula kind");
  }

 private:
  // probability values for one quantifier, bracketed by operand sets and
  // truncation treatment
  std::pair<std::vector<double>, std::vector<double>> path_values(const FormulaPtr& f,
                                                                  const SatSets& s1,
                                                                  const SatSets& s2,
                                                                  bool maximize,
                                                                  bool exact_inputs) {
    auto run = [&](const std::vector<bool>& p1, const std::vector<bool>& p2, bool optimistic) {
      switch (f->path) {
        case PctlFormula::Path::Next:
          return vi::next_values(mdp_, p2, maximize, optimistic);
        case PctlFormula::Path::BoundedUntil:
          return vi::bounded_until_values(mdp_, p1, p2, f->steps, maximize, optimistic, opts_);
        case PctlFormula::Path::Until:
          return vi::until_values(mdp_, p1, p2, maximize, optimistic, opts_);
      }
      throw InternalError("unreachable path kind");
    };
    // Next only looks at its operand, stored in p1 for X but evaluated as p2 here
    std::vector<double> lo = run(s1.lo, s2.lo, false);
    if (exact_inputs) return {lo, lo};
    std::vector<double> hi = run(s1.hi, s2.hi, true);
    return {std::move(lo), std::move(hi)};
  }

  SatSets eval_prob(const FormulaPtr& f, std::vector<ProbSubResult>& results) {
    const std::size_t n = mdp_.size();
    SatSets s1, s2;
    if (f->path == PctlFormula::Path::Next) {
      s1 = {std::vector<bool>(n, true), std::vector<bool>(n, true)};
      s2 = eval(f->p1, results);
    } else {
      s1 = eval(f->p1, results);
      s2 = eval(f->p2, results);
    }
    bool exact_inputs = !mdp_.truncated && s1.lo == s1.hi && s2.lo == s2.hi;

    ProbSubResult res;
    res.node = f;
    auto [minlo, minhi] = path_values(f, s1, s2, /*maximize=*/false, exact_inputs);
    auto [maxlo, maxhi] = path_values(f, s1, s2, /*maximize=*/true, exact_inputs);
    res.pmin_lo = std::move(minlo);
    res.pmin_hi = std::move(minhi);
    res.pmax_lo = std::move(maxlo);
    res.pmax_hi = std::move(maxhi);

    const double p = f->bound.to_double();
    const double tol = opts_.bound_tolerance;
    SatSets out;
    out.lo.resize(n);
    out.hi.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      double qlo, qhi;  // bracketing interval of the quantified value
      switch (f->bound_op) {
        case ProbBound::Le: {
          bool use_max = opts_.force_max.value_or(true);
          qlo = use_max ? res.pmax_lo[s] : res.pmin_lo[s];
          qhi = use_max ? res.pmax_hi[s] : res.pmin_hi[s];
          out.lo[s] = qhi <= p + tol;
          out.hi[s] = qlo <= p + tol;
          break;
        }
        case ProbBound::Ge: {
          bool use_max = opts_.force_max.value_or(false);
          qlo = use_max ? res.pmax_lo[s] : res.pmin_lo[s];
          qhi = use_max ? res.pmax_hi[s] : res.pmin_hi[s];
          out.lo[s] = qlo >= p - tol;
          out.hi[s] = qhi >= p - tol;
          break;
        }
        case ProbBound::Eq: {
          if (opts_.force_max.has_value()) {
            bool use_max = *opts_.force_max;
            qlo = use_max ? res.pmax_lo[s] : res.pmin_lo[s];
            qhi = use_max ? res.pmax_hi[s] : res.pmin_hi[s];
            out.lo[s] = qlo >= p - tol && qhi <= p + tol;
            out.hi[s] = qhi >= p - tol && qlo <= p + tol;
          } else {
            // both quantifiers must pin the value to p
            out.lo[s] = res.pmin_lo[s] >= p - tol && res.pmax_hi[s] <= p + tol;
            out.hi[s] = res.pmin_hi[s] >= p - tol && res.pmax_lo[s] <= p + tol;
          }
          break;
        }
      }
    }
    results.push_back(std::move(res));
    return out;
  }

  const Mdp& mdp_;
  const CheckOptions& opts_;
};

}  // namespace detail

inline CheckResult check(const Mdp& mdp, const FormulaPtr& f, const CheckOptions& opts = {}) {
  detail::Checker checker(mdp, opts);
  CheckResult result;
  detail::SatSets sets = checker.eval(f, result.prob_results);
  result.sat_lo = std::move(sets.lo);
  result.sat_hi = std::move(sets.hi);
  bool lo = result.sat_lo[mdp.initial];
  bool hi = result.sat_hi[mdp.initial];
  result.holds = lo;
  result.approximate = lo != hi;
  return result;
}

}  // namespace palps

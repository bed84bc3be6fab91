#pragma once

#include <atomic>
#include <cmath>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "palps/pctl_formula.hpp"
#include "palps/semantics.hpp"

namespace palps {

// ---------------------------------------------------------------------------
// Schedulers resolve nondeterministic fan-outs only; probabilistic fan-outs
// are always sampled by weight.

enum class SchedulerPolicy { UniformRandom, FirstEnabled, SeededRandom };

struct Scheduler {
  SchedulerPolicy policy = SchedulerPolicy::UniformRandom;
  std::uint64_t seed = 0;  // SeededRandom: choices replay across runs
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sampling one transition. Probabilistic rounds resolve every component
// independently (the joint is their product), so a round costs linear work
// even when the enumerated fan-out would be astronomically wide.

namespace detail {

struct ProbSample {
  bool any = false;
  double weight = 1.0;
  EnvDelta delta;
};

inline std::vector<CanonAtom> sample_prob_atoms(const Model& m, const Environment& env,
                                                const std::vector<CanonAtom>& atoms,
                                                std::mt19937_64& rng, ProbSample& acc) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<CanonAtom> out;
  for (const auto& atom : atoms) {
    switch (atom.kind) {
      case CanonAtom::Kind::Species:
        out.push_back(atom);
        break;
      case CanonAtom::Kind::Located: {
        auto steps = individual_steps(m, env, atom.proc, atom.species, atom.loc);
        std::vector<const Step*> probs;
        for (const auto& st : steps)
          if (st.probabilistic) probs.push_back(&st);
        if (probs.empty()) {
          out.push_back(atom);
          break;
        }
        acc.any = true;
        double draw = uni(rng), cum = 0.0;
        const Step* pick = probs.back();
        for (const Step* st : probs) {
          cum += st->weight.to_double();
          if (draw <= cum) {
            pick = st;
            break;
          }
        }
        acc.weight *= pick->weight.to_double();
        acc.delta.add(pick->delta);
        for (const auto& a : pick->result) out.push_back(a);
        break;
      }
      case CanonAtom::Kind::Restrict: {
        // restriction never blocks probabilistic steps
        auto inner = sample_prob_atoms(m, env, atom.sub->atoms, rng, acc);
        auto sub = canonicalize_atoms(std::move(inner));
        if (!sub->atoms.empty()) out.push_back(CanonAtom::restrict(sub, atom.restricted));
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

struct SampledStep {
  bool probabilistic = false;
  double weight = 1.0;    // sampled joint weight for probabilistic rounds
  std::string label;
  bool tick = false;
  std::string detail;
  Configuration config;
};

inline std::optional<SampledStep> sample_step(const Model& model, const Configuration& c,
                                              std::mt19937_64& rng, std::mt19937_64& sched_rng,
                                              SchedulerPolicy policy) {
  detail::ProbSample acc;
  auto atoms = detail::sample_prob_atoms(model, c.env, c.system->atoms, rng, acc);
  if (acc.any) {
    auto env2 = merge(c.env, acc.delta);
    if (!env2) throw InternalError("sampled step drives a population count below zero");
    SampledStep st;
    st.probabilistic = true;
    st.weight = acc.weight;
    st.config = Configuration{*env2, canonicalize_atoms(std::move(atoms))};
    if (env_of(*st.config.system) != st.config.env)
      throw InternalError("environment incompatible with system after sampled step");
    char buf[40];
    std::snprintf(buf, sizeof buf, "p=%.9g", acc.weight);
    st.label = buf;
    return st;
  }

  // nondeterministic rounds: pick from the raw fan-out (the order is
  // deterministic by construction) and validate only the executed step
  Fanout fan = system_steps(model, c.env, *c.system);
  if (fan.kind == Fanout::Kind::Terminal) return std::nullopt;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::size_t idx = 0;
  switch (policy) {
    case SchedulerPolicy::FirstEnabled:
      idx = 0;
      break;
    case SchedulerPolicy::UniformRandom:
      idx = static_cast<std::size_t>(uni(rng) * fan.steps.size());
      break;
    case SchedulerPolicy::SeededRandom:
      idx = static_cast<std::size_t>(uni(sched_rng) * fan.steps.size());
      break;
  }
  if (idx >= fan.steps.size()) idx = fan.steps.size() - 1;
  const JointStep& chosen = fan.steps[idx];
  auto env2 = merge(c.env, chosen.delta);
  if (!env2) throw InternalError("sampled step drives a population count below zero");
  SampledStep st;
  st.label = chosen.label.str(model);
  st.tick = chosen.label.kind == TransitionLabel::Kind::Tick;
  st.detail = chosen.detail;
  st.config = Configuration{*env2, chosen.target};
  if (env_of(*st.config.system) != st.config.env)
    throw InternalError("environment incompatible with system after sampled step");
  return st;
}

// ---------------------------------------------------------------------------
// Traces

struct TraceEvent {
  std::string label;   // action label or "p=<weight>" for sampled branches
  bool tick = false;
  unsigned tick_count = 0;  // ticks completed after this event
  std::uint64_t digest = 0; // digest hash of the reached configuration
};

struct Trace {
  enum class Outcome { MaxTicks, Terminated, Deadlock };
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::MaxTicks;
  unsigned ticks = 0;
  std::vector<TraceEvent> events;
  // census after 0,1,2,... ticks
  std::vector<Environment> census;
};

inline Trace run(const Model& model, const Scheduler& sched, unsigned max_ticks,
                 std::uint64_t seed) {
  std::mt19937_64 rng(detail::splitmix64(seed));
  std::mt19937_64 sched_rng(detail::splitmix64(sched.seed ^ 0x5eedULL));

  Trace trace;
  trace.seed = seed;
  Configuration c = initial_configuration(model);
  trace.census.push_back(c.env);

  for (;;) {
    auto step = sample_step(model, c, rng, sched_rng, sched.policy);
    if (!step) {
      trace.outcome = c.system->atoms.empty() ? Trace::Outcome::Terminated
                                              : Trace::Outcome::Deadlock;
      return trace;
    }
    TraceEvent ev;
    ev.tick = step->tick;
    ev.label = step->label;
    if (step->tick) ++trace.ticks;
    ev.tick_count = trace.ticks;
    ev.digest = step->config.digest_hash();
    trace.events.push_back(std::move(ev));
    c = step->config;
    if (step->tick) {
      trace.census.push_back(c.env);
      if (trace.ticks >= max_ticks) {
        trace.outcome = Trace::Outcome::MaxTicks;
        return trace;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Statistical estimation of path-formula probabilities

struct Estimate {
  double point = 0.0;
  double lo = 0.0, hi = 1.0;  // Wilson interval
  std::size_t samples = 0;
  std::size_t successes = 0;
  double confidence = 0.95;
};

namespace detail {

// Acklam's rational approximation to the standard normal quantile
inline double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p <= phigh) {
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  }
  q = std::sqrt(-2 * std::log(1 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
}

inline void wilson(Estimate& e) {
  double z = normal_quantile(1.0 - (1.0 - e.confidence) / 2.0);
  double n = static_cast<double>(e.samples);
  if (n == 0) {
    e.lo = 0;
    e.hi = 1;
    return;
  }
  double phat = static_cast<double>(e.successes) / n;
  double z2 = z * z;
  double denom = 1 + z2 / n;
  double center = (phat + z2 / (2 * n)) / denom;
  double half = z * std::sqrt(phat * (1 - phat) / n + z2 / (4 * n * n)) / denom;
  e.point = phat;
  e.lo = std::max(0.0, center - half);
  e.hi = std::min(1.0, center + half);
}

// state formulas inside a simulated path formula must be probability-free
inline bool eval_state_formula(const Model& model, const Environment& env, const FormulaPtr& f) {
  const Evaluator ev(model);
  using K = PctlFormula::Kind;
  switch (f->kind) {
    case K::True:
      return true;
    case K::Atom:
      return ev.sat(env, *f->atom);
    case K::Not:
      return !eval_state_formula(model, env, f->lhs);
    case K::And:
      return eval_state_formula(model, env, f->lhs) && eval_state_formula(model, env, f->rhs);
    case K::Prob:
      throw ModelError(f->span.str() + ": nested probability operators cannot be simulated");
  }
  return false;
}

}  // namespace detail

// A path formula to sample: the path part of a P operator.
struct PathSpec {
  PctlFormula::Path kind = PctlFormula::Path::Next;
  FormulaPtr f1, f2;  // Next uses f2 only
  int bound = 0;          // BoundedUntil: in ticks
  unsigned cutoff = 0;    // Until: tick cutoff after which the sample counts as failure

  static PathSpec from_formula(const FormulaPtr& f, unsigned until_cutoff) {
    if (f->kind != PctlFormula::Kind::Prob)
      throw ModelError(f->span.str() + ": simulation needs a probability operator at top level");
    PathSpec spec;
    spec.kind = f->path;
    if (f->path == PctlFormula::Path::Next) {
      spec.f2 = f->p1;
    } else {
      spec.f1 = f->p1;
      spec.f2 = f->p2;
      spec.bound = f->steps;
      spec.cutoff = until_cutoff;
      if (f->path == PctlFormula::Path::Until && until_cutoff == 0)
        throw ModelError(f->span.str() + ": unbounded until needs a simulation cutoff");
    }
    return spec;
  }
};

namespace detail {

// samples one trace lazily, deciding the path formula on the fly
inline bool sample_path(const Model& model, const PathSpec& spec, const Scheduler& sched,
                        std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed));
  std::mt19937_64 sched_rng(splitmix64(sched.seed ^ splitmix64(seed ^ 0x5eedULL)));

  Configuration c = initial_configuration(model);
  unsigned ticks = 0;

  if (spec.kind == PctlFormula::Path::Next) {
    auto step = sample_step(model, c, rng, sched_rng, sched.policy);
    const Environment& env = step ? step->config.env : c.env;  // stutter when stuck
    return eval_state_formula(model, env, spec.f2);
  }

  unsigned limit = spec.kind == PctlFormula::Path::BoundedUntil
                       ? static_cast<unsigned>(spec.bound)
                       : spec.cutoff;
  for (;;) {
    if (eval_state_formula(model, c.env, spec.f2)) return true;
    if (!eval_state_formula(model, c.env, spec.f1)) return false;
    auto step = sample_step(model, c, rng, sched_rng, sched.policy);
    if (!step) return false;  // stuck in a non-goal state
    if (step->tick) {
      ++ticks;
      if (ticks > limit) return false;  // deadline passed before the goal
    }
    c = step->config;
  }
}

}  // namespace detail

// Monte Carlo estimate under one scheduler policy. Sampling a single policy
// bounds neither the scheduler minimum nor maximum in general; callers warn.
inline Estimate estimate(const Model& model, const PathSpec& spec, std::size_t samples,
                         const Scheduler& sched, std::uint64_t seed, double confidence = 0.95,
                         unsigned threads = 1) {
  Estimate est;
  est.samples = samples;
  est.confidence = confidence;

  std::atomic<std::size_t> successes{0};
  unsigned nthreads = std::max(1u, threads);
  if (nthreads == 1) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples; ++i)
      if (detail::sample_path(model, spec, sched, detail::splitmix64(seed) ^ (i + 1)))
        ++hits;
    successes = hits;
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(nthreads);
    for (unsigned t = 0; t < nthreads; ++t)
      pool.emplace_back([&, t] {
        try {
          std::size_t local = 0;
          for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= samples) break;
            if (detail::sample_path(model, spec, sched, detail::splitmix64(seed) ^ (i + 1)))
              ++local;
          }
          successes += local;
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  est.successes = successes;
  detail::wilson(est);
  return est;
}

}  // namespace palps

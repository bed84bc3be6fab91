#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "palps/ast.hpp"
#include "palps/environment.hpp"
#include "palps/wellformed.hpp"

namespace palps {

class WeightError : public ModelError {
 public:
  using ModelError::ModelError;
};

// ---------------------------------------------------------------------------
// Canonical systems: parallel composition flattened to a sorted multiset,
// located nil terms dropped, empty restrictions dropped.

struct CanonSystem;
using CanonPtr = std::shared_ptr<const CanonSystem>;

struct CanonAtom {
  enum class Kind { Located, Species, Restrict };
  Kind kind = Kind::Located;
  ProcPtr proc;      // Located
  SpecId species;    // Located, Species
  LocId loc;         // Located
  CanonPtr sub;      // Restrict
  std::vector<ChanId> restricted;

  static CanonAtom located(ProcPtr p, SpecId s, LocId l) {
    CanonAtom a;
    a.kind = Kind::Located;
    a.proc = std::move(p);
    a.species = s;
    a.loc = l;
    return a;
  }
  static CanonAtom replicator(SpecId s) {
    CanonAtom a;
    a.kind = Kind::Species;
    a.species = s;
    return a;
  }
  static CanonAtom restrict(CanonPtr sub, std::vector<ChanId> chans) {
    CanonAtom a;
    a.kind = Kind::Restrict;
    a.sub = std::move(sub);
    a.restricted = std::move(chans);
    return a;
  }
};

struct CanonSystem {
  std::vector<CanonAtom> atoms;  // sorted by serialization key
};

// ---------------------------------------------------------------------------
// Deterministic serialization (total order on terms, state digests)

namespace ser {

inline void put_loc(std::string& out, const LocRef& r) {
  switch (r.kind) {
    case LocRef::Kind::Here: out += 'h'; break;
    case LocRef::Kind::Var: out += '$'; out += r.var; break;
    case LocRef::Kind::Concrete: out += std::to_string(r.loc.v); break;
  }
}

inline void put_arith(std::string& out, const ArithPtr& w) {
  using K = ArithExpr::Kind;
  switch (w->kind) {
    case K::Const: out += 'c'; out += w->constant.str(); break;
    case K::Attr: out += 'a'; out += std::to_string(w->attr); out += '@'; put_loc(out, w->loc); break;
    case K::Count: out += 'n'; out += std::to_string(w->species.v); out += '@'; put_loc(out, w->loc); break;
    case K::PopAll: out += 'p'; out += '@'; put_loc(out, w->loc); break;
    case K::Total: out += 'T'; out += std::to_string(w->species.v); break;
    case K::Neg: out += "-("; put_arith(out, w->lhs); out += ')'; break;
    case K::Add: out += "+("; put_arith(out, w->lhs); out += ','; put_arith(out, w->rhs); out += ')'; break;
    case K::Sub: out += "_("; put_arith(out, w->lhs); out += ','; put_arith(out, w->rhs); out += ')'; break;
    case K::Mul: out += "*("; put_arith(out, w->lhs); out += ','; put_arith(out, w->rhs); out += ')'; break;
    case K::Div: out += "/("; put_arith(out, w->lhs); out += ','; put_arith(out, w->rhs); out += ')'; break;
    case K::Pow: out += "^("; put_arith(out, w->lhs); out += ','; put_arith(out, w->rhs); out += ')'; break;
  }
}

inline void put_bool(std::string& out, const BoolPtr& e) {
  using K = BoolExpr::Kind;
  switch (e->kind) {
    case K::True: out += 't'; break;
    case K::Not: out += "!("; put_bool(out, e->lhs); out += ')'; break;
    case K::And: out += "&("; put_bool(out, e->lhs); out += ','; put_bool(out, e->rhs); out += ')'; break;
    case K::Cmp:
      out += 'q';
      out += e->op == CmpOp::Eq ? '=' : e->op == CmpOp::Le ? '<' : '>';
      out += '(';
      put_arith(out, e->cmp_lhs);
      out += ',';
      out += e->cmp_rhs.str();
      out += ')';
      break;
  }
}

inline void put_proc(std::string& out, const ProcPtr& p) {
  using K = ProcessTerm::Kind;
  switch (p->kind) {
    case K::Nil: out += '0'; return;
    case K::Prefix:
      out += '.';
      switch (p->action.kind) {
        case Action::Kind::Tick: out += 't'; break;
        case Action::Kind::Input: out += 'i'; out += std::to_string(p->action.chan.v); break;
        case Action::Kind::Output: out += 'o'; out += std::to_string(p->action.chan.v); break;
        case Action::Kind::Go: out += 'g'; put_loc(out, p->action.target); break;
      }
      out += ';';
      put_proc(out, p->cont);
      return;
    case K::PSum:
      out += "s(";
      for (size_t i = 0; i < p->branches.size(); ++i) {
        if (i) out += '+';
        put_arith(out, p->branches[i].weight);
        out += ':';
        put_proc(out, p->branches[i].body);
      }
      out += ')';
      return;
    case K::NeighborSum:
      out += "N(";
      out += p->nweight == NeighborWeight::Uniform ? 'u' : 'd';
      out += ',';
      out += p->var;
      out += ',';
      put_proc(out, p->body);
      out += ')';
      return;
    case K::Cond:
      out += "C(";
      for (size_t i = 0; i < p->conds.size(); ++i) {
        if (i) out += ',';
        put_bool(out, p->conds[i].guard);
        out += '?';
        put_proc(out, p->conds[i].body);
      }
      out += ')';
      return;
    case K::Const:
      out += 'k';
      out += std::to_string(p->constant);
      return;
  }
}

inline void put_atom(std::string& out, const CanonAtom& a);

inline void put_system(std::string& out, const CanonSystem& s) {
  out += '[';
  for (size_t i = 0; i < s.atoms.size(); ++i) {
    if (i) out += '|';
    put_atom(out, s.atoms[i]);
  }
  out += ']';
}

inline void put_atom(std::string& out, const CanonAtom& a) {
  switch (a.kind) {
    case CanonAtom::Kind::Located:
      out += 'L';
      out += std::to_string(a.loc.v);
      out += ',';
      out += std::to_string(a.species.v);
      out += ':';
      put_proc(out, a.proc);
      return;
    case CanonAtom::Kind::Species:
      out += 'R';
      out += std::to_string(a.species.v);
      return;
    case CanonAtom::Kind::Restrict:
      out += "X{";
      for (size_t i = 0; i < a.restricted.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(a.restricted[i].v);
      }
      out += '}';
      put_system(out, *a.sub);
      return;
  }
}

inline std::string atom_key(const CanonAtom& a) {
  std::string s;
  put_atom(s, a);
  return s;
}

inline std::string system_key(const CanonSystem& s) {
  std::string out;
  put_system(out, s);
  return out;
}

inline std::string env_key(const Environment& e) {
  std::string out = "E";
  for (const auto& [k, n] : e.entries()) {
    out += std::to_string(k.first);
    out += ',';
    out += std::to_string(k.second);
    out += ':';
    out += std::to_string(n);
    out += ';';
  }
  return out;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace ser

// ---------------------------------------------------------------------------
// Canonicalization

inline void flatten_system(const SysPtr& s, std::vector<CanonAtom>& out) {
  switch (s->kind) {
    case SystemTerm::Kind::Nil:
      return;
    case SystemTerm::Kind::Located:
      if (!s->proc->is_nil()) out.push_back(CanonAtom::located(s->proc, s->species, s->loc));
      return;
    case SystemTerm::Kind::Species:
      out.push_back(CanonAtom::replicator(s->species));
      return;
    case SystemTerm::Kind::Parallel:
      flatten_system(s->left, out);
      flatten_system(s->right, out);
      return;
    case SystemTerm::Kind::Restrict: {
      std::vector<CanonAtom> inner;
      flatten_system(s->body, inner);
      if (inner.empty()) return;
      auto sub = std::make_shared<CanonSystem>();
      sub->atoms = std::move(inner);
      std::sort(sub->atoms.begin(), sub->atoms.end(),
                [](const CanonAtom& a, const CanonAtom& b) {
                  return ser::atom_key(a) < ser::atom_key(b);
                });
      out.push_back(CanonAtom::restrict(std::move(sub), s->restricted));
      return;
    }
  }
}

inline CanonPtr canonicalize_atoms(std::vector<CanonAtom> atoms) {
  auto sys = std::make_shared<CanonSystem>();
  for (auto& a : atoms) {
    if (a.kind == CanonAtom::Kind::Located && a.proc->is_nil()) continue;
    if (a.kind == CanonAtom::Kind::Restrict && a.sub->atoms.empty()) continue;
    sys->atoms.push_back(std::move(a));
  }
  std::sort(sys->atoms.begin(), sys->atoms.end(), [](const CanonAtom& a, const CanonAtom& b) {
    return ser::atom_key(a) < ser::atom_key(b);
  });
  return sys;
}

inline CanonPtr canonicalize(const SysPtr& s) {
  std::vector<CanonAtom> atoms;
  flatten_system(s, atoms);
  return canonicalize_atoms(std::move(atoms));
}

inline void census(const CanonSystem& s, std::vector<Environment::Entry>& acc) {
  for (const auto& a : s.atoms) {
    switch (a.kind) {
      case CanonAtom::Kind::Located:
        if (!a.proc->is_nil()) acc.push_back({{a.loc.v, a.species.v}, 1});
        break;
      case CanonAtom::Kind::Species:
        break;
      case CanonAtom::Kind::Restrict:
        census(*a.sub, acc);
        break;
    }
  }
}

inline Environment env_of(const CanonSystem& s) {
  std::vector<Environment::Entry> acc;
  census(s, acc);
  std::sort(acc.begin(), acc.end());
  std::vector<Environment::Entry> merged;
  for (const auto& e : acc) {
    if (!merged.empty() && merged.back().first == e.first)
      merged.back().second += e.second;
    else
      merged.push_back(e);
  }
  return Environment::from_entries(std::move(merged));
}

// ---------------------------------------------------------------------------
// Transitions

struct TransitionLabel {
  enum class Kind { Input, Output, Tau, Tick };
  Kind kind = Kind::Tau;
  ChanId chan;  // Input/Output
  LocId loc;    // Input/Output

  static TransitionLabel input(ChanId c, LocId l) { return {Kind::Input, c, l}; }
  static TransitionLabel output(ChanId c, LocId l) { return {Kind::Output, c, l}; }
  static TransitionLabel tau() { return {Kind::Tau, {}, {}}; }
  static TransitionLabel tick() { return {Kind::Tick, {}, {}}; }

  std::string str(const Model& m) const {
    switch (kind) {
      case Kind::Tau: return "tau";
      case Kind::Tick: return "tick";
      case Kind::Input: return m.channel_name(chan) + "@" + m.location_name(loc);
      case Kind::Output: return m.channel_name(chan) + "!@" + m.location_name(loc);
    }
    return "?";
  }
};

// One transition of a single parallel component. `result` holds the atoms
// that replace the stepping atom (empty when the component vanishes).
struct Step {
  bool probabilistic = false;
  Value weight;  // probabilistic steps
  TransitionLabel label;
  EnvDelta delta;
  std::vector<CanonAtom> result;
  std::string detail;  // diagnostics only, never part of state identity
};

struct JointStep {
  bool probabilistic = false;
  Value weight;
  TransitionLabel label;
  EnvDelta delta;
  CanonPtr target;
  std::string detail;
};

struct Fanout {
  enum class Kind { Terminal, Probabilistic, Nondeterministic };
  Kind kind = Kind::Terminal;
  std::vector<JointStep> steps;
};

namespace detail {

constexpr double kWeightTolerance = 1e-9;
constexpr size_t kMaxJointBranches = 1u << 20;

// Individual-level rules plus the always-available prey input. `visited` breaks unguarded
// constant cycles that slipped past the static check.
inline void individual_steps_rec(const Model& model, const Environment& env, const ProcPtr& proc,
                                 SpecId s, LocId l, std::set<std::uint32_t>& visited,
                                 std::vector<Step>& out) {
  using K = ProcessTerm::Kind;
  const Evaluator ev(model);
  switch (proc->kind) {
    case K::Nil:
      return;
    case K::Prefix: {
      const Action& act = proc->action;
      const ProcPtr& cont = proc->cont;
      Step st;
      st.result = cont->is_nil() ? std::vector<CanonAtom>{}
                                 : std::vector<CanonAtom>{CanonAtom::located(cont, s, l)};
      switch (act.kind) {
        case Action::Kind::Tick:
          st.label = TransitionLabel::tick();
          if (cont->is_nil()) st.delta.add(l, s, -1);
          out.push_back(std::move(st));
          return;
        case Action::Kind::Input:
          st.label = TransitionLabel::input(act.chan, l);
          if (cont->is_nil()) st.delta.add(l, s, -1);
          out.push_back(std::move(st));
          return;
        case Action::Kind::Output:
          st.label = TransitionLabel::output(act.chan, l);
          if (cont->is_nil()) st.delta.add(l, s, -1);
          out.push_back(std::move(st));
          return;
        case Action::Kind::Go: {
          if (act.target.kind != LocRef::Kind::Concrete)
            throw InternalError(proc->span.str() + ": go target not resolved to a location");
          LocId dst = act.target.loc;
          if (!model.habitat.neighbors(l, dst)) return;  // non-neighbor: step absent
          Step go;
          go.label = TransitionLabel::tau();
          go.delta.add(l, s, -1);
          go.delta.add(dst, s, +1);
          if (cont->is_nil()) {
            go.delta.add(dst, s, -1);
            go.result = {};
          } else {
            go.result = {CanonAtom::located(cont, s, dst)};
          }
          go.detail = "go " + model.species_name(s) + " " + model.location_name(l) + "->" +
                      model.location_name(dst);
          out.push_back(std::move(go));
          return;
        }
      }
      return;
    }
    case K::PSum: {
      Value sum = Value::integer(0);
      std::vector<std::pair<Value, const PsumBranch*>> weights;
      for (const auto& br : proc->branches) {
        Value w = ev.eval(env, *subst_myloc(br.weight, l));
        if (w.compare(Value::integer(0)) < 0 || w.compare(Value::integer(1)) > 0)
          throw WeightError(proc->span.str() + ": branch weight " + w.str() +
                            " outside [0,1] at location '" + model.location_name(l) + "'");
        sum = sum + w;
        weights.push_back({w, &br});
      }
      if (std::abs(sum.to_double() - 1.0) > kWeightTolerance)
        throw WeightError(proc->span.str() + ": branch weights sum to " + sum.str() +
                          ", expected 1");
      for (auto& [w, br] : weights) {
        if (w.is_zero()) continue;
        Step st;
        st.probabilistic = true;
        st.weight = w;
        if (br->body->is_nil()) {
          st.delta.add(l, s, -1);
          st.result = {};
        } else {
          st.result = {CanonAtom::located(br->body, s, l)};
        }
        out.push_back(std::move(st));
      }
      return;
    }
    case K::NeighborSum: {
      ProcPtr expanded = expand_neighbor_sum(proc, l, model.habitat);
      individual_steps_rec(model, env, expanded, s, l, visited, out);
      return;
    }
    case K::Cond: {
      for (const auto& br : proc->conds) {
        if (ev.sat(env, *subst_myloc(br.guard, l))) {
          individual_steps_rec(model, env, br.body, s, l, visited, out);
          return;
        }
      }
      return;  // no true guard: stuck until the environment changes
    }
    case K::Const: {
      const auto& def = model.constants[proc->constant];
      if (!def.body)
        throw ModelError(proc->span.str() + ": undefined constant " + def.name);
      if (!visited.insert(proc->constant).second)
        throw ModelError(proc->span.str() + ": unguarded recursion through constant " + def.name);
      individual_steps_rec(model, env, def.body, s, l, visited, out);
      visited.erase(proc->constant);
      return;
    }
  }
}

}  // namespace detail

// All transitions of one located individual: the individual-level rules plus the prey
// axiom, which applies to every living individual whatever its state.
inline std::vector<Step> individual_steps(const Model& model, const Environment& env,
                                          const ProcPtr& proc, SpecId s, LocId l) {
  std::vector<Step> out;
  std::set<std::uint32_t> visited;
  detail::individual_steps_rec(model, env, proc, s, l, visited, out);
  if (!proc->is_nil()) {
    Step prey;
    prey.label = TransitionLabel::input(model.species[s.v].prey_chan, l);
    prey.delta.add(l, s, -1);
    prey.result = {};
    prey.detail = "preyed " + model.species_name(s) + "@" + model.location_name(l);
    out.push_back(std::move(prey));
  }
  return out;
}

namespace detail {

inline std::vector<Step> species_steps(const Model& model, SpecId s) {
  std::vector<Step> out;
  const SpeciesDef& def = model.species[s.v];
  if (!def.body)
    throw ModelError("species '" + def.name + "' is used as a replicator but has no body");
  for (std::uint32_t l = 0; l < model.habitat.locations.size(); ++l) {
    Step st;
    st.label = TransitionLabel::input(def.rep_chan, LocId{l});
    st.delta.add(LocId{l}, s, +1);
    st.result = {CanonAtom::located(def.body, s, LocId{l}), CanonAtom::replicator(s)};
    st.detail = "spawn " + def.name + "@" + model.habitat.locations[l];
    out.push_back(std::move(st));
  }
  // replicators do not block the clock
  Step tick;
  tick.label = TransitionLabel::tick();
  tick.result = {CanonAtom::replicator(s)};
  out.push_back(std::move(tick));
  return out;
}

Fanout multiset_fanout(const Model& model, const Environment& env,
                       const std::vector<CanonAtom>& atoms);

inline std::vector<Step> atom_steps(const Model& model, const Environment& env,
                                    const CanonAtom& atom) {
  switch (atom.kind) {
    case CanonAtom::Kind::Located:
      return individual_steps(model, env, atom.proc, atom.species, atom.loc);
    case CanonAtom::Kind::Species:
      return species_steps(model, atom.species);
    case CanonAtom::Kind::Restrict: {
      Fanout inner = multiset_fanout(model, env, atom.sub->atoms);
      std::vector<Step> out;
      for (auto& js : inner.steps) {
        if (!js.probabilistic &&
            (js.label.kind == TransitionLabel::Kind::Input ||
             js.label.kind == TransitionLabel::Kind::Output) &&
            std::binary_search(atom.restricted.begin(), atom.restricted.end(), js.label.chan))
          continue;  // Res: the restricted channel does not escape
        Step st;
        st.probabilistic = js.probabilistic;
        st.weight = js.weight;
        st.label = js.label;
        st.delta = js.delta;
        st.detail = js.detail;
        if (!js.target->atoms.empty())
          st.result = {CanonAtom::restrict(js.target, atom.restricted)};
        out.push_back(std::move(st));
      }
      return out;
    }
  }
  return {};
}

// Tables 3 and 4 over the flattened multiset: global probabilistic
// precedence, pairwise synchronization, clock synchronization on tick.
inline Fanout multiset_fanout(const Model& model, const Environment& env,
                              const std::vector<CanonAtom>& atoms) {
  Fanout fan;
  if (atoms.empty()) return fan;  // Terminal

  std::vector<std::vector<Step>> steps(atoms.size());
  std::vector<size_t> prob_atoms;
  for (size_t i = 0; i < atoms.size(); ++i) {
    steps[i] = atom_steps(model, env, atoms[i]);
    for (const auto& st : steps[i])
      if (st.probabilistic) {
        prob_atoms.push_back(i);
        break;
      }
  }

  auto replace = [&](const std::vector<std::pair<size_t, const Step*>>& used) {
    std::vector<CanonAtom> next;
    next.reserve(atoms.size() + 1);
    for (size_t i = 0; i < atoms.size(); ++i) {
      const Step* st = nullptr;
      for (const auto& [idx, sp] : used)
        if (idx == i) st = sp;
      if (st)
        for (const auto& a : st->result) next.push_back(a);
      else
        next.push_back(atoms[i]);
    }
    return canonicalize_atoms(std::move(next));
  };

  if (!prob_atoms.empty()) {
    // Par3/Par4: the product of every enabled probabilistic fan-out takes
    // precedence over all nondeterministic steps
    fan.kind = Fanout::Kind::Probabilistic;
    std::vector<std::vector<const Step*>> dists;
    for (size_t i : prob_atoms) {
      std::vector<const Step*> d;
      for (const auto& st : steps[i])
        if (st.probabilistic) d.push_back(&st);
      dists.push_back(std::move(d));
    }
    size_t total = 1;
    for (const auto& d : dists) {
      total *= d.size();
      if (total > kMaxJointBranches)
        throw ModelError("probabilistic fan-out exceeds " +
                         std::to_string(kMaxJointBranches) + " joint branches");
    }
    std::vector<size_t> idx(dists.size(), 0);
    for (size_t n = 0; n < total; ++n) {
      JointStep js;
      js.probabilistic = true;
      js.weight = Value::integer(1);
      std::vector<std::pair<size_t, const Step*>> used;
      for (size_t k = 0; k < dists.size(); ++k) {
        const Step* st = dists[k][idx[k]];
        js.weight = js.weight * st->weight;
        js.delta.add(st->delta);
        used.push_back({prob_atoms[k], st});
      }
      js.target = replace(used);
      fan.steps.push_back(std::move(js));
      for (size_t k = dists.size(); k-- > 0;) {
        if (++idx[k] < dists[k].size()) break;
        idx[k] = 0;
      }
    }
    return fan;
  }

  // Par1 lifts, Par2 synchronizations, Time for the joint tick
  for (size_t i = 0; i < atoms.size(); ++i) {
    for (const auto& st : steps[i]) {
      if (st.label.kind == TransitionLabel::Kind::Tick) continue;
      JointStep js;
      js.label = st.label;
      js.delta = st.delta;
      js.detail = st.detail;
      js.target = replace({{i, &st}});
      fan.steps.push_back(std::move(js));
    }
  }
  for (size_t i = 0; i < atoms.size(); ++i) {
    for (size_t j = i + 1; j < atoms.size(); ++j) {
      for (const auto& a : steps[i]) {
        if (a.probabilistic) continue;
        for (const auto& b : steps[j]) {
          bool io = a.label.kind == TransitionLabel::Kind::Input &&
                    b.label.kind == TransitionLabel::Kind::Output;
          bool oi = a.label.kind == TransitionLabel::Kind::Output &&
                    b.label.kind == TransitionLabel::Kind::Input;
          if (!(io || oi)) continue;
          if (a.label.chan != b.label.chan || a.label.loc != b.label.loc) continue;
          JointStep js;
          js.label = TransitionLabel::tau();
          js.delta = a.delta;
          js.delta.add(b.delta);
          js.detail = "sync " + model.channel_name(a.label.chan) + "@" +
                      model.location_name(a.label.loc);
          if (!a.detail.empty()) js.detail += " [" + a.detail + "]";
          if (!b.detail.empty()) js.detail += " [" + b.detail + "]";
          js.target = replace({{i, &a}, {j, &b}});
          fan.steps.push_back(std::move(js));
        }
      }
    }
  }
  {
    std::vector<std::pair<size_t, const Step*>> ticks;
    bool all_tick = true;
    for (size_t i = 0; i < atoms.size() && all_tick; ++i) {
      const Step* tick = nullptr;
      for (const auto& st : steps[i])
        if (!st.probabilistic && st.label.kind == TransitionLabel::Kind::Tick) {
          if (tick) throw InternalError("component with two simultaneous tick steps");
          tick = &st;
        }
      if (tick)
        ticks.push_back({i, tick});
      else
        all_tick = false;
    }
    if (all_tick) {
      JointStep js;
      js.label = TransitionLabel::tick();
      for (const auto& [i, st] : ticks) js.delta.add(st->delta);
      js.target = replace(ticks);
      fan.steps.push_back(std::move(js));
    }
  }
  fan.kind = fan.steps.empty() ? Fanout::Kind::Terminal : Fanout::Kind::Nondeterministic;
  return fan;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Configurations and the top-level successor relation

struct Configuration {
  Environment env;
  CanonPtr system;

  std::string digest() const {
    std::string s = ser::env_key(env);
    ser::put_system(s, *system);
    return s;
  }
  std::uint64_t digest_hash() const { return ser::fnv1a(digest()); }
};

inline Configuration initial_configuration(const Model& model) {
  CanonPtr sys = canonicalize(model.system);
  return Configuration{env_of(*sys), sys};
}

inline Fanout system_steps(const Model& model, const Environment& env, const CanonSystem& sys) {
  return detail::multiset_fanout(model, env, sys.atoms);
}

struct Successor {
  bool probabilistic = false;
  Value weight;             // probabilistic branches
  TransitionLabel label;    // nondeterministic actions
  std::string label_str;
  bool tick = false;
  Configuration config;
  std::string detail;
};

struct SuccessorSet {
  Fanout::Kind kind = Fanout::Kind::Terminal;
  std::vector<Successor> items;
};

// Expands one configuration. Every produced environment is checked against
// the census of the produced system term (the compatibility invariant); a
// mismatch is a bug in the semantics, not in the model.
inline SuccessorSet successors(const Model& model, const Configuration& c,
                               bool validate_compatibility = true) {
  Fanout fan = system_steps(model, c.env, *c.system);
  SuccessorSet out;
  out.kind = fan.kind;
  for (auto& js : fan.steps) {
    auto env2 = merge(c.env, js.delta);
    if (!env2)
      throw InternalError("transition drives a population count below zero (digest " +
                          std::to_string(c.digest_hash()) + ")");
    Successor succ;
    succ.probabilistic = js.probabilistic;
    succ.weight = js.weight;
    succ.label = js.label;
    succ.label_str = js.probabilistic ? std::string("-") : js.label.str(model);
    succ.tick = !js.probabilistic && js.label.kind == TransitionLabel::Kind::Tick;
    succ.config = Configuration{*env2, js.target};
    succ.detail = std::move(js.detail);
    if (validate_compatibility && env_of(*succ.config.system) != succ.config.env)
      throw InternalError("environment incompatible with system after transition (digest " +
                          std::to_string(c.digest_hash()) + ")");
    out.items.push_back(std::move(succ));
  }
  if (out.kind == Fanout::Kind::Probabilistic) {
    double sum = 0;
    for (const auto& s : out.items) sum += s.weight.to_double();
    if (std::abs(sum - 1.0) > detail::kWeightTolerance)
      throw WeightError("probabilistic fan-out sums to " + std::to_string(sum) +
                        ", expected 1 (digest " + std::to_string(c.digest_hash()) + ")");
  }
  std::sort(out.items.begin(), out.items.end(), [](const Successor& a, const Successor& b) {
    if (a.label_str != b.label_str) return a.label_str < b.label_str;
    std::string da = a.config.digest(), db = b.config.digest();
    if (da != db) return da < db;
    return a.weight.to_double() < b.weight.to_double();
  });
  return out;
}

// Restricts every rep_*/prey_* channel at top level unless the model already
// does; unmatched reproduction and prey offers then stay internal.
inline void close_special_channels(Model& model) {
  std::vector<ChanId> special;
  for (std::uint32_t c = 0; c < model.channels.size(); ++c)
    if (model.channels[c].kind != ChanKind::Ordinary) special.push_back(ChanId{c});
  if (special.empty() || !model.system) return;
  if (model.system->kind == SystemTerm::Kind::Restrict) {
    std::vector<ChanId> merged = model.system->restricted;
    merged.insert(merged.end(), special.begin(), special.end());
    model.system = SystemTerm::restrict(model.system->body, std::move(merged), model.system->span);
  } else {
    model.system = SystemTerm::restrict(model.system, std::move(special), model.system->span);
  }
}

}  // namespace palps

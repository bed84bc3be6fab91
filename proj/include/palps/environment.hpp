#pragma once

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

#include "palps/ast.hpp"
#include "palps/diagnostics.hpp"

namespace palps {

// The population census: (location, species) -> positive count. Immutable
// value type; updates return fresh environments.
class Environment {
 public:
  using Key = std::pair<std::uint32_t, std::uint32_t>;  // (loc, species)
  using Entry = std::pair<Key, std::uint32_t>;

  Environment() = default;

  std::uint32_t num(LocId l, SpecId s) const {
    auto it = find(Key{l.v, s.v});
    return it != entries_.end() && it->first == Key{l.v, s.v} ? it->second : 0;
  }

  std::uint32_t num_all(LocId l) const {
    std::uint32_t total = 0;
    for (const auto& e : entries_)
      if (e.first.first == l.v) total += e.second;
    return total;
  }

  std::uint32_t total(SpecId s) const {
    std::uint32_t total = 0;
    for (const auto& e : entries_)
      if (e.first.second == s.v) total += e.second;
    return total;
  }

  Environment inc(SpecId s, LocId l) const {
    Environment out = *this;
    Key k{l.v, s.v};
    auto it = out.mut_find(k);
    if (it != out.entries_.end() && it->first == k)
      it->second += 1;
    else
      out.entries_.insert(it, Entry{k, 1});
    return out;
  }

  // nullopt when no individual of s is present at l
  std::optional<Environment> dec(SpecId s, LocId l) const {
    Key k{l.v, s.v};
    Environment out = *this;
    auto it = out.mut_find(k);
    if (it == out.entries_.end() || !(it->first == k)) return std::nullopt;
    if (it->second == 1)
      out.entries_.erase(it);
    else
      it->second -= 1;
    return out;
  }

  bool operator==(const Environment& o) const { return entries_ == o.entries_; }
  bool operator!=(const Environment& o) const { return !(*this == o); }
  bool operator<(const Environment& o) const { return entries_ < o.entries_; }

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  static Environment from_entries(std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end());
    Environment e;
    e.entries_ = std::move(entries);
    return e;
  }

 private:
  std::vector<Entry>::const_iterator find(const Key& k) const {
    return std::lower_bound(entries_.begin(), entries_.end(), k,
                            [](const Entry& e, const Key& key) { return e.first < key; });
  }
  std::vector<Entry>::iterator mut_find(const Key& k) {
    return std::lower_bound(entries_.begin(), entries_.end(), k,
                            [](const Entry& e, const Key& key) { return e.first < key; });
  }

  std::vector<Entry> entries_;  // sorted by key
};

// Per-transition population change. Summing deltas realizes the n-way
// generalization of the binary environment merge.
struct EnvDelta {
  using Key = Environment::Key;
  std::vector<std::pair<Key, int>> changes;  // sorted, nonzero

  void add(LocId l, SpecId s, int d) {
    if (d == 0) return;
    Key k{l.v, s.v};
    auto it = std::lower_bound(changes.begin(), changes.end(), k,
                               [](const auto& e, const Key& key) { return e.first < key; });
    if (it != changes.end() && it->first == k) {
      it->second += d;
      if (it->second == 0) changes.erase(it);
    } else {
      changes.insert(it, {k, d});
    }
  }

  void add(const EnvDelta& o) {
    for (const auto& [k, d] : o.changes) {
      auto it = std::lower_bound(changes.begin(), changes.end(), k,
                                 [](const auto& e, const Key& key) { return e.first < key; });
      if (it != changes.end() && it->first == k) {
        it->second += d;
        if (it->second == 0) changes.erase(it);
      } else {
        changes.insert(it, {k, d});
      }
    }
  }

  bool empty() const { return changes.empty(); }
};

// Pointwise application; nullopt when a count would drop below zero.
inline std::optional<Environment> merge(const Environment& env, const EnvDelta& delta) {
  if (delta.empty()) return env;
  std::vector<Environment::Entry> entries = env.entries();
  for (const auto& [k, d] : delta.changes) {
    auto it = std::lower_bound(entries.begin(), entries.end(), k,
                               [](const Environment::Entry& e, const Environment::Key& key) {
                                 return e.first < key;
                               });
    long long cur = (it != entries.end() && it->first == k) ? it->second : 0;
    long long next = cur + d;
    if (next < 0) return std::nullopt;
    if (it != entries.end() && it->first == k) {
      if (next == 0)
        entries.erase(it);
      else
        it->second = static_cast<std::uint32_t>(next);
    } else if (next > 0) {
      entries.insert(it, {k, static_cast<std::uint32_t>(next)});
    }
  }
  Environment out;
  return Environment::from_entries(std::move(entries));
}

inline std::optional<Environment> merge(const Environment& env,
                                        const std::vector<EnvDelta>& deltas) {
  EnvDelta sum;
  for (const auto& d : deltas) sum.add(d);
  return merge(env, sum);
}

// Census of a system term: every located individual with a live process
// counts once; species replicators and nil contribute nothing.
inline void census(const SystemTerm& s, std::vector<Environment::Entry>& acc) {
  switch (s.kind) {
    case SystemTerm::Kind::Nil:
    case SystemTerm::Kind::Species:
      return;
    case SystemTerm::Kind::Located:
      if (!s.proc->is_nil()) acc.push_back({{s.loc.v, s.species.v}, 1});
      return;
    case SystemTerm::Kind::Parallel:
      census(*s.left, acc);
      census(*s.right, acc);
      return;
    case SystemTerm::Kind::Restrict:
      census(*s.body, acc);
      return;
  }
}

inline Environment env_of(const SystemTerm& s) {
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
// myloc substitution: w[l/myloc], e[l/myloc]

inline ArithPtr subst_myloc(const ArithPtr& w, LocId l) {
  auto fix = [&](const LocRef& r) {
    return r.kind == LocRef::Kind::Here ? LocRef::concrete(l) : r;
  };
  using K = ArithExpr::Kind;
  switch (w->kind) {
    case K::Const:
    case K::Total:
      return w;
    case K::Attr:
      if (w->loc.kind != LocRef::Kind::Here) return w;
      return ArithExpr::make_attr(w->attr, fix(w->loc), w->span);
    case K::Count:
      if (w->loc.kind != LocRef::Kind::Here) return w;
      return ArithExpr::make_count(w->species, fix(w->loc), w->span);
    case K::PopAll:
      if (w->loc.kind != LocRef::Kind::Here) return w;
      return ArithExpr::make_popall(fix(w->loc), w->span);
    case K::Neg: {
      auto a = subst_myloc(w->lhs, l);
      return a == w->lhs ? w : ArithExpr::make_unary(K::Neg, a, w->span);
    }
    default: {
      auto a = subst_myloc(w->lhs, l);
      auto b = subst_myloc(w->rhs, l);
      return (a == w->lhs && b == w->rhs) ? w : ArithExpr::make_binary(w->kind, a, b, w->span);
    }
  }
}

inline BoolPtr subst_myloc(const BoolPtr& e, LocId l) {
  using K = BoolExpr::Kind;
  switch (e->kind) {
    case K::True:
      return e;
    case K::Not: {
      auto a = subst_myloc(e->lhs, l);
      return a == e->lhs ? e : BoolExpr::make_not(a, e->span);
    }
    case K::And: {
      auto a = subst_myloc(e->lhs, l);
      auto b = subst_myloc(e->rhs, l);
      return (a == e->lhs && b == e->rhs) ? e : BoolExpr::make_and(a, b, e->span);
    }
    case K::Cmp: {
      auto w = subst_myloc(e->cmp_lhs, l);
      return w == e->cmp_lhs ? e : BoolExpr::make_cmp(e->op, w, e->cmp_rhs, e->span);
    }
  }
  return e;
}

inline bool contains_myloc(const ArithPtr& w) {
  using K = ArithExpr::Kind;
  switch (w->kind) {
    case K::Const:
    case K::Total:
      return false;
    case K::Attr:
    case K::Count:
    case K::PopAll:
      return w->loc.kind == LocRef::Kind::Here;
    case K::Neg:
      return contains_myloc(w->lhs);
    default:
      return contains_myloc(w->lhs) || contains_myloc(w->rhs);
  }
}

inline bool contains_myloc(const BoolPtr& e) {
  using K = BoolExpr::Kind;
  switch (e->kind) {
    case K::True: return false;
    case K::Not: return contains_myloc(e->lhs);
    case K::And: return contains_myloc(e->lhs) || contains_myloc(e->rhs);
    case K::Cmp: return contains_myloc(e->cmp_lhs);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Expression evaluation against an environment (Tables of val and sat)

class Evaluator {
 public:
  explicit Evaluator(const Model& model) : model_(&model) {}

  Value eval(const Environment& env, const ArithExpr& w) const {
    using K = ArithExpr::Kind;
    switch (w.kind) {
      case K::Const:
        return w.constant;
      case K::Attr: {
        LocId l = resolve(w.loc, w.span);
        const auto& v = model_->habitat.attr_values[w.attr][l.v];
        if (!v)
          throw ModelError(w.span.str() + ": attribute '" +
                           model_->habitat.attributes[w.attr] + "' has no value at location '" +
                           model_->habitat.locations[l.v] + "'");
        return *v;
      }
      case K::Count:
        return Value::integer(env.num(resolve(w.loc, w.span), w.species));
      case K::PopAll:
        return Value::integer(env.num_all(resolve(w.loc, w.span)));
      case K::Total:
        return Value::integer(env.total(w.species));
      case K::Neg:
        return -eval(env, *w.lhs);
      case K::Add:
        return eval(env, *w.lhs) + eval(env, *w.rhs);
      case K::Sub:
        return eval(env, *w.lhs) - eval(env, *w.rhs);
      case K::Mul:
        return eval(env, *w.lhs) * eval(env, *w.rhs);
      case K::Div: {
        Value a = eval(env, *w.lhs), b = eval(env, *w.rhs);
        if (b.is_zero()) throw ModelError(w.span.str() + ": division by zero");
        return a / b;
      }
      case K::Pow:
        return eval(env, *w.lhs).pow(eval(env, *w.rhs));
    }
    throw InternalError("unreachable arithmetic kind");
  }

  bool sat(const Environment& env, const BoolExpr& e) const {
    using K = BoolExpr::Kind;
    switch (e.kind) {
      case K::True:
        return true;
      case K::Not:
        return !sat(env, *e.lhs);
      case K::And:
        return sat(env, *e.lhs) && sat(env, *e.rhs);
      case K::Cmp: {
        int c = eval(env, *e.cmp_lhs).compare(Value(e.cmp_rhs));
        switch (e.op) {
          case CmpOp::Eq: return c == 0;
          case CmpOp::Le: return c <= 0;
          case CmpOp::Ge: return c >= 0;
        }
      }
    }
    throw InternalError("unreachable boolean kind");
  }

 private:
  LocId resolve(const LocRef& r, const SourceSpan& sp) const {
    if (r.kind == LocRef::Kind::Concrete) return r.loc;
    if (r.kind == LocRef::Kind::Here)
      throw InternalError(sp.str() + ": unsubstituted 'here' reached evaluation");
    throw InternalError(sp.str() + ": unsubstituted location variable '" + r.var + "'");
  }

  const Model* model_;
};

}  // namespace palps

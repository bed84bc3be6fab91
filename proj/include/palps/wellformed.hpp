#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "palps/ast.hpp"
#include "palps/environment.hpp"

namespace palps {

// ---------------------------------------------------------------------------
// Location-variable substitution (used when a neighbor sum is expanded)

inline LocRef subst_var(const LocRef& r, const std::string& var, LocId l) {
  if (r.kind == LocRef::Kind::Var && r.var == var) return LocRef::concrete(l);
  return r;
}

inline ArithPtr subst_var(const ArithPtr& w, const std::string& var, LocId l) {
  using K = ArithExpr::Kind;
  switch (w->kind) {
    case K::Const:
    case K::Total:
      return w;
    case K::Attr: {
      auto r = subst_var(w->loc, var, l);
      return r == w->loc ? w : ArithExpr::make_attr(w->attr, r, w->span);
    }
    case K::Count: {
      auto r = subst_var(w->loc, var, l);
      return r == w->loc ? w : ArithExpr::make_count(w->species, r, w->span);
    }
    case K::PopAll: {
      auto r = subst_var(w->loc, var, l);
      return r == w->loc ? w : ArithExpr::make_popall(r, w->span);
    }
    case K::Neg: {
      auto a = subst_var(w->lhs, var, l);
      return a == w->lhs ? w : ArithExpr::make_unary(K::Neg, a, w->span);
    }
    default: {
      auto a = subst_var(w->lhs, var, l);
      auto b = subst_var(w->rhs, var, l);
      return (a == w->lhs && b == w->rhs) ? w : ArithExpr::make_binary(w->kind, a, b, w->span);
    }
  }
}

inline BoolPtr subst_var(const BoolPtr& e, const std::string& var, LocId l) {
  using K = BoolExpr::Kind;
  switch (e->kind) {
    case K::True:
      return e;
    case K::Not: {
      auto a = subst_var(e->lhs, var, l);
      return a == e->lhs ? e : BoolExpr::make_not(a, e->span);
    }
    case K::And: {
      auto a = subst_var(e->lhs, var, l);
      auto b = subst_var(e->rhs, var, l);
      return (a == e->lhs && b == e->rhs) ? e : BoolExpr::make_and(a, b, e->span);
    }
    case K::Cmp: {
      auto w = subst_var(e->cmp_lhs, var, l);
      return w == e->cmp_lhs ? e : BoolExpr::make_cmp(e->op, w, e->cmp_rhs, e->span);
    }
  }
  return e;
}

inline ProcPtr subst_var(const ProcPtr& p, const std::string& var, LocId l) {
  using K = ProcessTerm::Kind;
  switch (p->kind) {
    case K::Nil:
    case K::Const:
      return p;
    case K::Prefix: {
      Action a = p->action;
      if (a.kind == Action::Kind::Go) a.target = subst_var(a.target, var, l);
      auto cont = subst_var(p->cont, var, l);
      bool same = cont == p->cont &&
                  (p->action.kind != Action::Kind::Go || a.target == p->action.target);
      return same ? p : ProcessTerm::prefix(a, cont, p->span);
    }
    case K::PSum: {
      std::vector<PsumBranch> out;
      bool same = true;
      for (const auto& br : p->branches) {
        auto w = subst_var(br.weight, var, l);
        auto b = subst_var(br.body, var, l);
        same = same && w == br.weight && b == br.body;
        out.push_back({w, b});
      }
      return same ? p : ProcessTerm::psum(std::move(out), p->span);
    }
    case K::NeighborSum: {
      if (p->var == var) return p;  // inner binder shadows
      auto b = subst_var(p->body, var, l);
      return b == p->body ? p : ProcessTerm::neighbor_sum(p->nweight, p->var, b, p->span);
    }
    case K::Cond: {
      std::vector<CondBranch> out;
      bool same = true;
      for (const auto& br : p->conds) {
        auto g = subst_var(br.guard, var, l);
        auto b = subst_var(br.body, var, l);
        same = same && g == br.guard && b == br.body;
        out.push_back({g, b});
      }
      return same ? p : ProcessTerm::cond(std::move(out), p->span);
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Neighbor-sum elimination: one probabilistic branch per current neighbor.

inline ProcPtr expand_neighbor_sum(const ProcPtr& p, LocId at, const Habitat& habitat) {
  if (p->kind != ProcessTerm::Kind::NeighborSum)
    throw InternalError("expand_neighbor_sum on a non-neighbor-sum term");
  const auto& nbs = habitat.neighbors_of(at);
  if (nbs.empty())
    throw ModelError(p->span.str() + ": location '" + habitat.locations[at.v] +
                     "' has no neighbors");
  std::vector<PsumBranch> branches;
  branches.reserve(nbs.size());
  for (LocId n : nbs) {
    ArithPtr weight;
    if (p->nweight == NeighborWeight::Uniform) {
      auto r = Rational::make(1, static_cast<__int128>(nbs.size()));
      weight = ArithExpr::make_const(Value(*r), p->span);
    } else {
      const auto& cell = habitat.disp.empty() ? std::optional<Value>{} : habitat.disp[at.v][n.v];
      if (!cell)
        throw ModelError(p->span.str() + ": no dispersal probability from '" +
                         habitat.locations[at.v] + "' to '" + habitat.locations[n.v] + "'");
      weight = ArithExpr::make_const(*cell, p->span);
    }
    branches.push_back({weight, subst_var(p->body, p->var, n)});
  }
  return ProcessTerm::psum(std::move(branches), p->span);
}

// ---------------------------------------------------------------------------
// Static model checks

namespace detail {

struct WfState {
  const Model* model;
  std::vector<Diagnostic>* diags;

  void error(const SourceSpan& sp, std::string msg) {
    diags->push_back({Severity::Error, sp, std::move(msg)});
  }
  void warn(const SourceSpan& sp, std::string msg) {
    diags->push_back({Severity::Warning, sp, std::move(msg)});
  }
};

// walks every expression of a process, tracking bound location variables
template <typename FnA, typename FnB>
void walk_exprs(const ProcPtr& p, std::set<std::string> bound, FnA on_arith, FnB on_bool) {
  using K = ProcessTerm::Kind;
  switch (p->kind) {
    case K::Nil:
    case K::Const:
      return;
    case K::Prefix:
      if (p->action.kind == Action::Kind::Go) on_arith(nullptr, p->action.target, p->span, bound);
      walk_exprs(p->cont, bound, on_arith, on_bool);
      return;
    case K::PSum:
      for (const auto& br : p->branches) {
        on_arith(&br.weight, LocRef{}, p->span, bound);
        walk_exprs(br.body, bound, on_arith, on_bool);
      }
      return;
    case K::NeighborSum: {
      auto inner = bound;
      inner.insert(p->var);
      walk_exprs(p->body, inner, on_arith, on_bool);
      return;
    }
    case K::Cond:
      for (const auto& br : p->conds) {
        on_bool(br.guard, bound);
        walk_exprs(br.body, bound, on_arith, on_bool);
      }
      return;
  }
}

// constants reachable without passing an action prefix or probabilistic step
inline void unguarded_refs(const ProcPtr& p, std::set<std::uint32_t>& out) {
  using K = ProcessTerm::Kind;
  switch (p->kind) {
    case K::Nil:
    case K::Prefix:
    case K::PSum:
    case K::NeighborSum:
      return;
    case K::Cond:
      for (const auto& br : p->conds) unguarded_refs(br.body, out);
      return;
    case K::Const:
      out.insert(p->constant);
      return;
  }
}

inline void all_const_refs(const ProcPtr& p, std::set<std::uint32_t>& out) {
  using K = ProcessTerm::Kind;
  switch (p->kind) {
    case K::Nil:
      return;
    case K::Prefix:
      all_const_refs(p->cont, out);
      return;
    case K::PSum:
      for (const auto& br : p->branches) all_const_refs(br.body, out);
      return;
    case K::NeighborSum:
      all_const_refs(p->body, out);
      return;
    case K::Cond:
      for (const auto& br : p->conds) all_const_refs(br.body, out);
      return;
    case K::Const:
      out.insert(p->constant);
      return;
  }
}

}  // namespace detail

// Empty result means the model satisfies every static invariant; warnings
// flag constructs that are legal but usually modeling mistakes.
inline std::vector<Diagnostic> check_wellformed(const Model& model) {
  std::vector<Diagnostic> diags;
  detail::WfState st{&model, &diags};
  const Habitat& hab = model.habitat;

  for (std::uint32_t l = 0; l < hab.locations.size(); ++l)
    if (hab.neighbors(LocId{l}, LocId{l}))
      st.error({}, "self-neighbor " + hab.locations[l]);

  for (std::uint32_t c = 0; c < model.constants.size(); ++c)
    if (!model.constants[c].body)
      st.error(model.constants[c].span, "undefined constant " + model.constants[c].name);

  // attribute coverage + free variables, over every process body in the model
  auto check_arith_leaf = [&](const ArithPtr* w, const LocRef& go_target, const SourceSpan& sp,
                              const std::set<std::string>& bound) {
    std::function<void(const ArithPtr&)> rec = [&](const ArithPtr& e) {
      using K = ArithExpr::Kind;
      switch (e->kind) {
        case K::Const:
        case K::Total:
          return;
        case K::Attr:
        case K::Count:
        case K::PopAll: {
          if (e->loc.kind == LocRef::Kind::Var && !bound.count(e->loc.var))
            st.error(e->span, "unbound location variable '" + e->loc.var + "'");
          if (e->kind == K::Attr) {
            const auto& vals = hab.attr_values[e->attr];
            if (e->loc.kind == LocRef::Kind::Concrete) {
              if (!vals[e->loc.loc.v])
                st.error(e->span, "attribute '" + hab.attributes[e->attr] +
                                      "' has no value at location '" +
                                      hab.locations[e->loc.loc.v] + "'");
            } else {
              for (std::uint32_t l = 0; l < hab.locations.size(); ++l)
                if (!vals[l])
                  st.error(e->span, "attribute '" + hab.attributes[e->attr] +
                                        "' has no value at location '" + hab.locations[l] +
                                        "' (referenced through a symbolic location)");
            }
          }
          return;
        }
        case K::Neg:
          rec(e->lhs);
          return;
        default:
          rec(e->lhs);
          rec(e->rhs);
          return;
      }
    };
    if (w && *w) rec(*w);
    if (!w) {  // go target
      if (go_target.kind == LocRef::Kind::Var && !bound.count(go_target.var))
        st.error(sp, "unbound location variable '" + go_target.var + "'");
      if (go_target.kind == LocRef::Kind::Concrete &&
          hab.neighbors_of(go_target.loc).empty())
        st.warn(sp, "go target '" + hab.locations[go_target.loc.v] +
                        "' is not a neighbor of any location; the step can never fire");
      if (go_target.kind == LocRef::Kind::Here)
        st.error(sp, "'go here' is not a move");
    }
  };
  auto check_bool = [&](const BoolPtr& e, const std::set<std::string>& bound) {
    std::function<void(const BoolPtr&)> rec = [&](const BoolPtr& b) {
      using K = BoolExpr::Kind;
      switch (b->kind) {
        case K::True:
          return;
        case K::Not:
          rec(b->lhs);
          return;
        case K::And:
          rec(b->lhs);
          rec(b->rhs);
          return;
        case K::Cmp:
          check_arith_leaf(&b->cmp_lhs, LocRef{}, b->span, bound);
          return;
      }
    };
    rec(e);
  };

  // lint: a cond whose last guard is not literally `true` can deadlock
  std::function<void(const ProcPtr&)> lint_conds = [&](const ProcPtr& p) {
    using K = ProcessTerm::Kind;
    switch (p->kind) {
      case K::Nil:
      case K::Const:
        return;
      case K::Prefix:
        lint_conds(p->cont);
        return;
      case K::PSum:
        for (const auto& br : p->branches) lint_conds(br.body);
        return;
      case K::NeighborSum:
        lint_conds(p->body);
        return;
      case K::Cond: {
        if (p->conds.empty()) {
          st.error(p->span, "cond with no branches");
        } else if (p->conds.back().guard->kind != BoolExpr::Kind::True) {
          st.warn(p->span, "cond without a final 'true' branch can leave the individual stuck");
        }
        for (const auto& br : p->conds) lint_conds(br.body);
        return;
      }
    }
  };

  std::vector<std::pair<ProcPtr, std::string>> bodies;
  for (const auto& c : model.constants)
    if (c.body) bodies.push_back({c.body, "constant " + c.name});
  for (const auto& s : model.species)
    if (s.body) bodies.push_back({s.body, "species " + s.name});
  std::function<void(const SysPtr&)> collect_sys = [&](const SysPtr& s) {
    switch (s->kind) {
      case SystemTerm::Kind::Located:
        bodies.push_back({s->proc, "located individual"});
        return;
      case SystemTerm::Kind::Species: {
        if (!model.species[s->species.v].body)
          st.error(s->span, "species '" + model.species[s->species.v].name +
                                "' is used as a replicator but has no body");
        return;
      }
      case SystemTerm::Kind::Parallel:
        collect_sys(s->left);
        collect_sys(s->right);
        return;
      case SystemTerm::Kind::Restrict:
        collect_sys(s->body);
        return;
      case SystemTerm::Kind::Nil:
        return;
    }
  };
  if (model.system) collect_sys(model.system);

  for (const auto& [body, where] : bodies) {
    detail::walk_exprs(body, {}, check_arith_leaf, check_bool);
    lint_conds(body);
    if (body->kind == ProcessTerm::Kind::PSum && body->branches.empty())
      st.error(body->span, "probabilistic sum with no branches");
  }

  // unguarded recursion through constants
  {
    std::vector<std::set<std::uint32_t>> edges(model.constants.size());
    for (std::uint32_t c = 0; c < model.constants.size(); ++c)
      if (model.constants[c].body) detail::unguarded_refs(model.constants[c].body, edges[c]);
    std::vector<int> mark(model.constants.size(), 0);  // 0 new, 1 on stack, 2 done
    std::function<bool(std::uint32_t)> dfs = [&](std::uint32_t c) -> bool {
      if (mark[c] == 1) return true;
      if (mark[c] == 2) return false;
      mark[c] = 1;
      for (auto d : edges[c])
        if (dfs(d)) {
          mark[c] = 2;
          return true;
        }
      mark[c] = 2;
      return false;
    };
    for (std::uint32_t c = 0; c < model.constants.size(); ++c) {
      std::fill(mark.begin(), mark.end(), 0);
      if (model.constants[c].body && dfs(c) && mark[c] == 2 && edges[c].size() > 0) {
        // re-run to confirm the cycle passes through c itself
        std::fill(mark.begin(), mark.end(), 0);
        std::function<bool(std::uint32_t)> reaches = [&](std::uint32_t d) -> bool {
          if (mark[d]) return false;
          mark[d] = 1;
          if (edges[d].count(c)) return true;
          for (auto e : edges[d])
            if (reaches(e)) return true;
          return false;
        };
        if (edges[c].count(c) || reaches(c))
          st.error(model.constants[c].span,
                   "unguarded recursion through constant " + model.constants[c].name);
      }
    }
  }

  return diags;
}

}  // namespace palps

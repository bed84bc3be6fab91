#pragma once

#include <sstream>
#include <string>

#include "palps/ast.hpp"
#include "palps/pctl_formula.hpp"

namespace palps {

// Pretty-printing back to the concrete syntax. Output reparses to a
// structurally equal model (grid and multiplicity sugar print expanded).

namespace detail {

inline std::string loc_str(const Model& m, const LocRef& r) {
  switch (r.kind) {
    case LocRef::Kind::Here: return "here";
    case LocRef::Kind::Var: return r.var;
    case LocRef::Kind::Concrete: return m.habitat.locations[r.loc.v];
  }
  return "?";
}

// precedence: 1 add/sub, 2 mul/div, 3 pow, 4 unary
inline int arith_prec(ArithExpr::Kind k) {
  using K = ArithExpr::Kind;
  switch (k) {
    case K::Add: case K::Sub: return 1;
    case K::Mul: case K::Div: return 2;
    case K::Pow: return 3;
    case K::Neg: return 4;
    default: return 5;
  }
}

inline std::string arith_str(const Model& m, const ArithPtr& w, int parent_prec = 0) {
  using K = ArithExpr::Kind;
  std::string s;
  int prec = arith_prec(w->kind);
  switch (w->kind) {
    case K::Const: {
      if (w->constant.exact() && w->constant.rat().num < 0) {
        Value pos = -w->constant;
        s = "-" + pos.str();
        prec = 4;
      } else {
        s = w->constant.str();
        if (w->constant.exact() && !w->constant.rat().is_integer()) prec = 2;  // "1/4"
      }
      break;
    }
    case K::Attr:
      s = "attr(" + m.habitat.attributes[w->attr] + ", " + loc_str(m, w->loc) + ")";
      break;
    case K::Count:
      s = "count(" + m.species_name(w->species) + ", " + loc_str(m, w->loc) + ")";
      break;
    case K::PopAll:
      s = "pop(" + loc_str(m, w->loc) + ")";
      break;
    case K::Total:
      s = "total(" + m.species_name(w->species) + ")";
      break;
    case K::Neg:
      s = "-" + arith_str(m, w->lhs, prec);
      break;
    case K::Add:
      s = arith_str(m, w->lhs, prec - 1) + " + " + arith_str(m, w->rhs, prec);
      break;
    case K::Sub:
      s = arith_str(m, w->lhs, prec - 1) + " - " + arith_str(m, w->rhs, prec);
      break;
    case K::Mul:
      s = arith_str(m, w->lhs, prec - 1) + " * " + arith_str(m, w->rhs, prec);
      break;
    case K::Div:
      s = arith_str(m, w->lhs, prec - 1) + " / " + arith_str(m, w->rhs, prec);
      break;
    case K::Pow:
      s = arith_str(m, w->lhs, prec) + " ^ " + arith_str(m, w->rhs, prec - 1);
      break;
  }
  if (prec < parent_prec || (prec == parent_prec && parent_prec > 0)) return "(" + s + ")";
  return s;
}

inline std::string cmp_str(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "==";
    case CmpOp::Le: return "<=";
    case CmpOp::Ge: return ">=";
  }
  return "?";
}

inline std::string bool_str(const Model& m, const BoolPtr& e, bool parens_around_and = false) {
  using K = BoolExpr::Kind;
  switch (e->kind) {
    case K::True:
      return "true";
    case K::Not: {
      const BoolPtr& a = e->lhs;
      if (a->kind == K::True || a->kind == K::Not)
        return "!" + bool_str(m, a);
      return "!(" + bool_str(m, a) + ")";
    }
    case K::And: {
      std::string s = bool_str(m, e->lhs) + " && " + bool_str(m, e->rhs, true);
      return parens_around_and ? "(" + s + ")" : s;
    }
    case K::Cmp:
      return arith_str(m, e->cmp_lhs, 1) + " " + cmp_str(e->op) + " " +
             (e->cmp_rhs.exact() && e->cmp_rhs.rat().num < 0 ? "(-" + (-e->cmp_rhs).str() + ")"
                                                             : e->cmp_rhs.str());
  }
  return "?";
}

inline std::string proc_str(const Model& m, const ProcPtr& p) {
  using K = ProcessTerm::Kind;
  switch (p->kind) {
    case K::Nil:
      return "0";
    case K::Prefix: {
      std::string act;
      switch (p->action.kind) {
        case Action::Kind::Tick: act = "tick"; break;
        case Action::Kind::Input: act = m.channel_name(p->action.chan); break;
        case Action::Kind::Output: act = "out " + m.channel_name(p->action.chan); break;
        case Action::Kind::Go: act = "go " + loc_str(m, p->action.target); break;
      }
      return act + "." + proc_str(m, p->cont);
    }
    case K::PSum: {
      std::string s = "sum { ";
      for (size_t i = 0; i < p->branches.size(); ++i) {
        if (i) s += " + ";
        s += arith_str(m, p->branches[i].weight) + ": " + proc_str(m, p->branches[i].body);
      }
      return s + " }";
    }
    case K::NeighborSum:
      return "sum over " + p->var + " in neigh(here) { " +
             (p->nweight == NeighborWeight::Uniform ? "uniform" : "disptable") + ": " +
             proc_str(m, p->body) + " }";
    case K::Cond: {
      std::string s = "cond(";
      for (size_t i = 0; i < p->conds.size(); ++i) {
        if (i) s += ", ";
        s += bool_str(m, p->conds[i].guard) + " -> " + proc_str(m, p->conds[i].body);
      }
      return s + ")";
    }
    case K::Const:
      return m.constants[p->constant].name;
  }
  return "?";
}

inline std::string system_str(const Model& m, const SysPtr& s, bool top) {
  using K = SystemTerm::Kind;
  switch (s->kind) {
    case K::Nil:
      return "0";
    case K::Located: {
      std::string proc;
      if (s->proc->kind == ProcessTerm::Kind::Const)
        proc = m.constants[s->proc->constant].name;
      else if (s->proc->is_nil())
        proc = "0";
      else
        proc = "(" + proc_str(m, s->proc) + ")";
      return proc + "@(" + m.location_name(s->loc) + ", " + m.species_name(s->species) + ")";
    }
    case K::Species:
      return "species " + m.species_name(s->species);
    case K::Parallel: {
      std::string l = system_str(m, s->left, false);
      std::string r = system_str(m, s->right, false);
      if (s->left->kind == K::Restrict) l = "(" + l + ")";
      if (s->right->kind == K::Parallel || s->right->kind == K::Restrict) r = "(" + r + ")";
      return l + " | " + r;
    }
    case K::Restrict: {
      std::string inner = system_str(m, s->body, false);
      std::string chans;
      for (size_t i = 0; i < s->restricted.size(); ++i) {
        if (i) chans += ", ";
        chans += m.channel_name(s->restricted[i]);
      }
      std::string out = inner + " restrict { " + chans + " }";
      return top ? out : "(" + out + ")";
    }
  }
  return "?";
}

}  // namespace detail

inline std::string pretty(const Model& m, const ProcPtr& p) { return detail::proc_str(m, p); }
inline std::string pretty(const Model& m, const ArithPtr& w) { return detail::arith_str(m, w); }
inline std::string pretty(const Model& m, const BoolPtr& e) { return detail::bool_str(m, e); }
inline std::string pretty_system(const Model& m, const SysPtr& s) {
  return detail::system_str(m, s, true);
}

inline std::string pretty(const Model& m) {
  std::ostringstream out;
  if (!m.habitat.locations.empty()) {
    out << "locations { ";
    for (size_t i = 0; i < m.habitat.locations.size(); ++i)
      out << (i ? ", " : "") << m.habitat.locations[i];
    out << " }\n";
  }
  {
    std::string edges;
    for (std::uint32_t a = 0; a < m.habitat.locations.size(); ++a)
      for (LocId b : m.habitat.adjacency[a])
        if (a <= b.v) {
          if (!edges.empty()) edges += ", ";
          edges += m.habitat.locations[a] + " -- " + m.habitat.locations[b.v];
        }
    if (!edges.empty()) out << "neighbors { " << edges << " }\n";
  }
  for (std::uint32_t a = 0; a < m.habitat.attributes.size(); ++a) {
    std::string vals;
    for (std::uint32_t l = 0; l < m.habitat.locations.size(); ++l)
      if (m.habitat.attr_values[a][l]) {
        if (!vals.empty()) vals += ", ";
        vals += m.habitat.locations[l] + ": " + m.habitat.attr_values[a][l]->str();
      }
    if (!vals.empty())
      out << "attribute " << m.habitat.attributes[a] << " { " << vals << " }\n";
  }
  if (!m.habitat.disp.empty()) {
    std::string cells;
    for (std::uint32_t i = 0; i < m.habitat.locations.size(); ++i)
      for (std::uint32_t j = 0; j < m.habitat.locations.size(); ++j)
        if (m.habitat.disp[i][j]) {
          if (!cells.empty()) cells += ", ";
          cells += m.habitat.locations[i] + " -> " + m.habitat.locations[j] + ": " +
                   m.habitat.disp[i][j]->str();
        }
    if (!cells.empty()) out << "disptable { " << cells << " }\n";
  }
  // declaration blocks pin the interning order so a reparse reproduces the
  // same indices whatever order the original file introduced names in
  for (const auto& s : m.species) out << "species " << s.name << "\n";
  for (const auto& c : m.constants) out << "process " << c.name << "\n";
  for (const auto& c : m.constants)
    if (c.body) out << "process " << c.name << " = " << detail::proc_str(m, c.body) << "\n";
  for (const auto& s : m.species)
    if (s.body) out << "species " << s.name << " = " << detail::proc_str(m, s.body) << "\n";
  if (m.system && m.system->kind != SystemTerm::Kind::Nil)
    out << "system = " << detail::system_str(m, m.system, true) << "\n";
  return out.str();
}

inline std::string pretty(const Model& m, const FormulaPtr& f) {
  using K = PctlFormula::Kind;
  switch (f->kind) {
    case K::True:
      return "true";
    case K::Atom:
      return detail::bool_str(m, f->atom);
    case K::Not: {
      if (f->lhs->kind == K::True || f->lhs->kind == K::Not || f->lhs->kind == K::Prob)
        return "!" + pretty(m, f->lhs);
      return "!(" + pretty(m, f->lhs) + ")";
    }
    case K::And: {
      auto side = [&](const FormulaPtr& g) {
        std::string s = pretty(m, g);
        return g->kind == K::And ? "(" + s + ")" : s;
      };
      return side(f->lhs) + " && " + side(f->rhs);
    }
    case K::Prob: {
      std::string op = f->bound_op == ProbBound::Le ? "<=" : f->bound_op == ProbBound::Ge ? ">=" : "==";
      std::string path;
      switch (f->path) {
        case PctlFormula::Path::Next:
          path = "X " + pretty(m, f->p1);
          break;
        case PctlFormula::Path::Until:
          path = pretty(m, f->p1) + " U " + pretty(m, f->p2);
          break;
        case PctlFormula::Path::BoundedUntil:
          path = pretty(m, f->p1) + " U{<=" + std::to_string(f->steps) + "} " + pretty(m, f->p2);
          break;
      }
      return "P" + op + f->bound.str() + " [ " + path + " ]";
    }
  }
  return "?";
}

}  // namespace palps

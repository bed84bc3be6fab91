#pragma once

#include <memory>
#include <string>
#include <vector>

#include "palps/ast.hpp"

namespace palps {

// PCTL over population expressions: state formulas down to comparisons on
// the environment, path formulas X / bounded U / U, with the until bound
// counted in clock ticks rather than transitions.
struct PctlFormula;
using FormulaPtr = std::shared_ptr<const PctlFormula>;

enum class ProbBound { Le, Ge, Eq };

struct PctlFormula {
  enum class Kind { True, Atom, Not, And, Prob };
  enum class Path { Next, BoundedUntil, Until };

  Kind kind = Kind::True;
  BoolPtr atom;          // Atom
  FormulaPtr lhs, rhs;   // Not uses lhs

  // Prob
  ProbBound bound_op = ProbBound::Le;
  Value bound;
  Path path = Path::Next;
  FormulaPtr p1, p2;     // Next uses p1
  int steps = 0;         // BoundedUntil

  SourceSpan span;

  static FormulaPtr make_true(SourceSpan sp = {}) {
    auto f = std::make_shared<PctlFormula>();
    f->kind = Kind::True;
    f->span = std::move(sp);
    return f;
  }
  static FormulaPtr make_atom(BoolPtr e, SourceSpan sp = {}) {
    auto f = std::make_shared<PctlFormula>();
    f->kind = Kind::Atom;
    f->atom = std::move(e);
    f->span = std::move(sp);
    return f;
  }
  static FormulaPtr make_not(FormulaPtr a, SourceSpan sp = {}) {
    auto f = std::make_shared<PctlFormula>();
    f->kind = Kind::Not;
    f->lhs = std::move(a);
    f->span = std::move(sp);
    return f;
  }
  static FormulaPtr make_and(FormulaPtr a, FormulaPtr b, SourceSpan sp = {}) {
    auto f = std::make_shared<PctlFormula>();
    f->kind = Kind::And;
    f->lhs = std::move(a);
    f->rhs = std::move(b);
    f->span = std::move(sp);
    return f;
  }
  static FormulaPtr make_next(ProbBound op, Value p, FormulaPtr inner, SourceSpan sp = {}) {
    auto f = std::make_shared<PctlFormula>();
    f->kind = Kind::Prob;
    f->bound_op = op;
    f->bound = p;
    f->path = Path::Next;
    f->p1 = std::move(inner);
    f->span = std::move(sp);
    return f;
  }
  static FormulaPtr make_until(ProbBound op, Value p, FormulaPtr a, FormulaPtr b,
                               SourceSpan sp = {}) {
    auto f = std::make_shared<PctlFormula>();
    f->kind = Kind::Prob;
    f->bound_op = op;
    f->bound = p;
    f->path = Path::Until;
    f->p1 = std::move(a);
    f->p2 = std::move(b);
    f->span = std::move(sp);
    return f;
  }
  static FormulaPtr make_bounded_until(ProbBound op, Value p, FormulaPtr a, FormulaPtr b, int k,
                                       SourceSpan sp = {}) {
    auto f = std::make_shared<PctlFormula>();
    f->kind = Kind::Prob;
    f->bound_op = op;
    f->bound = p;
    f->path = Path::BoundedUntil;
    f->p1 = std::move(a);
    f->p2 = std::move(b);
    f->steps = k;
    f->span = std::move(sp);
    return f;
  }
};

// collects the boolean atoms of a formula (dedup by structural equality)
inline void collect_atoms(const FormulaPtr& f, std::vector<BoolPtr>& out) {
  if (!f) return;
  if (f->kind == PctlFormula::Kind::Atom) {
    for (const auto& e : out)
      if (equal(e, f->atom)) return;
    out.push_back(f->atom);
    return;
  }
  collect_atoms(f->lhs, out);
  collect_atoms(f->rhs, out);
  collect_atoms(f->p1, out);
  collect_atoms(f->p2, out);
}

}  // namespace palps

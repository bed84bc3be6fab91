#pragma once

#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "palps/ast.hpp"
#include "palps/pctl_formula.hpp"
#include "palps/wellformed.hpp"

namespace palps {

// ---------------------------------------------------------------------------
// Lexer

namespace lex {

enum class Tok { Ident, Number, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourceSpan span;
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) { return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

inline std::vector<Token> tokenize(const std::string& text, const std::string& file) {
  static const char* puncts[] = {"->", "--", "==", "<=", ">=", "!=", "&&", "||",
                                 "{",  "}",  "(",  ")",  "[",  "]",  ",",  ":",
                                 ".",  "|",  "@",  "+",  "-",  "*",  "/",  "^",
                                 "=",  "<",  ">",  "!"};
  std::vector<Token> out;
  size_t i = 0;
  int line = 1, col = 1;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (text[i + k] == '\n') { ++line; col = 1; } else { ++col; }
    }
    i += n;
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    SourceSpan sp{file, line, col, 1};
    if (ident_start(c)) {
      size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      sp.length = static_cast<int>(j - i);
      out.push_back({Tok::Ident, text.substr(i, j - i), sp});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && text[j] == '.' && j + 1 < text.size() &&
          std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
        ++j;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      }
      sp.length = static_cast<int>(j - i);
      out.push_back({Tok::Number, text.substr(i, j - i), sp});
      advance(j - i);
      continue;
    }
    bool matched = false;
    for (const char* p : puncts) {
      size_t n = std::string::traits_type::length(p);
      if (text.compare(i, n, p) == 0) {
        sp.length = static_cast<int>(n);
        out.push_back({Tok::Punct, p, sp});
        advance(n);
        matched = true;
        break;
      }
    }
    if (!matched) throw ParseError(sp, std::string("unexpected character '") + c + "'");
  }
  out.push_back({Tok::End, "", SourceSpan{file, line, col, 0}});
  return out;
}

}  // namespace lex

// ---------------------------------------------------------------------------
// Parser

namespace detail {

inline const std::set<std::string>& reserved_words() {
  static const std::set<std::string> words = {
      "locations", "grid",   "neighbors", "attribute", "disptable", "const",  "species",
      "process",   "system", "restrict",  "sum",       "over",      "in",     "neigh",
      "here",      "cond",   "out",       "go",        "tick",      "true",   "of",
      "torus",     "bounded", "uniform",  "count",     "pop",       "attr",   "total"};
  return words;
}

class Parser {
 public:
  Parser(const std::string& text, const std::string& file)
      : toks_(lex::tokenize(text, file)) {}

  // ----- model ------------------------------------------------------------

  Model parse_model() {
    Model m;
    model_ = &m;
    bool saw_system = false;
    while (!at_end()) {
      if (accept_ident("locations")) {
        expect("{");
        do {
          m.habitat.add_location(expect_name("location name"));
        } while (accept(","));
        expect("}");
      } else if (accept_ident("grid")) {
        parse_grid(m);
      } else if (accept_ident("neighbors")) {
        expect("{");
        do {
          LocId a = expect_location();
          expect("--");
          LocId b = expect_location();
          m.habitat.add_edge(a, b);
        } while (accept(","));
        expect("}");
      } else if (accept_ident("attribute")) {
        std::string name = expect_name("attribute name");
        std::uint32_t attr = m.habitat.add_attribute(name);
        expect("{");
        do {
          LocId l = expect_location();
          expect(":");
          m.habitat.attr_values[attr][l.v] = parse_const_value();
        } while (accept(","));
        expect("}");
      } else if (accept_ident("disptable")) {
        if (m.habitat.disp.empty())
          m.habitat.disp.assign(m.habitat.locations.size(),
                                std::vector<std::optional<Value>>(m.habitat.locations.size()));
        expect("{");
        do {
          LocId from = expect_location();
          expect("->");
          LocId to = expect_location();
          expect(":");
          m.habitat.disp[from.v][to.v] = parse_const_value();
        } while (accept(","));
        expect("}");
      } else if (accept_ident("const")) {
        std::string name = expect_name("parameter name");
        expect("=");
        params_[name] = parse_const_value();
      } else if (accept_ident("species")) {
        SourceSpan sp = here_span();
        std::string name = expect_name("species name");
        SpecId id = m.add_species(name);
        m.species[id.v].span = sp;
        if (accept("=")) {
          if (m.species[id.v].body)
            throw ParseError(sp, "species '" + name + "' already has a body");
          m.species[id.v].body = parse_process();
        }
      } else if (accept_ident("process")) {
        SourceSpan sp = here_span();
        std::string name = expect_name("process constant name");
        std::uint32_t idx = intern_constant(name, sp);
        if (accept("=")) {
          if (m.constants[idx].body)
            throw ParseError(sp, "process constant '" + name + "' already defined");
          m.constants[idx].body = parse_process();
          m.constants[idx].span = sp;
        }  // a bare name is a forward declaration
      } else if (accept_ident("system")) {
        if (saw_system) throw ParseError(here_span(), "duplicate system section");
        expect("=");
        m.system = parse_system();
        saw_system = true;
      } else {
        throw ParseError(here_span(), "expected a model section",
                         {"locations", "grid", "neighbors", "attribute", "disptable", "const",
                          "species", "process", "system"});
      }
    }
    if (!saw_system) m.system = SystemTerm::nil();
    return m;
  }

  // ----- formulas -----------------------------------------------------------

  FormulaPtr parse_formula(const Model& model) {
    model_ = const_cast<Model*>(&model);
    formula_mode_ = true;
    FormulaPtr f = parse_state_formula();
    if (!at_end()) throw ParseError(here_span(), "trailing input after formula");
    return f;
  }

  std::vector<FormulaPtr> parse_formula_file(const Model& model) {
    model_ = const_cast<Model*>(&model);
    formula_mode_ = true;
    std::vector<FormulaPtr> out;
    while (!at_end()) out.push_back(parse_state_formula());
    return out;
  }

 private:
  // ----- token plumbing -----------------------------------------------------

  const lex::Token& cur() const { return toks_[pos_]; }
  bool at_end() const { return cur().kind == lex::Tok::End; }
  SourceSpan here_span() const { return cur().span; }

  bool accept(const std::string& punct) {
    if (cur().kind == lex::Tok::Punct && cur().text == punct) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool peek(const std::string& punct) const {
    return cur().kind == lex::Tok::Punct && cur().text == punct;
  }
  bool peek_ident(const std::string& word) const {
    return cur().kind == lex::Tok::Ident && cur().text == word;
  }
  bool accept_ident(const std::string& word) {
    if (peek_ident(word)) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(const std::string& punct) {
    if (!accept(punct))
      throw ParseError(here_span(), "expected '" + punct + "'", {punct});
  }
  void expect_ident(const std::string& word) {
    if (!accept_ident(word))
      throw ParseError(here_span(), "expected '" + word + "'", {word});
  }

  std::string expect_name(const std::string& what) {
    if (cur().kind != lex::Tok::Ident)
      throw ParseError(here_span(), "expected " + what, {"identifier"});
    if (detail::reserved_words().count(cur().text))
      throw ParseError(here_span(), "'" + cur().text + "' is reserved and cannot name a " + what);
    return toks_[pos_++].text;
  }

  LocId expect_location() {
    SourceSpan sp = here_span();
    std::string name = expect_name("location name");
    auto l = model_->habitat.find_location(name);
    if (!l) throw ParseError(sp, "unknown location '" + name + "'");
    return *l;
  }

  SpecId expect_species() {
    SourceSpan sp = here_span();
    std::string name = expect_name("species name");
    auto it = model_->species_index.find(name);
    if (it == model_->species_index.end())
      throw ParseError(sp, "unknown species '" + name + "'");
    return SpecId{it->second};
  }

  std::uint32_t intern_constant(const std::string& name, SourceSpan sp) {
    auto it = model_->constant_index.find(name);
    if (it != model_->constant_index.end()) return it->second;
    std::uint32_t idx = static_cast<std::uint32_t>(model_->constants.size());
    model_->constants.push_back(ConstantDef{name, nullptr, sp});
    model_->constant_index.emplace(name, idx);
    return idx;
  }

  // ----- habitat helpers ----------------------------------------------------

  void parse_grid(Model& m) {
    expect("(");
    int nx = parse_int("grid width");
    expect(",");
    int ny = parse_int("grid height");
    expect(",");
    bool torus;
    if (accept_ident("torus"))
      torus = true;
    else if (accept_ident("bounded"))
      torus = false;
    else
      throw ParseError(here_span(), "expected 'torus' or 'bounded'", {"torus", "bounded"});
    expect(")");
    if (nx < 1 || ny < 1) throw ParseError(here_span(), "grid dimensions must be positive");
    auto name = [&](int x, int y) { return "l" + std::to_string(x) + "_" + std::to_string(y); };
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) m.habitat.add_location(name(x, y));
    auto at = [&](int x, int y) { return *m.habitat.find_location(name(x, y)); };
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        // east and south edges; torus wraps, bounded clips
        int ex = x + 1, sy = y + 1;
        if (ex < nx)
          m.habitat.add_edge(at(x, y), at(ex, y));
        else if (torus && nx > 1 && at(0, y) != at(x, y))
          m.habitat.add_edge(at(x, y), at(0, y));
        if (sy < ny)
          m.habitat.add_edge(at(x, y), at(x, sy));
        else if (torus && ny > 1 && at(x, 0) != at(x, y))
          m.habitat.add_edge(at(x, y), at(x, 0));
      }
  }

  int parse_int(const std::string& what) {
    if (cur().kind != lex::Tok::Number || cur().text.find('.') != std::string::npos)
      throw ParseError(here_span(), "expected integer " + what, {"integer"});
    return std::stoi(toks_[pos_++].text);
  }

  // constant numeric expression, folded to a Value
  Value parse_const_value() {
    SourceSpan sp = here_span();
    ArithPtr e = parse_arith({});
    if (e->kind != ArithExpr::Kind::Const)
      throw ParseError(sp, "expected a constant numeric expression");
    return e->constant;
  }

  // ----- processes ----------------------------------------------------------

  ProcPtr parse_process() { return parse_process_inner({}); }

  ProcPtr parse_process_inner(std::set<std::string> bound) {
    SourceSpan sp = here_span();
    if (cur().kind == lex::Tok::Number && cur().text == "0") {
      ++pos_;
      return ProcessTerm::nil(sp);
    }
    if (accept("(")) {
      ProcPtr p = parse_process_inner(bound);
      expect(")");
      return p;
    }
    if (accept_ident("tick")) {
      expect(".");
      return ProcessTerm::prefix(Action::tick(), parse_process_inner(bound), sp);
    }
    if (accept_ident("out")) {
      ChanId c = parse_channel();
      expect(".");
      return ProcessTerm::prefix(Action::output(c), parse_process_inner(bound), sp);
    }
    if (accept_ident("in")) {
      ChanId c = parse_channel();
      expect(".");
      return ProcessTerm::prefix(Action::input(c), parse_process_inner(bound), sp);
    }
    if (accept_ident("go")) {
      LocRef target = parse_loc_token(bound, /*allow_here=*/false);
      expect(".");
      return ProcessTerm::prefix(Action::go(target), parse_process_inner(bound), sp);
    }
    if (accept_ident("sum")) {
      if (accept_ident("over")) {
        std::string var = expect_name("location variable");
        expect_ident("in");
        expect_ident("neigh");
        expect("(");
        expect_ident("here");
        expect(")");
        expect("{");
        NeighborWeight w;
        if (accept_ident("uniform"))
          w = NeighborWeight::Uniform;
        else if (accept_ident("disptable"))
          w = NeighborWeight::Table;
        else
          throw ParseError(here_span(), "expected 'uniform' or 'disptable'",
                           {"uniform", "disptable"});
        expect(":");
        auto inner = bound;
        inner.insert(var);
        ProcPtr body = parse_process_inner(inner);
        expect("}");
        return ProcessTerm::neighbor_sum(w, var, body, sp);
      }
      expect("{");
      std::vector<PsumBranch> branches;
      do {
        ArithPtr w = parse_arith(bound);
        expect(":");
        branches.push_back({w, parse_process_inner(bound)});
      } while (accept("+"));
      expect("}");
      if (branches.empty()) throw ParseError(sp, "probabilistic sum needs at least one branch");
      return ProcessTerm::psum(std::move(branches), sp);
    }
    if (accept_ident("cond")) {
      expect("(");
      std::vector<CondBranch> branches;
      do {
        BoolPtr guard = parse_bool(bound);
        expect("->");
        branches.push_back({guard, parse_process_inner(bound)});
      } while (accept(","));
      expect(")");
      return ProcessTerm::cond(std::move(branches), sp);
    }
    if (cur().kind == lex::Tok::Ident) {
      std::string name = expect_name("process");
      // identifier followed by '.' is an input prefix, otherwise a constant
      if (accept(".")) {
        ChanId c = model_->intern_channel(name);
        return ProcessTerm::prefix(Action::input(c), parse_process_inner(bound), sp);
      }
      return ProcessTerm::constant_ref(intern_constant(name, sp), sp);
    }
    throw ParseError(sp, "expected a process",
                     {"0", "tick", "out", "in", "go", "sum", "cond", "identifier", "("});
  }

  ChanId parse_channel() {
    std::string name = expect_name("channel name");
    return model_->intern_channel(name);
  }

  LocRef parse_loc_token(const std::set<std::string>& bound, bool allow_here) {
    SourceSpan sp = here_span();
    if (accept_ident("here")) {
      if (!allow_here) throw ParseError(sp, "'here' is not allowed in this position");
      if (formula_mode_)
        throw ParseError(sp, "'here' has no referent in a system-level formula");
      return LocRef::here();
    }
    std::string name = expect_name("location");
    if (bound.count(name)) return LocRef::variable(name);
    auto l = model_->habitat.find_location(name);
    if (!l) throw ParseError(sp, "unknown location '" + name + "'");
    return LocRef::concrete(*l);
  }

  // ----- arithmetic expressions ----------------------------------------------

  ArithPtr parse_arith(const std::set<std::string>& bound) {
    SourceSpan sp = here_span();
    ArithPtr e = parse_term(bound);
    for (;;) {
      if (accept("+")) {
        e = fold(ArithExpr::make_binary(ArithExpr::Kind::Add, e, parse_term(bound), sp));
      } else if (accept("-")) {
        e = fold(ArithExpr::make_binary(ArithExpr::Kind::Sub, e, parse_term(bound), sp));
      } else if (peek("--")) {
        // "a -- b" in arithmetic is a minus followed by a unary minus
        ++pos_;
        auto rhs = ArithExpr::make_unary(ArithExpr::Kind::Neg, parse_term(bound), sp);
        e = fold(ArithExpr::make_binary(ArithExpr::Kind::Sub, e, fold(rhs), sp));
      } else {
        return e;
      }
    }
  }

  ArithPtr parse_term(const std::set<std::string>& bound) {
    SourceSpan sp = here_span();
    ArithPtr e = parse_power(bound);
    for (;;) {
      if (accept("*"))
        e = fold(ArithExpr::make_binary(ArithExpr::Kind::Mul, e, parse_power(bound), sp));
      else if (accept("/"))
        e = fold(ArithExpr::make_binary(ArithExpr::Kind::Div, e, parse_power(bound), sp));
      else
        return e;
    }
  }

  ArithPtr parse_power(const std::set<std::string>& bound) {
    SourceSpan sp = here_span();
    ArithPtr base = parse_unary(bound);
    if (accept("^"))
      return fold(ArithExpr::make_binary(ArithExpr::Kind::Pow, base, parse_power(bound), sp));
    return base;
  }

  ArithPtr parse_unary(const std::set<std::string>& bound) {
    SourceSpan sp = here_span();
    if (accept("-"))
      return fold(ArithExpr::make_unary(ArithExpr::Kind::Neg, parse_unary(bound), sp));
    return parse_primary(bound);
  }

  ArithPtr parse_primary(const std::set<std::string>& bound) {
    SourceSpan sp = here_span();
    if (cur().kind == lex::Tok::Number) {
      auto v = parse_number(toks_[pos_].text);
      if (!v) throw ParseError(sp, "malformed number literal");
      ++pos_;
      return ArithExpr::make_const(*v, sp);
    }
    if (accept("(")) {
      ArithPtr e = parse_arith(bound);
      expect(")");
      return e;
    }
    if (accept_ident("count")) {
      expect("(");
      SpecId s = expect_species();
      expect(",");
      LocRef l = parse_loc_token(bound, /*allow_here=*/true);
      expect(")");
      return ArithExpr::make_count(s, l, sp);
    }
    if (accept_ident("pop")) {
      expect("(");
      LocRef l = parse_loc_token(bound, /*allow_here=*/true);
      expect(")");
      return ArithExpr::make_popall(l, sp);
    }
    if (accept_ident("total")) {
      expect("(");
      SpecId s = expect_species();
      expect(")");
      return ArithExpr::make_total(s, sp);
    }
    if (accept_ident("attr")) {
      expect("(");
      SourceSpan asp = here_span();
      std::string name = expect_name("attribute name");
      auto it = model_->habitat.attr_index.find(name);
      if (it == model_->habitat.attr_index.end())
        throw ParseError(asp, "unknown attribute '" + name + "'");
      expect(",");
      LocRef l = parse_loc_token(bound, /*allow_here=*/true);
      expect(")");
      return ArithExpr::make_attr(it->second, l, sp);
    }
    if (cur().kind == lex::Tok::Ident && !detail::reserved_words().count(cur().text)) {
      auto it = params_.find(cur().text);
      if (it != params_.end()) {
        ++pos_;
        return ArithExpr::make_const(it->second, sp);
      }
      throw ParseError(sp, "unknown parameter '" + cur().text + "'");
    }
    throw ParseError(sp, "expected an arithmetic expression",
                     {"number", "count", "pop", "total", "attr", "(", "-"});
  }

  // constant subexpressions fold to exact values so weights like 1/4 and
  // (1-p) are rationals, not expression trees
  static ArithPtr fold(ArithPtr e) {
    using K = ArithExpr::Kind;
    auto cv = [](const ArithPtr& x) { return x->kind == K::Const; };
    switch (e->kind) {
      case K::Neg:
        if (cv(e->lhs)) return ArithExpr::make_const(-e->lhs->constant, e->span);
        return e;
      case K::Add:
      case K::Sub:
      case K::Mul:
      case K::Div:
      case K::Pow: {
        if (!cv(e->lhs) || !cv(e->rhs)) return e;
        const Value& a = e->lhs->constant;
        const Value& b = e->rhs->constant;
        Value r;
        switch (e->kind) {
          case K::Add: r = a + b; break;
          case K::Sub: r = a - b; break;
          case K::Mul: r = a * b; break;
          case K::Div:
            if (b.is_zero()) throw ParseError(e->span, "division by zero in constant expression");
            r = a / b;
            break;
          default: r = a.pow(b); break;
        }
        return ArithExpr::make_const(r, e->span);
      }
      default:
        return e;
    }
  }

  // ----- boolean expressions --------------------------------------------------

  BoolPtr parse_bool(const std::set<std::string>& bound) {
    SourceSpan sp = here_span();
    BoolPtr e = parse_bool_and(bound);
    while (accept("||")) {
      BoolPtr r = parse_bool_and(bound);
      e = BoolExpr::make_not(
          BoolExpr::make_and(BoolExpr::make_not(e, sp), BoolExpr::make_not(r, sp), sp), sp);
    }
    return e;
  }

  BoolPtr parse_bool_and(const std::set<std::string>& bound) {
    SourceSpan sp = here_span();
    BoolPtr e = parse_bool_unary(bound);
    while (accept("&&")) e = BoolExpr::make_and(e, parse_bool_unary(bound), sp);
    return e;
  }

  BoolPtr parse_bool_unary(const std::set<std::string>& bound) {
    SourceSpan sp = here_span();
    if (accept("!")) return BoolExpr::make_not(parse_bool_unary(bound), sp);
    if (accept_ident("true")) return BoolExpr::make_true(sp);
    if (peek("(")) {
      // "(w) <= c" is a comparison; "(e && e)" is a parenthesized boolean
      size_t mark = pos_;
      try {
        return parse_comparison(bound);
      } catch (const ParseError&) {
        pos_ = mark;
      }
      expect("(");
      BoolPtr e = parse_bool(bound);
      expect(")");
      return e;
    }
    return parse_comparison(bound);
  }

  BoolPtr parse_comparison(const std::set<std::string>& bound) {
    SourceSpan sp = here_span();
    ArithPtr lhs = parse_arith(bound);
    CmpOp op;
    bool negate = false;
    if (accept("==") || accept("="))
      op = CmpOp::Eq;
    else if (accept("<="))
      op = CmpOp::Le;
    else if (accept(">="))
      op = CmpOp::Ge;
    else if (accept("<")) {
      op = CmpOp::Ge;
      negate = true;
    } else if (accept(">")) {
      op = CmpOp::Le;
      negate = true;
    } else if (accept("!=")) {
      op = CmpOp::Eq;
      negate = true;
    } else {
      throw ParseError(here_span(), "expected a comparison operator",
                       {"==", "<=", ">=", "<", ">", "!="});
    }
    ArithPtr rhs = parse_arith(bound);
    BoolPtr cmp;
    if (rhs->kind == ArithExpr::Kind::Const) {
      cmp = BoolExpr::make_cmp(op, lhs, rhs->constant, sp);
    } else {
      // w1 <= w2 becomes (w1 - w2) <= 0
      auto diff = fold(ArithExpr::make_binary(ArithExpr::Kind::Sub, lhs, rhs, sp));
      cmp = BoolExpr::make_cmp(op, diff, Value::integer(0), sp);
    }
    return negate ? BoolExpr::make_not(cmp, sp) : cmp;
  }

  // ----- systems ----------------------------------------------------------------

  SysPtr parse_system() {
    SourceSpan sp = here_span();
    std::vector<SysPtr> atoms;
    atoms.push_back(parse_system_atom());
    while (accept("|")) atoms.push_back(parse_system_atom());
    SysPtr s = atoms[0];
    for (size_t i = 1; i < atoms.size(); ++i) s = SystemTerm::parallel(s, atoms[i], sp);
    if (accept_ident("restrict")) {
      expect("{");
      std::vector<ChanId> chans;
      do {
        chans.push_back(parse_channel());
      } while (accept(","));
      expect("}");
      s = SystemTerm::restrict(s, std::move(chans), sp);
    }
    return s;
  }

  SysPtr parse_system_atom() {
    SourceSpan sp = here_span();
    if (cur().kind == lex::Tok::Number) {
      if (cur().text == "0" && !(toks_[pos_ + 1].kind == lex::Tok::Ident &&
                                 toks_[pos_ + 1].text == "of")) {
        ++pos_;
        return SystemTerm::nil(sp);
      }
      int n = parse_int("multiplicity");
      expect_ident("of");
      if (n < 1) throw ParseError(sp, "multiplicity must be at least 1");
      SysPtr one = parse_system_atom();
      SysPtr s = one;
      for (int i = 1; i < n; ++i) s = SystemTerm::parallel(s, one, sp);
      return s;
    }
    if (accept_ident("species")) {
      SpecId id = expect_species();
      return SystemTerm::species_proc(id, sp);
    }
    if (peek("(")) {
      // either "(process)@(l,s)" or "(system)"
      size_t mark = pos_;
      ProcPtr p;
      bool located = false;
      try {
        expect("(");
        p = parse_process();
        expect(")");
        located = peek("@");
      } catch (const ParseError&) {
        located = false;
      }
      if (located) return parse_located(p, sp);
      pos_ = mark;
      expect("(");
      SysPtr s = parse_system();
      expect(")");
      return s;
    }
    ProcPtr p = parse_process();
    return parse_located(p, sp);
  }

  SysPtr parse_located(ProcPtr p, SourceSpan sp) {
    expect("@");
    expect("(");
    LocId l = expect_location();
    expect(",");
    SpecId s = expect_species();
    expect(")");
    return SystemTerm::located(std::move(p), s, l, sp);
  }

  // ----- PCTL -------------------------------------------------------------------

  FormulaPtr parse_state_formula() {
    SourceSpan sp = here_span();
    FormulaPtr lhs = parse_formula_or();
    if (accept("->")) {
      FormulaPtr rhs = parse_state_formula();
      // implication desugars through negation and conjunction
      return PctlFormula::make_not(
          PctlFormula::make_and(lhs, PctlFormula::make_not(rhs, sp), sp), sp);
    }
    return lhs;
  }

  FormulaPtr parse_formula_or() {
    SourceSpan sp = here_span();
    FormulaPtr e = parse_formula_and();
    while (accept("||")) {
      FormulaPtr r = parse_formula_and();
      e = PctlFormula::make_not(
          PctlFormula::make_and(PctlFormula::make_not(e, sp), PctlFormula::make_not(r, sp), sp),
          sp);
    }
    return e;
  }

  FormulaPtr parse_formula_and() {
    SourceSpan sp = here_span();
    FormulaPtr e = parse_formula_unary();
    while (accept("&&")) e = PctlFormula::make_and(e, parse_formula_unary(), sp);
    return e;
  }

  FormulaPtr parse_formula_unary() {
    SourceSpan sp = here_span();
    if (accept("!")) return PctlFormula::make_not(parse_formula_unary(), sp);
    if (peek_ident("true")) {
      // "true" may open a comparison only through an operator; alone it is truth
      if (toks_[pos_ + 1].kind == lex::Tok::Punct && is_cmp_op(toks_[pos_ + 1].text)) {
        return PctlFormula::make_atom(parse_comparison({}), sp);
      }
      ++pos_;
      return PctlFormula::make_true(sp);
    }
    if (peek_ident("P")) {
      ++pos_;
      ProbBound op;
      if (accept("<="))
        op = ProbBound::Le;
      else if (accept(">="))
        op = ProbBound::Ge;
      else if (accept("==") || accept("="))
        op = ProbBound::Eq;
      else
        throw ParseError(here_span(), "expected a probability bound", {"<=", ">=", "=="});
      Value p = parse_const_value();
      if (p.compare(Value::integer(0)) < 0 || p.compare(Value::integer(1)) > 0)
        throw ParseError(sp, "probability bound outside [0,1]");
      expect("[");
      FormulaPtr f = parse_path_formula(op, p, sp);
      expect("]");
      return f;
    }
    if (peek("(")) {
      size_t mark = pos_;
      try {
        return PctlFormula::make_atom(parse_comparison({}), sp);
      } catch (const ParseError&) {
        pos_ = mark;
      }
      expect("(");
      FormulaPtr e = parse_state_formula();
      expect(")");
      return e;
    }
    return PctlFormula::make_atom(parse_comparison({}), sp);
  }

  FormulaPtr parse_path_formula(ProbBound op, Value p, SourceSpan sp) {
    if (accept_ident("X"))
      return PctlFormula::make_next(op, p, parse_state_formula(), sp);
    FormulaPtr a = parse_state_formula();
    expect_ident("U");
    if (accept("{")) {
      expect("<=");
      int k = parse_int("until bound");
      if (k < 0) throw ParseError(sp, "until bound must be nonnegative");
      expect("}");
      FormulaPtr b = parse_state_formula();
      return PctlFormula::make_bounded_until(op, p, a, b, k, sp);
    }
    FormulaPtr b = parse_state_formula();
    return PctlFormula::make_until(op, p, a, b, sp);
  }

  static bool is_cmp_op(const std::string& t) {
    return t == "==" || t == "=" || t == "<=" || t == ">=" || t == "<" || t == ">" || t == "!=";
  }

  std::vector<lex::Token> toks_;
  size_t pos_ = 0;
  Model* model_ = nullptr;
  std::map<std::string, Value> params_;
  bool formula_mode_ = false;
};

}  // namespace detail

inline Model parse_model(const std::string& text, const std::string& file = "<input>") {
  detail::Parser p(text, file);
  return p.parse_model();
}

inline FormulaPtr parse_formula(const std::string& text, const Model& model,
                                const std::string& file = "<formula>") {
  detail::Parser p(text, file);
  return p.parse_formula(model);
}

// one formula per line is the file convention; blank lines and comments skipped
inline std::vector<FormulaPtr> parse_formula_file(const std::string& text, const Model& model,
                                                  const std::string& file = "<formulas>") {
  std::vector<FormulaPtr> out;
  size_t start = 0;
  int lineno = 1;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    std::string line = text.substr(start, end == std::string::npos ? std::string::npos
                                                                   : end - start);
    std::string stripped = line.substr(0, line.find('#'));
    bool blank = stripped.find_first_not_of(" \t\r") == std::string::npos;
    if (!blank) {
      detail::Parser p(std::string(lineno - 1, '\n') + line, file);
      out.push_back(p.parse_formula(model));
    }
    if (end == std::string::npos) break;
    start = end + 1;
    ++lineno;
  }
  return out;
}

}  // namespace palps

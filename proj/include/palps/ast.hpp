#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "palps/diagnostics.hpp"
#include "palps/rational.hpp"

namespace palps {

// Interned indices into the Model's tables. Strong types so a location can
// never be passed where a species is expected.
struct LocId {
  std::uint32_t v = 0;
  bool operator==(const LocId& o) const { return v == o.v; }
  bool operator!=(const LocId& o) const { return v != o.v; }
  bool operator<(const LocId& o) const { return v < o.v; }
};

struct SpecId {
  std::uint32_t v = 0;
  bool operator==(const SpecId& o) const { return v == o.v; }
  bool operator!=(const SpecId& o) const { return v != o.v; }
  bool operator<(const SpecId& o) const { return v < o.v; }
};

struct ChanId {
  std::uint32_t v = 0;
  bool operator==(const ChanId& o) const { return v == o.v; }
  bool operator!=(const ChanId& o) const { return v != o.v; }
  bool operator<(const ChanId& o) const { return v < o.v; }
};

enum class ChanKind { Ordinary, Rep, Prey };

struct ChannelInfo {
  std::string name;
  ChanKind kind = ChanKind::Ordinary;
  SpecId species;  // tag, valid for Rep/Prey only
};

// The habitat graph: finite location set, symmetric irreflexive neighborhood,
// per-location attribute values and an optional dispersal-probability table.
struct Habitat {
  std::vector<std::string> locations;
  std::map<std::string, std::uint32_t> loc_index;
  std::vector<std::vector<LocId>> adjacency;  // sorted per location

  std::vector<std::string> attributes;
  std::map<std::string, std::uint32_t> attr_index;
  // attr_values[attr][loc]
  std::vector<std::vector<std::optional<Value>>> attr_values;

  // disp[from][to] = probability of dispersal from -> to
  std::vector<std::vector<std::optional<Value>>> disp;

  LocId add_location(const std::string& name) {
    auto it = loc_index.find(name);
    if (it != loc_index.end()) return LocId{it->second};
    std::uint32_t idx = static_cast<std::uint32_t>(locations.size());
    locations.push_back(name);
    loc_index.emplace(name, idx);
    adjacency.emplace_back();
    for (auto& row : attr_values) row.emplace_back();
    if (!disp.empty()) {
      for (auto& row : disp) row.emplace_back();
      disp.emplace_back(locations.size());
    }
    return LocId{idx};
  }

  std::uint32_t add_attribute(const std::string& name) {
    auto it = attr_index.find(name);
    if (it != attr_index.end()) return it->second;
    std::uint32_t idx = static_cast<std::uint32_t>(attributes.size());
    attributes.push_back(name);
    attr_index.emplace(name, idx);
    attr_values.emplace_back(locations.size());
    return idx;
  }

  void add_edge(LocId a, LocId b) {
    auto ins = [](std::vector<LocId>& v, LocId x) {
      auto it = std::lower_bound(v.begin(), v.end(), x);
      if (it == v.end() || *it != x) v.insert(it, x);
    };
    ins(adjacency[a.v], b);
    ins(adjacency[b.v], a);
  }

  bool neighbors(LocId a, LocId b) const {
    const auto& adj = adjacency[a.v];
    return std::binary_search(adj.begin(), adj.end(), b);
  }

  const std::vector<LocId>& neighbors_of(LocId l) const { return adjacency[l.v]; }

  std::optional<LocId> find_location(const std::string& name) const {
    auto it = loc_index.find(name);
    if (it == loc_index.end()) return std::nullopt;
    return LocId{it->second};
  }
};

// A location position in an expression or action: a concrete location, the
// individual's own location ("here"), or a variable bound by a neighbor sum.
struct LocRef {
  enum class Kind { Concrete, Here, Var };
  Kind kind = Kind::Concrete;
  LocId loc;
  std::string var;

  static LocRef concrete(LocId l) { return LocRef{Kind::Concrete, l, {}}; }
  static LocRef here() { return LocRef{Kind::Here, {}, {}}; }
  static LocRef variable(std::string name) { return LocRef{Kind::Var, {}, std::move(name)}; }

  bool operator==(const LocRef& o) const {
    if (kind != o.kind) return false;
    if (kind == Kind::Concrete) return loc == o.loc;
    if (kind == Kind::Var) return var == o.var;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Expressions

struct ArithExpr;
using ArithPtr = std::shared_ptr<const ArithExpr>;

struct ArithExpr {
  enum class Kind {
    Const,    // numeric literal (exact where the source was)
    Attr,     // attribute value at a location
    Count,    // individuals of one species at a location
    PopAll,   // individuals of all species at a location
    Total,    // individuals of one species summed over all locations
    Neg,
    Add, Sub, Mul, Div, Pow,
  };

  Kind kind;
  Value constant;            // Const
  std::uint32_t attr = 0;    // Attr
  SpecId species;            // Count, Total
  LocRef loc;                // Attr, Count, PopAll
  ArithPtr lhs, rhs;         // Neg uses lhs only
  SourceSpan span;

  static ArithPtr make_const(Value v, SourceSpan sp = {}) {
    auto e = std::make_shared<ArithExpr>();
    e->kind = Kind::Const;
    e->constant = v;
    e->span = std::move(sp);
    return e;
  }
  static ArithPtr make_attr(std::uint32_t attr, LocRef l, SourceSpan sp = {}) {
    auto e = std::make_shared<ArithExpr>();
    e->kind = Kind::Attr;
    e->attr = attr;
    e->loc = std::move(l);
    e->span = std::move(sp);
    return e;
  }
  static ArithPtr make_count(SpecId s, LocRef l, SourceSpan sp = {}) {
    auto e = std::make_shared<ArithExpr>();
    e->kind = Kind::Count;
    e->species = s;
    e->loc = std::move(l);
    e->span = std::move(sp);
    return e;
  }
  static ArithPtr make_popall(LocRef l, SourceSpan sp = {}) {
    auto e = std::make_shared<ArithExpr>();
    e->kind = Kind::PopAll;
    e->loc = std::move(l);
    e->span = std::move(sp);
    return e;
  }
  static ArithPtr make_total(SpecId s, SourceSpan sp = {}) {
    auto e = std::make_shared<ArithExpr>();
    e->kind = Kind::Total;
    e->species = s;
    e->span = std::move(sp);
    return e;
  }
  static ArithPtr make_unary(Kind k, ArithPtr a, SourceSpan sp = {}) {
    auto e = std::make_shared<ArithExpr>();
    e->kind = k;
    e->lhs = std::move(a);
    e->span = std::move(sp);
    return e;
  }
  static ArithPtr make_binary(Kind k, ArithPtr a, ArithPtr b, SourceSpan sp = {}) {
    auto e = std::make_shared<ArithExpr>();
    e->kind = k;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    e->span = std::move(sp);
    return e;
  }
};

enum class CmpOp { Eq, Le, Ge };

struct BoolExpr;
using BoolPtr = std::shared_ptr<const BoolExpr>;

struct BoolExpr {
  enum class Kind { True, Not, And, Cmp };

  Kind kind;
  CmpOp op = CmpOp::Eq;  // Cmp
  ArithPtr cmp_lhs;      // Cmp: arithmetic side
  Value cmp_rhs;         // Cmp: constant side
  BoolPtr lhs, rhs;      // Not uses lhs only
  SourceSpan span;

  static BoolPtr make_true(SourceSpan sp = {}) {
    auto e = std::make_shared<BoolExpr>();
    e->kind = Kind::True;
    e->span = std::move(sp);
    return e;
  }
  static BoolPtr make_not(BoolPtr a, SourceSpan sp = {}) {
    auto e = std::make_shared<BoolExpr>();
    e->kind = Kind::Not;
    e->lhs = std::move(a);
    e->span = std::move(sp);
    return e;
  }
  static BoolPtr make_and(BoolPtr a, BoolPtr b, SourceSpan sp = {}) {
    auto e = std::make_shared<BoolExpr>();
    e->kind = Kind::And;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    e->span = std::move(sp);
    return e;
  }
  static BoolPtr make_cmp(CmpOp op, ArithPtr w, Value c, SourceSpan sp = {}) {
    auto e = std::make_shared<BoolExpr>();
    e->kind = Kind::Cmp;
    e->op = op;
    e->cmp_lhs = std::move(w);
    e->cmp_rhs = c;
    e->span = std::move(sp);
    return e;
  }
};

bool equal(const ArithPtr& a, const ArithPtr& b);

inline bool equal(const ArithPtr& a, const ArithPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  using K = ArithExpr::Kind;
  switch (a->kind) {
    case K::Const: return a->constant.identical(b->constant);
    case K::Attr: return a->attr == b->attr && a->loc == b->loc;
    case K::Count: return a->species == b->species && a->loc == b->loc;
    case K::PopAll: return a->loc == b->loc;
    case K::Total: return a->species == b->species;
    case K::Neg: return equal(a->lhs, b->lhs);
    default: return equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
  }
}

inline bool equal(const BoolPtr& a, const BoolPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  using K = BoolExpr::Kind;
  switch (a->kind) {
    case K::True: return true;
    case K::Not: return equal(a->lhs, b->lhs);
    case K::And: return equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
    case K::Cmp:
      return a->op == b->op && equal(a->cmp_lhs, b->cmp_lhs) && a->cmp_rhs.identical(b->cmp_rhs);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Processes

struct Action {
  enum class Kind { Input, Output, Go, Tick };
  Kind kind = Kind::Tick;
  ChanId chan;    // Input/Output
  LocRef target;  // Go

  static Action input(ChanId c) { return Action{Kind::Input, c, {}}; }
  static Action output(ChanId c) { return Action{Kind::Output, c, {}}; }
  static Action go(LocRef t) { return Action{Kind::Go, {}, std::move(t)}; }
  static Action tick() { return Action{Kind::Tick, {}, {}}; }
};

struct ProcessTerm;
using ProcPtr = std::shared_ptr<const ProcessTerm>;

struct PsumBranch {
  ArithPtr weight;
  ProcPtr body;
};

struct CondBranch {
  BoolPtr guard;
  ProcPtr body;
};

enum class NeighborWeight { Uniform, Table };

struct ProcessTerm {
  enum class Kind { Nil, Prefix, PSum, NeighborSum, Cond, Const };

  Kind kind = Kind::Nil;
  Action action;                     // Prefix
  ProcPtr cont;                      // Prefix
  std::vector<PsumBranch> branches;  // PSum
  NeighborWeight nweight = NeighborWeight::Uniform;  // NeighborSum
  std::string var;                   // NeighborSum binder
  ProcPtr body;                      // NeighborSum
  std::vector<CondBranch> conds;     // Cond
  std::uint32_t constant = 0;        // Const: index into Model::constants
  SourceSpan span;

  static ProcPtr nil(SourceSpan sp = {}) {
    auto p = std::make_shared<ProcessTerm>();
    p->kind = Kind::Nil;
    p->span = std::move(sp);
    return p;
  }
  static ProcPtr prefix(Action a, ProcPtr cont, SourceSpan sp = {}) {
    auto p = std::make_shared<ProcessTerm>();
    p->kind = Kind::Prefix;
    p->action = std::move(a);
    p->cont = std::move(cont);
    p->span = std::move(sp);
    return p;
  }
  static ProcPtr psum(std::vector<PsumBranch> branches, SourceSpan sp = {}) {
    auto p = std::make_shared<ProcessTerm>();
    p->kind = Kind::PSum;
    p->branches = std::move(branches);
    p->span = std::move(sp);
    return p;
  }
  static ProcPtr neighbor_sum(NeighborWeight w, std::string var, ProcPtr body, SourceSpan sp = {}) {
    auto p = std::make_shared<ProcessTerm>();
    p->kind = Kind::NeighborSum;
    p->nweight = w;
    p->var = std::move(var);
    p->body = std::move(body);
    p->span = std::move(sp);
    return p;
  }
  static ProcPtr cond(std::vector<CondBranch> branches, SourceSpan sp = {}) {
    auto p = std::make_shared<ProcessTerm>();
    p->kind = Kind::Cond;
    p->conds = std::move(branches);
    p->span = std::move(sp);
    return p;
  }
  static ProcPtr constant_ref(std::uint32_t idx, SourceSpan sp = {}) {
    auto p = std::make_shared<ProcessTerm>();
    p->kind = Kind::Const;
    p->constant = idx;
    p->span = std::move(sp);
    return p;
  }

  bool is_nil() const { return kind == Kind::Nil; }
};

inline bool equal(const ProcPtr& a, const ProcPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  using K = ProcessTerm::Kind;
  switch (a->kind) {
    case K::Nil: return true;
    case K::Prefix: {
      if (a->action.kind != b->action.kind) return false;
      if (a->action.kind == Action::Kind::Input || a->action.kind == Action::Kind::Output)
        if (a->action.chan != b->action.chan) return false;
      if (a->action.kind == Action::Kind::Go && !(a->action.target == b->action.target))
        return false;
      return equal(a->cont, b->cont);
    }
    case K::PSum: {
      if (a->branches.size() != b->branches.size()) return false;
      for (size_t i = 0; i < a->branches.size(); ++i)
        if (!equal(a->branches[i].weight, b->branches[i].weight) ||
            !equal(a->branches[i].body, b->branches[i].body))
          return false;
      return true;
    }
    case K::NeighborSum:
      return a->nweight == b->nweight && a->var == b->var && equal(a->body, b->body);
    case K::Cond: {
      if (a->conds.size() != b->conds.size()) return false;
      for (size_t i = 0; i < a->conds.size(); ++i)
        if (!equal(a->conds[i].guard, b->conds[i].guard) || !equal(a->conds[i].body, b->conds[i].body))
          return false;
      return true;
    }
    case K::Const: return a->constant == b->constant;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Systems

struct SystemTerm;
using SysPtr = std::shared_ptr<const SystemTerm>;

struct SystemTerm {
  enum class Kind { Nil, Located, Species, Parallel, Restrict };

  Kind kind = Kind::Nil;
  ProcPtr proc;     // Located
  SpecId species;   // Located, Species
  LocId loc;        // Located
  SysPtr left, right;            // Parallel
  SysPtr body;                   // Restrict
  std::vector<ChanId> restricted;  // Restrict, sorted
  SourceSpan span;

  static SysPtr nil(SourceSpan sp = {}) {
    auto s = std::make_shared<SystemTerm>();
    s->kind = Kind::Nil;
    s->span = std::move(sp);
    return s;
  }
  static SysPtr located(ProcPtr p, SpecId sp_, LocId l, SourceSpan span = {}) {
    auto s = std::make_shared<SystemTerm>();
    s->kind = Kind::Located;
    s->proc = std::move(p);
    s->species = sp_;
    s->loc = l;
    s->span = std::move(span);
    return s;
  }
  static SysPtr species_proc(SpecId sp_, SourceSpan span = {}) {
    auto s = std::make_shared<SystemTerm>();
    s->kind = Kind::Species;
    s->species = sp_;
    s->span = std::move(span);
    return s;
  }
  static SysPtr parallel(SysPtr a, SysPtr b, SourceSpan span = {}) {
    auto s = std::make_shared<SystemTerm>();
    s->kind = Kind::Parallel;
    s->left = std::move(a);
    s->right = std::move(b);
    s->span = std::move(span);
    return s;
  }
  static SysPtr restrict(SysPtr inner, std::vector<ChanId> chans, SourceSpan span = {}) {
    std::sort(chans.begin(), chans.end());
    chans.erase(std::unique(chans.begin(), chans.end()), chans.end());
    auto s = std::make_shared<SystemTerm>();
    s->kind = Kind::Restrict;
    s->body = std::move(inner);
    s->restricted = std::move(chans);
    s->span = std::move(span);
    return s;
  }
};

// ---------------------------------------------------------------------------
// Model

struct ConstantDef {
  std::string name;
  ProcPtr body;
  SourceSpan span;
};

struct SpeciesDef {
  std::string name;
  ProcPtr body;  // the individual spawned per reproduction
  ChanId rep_chan;
  ChanId prey_chan;
  SourceSpan span;
};

struct Model {
  Habitat habitat;
  std::vector<ChannelInfo> channels;
  std::map<std::string, std::uint32_t> channel_index;
  std::vector<ConstantDef> constants;
  std::map<std::string, std::uint32_t> constant_index;
  std::vector<SpeciesDef> species;
  std::map<std::string, std::uint32_t> species_index;
  SysPtr system;

  ChanId intern_channel(const std::string& name, ChanKind kind = ChanKind::Ordinary,
                        SpecId tag = {}) {
    auto it = channel_index.find(name);
    if (it != channel_index.end()) {
      // a rep_x/prey_x name may have been seen as a plain channel first
      if (kind != ChanKind::Ordinary && channels[it->second].kind == ChanKind::Ordinary) {
        channels[it->second].kind = kind;
        channels[it->second].species = tag;
      }
      return ChanId{it->second};
    }
    std::uint32_t idx = static_cast<std::uint32_t>(channels.size());
    channels.push_back(ChannelInfo{name, kind, tag});
    channel_index.emplace(name, idx);
    return ChanId{idx};
  }

  // registers the species together with its rep_/prey_ channels
  SpecId add_species(const std::string& name) {
    auto it = species_index.find(name);
    if (it != species_index.end()) return SpecId{it->second};
    std::uint32_t idx = static_cast<std::uint32_t>(species.size());
    SpecId id{idx};
    SpeciesDef def;
    def.name = name;
    def.rep_chan = intern_channel("rep_" + name, ChanKind::Rep, id);
    def.prey_chan = intern_channel("prey_" + name, ChanKind::Prey, id);
    species.push_back(std::move(def));
    species_index.emplace(name, idx);
    return id;
  }

  const std::string& location_name(LocId l) const { return habitat.locations[l.v]; }
  const std::string& species_name(SpecId s) const { return species[s.v].name; }
  const std::string& channel_name(ChanId c) const { return channels[c.v].name; }
};

}  // namespace palps

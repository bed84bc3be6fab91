#include <catch2/catch.hpp>

#include <cstdio>
#include <map>

#include "palps/oracle.hpp"
#include "palps/pctl.hpp"
#include "palps/statespace.hpp"
#include "support/direct_semantics.hpp"
#include "support/util.hpp"

using namespace palps;

namespace {

std::vector<BoolPtr> atoms_of(const Model& m, const FormulaPtr& f) {
  std::vector<BoolPtr> atoms;
  collect_atoms(f, atoms);
  return atoms;
}

std::string read_file(const std::string& path) { return testutil::slurp(path); }

// unquotiented expansion via the direct rule expander, packed into an Mdp
std::pair<Mdp, std::vector<Environment>> build_raw(const Model& m, std::size_t max_states) {
  Mdp mdp;
  std::map<std::string, std::uint32_t> index;
  std::vector<std::pair<Environment, SysPtr>> configs;
  auto intern = [&](const Environment& env, const SysPtr& sys) {
    std::string key = direct::config_key(env, sys);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    std::uint32_t idx = static_cast<std::uint32_t>(mdp.states.size());
    index.emplace(key, idx);
    mdp.states.push_back({});
    configs.push_back({env, sys});
    return idx;
  };
  Environment env0 = env_of(*m.system);
  mdp.initial = intern(env0, m.system);
  for (std::uint32_t s = 0; s < mdp.states.size(); ++s) {
    if (mdp.states.size() > max_states) throw TooLarge("raw expansion too large");
    auto [env, sys] = configs[s];
    auto steps = direct::system_steps(m, env, sys);
    bool prob = direct::has_prob(steps);
    if (prob) {
      mdp.states[s].kind = Mdp::StateKind::Probabilistic;
      Mdp::Choice choice;
      choice.label = "-";
      std::map<std::uint32_t, double> dist;
      for (const auto& st : steps) {
        if (!st.probabilistic) continue;
        auto env2 = merge(env, st.delta);
        REQUIRE(env2);
        dist[intern(*env2, st.target)] += st.weight.to_double();
      }
      for (auto [t, p] : dist) choice.branches.push_back({t, p});
      mdp.states[s].choices.push_back(choice);
    } else if (!steps.empty()) {
      mdp.states[s].kind = Mdp::StateKind::Nondeterministic;
      for (const auto& st : steps) {
        auto env2 = merge(env, st.delta);
        REQUIRE(env2);
        Mdp::Choice choice;
        choice.label = st.label.str(m);
        choice.tick = st.label.kind == TransitionLabel::Kind::Tick;
        choice.branches.push_back({intern(*env2, st.target), 1.0});
        mdp.states[s].choices.push_back(choice);
      }
    } else {
      mdp.states[s].kind = Mdp::StateKind::Terminal;
    }
  }
  std::vector<Environment> envs;
  for (auto& [env, sys] : configs) envs.push_back(env);
  return {std::move(mdp), std::move(envs)};
}

}  // namespace

TEST_CASE("a lone mortal individual yields two states with the right label") {
  Model m = testutil::parse(
      "locations { a }\nspecies s = P\nprocess P = tick.0\nsystem = P@(a, s)\n");
  FormulaPtr f = parse_formula("count(s, a) == 0", m);
  auto [mdp, report] = build(m, atoms_of(m, f), {});
  REQUIRE(mdp.size() == 2);
  CHECK(report.states_explored == 2);
  CHECK(!report.truncated);
  CHECK(mdp.states[0].kind == Mdp::StateKind::Nondeterministic);
  CHECK(mdp.states[1].kind == Mdp::StateKind::Terminal);
  REQUIRE(mdp.labels.size() == 1);
  CHECK(!mdp.labels[0][0]);
  CHECK(mdp.labels[0][1]);
  CHECK(mdp.states[0].choices.at(0).tick);
}

TEST_CASE("twin probabilistic branches collapse into one distribution entry") {
  Model m = testutil::parse(
      "locations { a }\nspecies s = C\nprocess C = sum { 1/2: tick.C + 1/2: tick.C }\n"
      "system = C@(a, s)\n");
  auto [mdp, report] = build(m, {}, {});
  REQUIRE(mdp.states[mdp.initial].kind == Mdp::StateKind::Probabilistic);
  const auto& choice = mdp.states[mdp.initial].choices[0];
  REQUIRE(choice.branches.size() == 1);
  CHECK(choice.branches[0].prob == Approx(1.0).margin(1e-12));
  CHECK(mdp.size() == 2);  // the sum state and the tick state
}

TEST_CASE("every state has exactly one choice kind") {
  Model m = testutil::load_corpus("tiny_extinction.palps");
  auto [mdp, report] = build(m, {}, {});
  for (const auto& st : mdp.states) {
    switch (st.kind) {
      case Mdp::StateKind::Probabilistic:
        REQUIRE(st.choices.size() == 1);
        REQUIRE(st.choices[0].branches.size() >= 1);
        break;
      case Mdp::StateKind::Nondeterministic:
        REQUIRE(st.choices.size() >= 1);
        for (const auto& c : st.choices) REQUIRE(c.branches.size() == 1);
        break;
      case Mdp::StateKind::Terminal:
        REQUIRE(st.choices.empty());
        break;
    }
    if (st.kind == Mdp::StateKind::Probabilistic) {
      double sum = 0;
      for (const auto& b : st.choices[0].branches) sum += b.prob;
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("builds are deterministic and thread-count independent") {
  Model m = testutil::load_corpus("tiny_competition.palps");
  ExploreOptions seq, par;
  par.threads = 4;
  auto [a, ra] = build(m, {}, seq);
  auto [b, rb] = build(m, {}, par);
  REQUIRE(a.size() == b.size());
  CHECK(a.transition_count == b.transition_count);
  for (std::size_t s = 0; s < a.size(); ++s) {
    CHECK(a.states[s].digest_hash == b.states[s].digest_hash);
    REQUIRE(a.states[s].choices.size() == b.states[s].choices.size());
  }
}

TEST_CASE("exports are byte-identical across repeated builds") {
  Model m = testutil::load_corpus("tiny_extinction.palps");
  FormulaPtr f = parse_formula("total(s) == 0", m);
  auto [mdp1, r1] = build(m, atoms_of(m, f), {});
  auto [mdp2, r2] = build(m, atoms_of(m, f), {});
  std::string p1 = "/tmp/palps_export_a", p2 = "/tmp/palps_export_b";
  export_explicit(mdp1, p1);
  export_explicit(mdp2, p2);
  for (const char* ext : {".sta", ".tra", ".lab"}) {
    INFO(ext);
    CHECK(read_file(p1 + ext) == read_file(p2 + ext));
  }
  for (const char* ext : {".sta", ".tra", ".lab"}) {
    std::remove((p1 + ext).c_str());
    std::remove((p2 + ext).c_str());
  }
}

TEST_CASE("the export format is the documented three-file layout") {
  Model m = testutil::parse(
      "locations { a }\nspecies s = P\nprocess P = tick.0\nsystem = P@(a, s)\n");
  FormulaPtr f = parse_formula("count(s, a) == 0", m);
  auto [mdp, report] = build(m, atoms_of(m, f), {});
  export_explicit(mdp, "/tmp/palps_export_fmt");
  std::string sta = read_file("/tmp/palps_export_fmt.sta");
  std::string tra = read_file("/tmp/palps_export_fmt.tra");
  std::string lab = read_file("/tmp/palps_export_fmt.lab");
  CHECK(sta.substr(0, 2) == "0:");
  CHECK(std::count(sta.begin(), sta.end(), '\n') == 2);
  CHECK(tra == "0 0 1 1 1 tick\n");
  CHECK(lab == "#atoms: 1\n1: 0\n");

  auto [empty_atoms, r2] = build(m, {}, {});
  export_explicit(empty_atoms, "/tmp/palps_export_fmt");
  CHECK(read_file("/tmp/palps_export_fmt.lab") == "#atoms: 0\n");
  for (const char* ext : {".sta", ".tra", ".lab"})
    std::remove((std::string("/tmp/palps_export_fmt") + ext).c_str());
}

TEST_CASE("exploration bounds truncate and report") {
  Model m = testutil::load_corpus("dispersal.palps");
  ExploreOptions opts;
  opts.max_states = 300;
  auto [mdp, report] = build(m, {}, opts);
  CHECK(report.truncated);
  CHECK(mdp.truncated);
  CHECK(report.truncation_reason.find("max-states") != std::string::npos);
  bool any_truncated = false;
  for (const auto& st : mdp.states) any_truncated = any_truncated || st.truncated;
  CHECK(any_truncated);

  ExploreOptions depth;
  depth.max_depth = 2;
  auto [mdp2, report2] = build(m, {}, depth);
  CHECK(report2.truncated);
  CHECK(report2.truncation_reason.find("max-depth") != std::string::npos);

  // steady growth at one patch trips the per-location population bound
  Model grower = testutil::parse(
      "locations { a, b }\nneighbors { a -- b }\nspecies s = J\nprocess J = tick.J\n"
      "process A = out rep_s.tick.A\nsystem = A@(a, s) | species s restrict { rep_s }\n",
      false);
  ExploreOptions pop;
  pop.max_population_per_location = 3;
  auto [mdp3, report3] = build(grower, {}, pop);
  CHECK(report3.truncated);
  CHECK(report3.truncation_reason.find("population") != std::string::npos);
}

TEST_CASE("the canonical quotient preserves reachability probabilities") {
  // compare against the unquotiented expansion built by the direct expander
  Model m = testutil::load_corpus("tiny_extinction.palps");
  auto [raw, raw_envs] = build_raw(m, 20000);

  FormulaPtr goal = parse_formula("total(s) == 0", m);
  std::vector<bool> phi1(raw.size(), true);
  std::vector<bool> phi2(raw.size());
  {
    Evaluator ev(m);
    for (std::size_t s = 0; s < raw.size(); ++s)
      phi2[s] = ev.sat(raw_envs[s], *goal->atom);
  }

  auto [quot, report] = build(m, atoms_of(m, goal), {});
  std::vector<bool> q1(quot.size(), true);
  CheckOptions copts;

  for (int k : {0, 1, 2, 5}) {
    auto raw_max = vi::bounded_until_values(raw, phi1, phi2, k, true, false, copts);
    auto raw_min = vi::bounded_until_values(raw, phi1, phi2, k, false, false, copts);
    auto quot_max = vi::bounded_until_values(quot, q1, quot.labels[0], k, true, false, copts);
    auto quot_min = vi::bounded_until_values(quot, q1, quot.labels[0], k, false, false, copts);
    INFO("k=" << k);
    CHECK(std::abs(raw_max[raw.initial] - quot_max[quot.initial]) <= 1e-9);
    CHECK(std::abs(raw_min[raw.initial] - quot_min[quot.initial]) <= 1e-9);
  }
  auto raw_u = vi::until_values(raw, phi1, phi2, true, false, copts);
  auto quot_u = vi::until_values(quot, q1, quot.labels[0], true, false, copts);
  CHECK(std::abs(raw_u[raw.initial] - quot_u[quot.initial]) <= 1e-9);
}

TEST_CASE("state labels may not mention the self-location") {
  Model m = testutil::load_corpus("tiny_extinction.palps");
  auto here = BoolExpr::make_cmp(CmpOp::Eq, ArithExpr::make_count(SpecId{0}, LocRef::here()),
                                 Value::integer(0));
  CHECK_THROWS_AS(build(m, {here}, {}), ModelError);
}

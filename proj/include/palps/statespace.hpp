#pragma once

#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "palps/semantics.hpp"

namespace palps {

struct ExploreOptions {
  std::optional<std::size_t> max_states;
  std::optional<std::size_t> max_depth;
  std::optional<std::uint32_t> max_population_per_location;
  unsigned threads = 1;
  bool validate = true;  // recheck environment/system compatibility per step
};

// Explicit MDP. States are either probabilistic (exactly one distribution),
// nondeterministic (labeled Dirac actions) or terminal.
struct Mdp {
  struct Branch {
    std::uint32_t target = 0;
    double prob = 1.0;
  };
  struct Choice {
    std::string label;  // action label; "-" on distributions
    bool tick = false;
    std::vector<Branch> branches;
  };
  enum class StateKind { Probabilistic, Nondeterministic, Terminal };
  struct State {
    std::uint64_t digest_hash = 0;
    StateKind kind = StateKind::Terminal;
    bool truncated = false;  // frontier state that was never expanded
    bool deadlock = false;   // live system with no transitions
    std::vector<Choice> choices;
  };

  std::vector<State> states;
  std::uint32_t initial = 0;
  std::vector<BoolPtr> atoms;
  std::vector<std::vector<bool>> labels;  // labels[atom][state]
  std::size_t transition_count = 0;
  bool truncated = false;

  std::size_t size() const { return states.size(); }
};

struct BuildReport {
  std::size_t states_explored = 0;
  std::size_t transitions = 0;
  bool truncated = false;
  std::string truncation_reason;
  std::size_t deadlocks = 0;
};

namespace detail {

inline bool exceeds_population(const Environment& env, std::uint32_t cap) {
  for (const auto& [k, n] : env.entries())
    if (n > cap) return true;
  return false;
}

}  // namespace detail

// Breadth-first construction of the reachable state space with deterministic
// numbering: frontier states expand in index order, successors are already
// sorted, equal-target probabilistic branches merge by weight addition.
inline std::pair<Mdp, BuildReport> build(const Model& model, const std::vector<BoolPtr>& atoms,
                                         const ExploreOptions& opts = {}) {
  for (const auto& a : atoms)
    if (contains_myloc(a))
      throw ModelError("state labels cannot mention 'here': no individual to resolve it");

  Mdp mdp;
  BuildReport report;
  mdp.atoms = atoms;

  std::unordered_map<std::string, std::uint32_t> index;
  std::vector<Configuration> configs;
  std::vector<std::uint32_t> frontier;

  auto intern = [&](const Configuration& c) -> std::uint32_t {
    std::string key = c.digest();
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    std::uint32_t idx = static_cast<std::uint32_t>(mdp.states.size());
    index.emplace(std::move(key), idx);
    Mdp::State st;
    st.digest_hash = c.digest_hash();
    mdp.states.push_back(std::move(st));
    configs.push_back(c);
    return idx;
  };

  Configuration init = initial_configuration(model);
  mdp.initial = intern(init);
  frontier.push_back(mdp.initial);

  std::vector<bool> expanded(1, false);
  std::size_t depth = 0;
  bool stop = false;

  while (!frontier.empty() && !stop) {
    if (opts.max_depth && depth >= *opts.max_depth) {
      report.truncated = true;
      report.truncation_reason = "max-depth " + std::to_string(*opts.max_depth) + " reached";
      break;
    }

    // successor computation is pure, so a layer can fan out over threads;
    // state numbering stays sequential in frontier order
    std::vector<SuccessorSet> results(frontier.size());
    unsigned nthreads = std::max(1u, opts.threads);
    if (nthreads <= 1 || frontier.size() < 2) {
      for (std::size_t i = 0; i < frontier.size(); ++i)
        results[i] = successors(model, configs[frontier[i]], opts.validate);
    } else {
      std::vector<std::thread> pool;
      std::atomic<std::size_t> next{0};
      std::vector<std::exception_ptr> errors(nthreads);
      for (unsigned t = 0; t < nthreads; ++t)
        pool.emplace_back([&, t] {
          try {
            for (;;) {
              std::size_t i = next.fetch_add(1);
              if (i >= frontier.size()) return;
              results[i] = successors(model, configs[frontier[i]], opts.validate);
            }
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }

    std::vector<std::uint32_t> next_frontier;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      std::uint32_t s = frontier[i];
      const SuccessorSet& succ = results[i];
      expanded[s] = true;
      ++report.states_explored;

      if (succ.kind == Fanout::Kind::Terminal) {
        mdp.states[s].kind = Mdp::StateKind::Terminal;
        mdp.states[s].deadlock = !configs[s].system->atoms.empty();
        if (mdp.states[s].deadlock) ++report.deadlocks;
        continue;
      }

      auto note_successor = [&](const Configuration& c) -> std::uint32_t {
        std::size_t before = mdp.states.size();
        std::uint32_t t = intern(c);
        if (mdp.states.size() > before) {
          expanded.push_back(false);
          bool over_pop = opts.max_population_per_location &&
                          detail::exceeds_population(c.env, *opts.max_population_per_location);
          bool over_states = opts.max_states && mdp.states.size() > *opts.max_states;
          if (over_pop || over_states) {
            mdp.states[t].truncated = true;
            report.truncated = true;
            if (report.truncation_reason.empty())
              report.truncation_reason = over_pop ? "max-population-per-location exceeded"
                                                  : "max-states " +
                                                        std::to_string(*opts.max_states) +
                                                        " reached";
          } else {
            next_frontier.push_back(t);
          }
        }
        return t;
      };

      // interning successors may grow mdp.states; collect choices locally
      std::vector<Mdp::Choice> choices;
      Mdp::StateKind kind;
      if (succ.kind == Fanout::Kind::Probabilistic) {
        kind = Mdp::StateKind::Probabilistic;
        Mdp::Choice choice;
        choice.label = "-";
        // successors arrive sorted by digest: equal targets are adjacent
        for (const auto& item : succ.items) {
          std::uint32_t t = note_successor(item.config);
          if (!choice.branches.empty() && choice.branches.back().target == t)
            choice.branches.back().prob += item.weight.to_double();
          else
            choice.branches.push_back({t, item.weight.to_double()});
        }
        mdp.transition_count += choice.branches.size();
        choices.push_back(std::move(choice));
      } else {
        kind = Mdp::StateKind::Nondeterministic;
        for (const auto& item : succ.items) {
          Mdp::Choice choice;
          choice.label = item.label_str;
          choice.tick = item.tick;
          choice.branches.push_back({note_successor(item.config), 1.0});
          ++mdp.transition_count;
          choices.push_back(std::move(choice));
        }
      }
      mdp.states[s].kind = kind;
      mdp.states[s].choices = std::move(choices);
    }
    frontier = std::move(next_frontier);
    ++depth;
  }

  // anything left unexpanded (bound hit mid-layer) is a truncated frontier
  for (std::uint32_t s = 0; s < mdp.states.size(); ++s)
    if (!expanded[s] && !mdp.states[s].truncated) {
      mdp.states[s].truncated = true;
      report.truncated = true;
      if (report.truncation_reason.empty()) report.truncation_reason = "exploration stopped";
    }

  mdp.truncated = report.truncated;
  report.transitions = mdp.transition_count;

  // state labeling from the environment component only
  const Evaluator ev(model);
  mdp.labels.assign(atoms.size(), std::vector<bool>(mdp.states.size(), false));
  for (std::size_t a = 0; a < atoms.size(); ++a)
    for (std::uint32_t s = 0; s < mdp.states.size(); ++s)
      mdp.labels[a][s] = ev.sat(configs[s].env, *atoms[a]);

  return {std::move(mdp), std::move(report)};
}

// ---------------------------------------------------------------------------
// Explicit-state text export: .sta / .tra / .lab, LF endings, byte-stable.

namespace detail {

inline std::string format_double(double d) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, r.ptr);
}

inline std::string format_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace detail

inline void export_explicit(const Mdp& mdp, const std::string& prefix) {
  {
    std::ofstream sta(prefix + ".sta", std::ios::binary);
    if (!sta) throw ModelError("cannot write " + prefix + ".sta");
    for (std::uint32_t s = 0; s < mdp.states.size(); ++s)
      sta << s << ":" << detail::format_hash(mdp.states[s].digest_hash) << "\n";
  }
  {
    std::ofstream tra(prefix + ".tra", std::ios::binary);
    if (!tra) throw ModelError("cannot write " + prefix + ".tra");
    for (std::uint32_t s = 0; s < mdp.states.size(); ++s) {
      const auto& st = mdp.states[s];
      for (std::size_t c = 0; c < st.choices.size(); ++c) {
        const auto& choice = st.choices[c];
        for (const auto& br : choice.branches)
          tra << s << " " << c << " " << br.target << " " << detail::format_double(br.prob)
              << " " << (choice.tick ? 1 : 0) << " " << choice.label << "\n";
      }
    }
  }
  {
    std::ofstream lab(prefix + ".lab", std::ios::binary);
    if (!lab) throw ModelError("cannot write " + prefix + ".lab");
    lab << "#atoms: " << mdp.atoms.size() << "\n";
    for (std::uint32_t s = 0; s < mdp.states.size(); ++s) {
      std::string line;
      for (std::size_t a = 0; a < mdp.atoms.size(); ++a)
        if (mdp.labels[a][s]) {
          line += line.empty() ? "" : " ";
          line += std::to_string(a);
        }
      if (!line.empty()) lab << s << ": " << line << "\n";
    }
  }
}

}  // namespace palps

#pragma once

// Deterministic random PALPS model generator. Emits model text so the
// parser is exercised too. Generated processes are tick-progressive: every
// recursion cycle passes a tick prefix, so each round takes finitely many
// transitions and bounded-until values resolve at a finite horizon.

#include <random>
#include <string>
#include <vector>

namespace modelgen {

struct GenConfig {
  bool allow_predation = true;
  bool allow_reproduction = false;
  // restrict weights to dyadic rationals: products and sums of them stay
  // small, which keeps exact-arithmetic oracles fast
  bool dyadic_weights = false;
  int max_individuals = 3;
};

inline std::string generate_model_text(std::uint64_t seed, const GenConfig& cfg = {}) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };

  std::string text;
  int n_loc = 2 + pick(2);
  static const char* locs[] = {"a", "b", "c"};
  text += "locations { ";
  for (int i = 0; i < n_loc; ++i) text += std::string(i ? ", " : "") + locs[i];
  text += " }\n";
  text += "neighbors { a -- b";
  if (n_loc == 3) {
    text += ", b -- c";
    if (pick(2)) text += ", a -- c";
  }
  text += " }\n";

  static const char* survival_weights_any[] = {"1/2", "3/4", "2/3", "1/4"};
  static const char* survival_weights_dyadic[] = {"1/2", "3/4", "7/8", "1/4"};
  static const char* split_weights_any[][2] = {{"1/2", "1/2"}, {"1/4", "3/4"}, {"1/3", "2/3"}};
  static const char* split_weights_dyadic[][2] = {{"1/2", "1/2"}, {"1/4", "3/4"}, {"3/8", "5/8"}};
  const char** survival_weights =
      cfg.dyadic_weights ? survival_weights_dyadic : survival_weights_any;
  auto& split_weights = cfg.dyadic_weights ? split_weights_dyadic : split_weights_any;

  int n_species = (cfg.allow_predation && pick(2)) ? 2 : 1;
  std::vector<std::string> species;
  for (int sp = 0; sp < n_species; ++sp) species.push_back(sp == 0 ? "s" : "v");

  std::string defs;
  for (int sp = 0; sp < n_species; ++sp) {
    const std::string& name = species[sp];
    std::string c0 = "C" + name + "0";
    std::string c1 = "C" + name + "1";
    std::string c2 = "C" + name + "2";
    text += "species " + name + " = " + c0 + "\n";

    if (sp == 1) {
      // predator: hunts species s when present, starves after two dry rounds
      std::string guard = "count(s, here) >= " + std::to_string(1 + pick(2));
      defs += "process " + c0 + " = cond(" + guard + " -> out prey_s.tick." + c0 +
              ", true -> tick." + c1 + ")\n";
      defs += "process " + c1 + " = cond(" + guard + " -> out prey_s.tick." + c0 +
              ", true -> tick.0)\n";
      continue;
    }

    // prey/solo species: survive, maybe reproduce, maybe move, tick
    std::string q = survival_weights[pick(4)];
    std::string after_move = "tick." + c0;
    if (cfg.allow_reproduction && pick(2))
      after_move = "out rep_" + name + ".tick." + c0;
    switch (pick(3)) {
      case 0:
        defs += "process " + c1 + " = sum over x in neigh(here) { uniform: go x." +
                after_move + " }\n";
        break;
      case 1: {
        auto& w = split_weights[pick(3)];
        defs += "process " + c1 + " = sum { " + std::string(w[0]) + ": " + c2 + " + " +
                std::string(w[1]) + ": " + after_move + " }\n";
        defs += "process " + c2 + " = sum over x in neigh(here) { uniform: go x." +
                after_move + " }\n";
        break;
      }
      default:
        defs += "process " + c1 + " = cond(count(" + name + ", here) >= 2 -> " +
                "(sum over x in neigh(here) { uniform: go x." + after_move + " })" +
                ", true -> " + after_move + ")\n";
        break;
    }
    defs += "process " + c0 + " = sum { " + q + ": " + c1 + " + (1-" + q + "): 0 }\n";
  }
  text += defs;

  text += "system = ";
  int n_ind = 1 + pick(cfg.max_individuals);
  bool first = true;
  for (int i = 0; i < n_ind; ++i) {
    int sp = pick(n_species);
    std::string c0 = "C" + species[sp] + "0";
    text += std::string(first ? "" : " | ") + c0 + "@(" + locs[pick(n_loc)] + ", " +
            species[sp] + ")";
    first = false;
  }
  if (n_species == 2) {
    // make sure at least one predator is present when the species exists
    text += " | Cv0@(" + std::string(locs[pick(n_loc)]) + ", v)";
  }
  if (cfg.allow_reproduction)
    for (int sp = 0; sp < n_species; ++sp)
      if (sp == 0) text += " | species " + species[sp];
  text += "\n";
  return text;
}

}  // namespace modelgen

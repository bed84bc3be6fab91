#pragma once

#include <string>
#include <vector>

namespace palps {

// Bundled models under corpus/: the two dispersal systems, the genotype and
// wood thrush metapopulations, and reduced instances small enough for exact
// checking. Paths are relative to the corpus directory.
struct CorpusEntry {
  std::string name;
  std::string model_file;
  std::string property_file;    // empty when none ships
  std::string expected_file;    // frozen oracle-derived results, empty when none
  std::string notes;
};

inline const std::vector<CorpusEntry>& corpus_list() {
  static const std::vector<CorpusEntry> entries = {
      {"dispersal", "dispersal.palps", "dispersal.pctl", "",
       "single species on a torus grid; dispersal, exclusive-use reproduction"},
      {"predator_prey", "predator_prey.palps", "", "",
       "dispersal species plus a predator that dies after two prey-less rounds"},
      {"genotypes", "genotypes.palps", "", "",
       "genotypes differing in dispersal propensity; adults spawn three juveniles"},
      {"woodthrush", "woodthrush.palps", "", "",
       "breeders/floaters/juveniles with capacity checks and two dispersal attempts"},
      {"tiny_dispersal", "tiny_dispersal.palps", "tiny_dispersal.pctl", "",
       "three individuals on a 3x3 torus; 64-branch first probabilistic step"},
      {"tiny_extinction", "tiny_extinction.palps", "tiny_extinction.pctl",
       "tiny_extinction.expected",
       "two individuals, two patches, per-round death; exactly checkable"},
      {"tiny_competition", "tiny_competition.palps", "tiny_competition.pctl",
       "tiny_competition.expected",
       "two species with different mortality; dominance property is exact"},
      {"tiny_predation", "tiny_predation.palps", "tiny_predation.pctl", "",
       "one predator, no prey; starvation after two rounds"},
  };
  return entries;
}

}  // namespace palps

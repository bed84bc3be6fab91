#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "palps/parser.hpp"
#include "palps/semantics.hpp"
#include "palps/wellformed.hpp"

namespace testutil {

inline std::string corpus_dir() { return PALPS_CORPUS_DIR; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline palps::Model load_corpus(const std::string& name, bool close_channels = true) {
  std::string path = corpus_dir() + "/" + name;
  palps::Model m = palps::parse_model(slurp(path), path);
  if (close_channels) palps::close_special_channels(m);
  return m;
}

inline palps::Model parse(const std::string& text, bool close_channels = true) {
  palps::Model m = palps::parse_model(text, "<test>");
  if (close_channels) palps::close_special_channels(m);
  return m;
}

}  // namespace testutil

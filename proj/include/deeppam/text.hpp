#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace deeppam {

/// 17 significant digits: round-trips doubles exactly, keeping CSV output
/// byte-stable across runs.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace deeppam

#include "cmivtp/data/types.hpp"

#include <algorithm>

namespace cmivtp::data {

bool AisTrajectory::fully_available() const {
  return !available.empty() && std::all_of(available.begin(), available.end(), [](bool b) { return b; });
}

bool AisTrajectory::any_available() const {
  return std::any_of(available.begin(), available.end(), [](bool b) { return b; });
}

const char* to_string(Density d) {
  switch (d) {
    case Density::low:
      return "low";
    case Density::medium:
      return "medium";
    case Density::high:
      return "high";
  }
  return "medium";
}

Density density_from_string(const std::string& s) {
  if (s == "low") return Density::low;
  if (s == "medium") return Density::medium;
  if (s == "high") return Density::high;
  throw ParseError("unknown density '" + s + "'");
}

}  // namespace cmivtp::data

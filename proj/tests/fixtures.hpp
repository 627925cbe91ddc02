#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "isc/panel.hpp"

namespace fixture {

// One unit observed at `periods` with outcomes `y`; flagged from t0 on with
// `hours` when t0 >= 0.
inline void add_unit(std::vector<isc::Observation>& obs, const std::string& id, const std::vector<int>& periods,
                     const std::vector<double>& y, int t0 = -1, double hours = 10.0,
                     const std::vector<double>& cov = {}, const std::string& stratum = "") {
  for (std::size_t i = 0; i < periods.size(); ++i) {
    const bool flagged = t0 >= 0 && periods[i] >= t0;
    obs.push_back({id, periods[i], y[i], cov, flagged, flagged ? hours : 0.0, stratum});
  }
}

inline std::vector<int> range(int from, int to) {
  std::vector<int> out;
  for (int t = from; t < to; ++t) out.push_back(t);
  return out;
}

// Outcome a + b * t on the given periods.
inline std::vector<double> line(const std::vector<int>& periods, double a, double b) {
  std::vector<double> out;
  for (int t : periods) out.push_back(a + b * t);
  return out;
}

}  // namespace fixture

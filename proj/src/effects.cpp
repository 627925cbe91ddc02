#include "isc/effects.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace isc {

std::string method_name(Method m) {
  switch (m) {
    case Method::ISC: return "ISC";
    case Method::PSM: return "PSM";
    case Method::DID: return "DID";
    case Method::SDID: return "SDID";
    case Method::PLACEBO: return "PLACEBO";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "ISC") return Method::ISC;
  if (name == "PSM") return Method::PSM;
  if (name == "DID") return Method::DID;
  if (name == "SDID") return Method::SDID;
  if (name == "PLACEBO") return Method::PLACEBO;
  throw std::invalid_argument("unknown method: " + name);
}

std::optional<std::size_t> EffectSeries::index_of(int t) const {
  const auto it = std::lower_bound(relative_times.begin(), relative_times.end(), t);
  if (it == relative_times.end() || *it != t) return std::nullopt;
  return static_cast<std::size_t>(it - relative_times.begin());
}

Eigen::VectorXd case_synthetic(const AlignedCase& c, const DonorSet& donors, const SimplexWeights& weights) {
  if (static_cast<std::size_t>(weights.weights.size()) != donors.size()) {
    throw std::invalid_argument("weights do not match the donor set");
  }
  Eigen::MatrixXd donor_outcomes(static_cast<Eigen::Index>(donors.size()), c.control_outcomes.cols());
  for (std::size_t i = 0; i < donors.size(); ++i) {
    donor_outcomes.row(static_cast<Eigen::Index>(i)) = c.control_outcomes.row(static_cast<Eigen::Index>(donors.rows[i]));
  }
  return synthetic_trajectory(weights, donor_outcomes);
}

UnitEffect isc_effect(const AlignedCase& c, const DonorSet& donors, const SimplexWeights& weights) {
  const Eigen::VectorXd synthetic = case_synthetic(c, donors, weights);
  UnitEffect out;
  out.unit_id = c.treated_id;
  out.relative_times = c.relative_times;
  out.values.resize(c.relative_times.size());
  for (std::size_t j = 0; j < out.values.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    out.values[j] = c.treated_outcomes[i] - synthetic[i];
  }
  return out;
}

EffectSeries att(const std::vector<UnitEffect>& effects, Method method) {
  std::map<int, std::pair<double, int>> acc;
  for (const auto& e : effects) {
    if (e.relative_times.size() != e.values.size()) throw std::invalid_argument("malformed unit effect");
    for (std::size_t j = 0; j < e.values.size(); ++j) {
      if (!std::isfinite(e.values[j])) continue;
      auto& [sum, n] = acc[e.relative_times[j]];
      sum += e.values[j];
      ++n;
    }
  }
  EffectSeries out;
  out.method = method;
  for (const auto& [t, sn] : acc) {
    out.relative_times.push_back(t);
    out.point.push_back(sn.first / sn.second);
    out.n_cases.push_back(sn.second);
  }
  return out;
}

}  // namespace isc

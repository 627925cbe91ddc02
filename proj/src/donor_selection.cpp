#include "isc/donor_selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace isc {

void DistanceConfig::validate() const {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (metric == Metric::minkowski && !(p >= 1.0 && std::isfinite(p))) {
    throw std::invalid_argument("minkowski order p must be >= 1");
  }
}

Metric parse_metric(const std::string& name) {
  if (name == "euclidean") return Metric::euclidean;
  if (name == "manhattan") return Metric::manhattan;
  if (name == "minkowski") return Metric::minkowski;
  throw std::invalid_argument("unknown metric: " + name);
}

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::euclidean: return "euclidean";
    case Metric::manhattan: return "manhattan";
    case Metric::minkowski: return "minkowski";
  }
  return "?";
}

double distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                const DistanceConfig& config) {
  if (a.size() != b.size()) throw std::invalid_argument("distance between vectors of different length");
  switch (config.metric) {
    case Metric::euclidean: return (a - b).norm();
    case Metric::manhattan: return (a - b).cwiseAbs().sum();
    case Metric::minkowski: {
      if (config.p == 1.0) return (a - b).cwiseAbs().sum();
      if (config.p == 2.0) return (a - b).norm();
      return std::pow((a - b).cwiseAbs().array().pow(config.p).sum(), 1.0 / config.p);
    }
  }
  return 0.0;
}

FeatureSpace feature_matrix(const AlignedCase& c, bool standardize) {
  const auto n_pre = static_cast<Eigen::Index>(c.n_pre());
  const auto dim_cov = c.treated_covariates.size();
  const Eigen::Index dim = n_pre + dim_cov;
  const Eigen::Index n_ctrl = c.control_outcomes.rows();

  FeatureSpace fs;
  fs.treated.resize(dim);
  fs.treated << c.treated_outcomes.head(n_pre), c.treated_covariates;
  fs.controls.resize(n_ctrl, dim);
  fs.controls << c.control_outcomes.leftCols(n_pre), c.control_covariates;

  if (standardize) {
    const double n = static_cast<double>(n_ctrl + 1);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double mu = (fs.controls.col(j).sum() + fs.treated[j]) / n;
      const double ss = (fs.controls.col(j).array() - mu).square().sum() + (fs.treated[j] - mu) * (fs.treated[j] - mu);
      const double sd = std::sqrt(ss / n);
      if (sd > 0.0 && std::isfinite(sd)) {
        fs.controls.col(j) = (fs.controls.col(j).array() - mu) / sd;
        fs.treated[j] = (fs.treated[j] - mu) / sd;
      } else {
        fs.controls.col(j).setZero();
        fs.treated[j] = 0.0;
      }
    }
  }
  return fs;
}

DonorSet select_donors(const Eigen::Ref<const Eigen::VectorXd>& treated,
                       const Eigen::Ref<const Eigen::MatrixXd>& controls, const DistanceConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(controls.rows());
  if (n == 0) throw std::invalid_argument("select_donors needs at least one control");
  if (controls.cols() != treated.size()) throw std::invalid_argument("feature dimensions disagree");

  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = distance(treated, controls.row(static_cast<Eigen::Index>(i)).transpose(), config);
  }

  DonorSet out;
  const auto k = static_cast<std::size_t>(config.k);
  out.clamped = k > n;
  const std::size_t keep = std::min(k, n);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto closer = [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); };
  if (keep < n) {
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(), closer);
    idx.resize(keep);
  }
  std::sort(idx.begin(), idx.end(), closer);

  out.rows = idx;
  out.distances.reserve(keep);
  for (std::size_t i : idx) out.distances.push_back(d[i]);
  return out;
}

DonorSet select_donors(const AlignedCase& c, const DistanceConfig& config) {
  const FeatureSpace fs = feature_matrix(c, config.standardize);
  DonorSet out = select_donors(fs.treated, fs.controls, config);
  out.treated_id = c.treated_id;
  for (std::size_t r : out.rows) out.donor_ids.push_back(c.control_ids[r]);
  return out;
}

}  // namespace isc

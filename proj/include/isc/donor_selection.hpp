#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isc/panel.hpp"

namespace isc {

enum class Metric { euclidean, manhattan, minkowski };

struct DistanceConfig {
  Metric metric = Metric::euclidean;
  double p = 2.0;  // minkowski order, >= 1
  int k = 10;
  bool standardize = true;

  void validate() const;
};

Metric parse_metric(const std::string& name);
std::string metric_name(Metric m);

/// Distance between two equally sized vectors under `config`'s metric.
double distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                const DistanceConfig& config);

/// Treated feature row and control feature matrix (one row per control).
struct FeatureSpace {
  Eigen::VectorXd treated;
  Eigen::MatrixXd controls;
};

/// Pre-treatment outcomes (ascending relative time) followed by covariates.
/// With `standardize`, every column is z-scored with the pooled mean and
/// population sd of treated + controls; constant columns become zero.
FeatureSpace feature_matrix(const AlignedCase& c, bool standardize);

/// The K nearest controls of one treated unit.
struct DonorSet {
  UnitId treated_id;
  std::vector<std::size_t> rows;  // indices into the control matrix / case controls
  std::vector<UnitId> donor_ids;  // filled when selected from an AlignedCase
  std::vector<double> distances;  // ascending
  bool clamped = false;           // K exceeded the available controls

  std::size_t size() const { return rows.size(); }
};

/// K smallest distances; ties at equal distance keep input order.
DonorSet select_donors(const Eigen::Ref<const Eigen::VectorXd>& treated,
                       const Eigen::Ref<const Eigen::MatrixXd>& controls, const DistanceConfig& config);

/// Builds the feature space of the case and selects from its controls.
DonorSet select_donors(const AlignedCase& c, const DistanceConfig& config);

}  // namespace isc

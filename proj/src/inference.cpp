#include "isc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "isc/rng.hpp"
#include "isc/stats.hpp"

namespace isc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Effects laid out on a shared time grid; NaN where a unit is unobserved.
Eigen::MatrixXd dense_effects(const std::vector<UnitEffect>& effects, const std::vector<int>& times) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(effects.size()),
                                                static_cast<Eigen::Index>(times.size()), kNaN);
  for (std::size_t l = 0; l < effects.size(); ++l) {
    for (std::size_t j = 0; j < effects[l].relative_times.size(); ++j) {
      const auto it = std::lower_bound(times.begin(), times.end(), effects[l].relative_times[j]);
      if (it != times.end() && *it == effects[l].relative_times[j]) {
        m(static_cast<Eigen::Index>(l), it - times.begin()) = effects[l].values[j];
      }
    }
  }
  return m;
}

// Mean over the drawn rows that are finite in each column.
void resampled_means(const Eigen::MatrixXd& dense, const std::vector<std::size_t>& draw,
                     Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
  for (Eigen::Index t = 0; t < dense.cols(); ++t) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t l : draw) {
      const double v = dense(static_cast<Eigen::Index>(l), t);
      if (std::isfinite(v)) {
        sum += v;
        ++n;
      }
    }
    out[t] = n > 0 ? sum / n : kNaN;
  }
}

struct Percentiles {
  std::vector<double> low, high, se;
};

Percentiles column_percentiles(const Eigen::MatrixXd& replicates, const BootstrapConfig& config) {
  Percentiles p;
  for (Eigen::Index t = 0; t < replicates.cols(); ++t) {
    std::vector<double> col;
    col.reserve(static_cast<std::size_t>(replicates.rows()));
    for (Eigen::Index b = 0; b < replicates.rows(); ++b) {
      if (std::isfinite(replicates(b, t))) col.push_back(replicates(b, t));
    }
    if (col.empty()) {
      p.low.push_back(kNaN);
      p.high.push_back(kNaN);
      p.se.push_back(kNaN);
      continue;
    }
    p.se.push_back(stats::sample_sd(col));
    std::sort(col.begin(), col.end());
    p.low.push_back(stats::quantile_sorted(col, config.lower_prob()));
    p.high.push_back(stats::quantile_sorted(col, config.upper_prob()));
  }
  return p;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace

void BootstrapConfig::validate() const {
  if (replicates < 1) throw std::invalid_argument("bootstrap replicates must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0, 1)");
}

BootstrapResult bootstrap_ci(const std::vector<UnitEffect>& effects, const BootstrapConfig& config, Method method) {
  config.validate();
  BootstrapResult out;
  out.series = att(effects, method);
  if (effects.size() < 2) return out;

  const Eigen::MatrixXd dense = dense_effects(effects, out.series.relative_times);
  const std::size_t n = effects.size();
  Rng rng(stream_seed(config.seed, method == Method::PLACEBO ? Stream::placebo : Stream::bootstrap));
  out.replicates.resize(config.replicates, dense.cols());
  std::vector<std::size_t> draw(n);
  for (int b = 0; b < config.replicates; ++b) {
    for (auto& d : draw) d = uniform_index(rng, n);
    resampled_means(dense, draw, out.replicates.row(b));
  }
  Percentiles p = column_percentiles(out.replicates, config);
  out.series.ci_low = std::move(p.low);
  out.series.ci_high = std::move(p.high);
  out.se = std::move(p.se);
  out.ci_defined = true;
  return out;
}

WithinBootstrap within_bootstrap_ci(const AlignedCase& c, const DonorSet& donors, const BootstrapConfig& config,
                                    const WithinOptions& options) {
  config.validate();
  if (donors.size() < 1) throw std::invalid_argument("within bootstrap needs a donor set");
  const FeatureSpace fs = feature_matrix(c, options.standardize);
  const Eigen::MatrixXd donor_features = gather_rows(fs.controls, donors.rows);
  const Eigen::MatrixXd donor_outcomes = gather_rows(c.control_outcomes, donors.rows);

  WithinBootstrap out;
  const SimplexWeights base = solve_weights(fs.treated, donor_features, options.solver);
  out.estimate = isc_effect(c, donors, base);

  const std::size_t k = donors.size();
  Rng rng(stream_seed(config.seed, Stream::within_bootstrap, fnv1a(c.treated_id)));
  out.replicates.resize(config.replicates, static_cast<Eigen::Index>(c.relative_times.size()));
  std::vector<std::size_t> draw(k);
  for (int b = 0; b < config.replicates; ++b) {
    for (auto& d : draw) d = uniform_index(rng, k);
    const SimplexWeights w = solve_weights(fs.treated, gather_rows(donor_features, draw), options.solver);
    if (!w.converged) ++out.nonconverged;
    const Eigen::VectorXd synthetic = synthetic_trajectory(w, gather_rows(donor_outcomes, draw));
    out.replicates.row(b) = (c.treated_outcomes - synthetic).transpose();
  }
  Percentiles p = column_percentiles(out.replicates, config);
  out.ci_low = std::move(p.low);
  out.ci_high = std::move(p.high);
  return out;
}

EffectSeries nested_bootstrap_ci(const std::vector<WithinBootstrap>& cases, const BootstrapConfig& config) {
  config.validate();
  std::vector<UnitEffect> estimates;
  for (const auto& c : cases) {
    if (c.replicates.rows() != config.replicates) {
      throw std::invalid_argument("nested bootstrap needs one donor resample per replicate");
    }
    estimates.push_back(c.estimate);
  }
  EffectSeries series = att(estimates, Method::ISC);
  if (cases.size() < 2) return series;

  const auto& times = series.relative_times;
  // Column of each case's replicate matrix for each shared time.
  std::vector<std::vector<Eigen::Index>> cols(cases.size(), std::vector<Eigen::Index>(times.size(), -1));
  for (std::size_t l = 0; l < cases.size(); ++l) {
    const auto& rt = cases[l].estimate.relative_times;
    for (std::size_t j = 0; j < times.size(); ++j) {
      const auto it = std::lower_bound(rt.begin(), rt.end(), times[j]);
      if (it != rt.end() && *it == times[j]) cols[l][j] = it - rt.begin();
    }
  }

  const std::size_t n = cases.size();
  Rng rng(stream_seed(config.seed, Stream::bootstrap, 1));
  Eigen::MatrixXd replicates(config.replicates, static_cast<Eigen::Index>(times.size()));
  std::vector<std::size_t> draw(n);
  for (int b = 0; b < config.replicates; ++b) {
    for (auto& d : draw) d = uniform_index(rng, n);
    for (std::size_t j = 0; j < times.size(); ++j) {
      double sum = 0.0;
      int cnt = 0;
      for (std::size_t l : draw) {
        if (cols[l][j] < 0) continue;
        sum += cases[l].replicates(b, cols[l][j]);
        ++cnt;
      }
      replicates(b, static_cast<Eigen::Index>(j)) = cnt > 0 ? sum / cnt : kNaN;
    }
  }
  Percentiles p = column_percentiles(replicates, config);
  series.ci_low = std::move(p.low);
  series.ci_high = std::move(p.high);
  return series;
}

PlaceboCase placebo_case(const AlignedCase& c, const DonorSet& donors, const WithinOptions& options) {
  const std::size_t n = donors.size();
  if (n < 2) throw std::invalid_argument("placebo test needs at least two donors");
  const FeatureSpace fs = feature_matrix(c, options.standardize);
  const auto T = static_cast<Eigen::Index>(c.relative_times.size());
  const Eigen::Index dim = fs.treated.size();

  PlaceboCase out;
  out.mean_effect.unit_id = c.treated_id;
  out.mean_effect.relative_times = c.relative_times;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(T);

  // Pool for pseudo-treated donor i: the other donors followed by the treated unit.
  Eigen::MatrixXd pool_features(static_cast<Eigen::Index>(n), dim);
  Eigen::MatrixXd pool_outcomes(static_cast<Eigen::Index>(n), T);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index r = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      pool_features.row(r) = fs.controls.row(static_cast<Eigen::Index>(donors.rows[j]));
      pool_outcomes.row(r) = c.control_outcomes.row(static_cast<Eigen::Index>(donors.rows[j]));
      ++r;
    }
    pool_features.row(r) = fs.treated.transpose();
    pool_outcomes.row(r) = c.treated_outcomes.transpose();

    const auto donor_row = static_cast<Eigen::Index>(donors.rows[i]);
    const SimplexWeights w = solve_weights(fs.controls.row(donor_row).transpose(), pool_features, options.solver);
    ++out.n_solves;
    if (!w.converged) ++out.n_nonconverged;
    total += c.control_outcomes.row(donor_row).transpose() - synthetic_trajectory(w, pool_outcomes);
  }
  total /= static_cast<double>(n);
  out.mean_effect.values.assign(total.data(), total.data() + T);
  return out;
}

BootstrapResult placebo_test(const std::vector<PlaceboCase>& cases, const BootstrapConfig& config) {
  std::vector<UnitEffect> effects;
  effects.reserve(cases.size());
  for (const auto& c : cases) effects.push_back(c.mean_effect);
  return bootstrap_ci(effects, config, Method::PLACEBO);
}

PretrendResult pretrend_test(const EffectSeries& series, const Eigen::MatrixXd& replicates,
                             const std::vector<int>& exclude) {
  if (replicates.cols() != static_cast<Eigen::Index>(series.relative_times.size())) {
    throw std::invalid_argument("replicate matrix does not match the effect series");
  }
  PretrendResult out;
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < series.relative_times.size(); ++j) {
    const int t = series.relative_times[j];
    if (t >= 0 || !std::isfinite(series.point[j])) continue;
    if (std::find(exclude.begin(), exclude.end(), t) != exclude.end()) continue;
    cols.push_back(static_cast<Eigen::Index>(j));
    out.tested_times.push_back(t);
  }
  if (cols.empty()) throw std::invalid_argument("pretrend test needs at least one pre-period estimate");
  out.df = static_cast<int>(cols.size());

  const auto m = static_cast<Eigen::Index>(cols.size());
  Eigen::VectorXd theta(m);
  for (Eigen::Index i = 0; i < m; ++i) theta[i] = series.point[static_cast<std::size_t>(cols[static_cast<std::size_t>(i)])];

  std::vector<Eigen::Index> rows;
  for (Eigen::Index b = 0; b < replicates.rows(); ++b) {
    bool ok = true;
    for (Eigen::Index c : cols) ok = ok && std::isfinite(replicates(b, c));
    if (ok) rows.push_back(b);
  }
  Eigen::MatrixXd sample(static_cast<Eigen::Index>(rows.size()), m);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index i = 0; i < m; ++i) sample(static_cast<Eigen::Index>(r), i) = replicates(rows[r], cols[static_cast<std::size_t>(i)]);
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
  if (sample.rows() >= 2) {
    const Eigen::MatrixXd centered = sample.rowwise() - sample.colwise().mean();
    cov = centered.transpose() * centered / static_cast<double>(sample.rows() - 1);
  }

  // Covariance is symmetric PSD, so U of its SVD gives the eigenbasis.
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(cov, Eigen::ComputeFullU);
  const Eigen::VectorXd sv = svd.singularValues();
  const double cutoff = sv[0] * static_cast<double>(m) * std::numeric_limits<double>::epsilon();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(m);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (sv[i] > cutoff && sv[i] > 0.0) {
      inv[i] = 1.0 / sv[i];
      ++rank;
    }
  }
  out.singular = rank < m;
  const Eigen::VectorXd proj = svd.matrixU().transpose() * theta;
  out.statistic = theta.isZero(0.0) ? 0.0 : proj.cwiseProduct(inv).dot(proj);
  out.p_value = stats::chi_square_sf(out.statistic, out.df);
  return out;
}

}  // namespace isc

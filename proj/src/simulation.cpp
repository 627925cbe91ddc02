#include "isc/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "isc/rng.hpp"

namespace isc {

void SimConfig::validate() const {
  if (n_units < 1) throw std::invalid_argument("n_units must be >= 1");
  if (n_subpops < 1) throw std::invalid_argument("n_subpops must be >= 1");
  if (n_treated < 0 || n_treated > n_units) throw std::invalid_argument("n_treated must lie in [0, n_units]");
  if (n_steps < 2 || t0_step < 1 || t0_step >= n_steps) throw std::invalid_argument("t0_step must lie in [1, n_steps)");
  if (!subpop_params.empty() && static_cast<int>(subpop_params.size()) != n_subpops)
    throw std::invalid_argument("subpop_params must have n_subpops entries");
  for (const auto& p : subpop_params)
    if (!(p.step_sd >= 0.0) || !std::isfinite(p.drift)) throw std::invalid_argument("invalid subpopulation parameters");
  if (!(treatment_down_prob_shift >= 0.0 && treatment_down_prob_shift <= 1.0))
    throw std::invalid_argument("treatment_down_prob_shift must lie in [0, 1]");
  if (hours_levels.empty()) throw std::invalid_argument("hours_levels must not be empty");
}

std::vector<SubpopParams> SimConfig::resolved_params() const {
  if (!subpop_params.empty()) return subpop_params;
  std::vector<SubpopParams> out(static_cast<std::size_t>(n_subpops));
  for (int s = 0; s < n_subpops; ++s) {
    const double f = n_subpops == 1 ? 0.5 : static_cast<double>(s) / (n_subpops - 1);
    out[static_cast<std::size_t>(s)] = {-0.5 + f, 0.5 + 1.5 * f};
  }
  return out;
}

PanelDataset generate_population(const SimConfig& config) {
  config.validate();
  const auto params = config.resolved_params();
  const auto n = static_cast<std::size_t>(config.n_units);

  Rng assign(stream_seed(config.seed, Stream::assignment));
  std::vector<int> subpop(n);
  for (auto& s : subpop) s = static_cast<int>(uniform_index(assign, params.size()));
  // partial Fisher-Yates for the treated set
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(config.n_treated); ++i)
    std::swap(order[i], order[i + uniform_index(assign, n - i)]);
  std::vector<double> hours(n, 0.0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(config.n_treated); ++i)
    hours[order[i]] = config.hours_levels[uniform_index(assign, config.hours_levels.size())];

  std::vector<Observation> obs;
  obs.reserve(n * static_cast<std::size_t>(config.n_steps));
  char id[32];
  for (std::size_t u = 0; u < n; ++u) {
    Rng rng(stream_seed(config.seed, Stream::simulation, u));
    const SubpopParams& p = params[static_cast<std::size_t>(subpop[u])];
    const bool treated = hours[u] > 0.0;
    const std::vector<double> cov{p.drift + 0.1 * standard_normal(rng), p.step_sd + 0.1 * standard_normal(rng)};
    const std::string stratum = uniform_unit(rng) < 0.5 ? "female" : "male";
    std::snprintf(id, sizeof id, "u%04zu", u);
    double y = 0.0;
    for (int t = 0; t < config.n_steps; ++t) {
      if (t > 0) {
        const double eps = standard_normal(rng);
        const double u_shock = uniform_unit(rng);
        y += p.drift + p.step_sd * eps;
        if (treated && t < config.t0_step) y += config.treated_pre_trend;
        if (treated && t >= config.t0_step && u_shock < config.treatment_down_prob_shift) y -= p.step_sd;
      }
      const bool flagged = treated && t >= config.t0_step;
      obs.push_back({id, t, y, cov, flagged, flagged ? hours[u] : 0.0, stratum});
    }
  }
  return PanelDataset(std::move(obs), {"drift_proxy", "volatility_proxy"});
}

ProfileResult profile_k_grid(const PanelDataset& dataset, const std::vector<int>& k_grid, int reps,
                             const IscOptions& options) {
  if (reps < 1) throw std::invalid_argument("reps must be >= 1");
  std::vector<UnitId> treated;
  for (const auto& u : dataset.units())
    if (u.treated()) treated.push_back(u.id);
  if (treated.empty()) throw DataError("profiling needs at least one treated unit");

  ProfileResult out;
  out.k_grid = k_grid;
  for (int k : k_grid) {
    IscOptions opts = options;
    opts.distance.k = k;
    opts.distance.validate();
    double total = 0.0;
    IscRun first;
    for (int r = 0; r < reps; ++r) {
      const auto start = std::chrono::steady_clock::now();
      IscRun run = run_isc(dataset, treated, opts);
      total += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (r == 0) first = std::move(run);
    }
    std::map<UnitId, int> freq;
    int clamped = 0;
    for (const auto& c : first.cases) {
      clamped += c.donors.clamped ? 1 : 0;
      for (const auto& d : c.donors.donor_ids) ++freq[d];
    }
    out.mean_rmspe.push_back(first.mean_rmspe());
    out.mean_exec_time.push_back(total / reps);
    out.donor_frequency.push_back(std::move(freq));
    out.n_clamped.push_back(clamped);
  }
  return out;
}

std::map<int, int> frequency_histogram(const std::map<UnitId, int>& frequency) {
  std::map<int, int> out;
  for (const auto& [id, n] : frequency) ++out[n];
  return out;
}

int frequency_mode(const std::map<UnitId, int>& frequency) {
  const auto hist = frequency_histogram(frequency);
  int mode = 0, best = -1;
  for (const auto& [count, units] : hist)
    if (units > best) {
      best = units;
      mode = count;
    }
  return mode;
}

}  // namespace isc

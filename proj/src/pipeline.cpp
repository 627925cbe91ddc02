#include "isc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <variant>

namespace isc {

std::string failure_name(FailureReason r) {
  switch (r) {
    case FailureReason::empty_donor_pool: return "empty_donor_pool";
    case FailureReason::alignment: return "alignment";
    case FailureReason::nonconverged: return "nonconverged";
  }
  return "?";
}

std::vector<UnitEffect> IscRun::effects() const {
  std::vector<UnitEffect> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(c.effect);
  return out;
}

double IscRun::mean_rmspe() const {
  if (cases.empty()) return std::nan("");
  double sum = 0.0;
  for (const auto& c : cases) sum += c.fit.rmspe_pre;
  return sum / static_cast<double>(cases.size());
}

int IscRun::count(FailureReason r) const {
  return static_cast<int>(std::count_if(failures.begin(), failures.end(), [r](const auto& f) { return f.reason == r; }));
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

CaseResult run_case(const PanelDataset& dataset, const UnitId& treated_id, const IscOptions& options) {
  const AlignedCase c = align_case(dataset, treated_id, options.align);
  const FeatureSpace fs = feature_matrix(c, options.distance.standardize);

  CaseResult out;
  out.treated_id = treated_id;
  out.band = dataset.unit(treated_id).band;
  out.donors = select_donors(fs.treated, fs.controls, options.distance);
  out.donors.treated_id = treated_id;
  Eigen::MatrixXd donor_features(static_cast<Eigen::Index>(out.donors.size()), fs.controls.cols());
  for (std::size_t i = 0; i < out.donors.size(); ++i) {
    out.donors.donor_ids.push_back(c.control_ids[out.donors.rows[i]]);
    donor_features.row(static_cast<Eigen::Index>(i)) = fs.controls.row(static_cast<Eigen::Index>(out.donors.rows[i]));
  }
  out.weights = solve_weights(fs.treated, donor_features, options.solver);
  const Eigen::VectorXd synthetic = case_synthetic(c, out.donors, out.weights);
  out.effect = isc_effect(c, out.donors, out.weights);
  out.fit = fit_diagnostics(c.treated_outcomes, synthetic, c.relative_times);
  return out;
}

namespace {

template <typename T>
using Slot = std::variant<std::monostate, T, CaseFailure>;

std::optional<CaseFailure> classify(const UnitId& id, const std::exception& e) {
  if (dynamic_cast<const EmptyDonorPoolError*>(&e)) return CaseFailure{id, FailureReason::empty_donor_pool, e.what()};
  if (dynamic_cast<const AlignmentError*>(&e)) return CaseFailure{id, FailureReason::alignment, e.what()};
  return std::nullopt;
}

// Evaluates fn for each unit in parallel, keeping input order and turning
// alignment errors into failures.
template <typename T, typename Fn>
void for_each_case(const std::vector<UnitId>& treated, int threads, Fn fn, std::vector<T>& ok,
                   std::vector<CaseFailure>& failures) {
  std::vector<Slot<T>> slots(treated.size());
  parallel_for(treated.size(), threads, [&](std::size_t i) {
    try {
      slots[i] = fn(treated[i]);
    } catch (const std::exception& e) {
      auto f = classify(treated[i], e);
      if (!f) throw;
      slots[i] = std::move(*f);
    }
  });
  for (auto& s : slots) {
    if (auto* v = std::get_if<T>(&s)) ok.push_back(std::move(*v));
    if (auto* f = std::get_if<CaseFailure>(&s)) failures.push_back(std::move(*f));
  }
}

}  // namespace

IscRun run_isc(const PanelDataset& dataset, const std::vector<UnitId>& treated, const IscOptions& options) {
  options.distance.validate();
  IscRun run;
  std::vector<CaseResult> all;
  for_each_case<CaseResult>(
      treated, options.threads, [&](const UnitId& id) { return run_case(dataset, id, options); }, all, run.failures);
  for (auto& c : all) {
    if (!c.weights.converged) {
      run.failures.push_back({c.treated_id, FailureReason::nonconverged,
                              "weight solver stopped after " + std::to_string(c.weights.iterations) + " iterations"});
      continue;
    }
    run.cases.push_back(std::move(c));
  }
  return run;
}

PlaceboRun run_placebo(const PanelDataset& dataset, const std::vector<UnitId>& treated, const IscOptions& options) {
  options.distance.validate();
  PlaceboRun run;
  const WithinOptions within{options.distance.standardize, options.solver};
  std::vector<PlaceboCase> all;
  for_each_case<PlaceboCase>(
      treated, options.threads,
      [&](const UnitId& id) {
        const AlignedCase c = align_case(dataset, id, options.align);
        DonorSet donors = select_donors(c, options.distance);
        if (donors.size() < 2) throw AlignmentError("placebo needs at least two donors for unit " + id);
        return placebo_case(c, donors, within);
      },
      all, run.failures);
  for (auto& c : all) {
    run.n_solves += c.n_solves;
    if (c.n_nonconverged > 0) {
      run.failures.push_back({c.mean_effect.unit_id, FailureReason::nonconverged,
                              std::to_string(c.n_nonconverged) + " placebo solves did not converge"});
      continue;
    }
    run.cases.push_back(std::move(c));
  }
  return run;
}

WithinRun run_within_bootstrap(const PanelDataset& dataset, const std::vector<UnitId>& treated,
                               const IscOptions& options, const BootstrapConfig& config) {
  WithinRun run;
  const WithinOptions within{options.distance.standardize, options.solver};
  for_each_case<WithinBootstrap>(
      treated, options.threads,
      [&](const UnitId& id) {
        const AlignedCase c = align_case(dataset, id, options.align);
        return within_bootstrap_ci(c, select_donors(c, options.distance), config, within);
      },
      run.cases, run.failures);
  return run;
}

}  // namespace isc

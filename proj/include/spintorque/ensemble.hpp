#pragma once

// Monte-Carlo ensembles. Member k runs with seed (control.seed + k); members
// are integrated in parallel and reduced strictly in index order, so the
// statistics do not depend on the worker count.

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "spintorque/dynamics.hpp"

namespace spintorque {

struct EnsembleStats {
  std::vector<double> times;
  std::vector<double> mean_phi, var_phi;
  std::vector<double> mean_pop0, var_pop0;
  std::vector<double> mean_pop_m1, var_pop_m1;
  std::vector<double> mean_pop_p1, var_pop_p1;
  int n_traj = 0;

  /// Variance of phi pooled over all members and all samples.
  double pooled_var_phi() const {
    double m = 0, s2 = 0;
    const auto n = static_cast<double>(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
      m += mean_phi[k];
      s2 += var_phi[k] + mean_phi[k] * mean_phi[k];
    }
    m /= n;
    return s2 / n - m * m;
  }
};

struct EnsembleResult {
  EnsembleStats stats;
  std::vector<Trajectory> trajectories;  // only when requested
};

struct EnsembleOptions {
  int threads = 1;
  bool keep_trajectories = false;
  /// Initial state for member k (given its seed). Defaults to the spin steady state at phi = 0.
  std::function<SystemState(int k, std::uint64_t seed)> initial;
  /// Called once per member, in index order, before the member is discarded.
  std::function<void(int k, const Trajectory&)> on_trajectory;
};

namespace detail {

struct Welford {
  std::vector<double> mean, m2;
  void add(std::size_t i, double x, int n) {
    const double d = x - mean[i];
    mean[i] += d / n;
    m2[i] += d * (x - mean[i]);
  }
};

}  // namespace detail

inline EnsembleResult run_ensemble(const ValidatedParams& params, const Protocol& protocol, const SimControl& control,
                                   const EnsembleOptions& opt = {}) {
  if (control.n_traj < 1) throw ValidationError({{ViolationKind::NonPositive, "n_traj"}});
  const int n = control.n_traj;
  const int workers = std::clamp(opt.threads, 1, n);
  std::function<SystemState(int, std::uint64_t)> initial = opt.initial;
  if (!initial) initial = [&](int, std::uint64_t) { return steady_initial_state(params, protocol, 0.0); };

  EnsembleResult res;
  detail::Welford phi, p0, pm, pp;
  int done = 0;

  auto reduce = [&](int k, Trajectory&& tr) {
    const std::size_t len = tr.size();
    if (done == 0) {
      res.stats.times = tr.times;
      for (auto* w : {&phi, &p0, &pm, &pp}) {
        w->mean.assign(len, 0.0);
        w->m2.assign(len, 0.0);
      }
    }
    ++done;
    for (std::size_t i = 0; i < len; ++i) {
      const auto& s = tr.states[i];
      phi.add(i, s.mech.phi, done);
      p0.add(i, s.spin.pop0, done);
      pm.add(i, s.spin.pop_m1, done);
      pp.add(i, s.spin.pop_p1, done);
    }
    if (opt.on_trajectory) opt.on_trajectory(k, tr);
    if (opt.keep_trajectories) res.trajectories.push_back(std::move(tr));
  };

  // Batches of `workers` members; each batch is reduced in index order once complete.
  for (int base = 0; base < n; base += workers) {
    const int count = std::min(workers, n - base);
    std::vector<std::optional<Trajectory>> batch(static_cast<std::size_t>(count));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    auto work = [&](int j) {
      try {
        SimControl c = control;
        c.seed = control.seed + static_cast<std::uint64_t>(base + j);
        batch[j] = integrate_trajectory(initial(base + j, c.seed), params, protocol, c);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    };
    if (count == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (int j = 0; j < count; ++j) pool.emplace_back(work, j);
    }
    for (int j = 0; j < count; ++j) {
      if (errors[j]) std::rethrow_exception(errors[j]);
      reduce(base + j, std::move(*batch[j]));
    }
  }

  auto finish = [&](const detail::Welford& w, std::vector<double>& mean, std::vector<double>& var) {
    mean = w.mean;
    var.resize(w.m2.size());
    for (std::size_t i = 0; i < var.size(); ++i) var[i] = done > 1 ? w.m2[i] / done : 0.0;
  };
  finish(phi, res.stats.mean_phi, res.stats.var_phi);
  finish(p0, res.stats.mean_pop0, res.stats.var_pop0);
  finish(pm, res.stats.mean_pop_m1, res.stats.var_pop_m1);
  finish(pp, res.stats.mean_pop_p1, res.stats.var_pop_p1);
  res.stats.n_traj = done;
  return res;
}

}  // namespace spintorque

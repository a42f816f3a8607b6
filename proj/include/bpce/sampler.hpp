#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "bpce/errors.hpp"
#include "bpce/rng.hpp"

namespace bpce {

struct SamplerConfig {
  enum class Init { RandomDiffuse, GivenPoint, Mle };

  int chains = 2;
  int iterations = 2000;  // total per chain, warmup included
  int warmup = 1000;
  double target_accept = 0.8;
  int max_treedepth = 10;
  std::uint64_t seed = 1;
  Init init = Init::RandomDiffuse;
  Eigen::VectorXd init_point;  // used by Init::GivenPoint
  int threads = 0;             // 0 = one thread per chain, capped by hardware
};

// Post-warmup draws on the constrained scale, chain-major, with per-draw
// sampler statistics.
struct PosteriorDraws {
  std::vector<std::string> names;
  Eigen::MatrixXd draws;            // S x P
  Eigen::VectorXi chain;            // S
  Eigen::VectorXi iteration;        // S, post-warmup index within chain
  std::vector<std::uint8_t> divergent;  // S
  Eigen::VectorXi treedepth;        // S
  Eigen::VectorXd step_size;        // per chain, adapted value
  Eigen::VectorXd accept_rate;      // per chain, mean accept statistic
  int n_chains = 0;
  int n_warmup = 0;
  int n_iterations = 0;

  // PCE column metadata (set by the fit wrappers; empty for generic targets).
  std::vector<int> coef_cols;    // draw columns holding coefficients
  std::vector<int> coef_labels;  // basis polynomial index per coefficient
  int sigma_col = -1;
  int r2_col = -1;

  int draws_per_chain() const { return n_iterations - n_warmup; }
  int n_draws() const { return static_cast<int>(draws.rows()); }
};

struct Diagnostics {
  std::vector<std::string> names;
  Eigen::VectorXd rhat;
  Eigen::VectorXd ess_bulk;
  Eigen::VectorXd ess_tail;
  int divergences = 0;
  Eigen::VectorXd chain_accept;
  double max_rhat = 1.0;
  double min_ess_bulk = 0.0;
};

namespace detail {

template <class M>
concept SampleModel = requires(const M& m, const Eigen::VectorXd& u, Eigen::VectorXd& g) {
  { m.dim() } -> std::convertible_to<int>;
  { m.grad_log_posterior(u, g) } -> std::convertible_to<double>;
};

template <class M>
Eigen::VectorXd model_constrain(const M& model, const Eigen::VectorXd& u) {
  if constexpr (requires { model.constrain_row(u); }) {
    return model.constrain_row(u);
  } else {
    return u;
  }
}

template <class M>
std::vector<std::string> model_names(const M& model) {
  if constexpr (requires { model.constrained_names(); }) {
    return model.constrained_names();
  } else {
    std::vector<std::string> names(model.dim());
    for (int i = 0; i < model.dim(); ++i) names[i] = "u" + std::to_string(i);
    return names;
  }
}

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

struct PhasePoint {
  Eigen::VectorXd u;
  Eigen::VectorXd r;
  Eigen::VectorXd grad;
  double logp = 0.0;
};

inline double kinetic(const Eigen::VectorXd& r, const Eigen::VectorXd& inv_mass) {
  return 0.5 * (r.array().square() * inv_mass.array()).sum();
}

struct Subtree {
  PhasePoint minus;
  PhasePoint plus;
  Eigen::VectorXd proposal;
  double log_weight = -std::numeric_limits<double>::infinity();
  double sum_accept = 0.0;
  int n_leaves = 0;
  bool divergent = false;
  bool turned = false;
};

inline bool uturn(const PhasePoint& minus, const PhasePoint& plus,
                  const Eigen::VectorXd& inv_mass) {
  const Eigen::VectorXd span = plus.u - minus.u;
  const double fwd = (span.array() * inv_mass.array() * plus.r.array()).sum();
  const double bwd = (span.array() * inv_mass.array() * minus.r.array()).sum();
  return fwd < 0.0 || bwd < 0.0;
}

constexpr double kDivergenceThreshold = 1000.0;

// One leapfrog step; returns false when the state left the finite domain.
template <SampleModel M>
bool leapfrog(const M& model, PhasePoint& p, double eps, const Eigen::VectorXd& inv_mass) {
  p.r += 0.5 * eps * p.grad;
  p.u.array() += eps * inv_mass.array() * p.r.array();
  if (!p.u.allFinite()) return false;
  p.logp = model.grad_log_posterior(p.u, p.grad);
  if (!std::isfinite(p.logp) || !p.grad.allFinite()) return false;
  p.r += 0.5 * eps * p.grad;
  return true;
}

template <SampleModel M>
Subtree build_leaf(const M& model, const PhasePoint& from, double dir_eps,
                   const Eigen::VectorXd& inv_mass, double h0) {
  Subtree leaf;
  PhasePoint p = from;
  const bool ok = leapfrog(model, p, dir_eps, inv_mass);
  const double h = ok ? p.logp - kinetic(p.r, inv_mass)
                      : -std::numeric_limits<double>::infinity();
  const double delta = h - h0;
  leaf.divergent = !(delta > -kDivergenceThreshold);
  leaf.n_leaves = 1;
  leaf.sum_accept = std::isfinite(delta) ? std::min(1.0, std::exp(delta)) : 0.0;
  leaf.log_weight = delta;
  if (ok) {
    leaf.minus = p;
    leaf.plus = p;
    leaf.proposal = p.u;
  } else {
    leaf.minus = from;
    leaf.plus = from;
    leaf.proposal = from.u;
  }
  return leaf;
}

template <SampleModel M>
Subtree build_tree(const M& model, int depth, const PhasePoint& from, int dir, double eps,
                   const Eigen::VectorXd& inv_mass, double h0, CounterRng& rng) {
  if (depth == 0) return build_leaf(model, from, dir * eps, inv_mass, h0);

  Subtree first = build_tree(model, depth - 1, from, dir, eps, inv_mass, h0, rng);
  if (first.divergent || first.turned) return first;

  const PhasePoint& outer = dir > 0 ? first.plus : first.minus;
  Subtree second = build_tree(model, depth - 1, outer, dir, eps, inv_mass, h0, rng);

  Subtree merged;
  merged.sum_accept = first.sum_accept + second.sum_accept;
  merged.n_leaves = first.n_leaves + second.n_leaves;
  merged.divergent = second.divergent;
  merged.turned = second.turned;
  if (merged.divergent || merged.turned) return merged;

  merged.log_weight = log_add_exp(first.log_weight, second.log_weight);
  const double log_accept_second = second.log_weight - merged.log_weight;
  merged.proposal = (std::log(rng.uniform01()) < log_accept_second) ? second.proposal
                                                                    : first.proposal;
  merged.minus = dir > 0 ? first.minus : second.minus;
  merged.plus = dir > 0 ? second.plus : first.plus;
  merged.turned = uturn(merged.minus, merged.plus, inv_mass);
  return merged;
}

struct TransitionStats {
  double accept_stat = 0.0;
  int treedepth = 0;
  bool divergent = false;
};

// One trajectory: multiplicative doubling with the no-U-turn criterion and
// multinomial sampling over the leaves.
template <SampleModel M>
TransitionStats nuts_transition(const M& model, Eigen::VectorXd& u, double eps,
                                const Eigen::VectorXd& inv_mass, int max_depth,
                                CounterRng& rng) {
  PhasePoint init;
  init.u = u;
  init.logp = model.grad_log_posterior(init.u, init.grad);
  if (!std::isfinite(init.logp)) throw SamplerError("non-finite density at trajectory start");
  init.r.resize(u.size());
  for (int i = 0; i < u.size(); ++i) init.r[i] = rng.normal() / std::sqrt(inv_mass[i]);

  const double h0 = init.logp - kinetic(init.r, inv_mass);
  PhasePoint minus = init;
  PhasePoint plus = init;
  Eigen::VectorXd proposal = u;
  double log_w_total = 0.0;  // weight of the initial leaf relative to itself
  TransitionStats stats;
  double sum_accept = 0.0;
  int n_leaves = 0;

  for (int depth = 0; depth < max_depth; ++depth) {
    const int dir = (rng.next_u64() & 1ull) ? 1 : -1;
    Subtree sub = build_tree(model, depth, dir > 0 ? plus : minus, dir, eps, inv_mass, h0, rng);
    sum_accept += sub.sum_accept;
    n_leaves += sub.n_leaves;
    if (sub.divergent) {
      stats.divergent = true;
      break;
    }
    if (sub.turned) break;
    // Biased progressive sampling favours the fresh subtree.
    if (std::log(rng.uniform01()) < sub.log_weight - log_w_total) proposal = sub.proposal;
    log_w_total = log_add_exp(log_w_total, sub.log_weight);
    if (dir > 0)
      plus = sub.plus;
    else
      minus = sub.minus;
    stats.treedepth = depth + 1;
    if (uturn(minus, plus, inv_mass)) break;
  }
  stats.accept_stat = n_leaves > 0 ? sum_accept / n_leaves : 0.0;
  u = proposal;
  return stats;
}

template <SampleModel M>
double find_reasonable_step_size(const M& model, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& inv_mass, CounterRng& rng) {
  PhasePoint base;
  base.u = u;
  base.logp = model.grad_log_posterior(base.u, base.grad);
  base.r.resize(u.size());
  for (int i = 0; i < u.size(); ++i) base.r[i] = rng.normal() / std::sqrt(inv_mass[i]);
  const double h0 = base.logp - kinetic(base.r, inv_mass);

  double eps = 1.0;
  const auto accept_of = [&](double step) {
    PhasePoint p = base;
    if (!leapfrog(model, p, step, inv_mass)) return 0.0;
    const double h = p.logp - kinetic(p.r, inv_mass);
    return std::isfinite(h) ? std::exp(std::min(0.0, h - h0)) : 0.0;
  };
  double accept = accept_of(eps);
  const double dir = accept > 0.5 ? 2.0 : 0.5;
  for (int iter = 0; iter < 100; ++iter) {
    if (dir > 1.0 && accept <= 0.5) break;
    if (dir < 1.0 && accept >= 0.5) break;
    eps *= dir;
    if (eps < 1e-10 || eps > 1e10) break;
    accept = accept_of(eps);
  }
  return std::clamp(eps, 1e-10, 1e10);
}

struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  int count = 0;
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    count = 0;
  }
  double update(double accept_stat, double target) {
    ++count;
    const double w = 1.0 / (count + kT0);
    h_bar = (1.0 - w) * h_bar + w * (target - accept_stat);
    log_eps = mu - std::sqrt(static_cast<double>(count)) / kGamma * h_bar;
    const double eta = std::pow(static_cast<double>(count), -kKappa);
    log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
    return std::exp(log_eps);
  }
  double averaged() const { return std::exp(log_eps_bar); }
};

// Warmup layout: 15% step-size-only buffer, doubling covariance windows,
// 10% final step-size-only buffer.
struct AdaptSchedule {
  int warmup = 0;
  int init_buffer = 0;
  int term_buffer = 0;
  std::vector<int> window_ends;  // iteration indices (exclusive) of mass updates

  static AdaptSchedule make(int warmup) {
    AdaptSchedule s;
    s.warmup = warmup;
    if (warmup < 20) {
      s.init_buffer = warmup;
      return s;
    }
    s.init_buffer = static_cast<int>(std::lround(0.15 * warmup));
    s.term_buffer = static_cast<int>(std::lround(0.10 * warmup));
    const int slow = warmup - s.init_buffer - s.term_buffer;
    if (slow < 25) {
      s.init_buffer = warmup;
      s.term_buffer = 0;
      return s;
    }
    int pos = s.init_buffer;
    int size = 25;
    const int slow_end = s.init_buffer + slow;
    while (pos < slow_end) {
      int end = pos + size;
      if (end + 2 * size > slow_end) end = slow_end;
      s.window_ends.push_back(end);
      pos = end;
      size *= 2;
    }
    return s;
  }

  bool in_slow(int m) const {
    return !window_ends.empty() && m >= init_buffer && m < window_ends.back();
  }
  bool is_window_end(int m) const {
    for (int e : window_ends)
      if (m + 1 == e) return true;
    return false;
  }
};

struct Welford {
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;
  long n = 0;
  void reset(int dim) {
    mean = Eigen::VectorXd::Zero(dim);
    m2 = Eigen::VectorXd::Zero(dim);
    n = 0;
  }
  void add(const Eigen::VectorXd& x) {
    ++n;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2.array() += delta.array() * (x - mean).array();
  }
  // Regularized variance estimate, shrunk toward a small diagonal.
  Eigen::VectorXd regularized_variance() const {
    const double nn = static_cast<double>(n);
    Eigen::VectorXd var = m2 / std::max(nn - 1.0, 1.0);
    var = (nn / (nn + 5.0)) * var.array() + 1e-3 * (5.0 / (nn + 5.0));
    return var.cwiseMax(1e-10);
  }
};

struct ChainResult {
  Eigen::MatrixXd draws;  // (iterations - warmup) x P constrained
  std::vector<std::uint8_t> divergent;
  std::vector<int> treedepth;
  double step_size = 0.0;
  double accept_rate = 0.0;
};

template <SampleModel M>
ChainResult run_chain(const M& model, const SamplerConfig& cfg, int chain_id) {
  const int dim = model.dim();
  CounterRng rng(cfg.seed, static_cast<std::uint64_t>(chain_id) + 1);

  // Initialization.
  Eigen::VectorXd u(dim);
  Eigen::VectorXd grad(dim);
  bool initialized = false;
  if (cfg.init == SamplerConfig::Init::GivenPoint) {
    if (cfg.init_point.size() != dim)
      throw SamplerError("init point dimension mismatch");
    u = cfg.init_point;
    const double lp = model.grad_log_posterior(u, grad);
    if (!std::isfinite(lp) || !grad.allFinite())
      throw SamplerError("non-finite density at the given initial point");
    initialized = true;
  } else if (cfg.init == SamplerConfig::Init::Mle) {
    if constexpr (requires { model.mle_init(); }) {
      u = model.mle_init();
      const double lp = model.grad_log_posterior(u, grad);
      if (!std::isfinite(lp) || !grad.allFinite())
        throw SamplerError("non-finite density at the MLE initial point");
      initialized = true;
    } else {
      throw SamplerError("mle initialization is not available for this model");
    }
  } else {
    for (int attempt = 0; attempt < 100 && !initialized; ++attempt) {
      for (int i = 0; i < dim; ++i) u[i] = rng.uniform(-2.0, 2.0);
      const double lp = model.grad_log_posterior(u, grad);
      initialized = std::isfinite(lp) && grad.allFinite();
    }
    if (!initialized)
      throw SamplerError("non-finite density at every initialization attempt");
  }

  Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(dim);
  double eps = find_reasonable_step_size(model, u, inv_mass, rng);
  DualAveraging da;
  da.restart(eps);
  const AdaptSchedule schedule = AdaptSchedule::make(cfg.warmup);
  Welford welford;
  welford.reset(dim);

  const int n_keep = cfg.iterations - cfg.warmup;
  ChainResult result;
  result.divergent.assign(n_keep, 0);
  result.treedepth.assign(n_keep, 0);

  int warmup_divergences = 0;
  double accept_sum = 0.0;
  Eigen::VectorXd first_row = model_constrain(model, u);
  result.draws.resize(n_keep, first_row.size());

  for (int m = 0; m < cfg.iterations; ++m) {
    TransitionStats stats =
        nuts_transition(model, u, eps, inv_mass, cfg.max_treedepth, rng);
    if (m < cfg.warmup) {
      if (stats.divergent) ++warmup_divergences;
      eps = da.update(stats.accept_stat, cfg.target_accept);
      if (schedule.in_slow(m)) welford.add(u);
      if (schedule.is_window_end(m)) {
        inv_mass = welford.regularized_variance();
        welford.reset(dim);
        eps = find_reasonable_step_size(model, u, inv_mass, rng);
        da.restart(eps);
      }
      if (m + 1 == cfg.warmup) {
        eps = da.averaged();
        if (warmup_divergences == cfg.warmup && cfg.warmup > 0)
          throw SamplerError("sampler failed to adapt");
      }
    } else {
      const int idx = m - cfg.warmup;
      result.draws.row(idx) = model_constrain(model, u).transpose();
      result.divergent[idx] = stats.divergent ? 1 : 0;
      result.treedepth[idx] = stats.treedepth;
      accept_sum += stats.accept_stat;
    }
  }
  result.step_size = eps;
  result.accept_rate = n_keep > 0 ? accept_sum / n_keep : 0.0;
  return result;
}

}  // namespace detail

// Run `cfg.chains` independent chains (in parallel when threads allow) and
// merge the post-warmup draws deterministically by chain index.
template <detail::SampleModel M>
PosteriorDraws sample(const M& model, const SamplerConfig& cfg) {
  if (cfg.chains < 1) throw SamplerError("sampler needs at least one chain");
  if (cfg.warmup < 0 || cfg.warmup >= cfg.iterations)
    throw SamplerError("sampler requires 0 <= warmup < iterations");
  if (!(cfg.target_accept > 0.0 && cfg.target_accept < 1.0))
    throw SamplerError("target acceptance must be in (0,1)");
  if (cfg.max_treedepth < 1) throw SamplerError("max tree depth must be >= 1");

  std::vector<detail::ChainResult> results(cfg.chains);
  std::vector<std::exception_ptr> errors(cfg.chains);
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const int n_threads =
      std::min<int>(cfg.chains, cfg.threads > 0 ? cfg.threads : static_cast<int>(hw));

  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (;;) {
      const int id = next.fetch_add(1);
      if (id >= cfg.chains) return;
      try {
        results[id] = detail::run_chain(model, cfg, id);
      } catch (...) {
        errors[id] = std::current_exception();
      }
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  const int per_chain = cfg.iterations - cfg.warmup;
  PosteriorDraws out;
  out.names = detail::model_names(model);
  out.n_chains = cfg.chains;
  out.n_warmup = cfg.warmup;
  out.n_iterations = cfg.iterations;
  const int p = static_cast<int>(results[0].draws.cols());
  out.draws.resize(static_cast<long>(per_chain) * cfg.chains, p);
  out.chain.resize(out.draws.rows());
  out.iteration.resize(out.draws.rows());
  out.divergent.assign(out.draws.rows(), 0);
  out.treedepth.resize(out.draws.rows());
  out.step_size.resize(cfg.chains);
  out.accept_rate.resize(cfg.chains);
  for (int c = 0; c < cfg.chains; ++c) {
    out.draws.middleRows(static_cast<long>(c) * per_chain, per_chain) = results[c].draws;
    out.step_size[c] = results[c].step_size;
    out.accept_rate[c] = results[c].accept_rate;
    for (int i = 0; i < per_chain; ++i) {
      const long row = static_cast<long>(c) * per_chain + i;
      out.chain[row] = c;
      out.iteration[row] = i;
      out.divergent[row] = results[c].divergent[i];
      out.treedepth[row] = results[c].treedepth[i];
    }
  }
  return out;
}

}  // namespace bpce

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bpce/errors.hpp"
#include "bpce/rng.hpp"
#include "bpce/sampler.hpp"
#include "bpce/stats.hpp"

namespace bpce {

namespace detail {

// Split every chain in half; drops the middle element of odd-length chains.
inline std::vector<Eigen::VectorXd> split_sequences(const std::vector<Eigen::VectorXd>& chains) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(2 * chains.size());
  for (const auto& c : chains) {
    const long n = c.size();
    const long half = n / 2;
    out.push_back(c.head(half));
    out.push_back(c.tail(half));
  }
  return out;
}

// Pooled rank normalization with average ranks for ties and the (r - 3/8) /
// (S + 1/4) blending into normal scores.
inline std::vector<Eigen::VectorXd> rank_normalize(const std::vector<Eigen::VectorXd>& seqs) {
  long total = 0;
  for (const auto& s : seqs) total += s.size();
  std::vector<std::pair<double, long>> pooled;
  pooled.reserve(total);
  long offset = 0;
  for (const auto& s : seqs) {
    for (long i = 0; i < s.size(); ++i) pooled.emplace_back(s[i], offset + i);
    offset += s.size();
  }
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> rank(total);
  long i = 0;
  while (i < total) {
    long j = i;
    while (j + 1 < total && pooled[j + 1].first == pooled[i].first) ++j;
    const double avg = 0.5 * (i + j) + 1.0;  // 1-based average rank
    for (long k = i; k <= j; ++k) rank[pooled[k].second] = avg;
    i = j + 1;
  }
  std::vector<Eigen::VectorXd> out(seqs.size());
  offset = 0;
  const double denom = static_cast<double>(total) + 0.25;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    out[s].resize(seqs[s].size());
    for (long k = 0; k < seqs[s].size(); ++k)
      out[s][k] = normal_quantile((rank[offset + k] - 0.375) / denom);
    offset += seqs[s].size();
  }
  return out;
}

struct VarDecomposition {
  double w = 0.0;         // mean within-sequence variance
  double var_means = 0.0; // variance of sequence means (B/n)
  double var_plus = 0.0;  // marginal posterior variance estimate
  long n = 0;
};

inline VarDecomposition variance_decomposition(const std::vector<Eigen::VectorXd>& seqs) {
  VarDecomposition d;
  d.n = seqs.front().size();
  Eigen::VectorXd means(seqs.size());
  double w_sum = 0.0;
  for (std::size_t c = 0; c < seqs.size(); ++c) {
    means[c] = seqs[c].mean();
    w_sum += (seqs[c].array() - means[c]).square().sum() / std::max<double>(d.n - 1, 1);
  }
  d.w = w_sum / seqs.size();
  d.var_means = seqs.size() > 1
                    ? (means.array() - means.mean()).square().sum() / (seqs.size() - 1)
                    : 0.0;
  d.var_plus = d.w * (d.n - 1) / d.n + d.var_means;
  return d;
}

inline double split_rhat(const std::vector<Eigen::VectorXd>& seqs) {
  const VarDecomposition d = variance_decomposition(seqs);
  if (d.w <= 0.0)
    return d.var_means > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  return std::sqrt(d.var_plus / d.w);
}

// Effective sample size via Geyer's initial monotone sequence on the
// multi-chain autocorrelation estimate.
inline double ess_of(const std::vector<Eigen::VectorXd>& seqs) {
  const VarDecomposition d = variance_decomposition(seqs);
  const long n = d.n;
  const long total = n * static_cast<long>(seqs.size());
  if (d.var_plus <= 0.0) return static_cast<double>(total);  // constant draws

  std::vector<Eigen::VectorXd> centered(seqs.size());
  for (std::size_t c = 0; c < seqs.size(); ++c)
    centered[c] = seqs[c].array() - seqs[c].mean();

  const auto mean_acov = [&](long t) {
    double acc = 0.0;
    for (const auto& x : centered) {
      double dot = 0.0;
      for (long i = 0; i + t < n; ++i) dot += x[i] * x[i + t];
      acc += dot / n;  // biased autocovariance
    }
    return acc / seqs.size();
  };

  const auto rho = [&](long t) { return 1.0 - (d.w - mean_acov(t)) / d.var_plus; };

  double tau = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (long t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);  // enforce monotone decrease
    prev_pair = pair;
    tau += 2.0 * pair;
    if (t > 4 * n / 5) break;
  }
  tau -= 1.0;
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(total) + 10.0));
  return static_cast<double>(total) / tau;
}

inline std::vector<Eigen::VectorXd> column_chains(const PosteriorDraws& draws, int col) {
  const int per_chain = draws.draws_per_chain();
  std::vector<Eigen::VectorXd> chains(draws.n_chains);
  for (int c = 0; c < draws.n_chains; ++c)
    chains[c] = draws.draws.col(col).segment(static_cast<long>(c) * per_chain, per_chain);
  return chains;
}

}  // namespace detail

// Split R-hat plus bulk/tail effective sample sizes with rank-normalized
// estimators; requires at least 2 chains or 100 draws.
inline Diagnostics compute_diagnostics(const PosteriorDraws& draws) {
  const int per_chain = draws.draws_per_chain();
  if (draws.n_chains < 2 && draws.n_draws() < 100)
    throw SamplerError("diagnostics need at least 2 chains or 100 draws");
  if (per_chain < 4) throw SamplerError("diagnostics need at least 4 draws per chain");

  const int p = static_cast<int>(draws.draws.cols());
  Diagnostics diag;
  diag.names = draws.names;
  diag.rhat.resize(p);
  diag.ess_bulk.resize(p);
  diag.ess_tail.resize(p);
  diag.chain_accept = draws.accept_rate;
  diag.divergences = static_cast<int>(
      std::count(draws.divergent.begin(), draws.divergent.end(), std::uint8_t{1}));

  for (int col = 0; col < p; ++col) {
    const auto chains = detail::column_chains(draws, col);
    const auto split = detail::split_sequences(chains);

    const Eigen::VectorXd pooled = draws.draws.col(col);
    const double spread = pooled.maxCoeff() - pooled.minCoeff();
    if (!(spread > 0.0)) {
      diag.rhat[col] = 1.0;
      diag.ess_bulk[col] = static_cast<double>(draws.n_draws());
      diag.ess_tail[col] = static_cast<double>(draws.n_draws());
      continue;
    }

    const auto normalized = detail::rank_normalize(split);
    diag.rhat[col] = detail::split_rhat(normalized);
    diag.ess_bulk[col] = detail::ess_of(normalized);

    const double q05 = empirical_quantile(pooled, 0.05);
    const double q95 = empirical_quantile(pooled, 0.95);
    const auto indicator_ess = [&](double q) {
      std::vector<Eigen::VectorXd> ind(split.size());
      for (std::size_t s = 0; s < split.size(); ++s)
        ind[s] = (split[s].array() <= q).cast<double>();
      return detail::ess_of(ind);
    };
    diag.ess_tail[col] = std::min(indicator_ess(q05), indicator_ess(q95));
  }
  diag.max_rhat = diag.rhat.maxCoeff();
  diag.min_ess_bulk = diag.ess_bulk.minCoeff();
  return diag;
}

// Monte Carlo standard error of the posterior mean of one column.
inline double mcse_mean(const PosteriorDraws& draws, const Diagnostics& diag, int col) {
  const double sd = sd_of(draws.draws.col(col));
  const double ess = std::max(diag.ess_bulk[col], 1.0);
  return sd / std::sqrt(ess);
}

}  // namespace bpce

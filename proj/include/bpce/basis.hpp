#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bpce/errors.hpp"
#include "bpce/univariate.hpp"

namespace bpce {

// Number of multi-indices with N dimensions and total degree <= d.
inline std::int64_t basis_size(int n_dim, int degree) {
  std::int64_t m = 1;
  for (int k = 1; k <= n_dim; ++k) {
    m = m * (degree + k) / k;  // exact: product of consecutive binomial steps
    if (m < 0 || m > (std::int64_t{1} << 31))
      throw BasisError("basis size overflows supported range");
  }
  return m;
}

// All alpha in N^N with sum(alpha) <= d, graded lexicographic, zero first.
inline std::vector<std::vector<int>> enumerate_multi_indices(int n_dim, int degree) {
  if (n_dim < 1) throw BasisError("enumerate_multi_indices: N must be >= 1");
  if (degree < 0) throw BasisError("enumerate_multi_indices: d must be >= 0");
  const std::int64_t m = basis_size(n_dim, degree);
  std::vector<std::vector<int>> indices;
  indices.reserve(static_cast<std::size_t>(m));

  std::vector<int> alpha(n_dim, 0);
  for (int grade = 0; grade <= degree; ++grade) {
    // Lexicographic enumeration of compositions of `grade` into n_dim parts.
    const std::function<void(int, int)> recurse = [&](int pos, int remaining) {
      if (pos == n_dim - 1) {
        alpha[pos] = remaining;
        indices.push_back(alpha);
        return;
      }
      for (int v = 0; v <= remaining; ++v) {
        alpha[pos] = v;
        recurse(pos + 1, remaining - v);
      }
    };
    recurse(0, grade);
  }
  return indices;
}

// The multivariate orthonormal basis: per-dimension univariate sets plus the
// total-degree multi-index list.  Immutable after construction and safe to
// share across threads.
class MultiIndexBasis {
 public:
  MultiIndexBasis(std::vector<UnivariatePolySet> univariate, int degree)
      : degree_(degree), univariate_(std::move(univariate)) {
    if (univariate_.empty()) throw BasisError("basis needs at least one dimension");
    for (const auto& set : univariate_)
      if (set.degree < degree_)
        throw BasisError("univariate set does not reach the requested degree");
    indices_ = enumerate_multi_indices(static_cast<int>(univariate_.size()), degree_);
  }

  int input_dim() const { return static_cast<int>(univariate_.size()); }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(indices_.size()); }
  const std::vector<std::vector<int>>& multi_indices() const { return indices_; }
  const UnivariatePolySet& univariate(int j) const { return univariate_[j]; }

  // Psi_i at one raw input point.
  double evaluate(int i, const Eigen::VectorXd& x_raw) const {
    const std::vector<int>& alpha = indices_[i];
    double prod = 1.0;
    for (int j = 0; j < input_dim(); ++j)
      if (alpha[j] > 0) prod *= univariate_[j].evaluate(alpha[j], x_raw[j]);
    return prod;
  }

 private:
  int degree_;
  std::vector<UnivariatePolySet> univariate_;
  std::vector<std::vector<int>> indices_;
};

using BasisPtr = std::shared_ptr<const MultiIndexBasis>;

inline BasisPtr make_basis(std::vector<MomentSequence> moments, int degree) {
  std::vector<UnivariatePolySet> sets;
  sets.reserve(moments.size());
  for (const auto& seq : moments) sets.push_back(build_univariate(seq, degree));
  return std::make_shared<const MultiIndexBasis>(std::move(sets), degree);
}

// Design matrix Psi[k][i] = Psi_i(omega_k) for raw training inputs.
struct DesignMatrix {
  Eigen::MatrixXd values;  // T x M
  BasisPtr basis;          // may be null for synthetic designs in tests
  Eigen::MatrixXd inputs;  // raw T x N inputs the matrix was evaluated at
};

inline DesignMatrix evaluate_design(const BasisPtr& basis, const Eigen::MatrixXd& inputs_raw) {
  if (!basis) throw BasisError("evaluate_design: null basis");
  const int n_dim = basis->input_dim();
  if (inputs_raw.cols() != n_dim)
    throw ShapeError("evaluate_design: inputs have " + std::to_string(inputs_raw.cols()) +
                     " columns, basis expects " + std::to_string(n_dim));
  const int t = static_cast<int>(inputs_raw.rows());
  const int m = basis->size();
  const int d = basis->degree();

  DesignMatrix design;
  design.basis = basis;
  design.inputs = inputs_raw;
  design.values.resize(t, m);

  Eigen::MatrixXd uni(n_dim, d + 1);  // per-row cache of univariate values
  Eigen::VectorXd vals;
  const auto& indices = basis->multi_indices();
  for (int k = 0; k < t; ++k) {
    for (int j = 0; j < n_dim; ++j) {
      const auto& set = basis->univariate(j);
      const double u = set.standardization.to_standard(inputs_raw(k, j));
      set.evaluate_all_standard(u, vals);
      uni.row(j).head(d + 1) = vals.transpose();
    }
    for (int i = 0; i < m; ++i) {
      const std::vector<int>& alpha = indices[i];
      double prod = 1.0;
      for (int j = 0; j < n_dim; ++j)
        if (alpha[j] > 0) prod *= uni(j, alpha[j]);
      design.values(k, i) = prod;
    }
  }
  return design;
}

// Training data for one fit.
struct TrainingSet {
  Eigen::MatrixXd inputs;  // T x N raw inputs
  Eigen::VectorXd y;       // T responses
  double noise_sd = 0.0;   // metadata: noise injected into y (0 = none)
  std::uint64_t noise_seed = 0;
};

}  // namespace bpce

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cover/raster.hpp"

namespace cover {

// Exact Fisher-information machinery for small problems. Everything here
// works on dense P x P Gram matrices, so it is meant for P in the hundreds.

/// log |G| through a Cholesky factorization. Throws Errc::rank_deficient
/// when G is not positive definite.
double log_det_gram(const Eigen::MatrixXd& gram);

enum class RowConstraint { unit_l2_nonneg, unrestricted_unit_l2 };

struct CandidateRow {
  Eigen::VectorXd w;
  RowConstraint constraint = RowConstraint::unit_l2_nonneg;

  /// Checks unit norm (within 1e-9) and, if required, non-negativity.
  void validate() const;
};

/// Information gain of one more observation row, log(1 + w^T G^-1 w).
double fig(const Eigen::VectorXd& w, const Eigen::MatrixXd& gram);
double fig(const CandidateRow& row, const Eigen::MatrixXd& gram);

/// Same quantity as log|G + w w^T| - log|G|; kept as an independent route.
double fig_direct(const Eigen::VectorXd& w, const Eigen::MatrixXd& gram);

struct RayleighExtremes {
  Eigen::VectorXd argmin_quadratic;          // argmin_{|w|=1} w^T G w
  Eigen::VectorXd argmax_inverse_quadratic;  // argmax_{|w|=1} w^T G^-1 w
  double min_quadratic = 0.0;
  double max_inverse_quadratic = 0.0;
};

/// Both directions come from separate eigendecompositions (of G and of G^-1).
/// Signs are fixed so the largest-magnitude entry is positive.
RayleighExtremes rayleigh_extremes(const Eigen::MatrixXd& gram);

struct CauchySchwarzGap {
  double lhs = 0.0;  // w^T G^-1 w
  double rhs = 0.0;  // 1 / (w^T G w)
  double gap = 0.0;  // lhs - rhs, >= 0
};

CauchySchwarzGap cauchy_schwarz_gap(const Eigen::VectorXd& w, const Eigen::MatrixXd& gram);

struct OneHotMinimizer {
  int index = 0;
  double objective = 0.0;  // ||W_{:,index}||_2
};

/// Column of smallest L2 norm (lowest index on ties). The one-hot vector at
/// that column minimizes both ||W w||_2 and sum_i w_i ||W_{:,i}||_2 over the
/// non-negative unit sphere when W >= 0.
OneHotMinimizer min_norm_one_hot(const Eigen::MatrixXd& w);
OneHotMinimizer min_norm_one_hot(const WeightMatrix& w);

/// Dense Gram matrix accumulated one rank-one update at a time.
class GramAccumulator {
 public:
  GramAccumulator() = default;
  explicit GramAccumulator(int n_primitives)
      : gram_(Eigen::MatrixXd::Zero(n_primitives, n_primitives)) {}

  int size() const { return static_cast<int>(gram_.rows()); }
  void add_row(const WeightRow& row);
  void add_rows(const WeightMatrix& w);
  const Eigen::MatrixXd& gram() const { return gram_; }
  Eigen::MatrixXd regularized(double ridge) const;

  Eigen::MatrixXd& mutable_gram() { return gram_; }

 private:
  Eigen::MatrixXd gram_;
};

/// W^T W computed from the dense matrix in one product.
Eigen::MatrixXd gram_of(const WeightMatrix& w);

/// Evaluates FIG of sparse rows against a fixed Gram matrix. Inverts G once.
class FigScorer {
 public:
  explicit FigScorer(const Eigen::MatrixXd& gram);

  double row_fig(const WeightRow& row) const;
  /// Mean FIG over the non-empty rows; 0 when there are none.
  double mean_fig(std::span<const WeightRow> rows) const;

 private:
  Eigen::MatrixXd inverse_;
};

/// Mean-FIG score per candidate against G = W_train^T W_train + ridge I.
std::vector<double> exact_fig_scores(const WeightMatrix& train,
                                     std::span<const WeightMatrix> candidates,
                                     double ridge);

/// Candidate indices ordered by mean FIG, highest first, ties by index.
std::vector<int> exact_fig_ranking(const WeightMatrix& train,
                                   std::span<const WeightMatrix> candidates,
                                   double ridge);

/// Order of `scores` descending (ties by lowest index).
std::vector<int> rank_descending(std::span<const double> scores);

}  // namespace cover

#include "cover/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cover/error.hpp"

namespace cover {
namespace {

void check_square_symmetric(const Eigen::MatrixXd& g) {
  require(g.rows() == g.cols() && g.rows() > 0, Errc::dimension_mismatch,
          "Gram matrix must be square and non-empty");
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  require((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
          Errc::precondition, "Gram matrix must be symmetric");
}

Eigen::LLT<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& g) {
  check_square_symmetric(g);
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  const bool ok = llt.info() == Eigen::Success &&
                  (llt.matrixLLT().diagonal().array() > 0.0).all();
  require(ok, Errc::rank_deficient, "Gram matrix is not positive definite");
  return llt;
}

Eigen::VectorXd fix_sign(Eigen::VectorXd v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  if (v[k] < 0.0) v = -v;
  return v;
}

}  // namespace

double log_det_gram(const Eigen::MatrixXd& gram) {
  const auto llt = cholesky(gram);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

void CandidateRow::validate() const {
  require(std::abs(w.norm() - 1.0) <= 1e-9, Errc::precondition,
          "candidate row must have unit L2 norm");
  if (constraint == RowConstraint::unit_l2_nonneg)
    require(w.size() == 0 || w.minCoeff() >= 0.0, Errc::precondition,
            "candidate row must be non-negative");
}

double fig(const Eigen::VectorXd& w, const Eigen::MatrixXd& gram) {
  const auto llt = cholesky(gram);
  require(w.size() == gram.rows(), Errc::dimension_mismatch,
          "row length must match Gram size");
  return std::log1p(w.dot(llt.solve(w)));
}

double fig(const CandidateRow& row, const Eigen::MatrixXd& gram) {
  row.validate();
  return fig(row.w, gram);
}

double fig_direct(const Eigen::VectorXd& w, const Eigen::MatrixXd& gram) {
  require(w.size() == gram.rows(), Errc::dimension_mismatch,
          "row length must match Gram size");
  const Eigen::MatrixXd updated = gram + w * w.transpose();
  return log_det_gram(updated) - log_det_gram(gram);
}

RayleighExtremes rayleigh_extremes(const Eigen::MatrixXd& gram) {
  const auto llt = cholesky(gram);
  const Eigen::Index n = gram.rows();
  const Eigen::MatrixXd inverse = llt.solve(Eigen::MatrixXd::Identity(n, n));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_g(gram);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_inv(0.5 * (inverse + inverse.transpose()));
  require(eig_g.info() == Eigen::Success && eig_inv.info() == Eigen::Success,
          Errc::degenerate, "eigendecomposition failed");

  RayleighExtremes out;
  // Eigenvalues come back in increasing order.
  out.argmin_quadratic = fix_sign(eig_g.eigenvectors().col(0));
  out.argmax_inverse_quadratic = fix_sign(eig_inv.eigenvectors().col(n - 1));
  out.min_quadratic = out.argmin_quadratic.dot(gram * out.argmin_quadratic);
  out.max_inverse_quadratic =
      out.argmax_inverse_quadratic.dot(inverse * out.argmax_inverse_quadratic);
  return out;
}

CauchySchwarzGap cauchy_schwarz_gap(const Eigen::VectorXd& w, const Eigen::MatrixXd& gram) {
  const auto llt = cholesky(gram);
  require(w.size() == gram.rows(), Errc::dimension_mismatch,
          "row length must match Gram size");
  require(std::abs(w.norm() - 1.0) <= 1e-9, Errc::precondition, "w must be unit length");
  CauchySchwarzGap g;
  g.lhs = w.dot(llt.solve(w));
  g.rhs = 1.0 / w.dot(gram * w);
  g.gap = g.lhs - g.rhs;
  return g;
}

OneHotMinimizer min_norm_one_hot(const Eigen::MatrixXd& w) {
  require(w.cols() > 0, Errc::degenerate, "weight matrix has no columns");
  require(w.size() == 0 || w.minCoeff() >= 0.0, Errc::precondition,
          "weight matrix must be non-negative");
  require(w.size() > 0 && w.cwiseAbs().maxCoeff() > 0.0, Errc::degenerate,
          "weight matrix is all zero");
  OneHotMinimizer best{0, w.col(0).norm()};
  for (Eigen::Index i = 1; i < w.cols(); ++i) {
    const double n = w.col(i).norm();
    if (n < best.objective) best = {static_cast<int>(i), n};
  }
  return best;
}

OneHotMinimizer min_norm_one_hot(const WeightMatrix& w) {
  require(w.n_primitives > 0, Errc::degenerate, "weight matrix has no columns");
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(w.n_primitives);
  bool any = false;
  for (const auto& row : w.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      require(row.weights[k] >= 0.0, Errc::precondition,
              "weight matrix must be non-negative");
      sq[row.indices[k]] += row.weights[k] * row.weights[k];
      any = any || row.weights[k] > 0.0;
    }
  }
  require(any, Errc::degenerate, "weight matrix is all zero");
  Eigen::Index idx = 0;
  double best = sq[0];
  for (Eigen::Index i = 1; i < sq.size(); ++i)
    if (sq[i] < best) {
      best = sq[i];
      idx = i;
    }
  return {static_cast<int>(idx), std::sqrt(best)};
}

void GramAccumulator::add_row(const WeightRow& row) {
  for (std::size_t a = 0; a < row.size(); ++a) {
    const int i = row.indices[a];
    require(i >= 0 && i < size(), Errc::dimension_mismatch, "row index out of range");
    for (std::size_t b = 0; b < row.size(); ++b)
      gram_(i, row.indices[b]) += row.weights[a] * row.weights[b];
  }
}

void GramAccumulator::add_rows(const WeightMatrix& w) {
  for (const auto& row : w.rows) add_row(row);
}

Eigen::MatrixXd GramAccumulator::regularized(double ridge) const {
  require(ridge >= 0.0, Errc::invalid_argument, "ridge must be >= 0");
  Eigen::MatrixXd g = gram_;
  g.diagonal().array() += ridge;
  return g;
}

Eigen::MatrixXd gram_of(const WeightMatrix& w) {
  const Eigen::MatrixXd dense = w.to_dense();
  return dense.transpose() * dense;
}

FigScorer::FigScorer(const Eigen::MatrixXd& gram) {
  const auto llt = cholesky(gram);
  inverse_ = llt.solve(Eigen::MatrixXd::Identity(gram.rows(), gram.cols()));
}

double FigScorer::row_fig(const WeightRow& row) const {
  double q = 0.0;
  for (std::size_t a = 0; a < row.size(); ++a)
    for (std::size_t b = 0; b < row.size(); ++b)
      q += row.weights[a] * row.weights[b] * inverse_(row.indices[a], row.indices[b]);
  return std::log1p(std::max(0.0, q));
}

double FigScorer::mean_fig(std::span<const WeightRow> rows) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.empty()) continue;
    sum += row_fig(r);
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

std::vector<double> exact_fig_scores(const WeightMatrix& train,
                                     std::span<const WeightMatrix> candidates,
                                     double ridge) {
  require(!candidates.empty(), Errc::invalid_argument, "no candidates to rank");
  require(ridge >= 0.0, Errc::invalid_argument, "ridge must be >= 0");
  GramAccumulator acc(train.n_primitives);
  acc.add_rows(train);
  const FigScorer scorer(acc.regularized(ridge));
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(scorer.mean_fig(c.rows));
  return scores;
}

std::vector<int> exact_fig_ranking(const WeightMatrix& train,
                                   std::span<const WeightMatrix> candidates,
                                   double ridge) {
  const auto scores = exact_fig_scores(train, candidates, ridge);
  return rank_descending(scores);
}

std::vector<int> rank_descending(std::span<const double> scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace cover

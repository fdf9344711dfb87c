#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "cover/rng.hpp"
#include "cover/scene.hpp"

namespace cover::test {

/// Determinant by Gaussian elimination with partial pivoting, written out
/// without Eigen's decompositions.
inline double lu_determinant(Eigen::MatrixXd a) {
  const int n = static_cast<int>(a.rows());
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int pivot = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(pivot, c))) pivot = r;
    if (a(pivot, c) == 0.0) return 0.0;
    if (pivot != c) {
      a.row(pivot).swap(a.row(c));
      det = -det;
    }
    det *= a(c, c);
    for (int r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (int k = c; k < n; ++k) a(r, k) -= f * a(c, k);
    }
  }
  return det;
}

/// Laplace expansion along the first row; only for tiny matrices.
inline double cofactor_determinant(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  if (n == 1) return a(0, 0);
  double det = 0.0;
  for (int j = 0; j < n; ++j) {
    Eigen::MatrixXd minor(n - 1, n - 1);
    for (int r = 1; r < n; ++r)
      for (int c = 0, mc = 0; c < n; ++c)
        if (c != j) minor(r - 1, mc++) = a(r, c);
    det += ((j % 2 == 0) ? 1.0 : -1.0) * a(0, j) * cofactor_determinant(minor);
  }
  return det;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

/// Symmetric positive definite with eigenvalues spread over [lo, hi].
inline Eigen::MatrixXd random_spd(Rng& rng, int n, double lo = 0.1, double hi = 10.0) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, n, n));
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd eig(n);
  for (int i = 0; i < n; ++i) eig[i] = std::exp(rng.uniform(std::log(lo), std::log(hi)));
  return q * eig.asDiagonal() * q.transpose();
}

inline Eigen::VectorXd random_unit(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  do {
    for (int i = 0; i < n; ++i) v[i] = rng.normal();
  } while (v.norm() < 1e-12);
  return v.normalized();
}

/// Point of the non-negative unit sphere: a Dirichlet(alpha) draw, pushed to
/// unit L2 norm. Small alpha puts mass near faces and vertices.
inline Eigen::VectorXd dirichlet_on_sphere(Rng& rng, int n, double alpha) {
  Eigen::VectorXd v(n);
  double sum = 0.0;
  do {
    for (int i = 0; i < n; ++i) v[i] = rng.gamma(alpha);
    sum = v.sum();
  } while (sum <= 0.0);
  return v.normalized();
}

/// Single primitive, no cameras.
inline Scene one_primitive_scene(const Vec3& mean, double sigma, double opacity,
                                 const Vec3& color = Vec3(1.0, 0.0, 0.0)) {
  Scene s;
  Primitive p;
  p.mean = mean;
  p.covariance = Mat3::Identity() * sigma * sigma;
  p.opacity = opacity;
  p.matte_color = color;
  s.primitives.push_back(p);
  return s;
}

inline SceneSpec small_spec(std::uint64_t seed, int primitives = 30, int candidates = 12) {
  SceneSpec spec;
  spec.rng_seed = seed;
  spec.n_primitives = primitives;
  spec.n_candidates = candidates;
  spec.n_eval = 4;
  spec.n_seed = 3;
  spec.intrinsics = {14.0, 14.0, 8.0, 8.0, 16, 16};
  return spec;
}

inline Camera axis_camera(const Vec3& position, const Vec3& target = Vec3::Zero(),
                          const Intrinsics& k = Intrinsics{}) {
  const Vec3 dir = (target - position).normalized();
  const Vec3 up = std::abs(dir.z()) > 0.99 ? Vec3::UnitY() : Vec3::UnitZ();
  return look_at_camera(position, target, up, k);
}

}  // namespace cover::test

#include "cover/sphere_grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <utility>

#include "cover/error.hpp"
#include "cover/rng.hpp"

namespace cover {
namespace {

using Face = std::array<int, 3>;

double face_circumradius(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                         const Eigen::Vector3d& c) {
  Eigen::Vector3d n = (b - a).cross(c - a).normalized();
  if (n.dot(a + b + c) < 0.0) n = -n;
  return std::acos(std::clamp(n.dot(a), -1.0, 1.0));
}

double sampled_covering_radius(const std::vector<Eigen::Vector3d>& dirs) {
  Rng rng(0x5eed);
  double worst = 0.0;
  for (int s = 0; s < 20000; ++s) {
    Eigen::Vector3d x(rng.normal(), rng.normal(), rng.normal());
    x.normalize();
    double best = -1.0;
    for (const auto& d : dirs) best = std::max(best, d.dot(x));
    worst = std::max(worst, std::acos(std::clamp(best, -1.0, 1.0)));
  }
  return worst;
}

}  // namespace

bool is_icosphere_size(int count) {
  for (long n = 12; n <= count; n = (n - 2) * 4 + 2)
    if (n == count) return true;
  return false;
}

DirectionGrid DirectionGrid::icosphere(int subdivisions) {
  require(subdivisions >= 0 && subdivisions <= 7, Errc::invalid_argument,
          "icosphere subdivisions must be in [0, 7]");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Face> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int idx = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  DirectionGrid grid;
  grid.dirs_ = std::move(v);
  // Every point lies in some face and is within that face's circumradius of
  // one of its corners, so the max circumradius bounds the covering radius.
  for (const auto& f : faces)
    grid.covering_radius_ =
        std::max(grid.covering_radius_,
                 face_circumradius(grid.dirs_[f[0]], grid.dirs_[f[1]],
                                   grid.dirs_[f[2]]));
  return grid;
}

DirectionGrid DirectionGrid::fibonacci(int count) {
  require(count >= 1, Errc::invalid_argument, "grid size must be >= 1");
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(count);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * k;
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return from_directions(std::move(dirs));
}

DirectionGrid DirectionGrid::with_size(int count) {
  if (is_icosphere_size(count)) {
    int level = 0;
    for (int n = 12; n != count; n = (n - 2) * 4 + 2) ++level;
    return icosphere(level);
  }
  return fibonacci(count);
}

DirectionGrid DirectionGrid::from_directions(std::vector<Eigen::Vector3d> dirs) {
  require(!dirs.empty(), Errc::invalid_argument, "grid must not be empty");
  for (auto& d : dirs) {
    require(d.norm() > 0.0, Errc::invalid_argument, "zero grid direction");
    d.normalize();
  }
  DirectionGrid grid;
  grid.dirs_ = std::move(dirs);
  grid.covering_radius_ = sampled_covering_radius(grid.dirs_);
  return grid;
}

int DirectionGrid::quantize(const Eigen::Vector3d& d) const {
  int best = 0;
  double best_dot = -2.0;
  for (int l = 0; l < size(); ++l) {
    const double dot = dirs_[l].dot(d);
    if (dot > best_dot) {
      best_dot = dot;
      best = l;
    }
  }
  return best;
}

bool DirectionGrid::operator==(const DirectionGrid& other) const {
  return dirs_ == other.dirs_;
}

double SphericalGaussianKernel::norm_const() const {
  return std::exp(log_norm_const);
}

SphericalGaussianKernel make_kernel(double kappa, int grid_size) {
  require(kappa >= 0.0, Errc::invalid_argument, "kappa must be >= 0");
  require(grid_size >= 1, Errc::invalid_argument, "grid size must be >= 1");
  SphericalGaussianKernel k;
  k.kappa = kappa;
  if (kappa < 1e-12) {
    k.log_norm_const = -0.5 * std::log(static_cast<double>(grid_size));
  } else {
    // log sinh(x) = x + log1p(-exp(-2x)) - log 2
    const double x = 2.0 * kappa;
    const double log_sinh = x + std::log1p(-std::exp(-2.0 * x)) - std::log(2.0);
    k.log_norm_const =
        0.5 * (std::log(x) - std::log(static_cast<double>(grid_size)) - log_sinh);
  }
  return k;
}

namespace {

Eigen::VectorXd shifted_exponents(double kappa, const DirectionGrid& grid,
                                  const Eigen::Vector3d& d) {
  Eigen::VectorXd e(grid.size());
  for (int l = 0; l < grid.size(); ++l) e[l] = kappa * grid.direction(l).dot(d);
  e.array() = (e.array() - e.maxCoeff()).exp();
  return e;
}

}  // namespace

Eigen::VectorXd kernel_weights(const SphericalGaussianKernel& kernel,
                               const DirectionGrid& grid,
                               const Eigen::Vector3d& d) {
  Eigen::VectorXd beta = shifted_exponents(kernel.kappa, grid, d);
  return beta / beta.norm();
}

Eigen::VectorXd kernel_weights_l1(double kappa, const DirectionGrid& grid,
                                  const Eigen::Vector3d& d) {
  Eigen::VectorXd beta = shifted_exponents(kappa, grid, d);
  return beta / beta.sum();
}

double sg_dot(const SphericalGaussianKernel& kernel, const DirectionGrid& grid,
              const Eigen::Vector3d& d_train, const Eigen::Vector3d& d_test) {
  const Eigen::Vector3d s = d_train + d_test;
  double top = -std::numeric_limits<double>::infinity();
  for (int l = 0; l < grid.size(); ++l)
    top = std::max(top, kernel.kappa * grid.direction(l).dot(s));
  double acc = 0.0;
  for (int l = 0; l < grid.size(); ++l)
    acc += std::exp(kernel.kappa * grid.direction(l).dot(s) - top);
  return std::exp(2.0 * kernel.log_norm_const + top + std::log(acc));
}

double sg_dot_surrogate(const Eigen::Vector3d& d_train,
                        const Eigen::Vector3d& d_test) {
  return 0.5 * (1.0 + d_train.dot(d_test));
}

}  // namespace cover

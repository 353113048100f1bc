#pragma once

#include "hmhf/sphere_geometry.hpp"

#include <cmath>
#include <random>

namespace testutil {

// reproducible smooth random field with decaying Fourier content
inline hmhf::Field random_smooth(hmhf::PeriodicGrid g, int dim, unsigned seed, int modes = 8,
                                 double amp = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  hmhf::Field f(g, dim);
  for (int c = 0; c < dim; ++c) {
    for (int m = 0; m <= modes; ++m) {
      const double a = amp * nd(rng) / (1.0 + m * m), b = amp * nd(rng) / (1.0 + m * m);
      for (int j = 0; j < g.size(); ++j) {
        const double x = g.node(j);
        f.at(c, j) += a * std::cos(m * x) + (m ? b * std::sin(m * x) : 0.0);
      }
    }
  }
  return f;
}

inline Eigen::MatrixXd random_orthogonal(int d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ();
}

// unit-sphere field near the north pole of S^{dim-1}
inline hmhf::SphereField bump_state(hmhf::PeriodicGrid g, int dim, unsigned seed, double amp,
                                    int modes = 4) {
  hmhf::Field f = random_smooth(g, dim, seed, modes, amp);
  for (int j = 0; j < g.size(); ++j) f.at(dim - 1, j) += 1.0;
  return hmhf::SphereField::normalized(f);
}

inline hmhf::Field random_noise(hmhf::PeriodicGrid g, int dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  hmhf::Field f(g, dim);
  for (double& x : f.data()) x = ud(rng);
  return f;
}

} // namespace testutil

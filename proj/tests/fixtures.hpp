#pragma once

#include "wcdiff/linalg.hpp"

#include <random>

namespace fixtures {

using wcdiff::Matrix;

// Three sub-networks: {1,2,3} and {4,5} send, {6,7,8} receives.
inline Matrix three_subnetworks() {
  Matrix a(8, 8);
  a << 0.2, 0.2, 0.8, 0, 0, 0, 0, 0,
       0.5, 0.4, 0.1, 0, 0, 0.2, 0, 0.4,
       0.3, 0.4, 0.1, 0, 0, 0.1, 0, 0,
       0, 0, 0, 0.4, 0.3, 0.3, 0, 0,
       0, 0, 0, 0.6, 0.7, 0, 0, 0,
       0, 0, 0, 0, 0, 0.2, 0.3, 0.2,
       0, 0, 0, 0, 0, 0.1, 0.5, 0.3,
       0, 0, 0, 0, 0, 0.1, 0.2, 0.1;
  return a;
}

inline Matrix two_agent() {
  Matrix a(2, 2);
  a << 1.0, 0.03, 0.0, 0.97;
  return a;
}

inline Matrix fully_connected(int n) { return Matrix::Constant(n, n, 1.0 / n); }

// Influence matrix of three_subnetworks(): every entry is an exact multiple
// of 1/131 (closed-form 3x3 inverse, cross-checked with numpy).
inline Matrix three_subnetworks_w() {
  Matrix w(5, 3);
  w << 0, 0, 0,
       53, 69, 93,
       19.5, 15.5, 9.5,
       58.5, 46.5, 28.5,
       0, 0, 0;
  return w / 131.0;
}

/// Random left-stochastic matrix with the given sparsity pattern density;
/// diagonal kept positive so every agent has a self-loop.
inline Matrix random_left_stochastic(int n, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix a = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      if (l == k || u(rng) < density) a(l, k) = 0.05 + u(rng);
    }
    a.col(k) /= a.col(k).sum();
  }
  return a;
}

}  // namespace fixtures

#pragma once

#include <cstddef>
#include <vector>

#include "game_oracle.hpp"
#include "peertreat/model.hpp"
#include "peertreat/numerics.hpp"
#include "peertreat/simulation.hpp"

namespace fixture {

using namespace peertreat;

inline ModelParams params(double alpha, double gamma, double delta, double rho) {
  ModelParams p;
  p.beta_T = Vector(3);
  p.beta_T << -1.0, 1.0, 1.0;
  p.beta_O = Vector(2);
  p.beta_O << -1.0, 1.0;
  p.alpha = alpha;
  p.gamma = gamma;
  p.delta = delta;
  p.rho = Correlation(rho);
  return p;
}

// Three individuals, 0 -> {1, 2}, 1 -> {0}, 2 -> {1}.
inline Dataset three_node() {
  Dataset d;
  d.X = Matrix(3, 2);
  d.X << 1, 0.4, 1, 1.3, 1, -0.2;
  d.Z = Matrix(3, 3);
  d.Z << 1, 0.4, 0.7, 1, 1.3, -0.5, 1, -0.2, 0.1;
  d.D = {1, 0, 1};
  d.Y = {1, 0, 0};
  d.net = DirectedNetwork(3, {{1, 2}, {0}, {1}});
  return d;
}

inline Dataset simulated(std::size_t n, const ModelParams& p, std::uint64_t seed, std::size_t max_degree = 10) {
  RandomStream rng(seed);
  return simulate_dataset(n, p, max_degree, rng);
}

inline oracle::SmallGame small_game(const ModelParams& p, const Dataset& d, const Vector* shift = nullptr) {
  oracle::SmallGame g;
  const std::size_t n = d.size();
  g.friends.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : d.net.friends(i)) g.friends[i].push_back(j);
    const Index r = static_cast<Index>(i);
    double zb = 0.0, xb = 0.0;
    for (Index k = 0; k < d.Z.cols(); ++k) zb += d.Z(r, k) * p.beta_T[k];
    for (Index k = 0; k < d.X.cols(); ++k) xb += d.X(r, k) * p.beta_O[k];
    g.zb.push_back(zb + (shift ? (*shift)[r] : 0.0));
    g.xb.push_back(xb);
  }
  g.alpha = p.alpha;
  g.gamma = p.gamma;
  g.delta = p.delta;
  g.rho = p.rho;
  return g;
}

inline std::vector<int> as_int(const BinaryVector& b) { return std::vector<int>(b.begin(), b.end()); }

}  // namespace fixture

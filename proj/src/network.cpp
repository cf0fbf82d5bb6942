#include "peertreat/network.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "peertreat/errors.hpp"
#include "peertreat/numerics.hpp"

namespace peertreat {

DirectedNetwork::DirectedNetwork(std::size_t n, const std::vector<std::vector<std::size_t>>& friends,
                                 std::size_t max_degree_bound)
    : n_(n) {
  if (friends.size() != n) {
    throw ValidationError("network: expected " + std::to_string(n) + " friend lists, got " +
                          std::to_string(friends.size()));
  }
  offsets_.assign(n + 1, 0);
  std::vector<char> seen(n, 0);
  std::size_t largest = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = friends[i];
    for (std::size_t j : f) {
      if (j >= n) {
        throw ValidationError("network: friend id " + std::to_string(j) + " of individual " +
                              std::to_string(i) + " is out of range");
      }
      if (j == i) throw ValidationError("network: self-loop at individual " + std::to_string(i));
      if (seen[j]) {
        throw ValidationError("network: duplicate friend " + std::to_string(j) + " for individual " +
                              std::to_string(i));
      }
      seen[j] = 1;
    }
    for (std::size_t j : f) seen[j] = 0;
    targets_.insert(targets_.end(), f.begin(), f.end());
    offsets_[i + 1] = targets_.size();
    largest = std::max(largest, f.size());
  }
  max_degree_bound_ = max_degree_bound == 0 ? largest : max_degree_bound;
  if (largest > max_degree_bound_) {
    throw ValidationError("network: degree " + std::to_string(largest) + " exceeds bound " +
                          std::to_string(max_degree_bound_));
  }
  build_transpose();
}

DirectedNetwork DirectedNetwork::from_edges(std::size_t n,
                                            std::span<const std::pair<std::size_t, std::size_t>> edges,
                                            std::size_t max_degree_bound) {
  std::vector<std::vector<std::size_t>> friends(n);
  for (const auto& [s, t] : edges) {
    if (s >= n || t >= n) {
      throw ValidationError("network: edge (" + std::to_string(s) + ", " + std::to_string(t) +
                            ") references an id outside [0, " + std::to_string(n) + ")");
    }
    friends[s].push_back(t);
  }
  return DirectedNetwork(n, friends, max_degree_bound);
}

void DirectedNetwork::build_transpose() {
  in_offsets_.assign(n_ + 1, 0);
  for (std::size_t t : targets_) ++in_offsets_[t + 1];
  std::partial_sum(in_offsets_.begin(), in_offsets_.end(), in_offsets_.begin());
  in_sources_.assign(targets_.size(), 0);
  std::vector<std::size_t> cursor(in_offsets_.begin(), in_offsets_.end() - 1);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) in_sources_[cursor[targets_[e]]++] = i;
  }
}

std::size_t DirectedNetwork::max_degree() const {
  std::size_t m = 0;
  for (std::size_t i = 0; i < n_; ++i) m = std::max(m, degree(i));
  return m;
}

std::vector<std::pair<std::size_t, std::size_t>> DirectedNetwork::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(targets_.size());
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j : friends(i)) out.emplace_back(i, j);
  }
  return out;
}

Vector local_average(const DirectedNetwork& net, const Vector& values) {
  if (static_cast<std::size_t>(values.size()) != net.size()) {
    throw ValidationError("local_average: vector length " + std::to_string(values.size()) +
                          " does not match network size " + std::to_string(net.size()));
  }
  Vector out(values.size());
  for (std::size_t i = 0; i < net.size(); ++i) out[static_cast<Eigen::Index>(i)] = net.local_average_at(i, values);
  return out;
}

std::vector<std::size_t> in_degree_ranking(const DirectedNetwork& net) {
  std::vector<std::size_t> order(net.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return net.in_degree(a) > net.in_degree(b); });
  return order;
}

DirectedNetwork generate_random_network(std::size_t n, std::size_t max_degree, RandomStream& rng) {
  if (n <= max_degree) {
    throw ValidationError("generate_random_network: need n > max_degree (n = " + std::to_string(n) +
                          ", max_degree = " + std::to_string(max_degree) + ")");
  }
  std::vector<std::vector<std::size_t>> friends(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t degree = rng.uniform_index(max_degree + 1);
    auto& f = friends[i];
    f.reserve(degree);
    while (f.size() < degree) {
      // Uniform over the n - 1 others: draw from [0, n-1) and skip over i.
      std::size_t j = rng.uniform_index(n - 1);
      if (j >= i) ++j;
      if (std::find(f.begin(), f.end(), j) == f.end()) f.push_back(j);
    }
  }
  return DirectedNetwork(n, friends, max_degree);
}

}  // namespace peertreat

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace peertreat {

class RandomStream;

using Vector = Eigen::VectorXd;

// Directed friendship network in compressed row form: the friends F_i of
// individual i are targets()[offsets()[i] .. offsets()[i+1]). A transposed
// copy (who nominates i) is kept for propagating local changes.
//
// Invariants: no self-loops, no duplicate friends, all ids in [0, n),
// N_i <= max_degree_bound.
class DirectedNetwork {
 public:
  DirectedNetwork() = default;

  /// Builds from per-individual friend lists. Throws ValidationError on any
  /// invariant violation. max_degree_bound = 0 means "use the largest N_i".
  DirectedNetwork(std::size_t n, const std::vector<std::vector<std::size_t>>& friends,
                  std::size_t max_degree_bound = 0);

  /// Builds from (source, target) edge pairs over n individuals.
  static DirectedNetwork from_edges(std::size_t n,
                                    std::span<const std::pair<std::size_t, std::size_t>> edges,
                                    std::size_t max_degree_bound = 0);

  std::size_t size() const { return n_; }
  std::size_t edge_count() const { return targets_.size(); }
  std::size_t max_degree_bound() const { return max_degree_bound_; }
  std::size_t max_degree() const;

  std::size_t degree(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
  std::span<const std::size_t> friends(std::size_t i) const {
    return {targets_.data() + offsets_[i], degree(i)};
  }
  std::size_t in_degree(std::size_t i) const { return in_offsets_[i + 1] - in_offsets_[i]; }
  std::span<const std::size_t> nominators(std::size_t i) const {
    return {in_sources_.data() + in_offsets_[i], in_degree(i)};
  }

  /// Mean of `values` over F_i, or 0 when i nominates nobody.
  double local_average_at(std::size_t i, const Vector& values) const {
    const std::size_t lo = offsets_[i];
    const std::size_t hi = offsets_[i + 1];
    if (lo == hi) return 0.0;
    double s = 0.0;
    for (std::size_t e = lo; e < hi; ++e) s += values[static_cast<Eigen::Index>(targets_[e])];
    return s / static_cast<double>(hi - lo);
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  bool operator==(const DirectedNetwork& other) const = default;

 private:
  void build_transpose();

  std::size_t n_ = 0;
  std::size_t max_degree_bound_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> targets_;
  std::vector<std::size_t> in_offsets_{0};
  std::vector<std::size_t> in_sources_;
};

/// out_i = (1/N_i) sum_{j in F_i} values_j, and 0 for individuals without friends.
Vector local_average(const DirectedNetwork& net, const Vector& values);

/// Individuals ordered by how often others nominate them, most nominated
/// first; ties go to the smaller index.
std::vector<std::size_t> in_degree_ranking(const DirectedNetwork& net);

/// Each N_i uniform on {0, ..., max_degree}; the N_i friends are drawn
/// uniformly without replacement from the other n - 1 individuals.
DirectedNetwork generate_random_network(std::size_t n, std::size_t max_degree, RandomStream& rng);

}  // namespace peertreat

#pragma once

#include <cstdint>
#include <random>
#include <utility>

namespace peertreat {

// Correlation coefficient restricted to the open interval (-1, 1).
class Correlation {
 public:
  explicit Correlation(double rho);

  double value() const { return rho_; }
  operator double() const { return rho_; }

 private:
  double rho_;
};

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kSqrt2Pi = 2.50662827463100050242;

double std_normal_pdf(double x);
double std_normal_cdf(double x);
double std_normal_quantile(double p);

/// Standard bivariate normal CDF P(X <= a, Y <= b) with corr(X, Y) = rho.
/// Gauss-Legendre evaluation of the Drezner-Wesolowsky integral as refined by
/// Genz; |rho| >= 0.925 goes through the complementary expansion.
double bivariate_normal_cdf(double a, double b, Correlation rho);

/// Bivariate standard normal density; also dPhi2/drho.
double bivariate_normal_pdf(double a, double b, double rho);

/// dPhi2(a, b; rho)/da = phi(a) * Phi((b - rho a) / sqrt(1 - rho^2)).
double bivariate_normal_cdf_da(double a, double b, double rho);

// Seeded pseudo-random stream. Distributions are implemented here rather than
// through <random> so draws are identical across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // Deterministic child seed for (master, stream) pairs; SplitMix64 mixing.
  static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

  double uniform();                            // [0, 1)
  std::uint64_t uniform_index(std::uint64_t n);  // [0, n)
  double normal();                             // N(0, 1), Marsaglia polar
  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// (u, v) with standard normal marginals and corr(u, v) = rho, built from two
/// independent normals through the Cholesky factor [[1, 0], [rho, sqrt(1-rho^2)]].
std::pair<double, double> sample_correlated_normal_pair(Correlation rho, RandomStream& rng);

}  // namespace peertreat

#include "peertreat/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "peertreat/errors.hpp"

namespace peertreat {

namespace {

constexpr double kTwoPi = 6.28318530717958647693;

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw ValidationError(std::string(what) + ": non-finite argument");
}

// Gauss-Legendre half-rules (abscissae in (0, 1), weights) for 6, 12 and 20 points.
constexpr std::array<double, 3> kW6 = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
constexpr std::array<double, 3> kX6 = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
constexpr std::array<double, 6> kW12 = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                        0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
constexpr std::array<double, 6> kX12 = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                        0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
constexpr std::array<double, 10> kW20 = {
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
    0.1019301198172404,  0.1181945319615184,  0.1316886384491766,  0.1420961093183821,
    0.1491729864726037,  0.1527533871307259};
constexpr std::array<double, 10> kX20 = {
    0.9931285991850949, 0.9639719272779138, 0.9122344282513259, 0.8391169718222188,
    0.7463319064601508, 0.6360536807265150, 0.5108670019508271, 0.3737060887154196,
    0.2277858511416451, 0.07652652113349733};

double cdf_unchecked(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

// Upper orthant probability P(X > dh, Y > dk).
double bvn_upper(double dh, double dk, double r) {
  if (r == 0.0) return cdf_unchecked(-dh) * cdf_unchecked(-dk);

  const double* w;
  const double* x;
  std::size_t lg;
  const double ar = std::abs(r);
  if (ar < 0.3) {
    w = kW6.data(); x = kX6.data(); lg = kW6.size();
  } else if (ar < 0.75) {
    w = kW12.data(); x = kX12.data(); lg = kW12.size();
  } else {
    w = kW20.data(); x = kX20.data(); lg = kW20.size();
  }

  double h = dh;
  double k = dk;
  double hk = h * k;
  double bvn = 0.0;

  if (ar < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r) / 2.0;
    for (std::size_t i = 0; i < lg; ++i) {
      for (double node : {1.0 - x[i], 1.0 + x[i]}) {
        const double sn = std::sin(asr * node);
        bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    return bvn * asr / kTwoPi + cdf_unchecked(-h) * cdf_unchecked(-k);
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (ar < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 80.0;
    double asr = -(bs / as + hk) / 2.0;
    if (asr > -100.0) {
      bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
    }
    if (hk > -100.0) {
      const double b = std::sqrt(bs);
      const double sp = kSqrt2Pi * cdf_unchecked(-b / a);
      bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
    }
    a /= 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < lg; ++i) {
      for (double node : {1.0 - x[i], 1.0 + x[i]}) {
        double xs = a * node;
        xs *= xs;
        asr = -(bs / xs + hk) / 2.0;
        if (asr <= -100.0) continue;
        const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
        const double rs = std::sqrt(1.0 - xs);
        const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
        sum += w[i] * std::exp(asr) * (sp - ep);
      }
    }
    bvn = (a * sum - bvn) / kTwoPi;
  }
  if (r > 0.0) return bvn + cdf_unchecked(-std::max(h, k));
  if (h >= k) return -bvn;
  const double l = h < 0.0 ? cdf_unchecked(k) - cdf_unchecked(h)
                           : cdf_unchecked(-h) - cdf_unchecked(-k);
  return l - bvn;
}

// Small probabilities, where the formula above loses everything to
// cancellation: integrate phi(x) Phi((k - rho x) / s) over x <= h = min(a, b)
// panel by panel, stopping once Phi(x) bounds the rest below the sum's ulp.
double bvn_small(double a, double b, double r) {
  static constexpr double gx[] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                  0.9602898564975363};
  static constexpr double gw[] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                  0.1012285362903763};
  const double h = std::min(a, b);
  const double k = std::max(a, b);
  const double s = std::sqrt((1.0 - r) * (1.0 + r));
  double total = 0.0;
  double hi = h;
  for (int panel = 0; panel < 4000; ++panel) {
    // Panel no wider than the local decay length of the integrand.
    const double arg = (k - r * hi) / s;
    const double rate = std::abs(hi) + std::abs(r) / s * std::max(1.0, -arg);
    const double width = std::min({0.25, s, 1.0 / rate});
    const double lo = hi - width;
    const double c = 0.5 * (hi + lo);
    double part = 0.0;
    for (int j = 0; j < 4; ++j) {
      for (double x : {c - 0.5 * width * gx[j], c + 0.5 * width * gx[j]}) {
        part += gw[j] * kInvSqrt2Pi * std::exp(-0.5 * x * x) * cdf_unchecked((k - r * x) / s);
      }
    }
    total += 0.5 * width * part;
    hi = lo;
    if (cdf_unchecked(hi) < 1e-17 * total || hi < -40.0) break;
  }
  return total;
}

}  // namespace

Correlation::Correlation(double rho) : rho_(rho) {
  if (!(std::abs(rho) < 1.0)) {
    throw ValidationError("correlation must lie in (-1, 1), got " + std::to_string(rho));
  }
}

double std_normal_pdf(double x) {
  require_finite(x, "std_normal_pdf");
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) {
  require_finite(x, "std_normal_cdf");
  return cdf_unchecked(x);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ValidationError("std_normal_quantile: probability must lie in (0, 1)");
  }
  // Acklam's rational approximation (relative error ~1e-9) ...
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // ... then one Halley step, which brings it to full double precision.
  const double e = (p > 0.5 ? -(cdf_unchecked(-x) - (1.0 - p)) : cdf_unchecked(x) - p);
  const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double bivariate_normal_cdf(double a, double b, Correlation rho) {
  require_finite(a, "bivariate_normal_cdf");
  require_finite(b, "bivariate_normal_cdf");
  const double p = bvn_upper(-a, -b, rho.value());
  if (p < 1e-9) return bvn_small(a, b, rho.value());
  return std::clamp(p, 0.0, 1.0);
}

double bivariate_normal_pdf(double a, double b, double rho) {
  const double om = 1.0 - rho * rho;
  return std::exp(-(a * a - 2.0 * rho * a * b + b * b) / (2.0 * om)) / (kTwoPi * std::sqrt(om));
}

double bivariate_normal_cdf_da(double a, double b, double rho) {
  return kInvSqrt2Pi * std::exp(-0.5 * a * a) * cdf_unchecked((b - rho * a) / std::sqrt(1.0 - rho * rho));
}

std::uint64_t RandomStream::derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double RandomStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t RandomStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw ValidationError("uniform_index: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::pair<double, double> sample_correlated_normal_pair(Correlation rho, RandomStream& rng) {
  const double r = rho.value();
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  return {z1, r * z1 + std::sqrt(1.0 - r * r) * z2};
}

}  // namespace peertreat

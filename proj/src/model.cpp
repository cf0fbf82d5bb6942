#include "peertreat/model.hpp"

#include <cmath>

#include "peertreat/errors.hpp"

namespace peertreat {

Vector ModelParams::pack() const {
  Vector theta(dimension());
  theta.head(k_T()) = beta_T;
  theta[alpha_index()] = alpha;
  theta.segment(beta_O_offset(), k_O()) = beta_O;
  theta[gamma_index()] = gamma;
  theta[delta_index()] = delta;
  theta[rho_index()] = rho.value();
  return theta;
}

ModelParams ModelParams::unpack(const Vector& theta, Index k_T, Index k_O) {
  if (theta.size() != k_T + k_O + 4) {
    throw ValidationError("parameter vector has length " + std::to_string(theta.size()) + ", expected " +
                          std::to_string(k_T + k_O + 4));
  }
  ModelParams p;
  p.beta_T = theta.head(k_T);
  p.alpha = theta[k_T];
  p.beta_O = theta.segment(k_T + 1, k_O);
  p.gamma = theta[k_T + 1 + k_O];
  p.delta = theta[k_T + 2 + k_O];
  p.rho = Correlation(theta[k_T + 3 + k_O]);
  return p;
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out;
  for (Index j = 0; j < k_T(); ++j) out.push_back("beta_T" + std::to_string(j));
  out.emplace_back("alpha");
  for (Index j = 0; j < k_O(); ++j) out.push_back("beta_O" + std::to_string(j));
  out.emplace_back("gamma");
  out.emplace_back("delta");
  out.emplace_back("rho");
  return out;
}

void ModelParams::validate() const {
  if (k_T() == 0 || k_O() == 0) throw ValidationError("model parameters: empty coefficient vector");
  if (!pack().allFinite()) throw ValidationError("model parameters: non-finite entry");
}

void Dataset::validate() const {
  const std::size_t n = D.size();
  if (n == 0) throw ValidationError("dataset is empty");
  if (Y.size() != n) throw ValidationError("dataset: Y and D lengths differ");
  if (static_cast<std::size_t>(X.rows()) != n || static_cast<std::size_t>(Z.rows()) != n) {
    throw ValidationError("dataset: design matrices do not have one row per individual");
  }
  if (net.size() != n) throw ValidationError("dataset: network size differs from sample size");
  if (X.cols() == 0 || Z.cols() == 0) throw ValidationError("dataset: empty design matrix");
  if (!X.allFinite() || !Z.allFinite()) throw ValidationError("dataset: non-finite covariate");
  if (!(X.col(0).array() == 1.0).all() || !(Z.col(0).array() == 1.0).all()) {
    throw ValidationError("dataset: first design column must be the intercept");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (D[i] > 1 || Y[i] > 1) {
      throw ValidationError("dataset: non-binary treatment or outcome at observation " + std::to_string(i));
    }
  }
}

void check_dimensions(const ModelParams& params, const Dataset& data) {
  if (params.k_T() != data.Z.cols() || params.k_O() != data.X.cols()) {
    throw ValidationError("parameter dimensions (k_T = " + std::to_string(params.k_T()) +
                          ", k_O = " + std::to_string(params.k_O()) +
                          ") do not match the design matrices (" + std::to_string(data.Z.cols()) +
                          ", " + std::to_string(data.X.cols()) + ")");
  }
}

}  // namespace peertreat

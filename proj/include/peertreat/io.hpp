#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "peertreat/effects.hpp"
#include "peertreat/estimator.hpp"
#include "peertreat/model.hpp"
#include "peertreat/simulation.hpp"

namespace peertreat {

// ------------------------------------------------------------------ datasets --

/// Per-column quantile used to binarize a non-binary y or d column:
/// value > empirical quantile (linear interpolation between order statistics).
struct QuantileThresholds {
  std::optional<double> y;
  std::optional<double> d;
};

/// Parses "0.5" (applies to both columns) or "y=0.5" / "d=0.3". Repeated
/// calls accumulate into `into`.
void parse_quantile_threshold(const std::string& spec, QuantileThresholds& into);

struct LoadedDataset {
  Dataset data;
  std::vector<std::int64_t> ids;  // dense index -> original node id
  std::vector<std::string> x_names;  // without the intercept
  std::vector<std::string> z_names;
};

/// Node CSV with header `id,y,d,x_*...,z_*...`; edge CSV `source_id,target_id`
/// (header optional). Intercept columns are prepended to X and Z.
LoadedDataset load_dataset(const std::string& node_csv, const std::string& edge_csv,
                           const QuantileThresholds& thresholds = {});

void save_dataset(const LoadedDataset& ds, const std::string& node_csv, const std::string& edge_csv);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

// -------------------------------------------------------------------- config --

/// key = value lines; '#' starts a comment. Unknown keys are rejected.
class ConfigFile {
 public:
  ConfigFile() = default;
  static ConfigFile load(const std::string& path);
  static ConfigFile parse(const std::string& text, const std::string& origin = "config");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  double get_double(const std::string& key, double fallback) const;
  std::size_t get_count(const std::string& key, std::size_t fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;

  /// FNV-1a over the sorted key=value lines, as 16 hex digits.
  std::string hash() const;

  static bool known_key(const std::string& key);

 private:
  std::map<std::string, std::string> values_;
};

EstimatorConfig estimator_config_from(const ConfigFile& cfg);
McDesign mc_design_from(const ConfigFile& cfg);
CounterfactualSpec counterfactual_spec_from(const ConfigFile& cfg, const LoadedDataset& ds);

/// Parameters from the simulate/mc keys: beta_T, alpha, beta_O, gamma, delta,
/// rho; defaults are the reference design at rho = 0.5.
ModelParams true_params_from(const ConfigFile& cfg);

// ------------------------------------------------------------------- outputs --

struct Manifest {
  std::string subcommand;
  std::uint64_t seed = 0;
  bool seed_generated = false;
  const ConfigFile* config = nullptr;
  std::vector<std::string> inputs;
  std::vector<std::string> files;
  std::optional<double> wall_seconds;  // only the Monte Carlo manifest is timed
  std::string extra_json;              // merged object, may be empty
};

void write_manifest(const std::string& dir, const Manifest& m);

std::vector<std::string> write_estimation(const std::string& dir, const EstimationResult& res,
                                          const LoadedDataset& ds);
std::vector<std::string> write_effects(const std::string& dir, const EffectsReport& rep, const LoadedDataset& ds);
std::vector<std::string> write_counterfactual(const std::string& dir, const CounterfactualReport& rep,
                                              const LoadedDataset& ds);
std::vector<std::string> write_mc_study(const std::string& dir, const McResult& res);

/// Reads theta.json written by write_estimation.
ModelParams read_theta(const std::string& path, Index k_T, Index k_O);

/// Creates the directory (and parents) if missing.
void ensure_directory(const std::string& dir);

}  // namespace peertreat

#include "peertreat/peertreat.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>
#include <vector>

#include "json.hpp"
#include "peertreat/effects.hpp"
#include "peertreat/errors.hpp"
#include "peertreat/estimator.hpp"
#include "peertreat/io.hpp"
#include "peertreat/simulation.hpp"
#include "peertreat/version.hpp"

using namespace peertreat;

struct pt_config {
  ConfigFile cfg;
};

struct pt_dataset {
  LoadedDataset ds;
};

struct pt_estimate {
  EstimationResult result;
};

struct pt_effects {
  EffectsReport report;
};

struct pt_counterfactual {
  CounterfactualReport report;
};

struct pt_mc_study {
  McResult result;
  McDesign design;
};

namespace {

thread_local std::string last_error;

template <class F>
pt_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return PT_OK;
  } catch (const ValidationError& e) {
    last_error = e.what();
    return PT_ERR_VALIDATION;
  } catch (const ConvergenceError& e) {
    last_error = e.what();
    return PT_ERR_CONVERGENCE;
  } catch (const NumericalError& e) {
    last_error = e.what();
    return PT_ERR_CONVERGENCE;
  } catch (const IoError& e) {
    last_error = e.what();
    return PT_ERR_IO;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return PT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return PT_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return PT_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw ValidationError(std::string(what) + " must not be null");
}

const ConfigFile& config_or_empty(const pt_config* cfg) {
  static const ConfigFile empty;
  return cfg ? cfg->cfg : empty;
}

void copy_vector(const Vector& v, double* buf, std::size_t cap, std::size_t* len) {
  require(len, "len");
  *len = static_cast<std::size_t>(v.size());
  if (buf) std::copy_n(v.data(), std::min(cap, *len), buf);
}

void finish_run(const std::string& dir, const pt_config* cfg, const pt_run_info* run, const std::string& fallback,
                std::vector<std::string> files, std::optional<double> wall = std::nullopt,
                std::string extra = {}) {
  Manifest m;
  m.subcommand = run && run->subcommand ? run->subcommand : fallback;
  m.seed = run ? run->seed : 0;
  m.seed_generated = run && run->seed_generated;
  m.config = cfg ? &cfg->cfg : nullptr;
  if (run) {
    for (std::size_t k = 0; k < run->input_count; ++k) m.inputs.emplace_back(run->inputs[k]);
  }
  files.push_back("manifest.json");
  m.files = std::move(files);
  m.wall_seconds = wall;
  m.extra_json = std::move(extra);
  write_manifest(dir, m);
}

}  // namespace

extern "C" {

const char* pt_version(void) { return kVersion; }

const char* pt_last_error(void) { return last_error.c_str(); }

pt_status pt_config_new(pt_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new pt_config{};
  });
}

pt_status pt_config_load(const char* path, pt_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new pt_config{ConfigFile::load(path)};
  });
}

pt_status pt_config_set(pt_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

pt_status pt_config_get(const pt_config* cfg, const char* key, char* buf, size_t cap, int* found) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(found, "found");
    const auto v = cfg->cfg.get(key);
    *found = v ? 1 : 0;
    if (!v) return;
    if (!buf || cap <= v->size()) throw ValidationError(std::string("buffer too small for config key '") + key + "'");
    std::memcpy(buf, v->c_str(), v->size() + 1);
  });
}

void pt_config_free(pt_config* cfg) { delete cfg; }

pt_status pt_dataset_load(const char* nodes_csv, const char* edges_csv, const char* const* thresholds,
                          size_t threshold_count, pt_dataset** out) {
  return guarded([&] {
    require(nodes_csv, "nodes path");
    require(edges_csv, "edges path");
    require(out, "out");
    QuantileThresholds q;
    for (std::size_t k = 0; k < threshold_count; ++k) parse_quantile_threshold(thresholds[k], q);
    *out = new pt_dataset{load_dataset(nodes_csv, edges_csv, q)};
  });
}

pt_status pt_dataset_save(const pt_dataset* ds, const char* nodes_csv, const char* edges_csv) {
  return guarded([&] {
    require(ds, "dataset");
    require(nodes_csv, "nodes path");
    require(edges_csv, "edges path");
    save_dataset(ds->ds, nodes_csv, edges_csv);
  });
}

pt_status pt_dataset_write(const pt_dataset* ds, const char* dir, const pt_config* cfg, const pt_run_info* run) {
  return guarded([&] {
    require(ds, "dataset");
    require(dir, "dir");
    ensure_directory(dir);
    const std::filesystem::path d(dir);
    save_dataset(ds->ds, (d / "nodes.csv").string(), (d / "edges.csv").string());
    finish_run(dir, cfg, run, "simulate", {"nodes.csv", "edges.csv"});
  });
}

pt_status pt_dataset_size(const pt_dataset* ds, size_t* n, size_t* k_T, size_t* k_O) {
  return guarded([&] {
    require(ds, "dataset");
    if (n) *n = ds->ds.data.size();
    if (k_T) *k_T = static_cast<std::size_t>(ds->ds.data.Z.cols());
    if (k_O) *k_O = static_cast<std::size_t>(ds->ds.data.X.cols());
  });
}

void pt_dataset_free(pt_dataset* ds) { delete ds; }

pt_status pt_simulate(const pt_config* cfg, uint64_t seed, pt_dataset** out) {
  return guarded([&] {
    require(out, "out");
    const ConfigFile& c = config_or_empty(cfg);
    const ModelParams truth = true_params_from(c);
    const std::size_t n = c.get_count("n", 1000);
    if (n == 0) throw ValidationError("config key 'n' must be positive");
    RandomStream rng(seed);
    auto* h = new pt_dataset{};
    try {
      h->ds.data = simulate_dataset(n, truth, c.get_count("max_degree", 10), rng);
    } catch (...) {
      delete h;
      throw;
    }
    h->ds.ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) h->ds.ids[i] = static_cast<std::int64_t>(i);
    h->ds.x_names = {"x_1"};
    h->ds.z_names = {"z_1", "z_2"};
    *out = h;
  });
}

pt_status pt_estimate_run(const pt_dataset* ds, const pt_config* cfg, uint64_t seed, pt_estimate** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(out, "out");
    EstimatorConfig ec = estimator_config_from(config_or_empty(cfg));
    ec.seed = seed;
    *out = new pt_estimate{npjl_estimate(ds->ds.data, ec)};
  });
}

pt_status pt_estimate_from_file(const pt_dataset* ds, const char* theta_json, const pt_config* cfg,
                                pt_estimate** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(theta_json, "theta path");
    require(out, "out");
    const Dataset& data = ds->ds.data;
    const EstimatorConfig ec = estimator_config_from(config_or_empty(cfg));
    EstimationResult r;
    r.theta_hat = read_theta(theta_json, data.Z.cols(), data.X.cols());
    check_dimensions(r.theta_hat, data);
    r.profile_hat = solve_equilibrium(r.theta_hat, data, ec.solver);
    r.converged = true;
    r.std_errors = Vector::Zero(r.theta_hat.dimension());
    *out = new pt_estimate{std::move(r)};
  });
}

pt_status pt_estimate_converged(const pt_estimate* est, int* converged) {
  return guarded([&] {
    require(est, "estimate");
    require(converged, "converged");
    *converged = est->result.converged ? 1 : 0;
  });
}

pt_status pt_estimate_theta(const pt_estimate* est, double* buf, size_t cap, size_t* len) {
  return guarded([&] {
    require(est, "estimate");
    copy_vector(est->result.theta_hat.pack(), buf, cap, len);
  });
}

pt_status pt_estimate_std_errors(const pt_estimate* est, double* buf, size_t cap, size_t* len) {
  return guarded([&] {
    require(est, "estimate");
    copy_vector(est->result.std_errors, buf, cap, len);
  });
}

pt_status pt_estimate_write(const pt_estimate* est, const pt_dataset* ds, const char* dir, const pt_config* cfg,
                            const pt_run_info* run) {
  return guarded([&] {
    require(est, "estimate");
    require(ds, "dataset");
    require(dir, "dir");
    auto files = write_estimation(dir, est->result, ds->ds);
    finish_run(dir, cfg, run, "estimate", std::move(files));
  });
}

void pt_estimate_free(pt_estimate* est) { delete est; }

pt_status pt_effects_run(const pt_dataset* ds, const pt_estimate* est, const pt_config* cfg, uint64_t seed,
                         pt_effects** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(est, "estimate");
    require(out, "out");
    const ConfigFile& c = config_or_empty(cfg);
    const Dataset& data = ds->ds.data;
    const EstimatorConfig ec = estimator_config_from(c);
    const ModelParams& theta = est->result.theta_hat;
    EffectsReport rep;
    rep.pte = partial_treatment_effects(theta, data, est->result.profile_hat, ec.solver);
    rep.apte = rep.pte.mean();
    const auto cte = c.get("cte");
    if (cte && (*cte == "true" || *cte == "1")) {
      const std::size_t n = data.size();
      rep.draws = c.get_count("cte_draws", 200);
      const double shift = c.get_double("cte_shift", 0.5);
      rep.cte.resize(static_cast<Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        Vector s = Vector::Zero(static_cast<Index>(n));
        s[static_cast<Index>(i)] = shift;
        RandomStream rng(RandomStream::derive_seed(seed, i));
        rep.cte[static_cast<Index>(i)] = composite_treatment_effect(i, theta, data, s, rep.draws, rng, ec.solver);
      }
    }
    *out = new pt_effects{std::move(rep)};
  });
}

pt_status pt_effects_apte(const pt_effects* fx, double* apte) {
  return guarded([&] {
    require(fx, "effects");
    require(apte, "apte");
    *apte = fx->report.apte;
  });
}

pt_status pt_effects_write(const pt_effects* fx, const pt_dataset* ds, const char* dir, const pt_config* cfg,
                           const pt_run_info* run) {
  return guarded([&] {
    require(fx, "effects");
    require(ds, "dataset");
    require(dir, "dir");
    auto files = write_effects(dir, fx->report, ds->ds);
    finish_run(dir, cfg, run, "effects", std::move(files));
  });
}

void pt_effects_free(pt_effects* fx) { delete fx; }

pt_status pt_counterfactual_run(const pt_dataset* ds, const pt_estimate* est, const pt_config* cfg, uint64_t seed,
                                pt_counterfactual** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(est, "estimate");
    require(out, "out");
    const ConfigFile& c = config_or_empty(cfg);
    CounterfactualSpec spec = counterfactual_spec_from(c, ds->ds);
    spec.seed = seed;
    const EstimatorConfig ec = estimator_config_from(c);
    *out = new pt_counterfactual{
        run_counterfactual(est->result.theta_hat, ds->ds.data, est->result.profile_hat, spec, ec.solver)};
  });
}

pt_status pt_counterfactual_composite_ratio(const pt_counterfactual* cf, double* ratio) {
  return guarded([&] {
    require(cf, "counterfactual");
    require(ratio, "ratio");
    *ratio = cf->report.composite_ratio;
  });
}

pt_status pt_counterfactual_write(const pt_counterfactual* cf, const pt_dataset* ds, const char* dir,
                                  const pt_config* cfg, const pt_run_info* run) {
  return guarded([&] {
    require(cf, "counterfactual");
    require(ds, "dataset");
    require(dir, "dir");
    auto files = write_counterfactual(dir, cf->report, ds->ds);
    finish_run(dir, cfg, run, "counterfactual", std::move(files));
  });
}

void pt_counterfactual_free(pt_counterfactual* cf) { delete cf; }

pt_status pt_mc_study_run(const pt_config* cfg, uint64_t seed, pt_mc_study** out) {
  return guarded([&] {
    require(out, "out");
    McDesign design = mc_design_from(config_or_empty(cfg));
    design.seed = seed;
    auto* h = new pt_mc_study{};
    h->design = design;
    try {
      h->result = monte_carlo_study(design);
    } catch (...) {
      delete h;
      throw;
    }
    *out = h;
  });
}

pt_status pt_mc_study_write(const pt_mc_study* mc, const char* dir, const pt_config* cfg, const pt_run_info* run) {
  return guarded([&] {
    require(mc, "study");
    require(dir, "dir");
    auto files = write_mc_study(dir, mc->result);
    const McDesign& d = mc->design;
    nlohmann::ordered_json extra;
    extra["design"] = {{"n_list", d.n_list},
                       {"replications", d.replications},
                       {"max_degree", d.max_degree},
                       {"true_theta", std::vector<double>(mc->result.truth.data(),
                                                          mc->result.truth.data() + mc->result.truth.size())},
                       {"parameter_names", mc->result.names},
                       {"compute_apte", d.compute_apte}};
    extra["seed_rule"] = "replication r at size n uses derive_seed(seed, n * 1000003 + r)";
    nlohmann::ordered_json failures = nlohmann::ordered_json::array();
    for (const auto& r : mc->result.records) {
      if (!r.ok) failures.push_back({{"n", r.n}, {"replication", r.replication}, {"seed", r.seed}, {"error", r.error}});
    }
    extra["failures"] = failures;
    finish_run(dir, cfg, run, "mc-study", std::move(files), mc->result.wall_seconds, extra.dump());
  });
}

void pt_mc_study_free(pt_mc_study* mc) { delete mc; }

}  // extern "C"

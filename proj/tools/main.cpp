#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "peertreat/peertreat.h"

namespace {

struct Options {
  std::string nodes, edges, config, out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> thresholds;
};

// Status from the library, carried out of the subcommand as an exception.
struct Failure {
  pt_status status;
};

void check(pt_status s, const char* what) {
  if (s != PT_OK) {
    std::fprintf(stderr, "peertreat: %s: %s\n", what, pt_last_error());
    throw Failure{s};
  }
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};

using Config = Handle<pt_config, pt_config_free>;
using Dataset = Handle<pt_dataset, pt_dataset_free>;
using Estimate = Handle<pt_estimate, pt_estimate_free>;

std::uint64_t resolve_seed(const Options& o, bool& generated) {
  generated = !o.seed.has_value();
  if (o.seed) return *o.seed;
  std::random_device rd;
  const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::fprintf(stderr, "peertreat: no --seed given, using generated seed %llu\n",
               static_cast<unsigned long long>(s));
  return s;
}

void load_config(const Options& o, Config& cfg) {
  if (o.config.empty()) check(pt_config_new(&cfg.p), "config");
  else check(pt_config_load(o.config.c_str(), &cfg.p), "config");
}

void load_data(const Options& o, Dataset& ds) {
  std::vector<const char*> q;
  for (const auto& t : o.thresholds) q.push_back(t.c_str());
  check(pt_dataset_load(o.nodes.c_str(), o.edges.c_str(), q.data(), q.size(), &ds.p), "load dataset");
}

std::vector<const char*> input_list(const Options& o) {
  std::vector<const char*> in;
  for (const std::string* s : {&o.nodes, &o.edges, &o.config}) {
    if (!s->empty()) in.push_back(s->c_str());
  }
  return in;
}

// Estimates at the data unless the config names a theta.json from an earlier run
// (relative paths resolve against the config file).
void fit_or_load(const Options& o, const Config& cfg, const Dataset& ds, std::uint64_t seed, Estimate& est) {
  char buf[4096];
  int found = 0;
  check(pt_config_get(cfg.p, "theta_file", buf, sizeof buf, &found), "config");
  std::string theta = found ? buf : "";
  if (!theta.empty() && std::filesystem::path(theta).is_relative() && !o.config.empty()) {
    theta = (std::filesystem::path(o.config).parent_path() / theta).string();
  }
  if (!theta.empty()) {
    check(pt_estimate_from_file(ds.p, theta.c_str(), cfg.p, &est.p), "load theta");
    return;
  }
  check(pt_estimate_run(ds.p, cfg.p, seed, &est.p), "estimate");
  int converged = 0;
  check(pt_estimate_converged(est.p, &converged), "estimate");
  if (!converged) {
    std::fprintf(stderr, "peertreat: estimation did not converge\n");
    throw Failure{PT_ERR_CONVERGENCE};
  }
}

pt_run_info run_info(const char* sub, std::uint64_t seed, bool generated, const std::vector<const char*>& in) {
  return pt_run_info{sub, seed, generated ? 1 : 0, in.data(), in.size()};
}

int cmd_simulate(const Options& o) {
  bool gen;
  const std::uint64_t seed = resolve_seed(o, gen);
  Config cfg;
  load_config(o, cfg);
  Dataset ds;
  check(pt_simulate(cfg.p, seed, &ds.p), "simulate");
  const auto in = input_list(o);
  const pt_run_info run = run_info("simulate", seed, gen, in);
  check(pt_dataset_write(ds.p, o.out.c_str(), cfg.p, &run), "write dataset");
  return 0;
}

int cmd_estimate(const Options& o) {
  bool gen;
  const std::uint64_t seed = resolve_seed(o, gen);
  Config cfg;
  load_config(o, cfg);
  Dataset ds;
  load_data(o, ds);
  Estimate est;
  check(pt_estimate_run(ds.p, cfg.p, seed, &est.p), "estimate");
  const auto in = input_list(o);
  const pt_run_info run = run_info("estimate", seed, gen, in);
  check(pt_estimate_write(est.p, ds.p, o.out.c_str(), cfg.p, &run), "write results");
  int converged = 0;
  check(pt_estimate_converged(est.p, &converged), "estimate");
  if (!converged) {
    std::fprintf(stderr, "peertreat: estimation did not converge; partial results written\n");
    return PT_ERR_CONVERGENCE;
  }
  return 0;
}

int cmd_effects(const Options& o) {
  bool gen;
  const std::uint64_t seed = resolve_seed(o, gen);
  Config cfg;
  load_config(o, cfg);
  Dataset ds;
  load_data(o, ds);
  Estimate est;
  fit_or_load(o, cfg, ds, seed, est);
  Handle<pt_effects, pt_effects_free> fx;
  check(pt_effects_run(ds.p, est.p, cfg.p, seed, &fx.p), "effects");
  const auto in = input_list(o);
  const pt_run_info run = run_info("effects", seed, gen, in);
  check(pt_effects_write(fx.p, ds.p, o.out.c_str(), cfg.p, &run), "write results");
  return 0;
}

int cmd_counterfactual(const Options& o) {
  bool gen;
  const std::uint64_t seed = resolve_seed(o, gen);
  Config cfg;
  load_config(o, cfg);
  Dataset ds;
  load_data(o, ds);
  Estimate est;
  fit_or_load(o, cfg, ds, seed, est);
  Handle<pt_counterfactual, pt_counterfactual_free> cf;
  check(pt_counterfactual_run(ds.p, est.p, cfg.p, seed, &cf.p), "counterfactual");
  const auto in = input_list(o);
  const pt_run_info run = run_info("counterfactual", seed, gen, in);
  check(pt_counterfactual_write(cf.p, ds.p, o.out.c_str(), cfg.p, &run), "write results");
  return 0;
}

int cmd_mc_study(const Options& o) {
  bool gen;
  const std::uint64_t seed = resolve_seed(o, gen);
  Config cfg;
  load_config(o, cfg);
  Handle<pt_mc_study, pt_mc_study_free> mc;
  check(pt_mc_study_run(cfg.p, seed, &mc.p), "mc-study");
  const auto in = input_list(o);
  const pt_run_info run = run_info("mc-study", seed, gen, in);
  check(pt_mc_study_write(mc.p, o.out.c_str(), cfg.p, &run), "write results");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peer effects in treatment and outcome: estimation, effects and simulation"};
  app.set_version_flag("--version", std::string(pt_version()));
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool needs_data) {
    if (needs_data) {
      sub->add_option("--nodes", o.nodes, "node CSV: id,y,d,x_*,z_*")->required();
      sub->add_option("--edges", o.edges, "edge CSV: source_id,target_id")->required();
      sub->add_option("--quantile-threshold", o.thresholds,
                      "binarize a continuous y/d column above this quantile: 0.5, y=0.5 or d=0.9");
    }
    sub->add_option("--config", o.config, "key = value configuration file");
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--seed", o.seed, "random seed; generated and logged when absent");
  };

  auto* sim = app.add_subcommand("simulate", "draw a dataset from the reference design");
  auto* est = app.add_subcommand("estimate", "nested pseudo joint likelihood estimation");
  auto* fx = app.add_subcommand("effects", "partial and composite treatment effects");
  auto* cf = app.add_subcommand("counterfactual", "index-shift counterfactual for a target set");
  auto* mc = app.add_subcommand("mc-study", "Monte Carlo study of the estimator");
  common(sim, false);
  common(est, true);
  common(fx, true);
  common(cf, true);
  common(mc, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : PT_ERR_VALIDATION;
  }

  try {
    if (*sim) return cmd_simulate(o);
    if (*est) return cmd_estimate(o);
    if (*fx) return cmd_effects(o);
    if (*cf) return cmd_counterfactual(o);
    if (*mc) return cmd_mc_study(o);
  } catch (const Failure& f) {
    return f.status == PT_ERR_INTERNAL ? 1 : static_cast<int>(f.status);
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "peertreat: %s\n", e.what());
    return PT_ERR_IO;
  }
  return 1;
}

#include "peertreat/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "peertreat/errors.hpp"
#include "peertreat/version.hpp"

namespace peertreat {

using nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                         : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

bool parse_int(const std::string& s, std::int64_t& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// Linear interpolation between order statistics.
double empirical_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

BinaryVector binarize(const std::vector<double>& raw, const std::string& name, std::optional<double> q,
                      const std::vector<std::size_t>& rows) {
  BinaryVector out(raw.size());
  const bool binary = std::all_of(raw.begin(), raw.end(), [](double x) { return x == 0.0 || x == 1.0; });
  if (binary) {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] == 1.0;
    return out;
  }
  if (!q) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != 0.0 && raw[i] != 1.0) {
        throw ValidationError("node file row " + std::to_string(rows[i]) + ": column '" + name + "' value " +
                              format_double(raw[i]) + " is not binary (use --quantile-threshold)");
      }
    }
  }
  const double cut = empirical_quantile(raw, *q);
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] > cut;
  return out;
}

ordered_json to_json(double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr); }

ordered_json vector_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(to_json(v[i]));
  return a;
}

std::string csv_row(std::initializer_list<std::string> fields) {
  std::string s;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) s += ',';
    s += f;
    first = false;
  }
  return s + '\n';
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // estimation
      "outer_tol", "max_outer", "inner_mode", "se_method", "bootstrap_reps", "seed", "fixed_alpha", "fixed_delta",
      "fixed_rho", "solver_tol", "solver_max_iter", "damping",
      // simulation and Monte Carlo
      "n", "n_list", "replications", "max_degree", "beta_T", "alpha", "beta_O", "gamma", "delta", "rho",
      "workers", "compute_apte",
      // effects
      "theta_file", "cte", "cte_draws", "cte_shift",
      // counterfactual
      "selector", "target_count", "covariate", "targets", "index_shift", "draws"};
  return keys;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
}

// ------------------------------------------------------------------ datasets --

void parse_quantile_threshold(const std::string& spec, QuantileThresholds& into) {
  const std::string s = trim(spec);
  std::string col, val = s;
  if (const auto eq = s.find('='); eq != std::string::npos) {
    col = trim(s.substr(0, eq));
    val = trim(s.substr(eq + 1));
  }
  double q;
  if (!parse_double(val, q) || !(q > 0.0 && q < 1.0)) {
    throw ValidationError("quantile threshold '" + spec + "': expected a probability in (0, 1)");
  }
  if (col.empty()) {
    into.y = q;
    into.d = q;
  } else if (col == "y") {
    into.y = q;
  } else if (col == "d") {
    into.d = q;
  } else {
    throw ValidationError("quantile threshold '" + spec + "': column must be y or d");
  }
}

LoadedDataset load_dataset(const std::string& node_csv, const std::string& edge_csv,
                           const QuantileThresholds& thresholds) {
  LoadedDataset ds;
  std::vector<double> y_raw, d_raw;
  std::vector<std::vector<double>> xs, zs;
  std::vector<std::size_t> rows;
  {
    std::ifstream in = open_in(node_csv);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("node file '" + node_csv + "' is empty");
    const auto header = split_csv(line);
    int id_col = -1, y_col = -1, d_col = -1;
    std::vector<int> x_cols, z_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string& h = header[c];
      if (h == "id") id_col = static_cast<int>(c);
      else if (h == "y") y_col = static_cast<int>(c);
      else if (h == "d") d_col = static_cast<int>(c);
      else if (h.rfind("x_", 0) == 0) { x_cols.push_back(static_cast<int>(c)); ds.x_names.push_back(h); }
      else if (h.rfind("z_", 0) == 0) { z_cols.push_back(static_cast<int>(c)); ds.z_names.push_back(h); }
      else throw ValidationError("node file: unexpected column '" + h + "'");
    }
    for (auto [col, name] : {std::pair{id_col, "id"}, std::pair{y_col, "y"}, std::pair{d_col, "d"}}) {
      if (col < 0) throw ValidationError(std::string("node file: missing column '") + name + "'");
    }
    xs.resize(x_cols.size());
    zs.resize(z_cols.size());
    std::unordered_set<std::int64_t> seen;
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (trim(line).empty()) continue;
      const auto f = split_csv(line);
      if (f.size() != header.size()) {
        throw ValidationError("node file row " + std::to_string(row) + ": expected " +
                              std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
      }
      auto number = [&](int c) {
        double v;
        if (!parse_double(f[static_cast<std::size_t>(c)], v)) {
          throw ValidationError("node file row " + std::to_string(row) + ": cannot parse '" +
                                f[static_cast<std::size_t>(c)] + "' in column '" +
                                header[static_cast<std::size_t>(c)] + "'");
        }
        return v;
      };
      std::int64_t id;
      if (!parse_int(f[static_cast<std::size_t>(id_col)], id) || id < 0) {
        throw ValidationError("node file row " + std::to_string(row) + ": id '" +
                              f[static_cast<std::size_t>(id_col)] + "' is not a nonnegative integer");
      }
      if (!seen.insert(id).second) {
        throw ValidationError("node file row " + std::to_string(row) + ": duplicate node id " + std::to_string(id));
      }
      ds.ids.push_back(id);
      y_raw.push_back(number(y_col));
      d_raw.push_back(number(d_col));
      for (std::size_t k = 0; k < x_cols.size(); ++k) xs[k].push_back(number(x_cols[k]));
      for (std::size_t k = 0; k < z_cols.size(); ++k) zs[k].push_back(number(z_cols[k]));
      rows.push_back(row);
    }
  }
  const std::size_t n = ds.ids.size();
  if (n == 0) throw ValidationError("node file '" + node_csv + "' has no data rows");

  std::unordered_map<std::int64_t, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(ds.ids[i], i);

  std::vector<std::vector<std::size_t>> friends(n);
  {
    std::ifstream in = open_in(edge_csv);
    std::string line;
    std::size_t row = 0;
    std::vector<std::unordered_set<std::size_t>> seen(n);
    while (std::getline(in, line)) {
      ++row;
      if (trim(line).empty()) continue;
      const auto f = split_csv(line);
      if (row == 1 && f.size() == 2 && f[0] == "source_id" && f[1] == "target_id") continue;
      if (f.size() != 2) {
        throw ValidationError("edge file row " + std::to_string(row) + ": expected 2 fields, found " +
                              std::to_string(f.size()));
      }
      std::int64_t s, t;
      if (!parse_int(f[0], s) || !parse_int(f[1], t) || s < 0 || t < 0) {
        throw ValidationError("edge file row " + std::to_string(row) + ": ids must be nonnegative integers");
      }
      const auto si = index.find(s);
      if (si == index.end()) {
        throw ValidationError("edge file row " + std::to_string(row) + ": source id " + std::to_string(s) +
                              " is not a node");
      }
      const auto ti = index.find(t);
      if (ti == index.end()) {
        throw ValidationError("edge file row " + std::to_string(row) + ": target id " + std::to_string(t) +
                              " is not a node");
      }
      if (s == t) {
        throw ValidationError("edge file row " + std::to_string(row) + ": self-loop on node " + std::to_string(s));
      }
      if (!seen[si->second].insert(ti->second).second) {
        throw ValidationError("edge file row " + std::to_string(row) + ": duplicate edge " + std::to_string(s) +
                              " -> " + std::to_string(t));
      }
      friends[si->second].push_back(ti->second);
    }
  }

  Dataset& data = ds.data;
  data.X.resize(static_cast<Index>(n), static_cast<Index>(xs.size() + 1));
  data.Z.resize(static_cast<Index>(n), static_cast<Index>(zs.size() + 1));
  for (std::size_t i = 0; i < n; ++i) {
    const Index r = static_cast<Index>(i);
    data.X(r, 0) = 1.0;
    data.Z(r, 0) = 1.0;
    for (std::size_t k = 0; k < xs.size(); ++k) data.X(r, static_cast<Index>(k + 1)) = xs[k][i];
    for (std::size_t k = 0; k < zs.size(); ++k) data.Z(r, static_cast<Index>(k + 1)) = zs[k][i];
  }
  data.Y = binarize(y_raw, "y", thresholds.y, rows);
  data.D = binarize(d_raw, "d", thresholds.d, rows);
  data.net = DirectedNetwork(n, std::move(friends));
  data.validate();
  return ds;
}

void save_dataset(const LoadedDataset& ds, const std::string& node_csv, const std::string& edge_csv) {
  const Dataset& data = ds.data;
  const std::size_t n = data.size();
  if (ds.ids.size() != n) throw ValidationError("save_dataset: id list does not match the sample");
  if (static_cast<std::size_t>(data.X.cols()) != ds.x_names.size() + 1 ||
      static_cast<std::size_t>(data.Z.cols()) != ds.z_names.size() + 1) {
    throw ValidationError("save_dataset: column names do not match the design matrices");
  }
  std::string out = "id,y,d";
  for (const auto& s : ds.x_names) out += "," + s;
  for (const auto& s : ds.z_names) out += "," + s;
  out += '\n';
  for (std::size_t i = 0; i < n; ++i) {
    const Index r = static_cast<Index>(i);
    out += std::to_string(ds.ids[i]) + ',' + std::to_string(data.Y[i]) + ',' + std::to_string(data.D[i]);
    for (Index k = 1; k < data.X.cols(); ++k) out += ',' + format_double(data.X(r, k));
    for (Index k = 1; k < data.Z.cols(); ++k) out += ',' + format_double(data.Z(r, k));
    out += '\n';
  }
  write_text(node_csv, out);

  std::string edges = "source_id,target_id\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : data.net.friends(i)) {
      edges += std::to_string(ds.ids[i]) + ',' + std::to_string(ds.ids[j]) + '\n';
    }
  }
  write_text(edge_csv, edges);
}

// -------------------------------------------------------------------- config --

bool ConfigFile::known_key(const std::string& key) { return known_keys().count(key) > 0; }

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(origin + " line " + std::to_string(row) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (!known_key(key)) throw ValidationError(origin + " line " + std::to_string(row) + ": unknown key '" + key + "'");
    cfg.values_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void ConfigFile::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw ValidationError("unknown config key '" + key + "'");
  values_[key] = value;
}

std::optional<std::string> ConfigFile::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  double out;
  if (!parse_double(*v, out)) throw ValidationError("config key '" + key + "': '" + *v + "' is not a number");
  return out;
}

std::size_t ConfigFile::get_count(const std::string& key, std::size_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::int64_t out;
  if (!parse_int(*v, out) || out < 0) {
    throw ValidationError("config key '" + key + "': '" + *v + "' is not a nonnegative integer");
  }
  return static_cast<std::size_t>(out);
}

std::vector<double> ConfigFile::get_doubles(const std::string& key) const {
  std::vector<double> out;
  const auto v = get(key);
  if (!v) return out;
  for (const auto& f : split_csv(*v)) {
    double x;
    if (!parse_double(f, x)) throw ValidationError("config key '" + key + "': '" + f + "' is not a number");
    out.push_back(x);
  }
  return out;
}

std::string ConfigFile::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : values_) {
    for (char c : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

EstimatorConfig estimator_config_from(const ConfigFile& cfg) {
  EstimatorConfig c;
  c.outer_tol = cfg.get_double("outer_tol", c.outer_tol);
  c.max_outer = cfg.get_count("max_outer", c.max_outer);
  if (const auto m = cfg.get("inner_mode")) {
    if (*m == "sweep") c.inner_mode = InnerMode::Sweep;
    else if (*m == "full-solve") c.inner_mode = InnerMode::FullSolve;
    else throw ValidationError("config key 'inner_mode': expected sweep or full-solve, got '" + *m + "'");
  }
  if (const auto m = cfg.get("se_method")) {
    if (*m == "sandwich") c.se_method = SeMethod::Sandwich;
    else if (*m == "bootstrap") c.se_method = SeMethod::Bootstrap;
    else if (*m == "none") c.se_method = SeMethod::None;
    else throw ValidationError("config key 'se_method': expected sandwich, bootstrap or none, got '" + *m + "'");
  }
  c.bootstrap_reps = cfg.get_count("bootstrap_reps", c.bootstrap_reps);
  if (cfg.has("fixed_alpha")) c.fixed_alpha = cfg.get_double("fixed_alpha", 0.0);
  if (cfg.has("fixed_delta")) c.fixed_delta = cfg.get_double("fixed_delta", 0.0);
  if (cfg.has("fixed_rho")) c.fixed_rho = cfg.get_double("fixed_rho", 0.0);
  c.solver.tol = cfg.get_double("solver_tol", c.solver.tol);
  c.solver.max_iter = cfg.get_count("solver_max_iter", c.solver.max_iter);
  c.solver.damping = cfg.get_double("damping", c.solver.damping);
  c.validate();
  return c;
}

ModelParams true_params_from(const ConfigFile& cfg) {
  ModelParams p = reference_design_params(cfg.get_double("rho", 0.5));
  if (cfg.has("beta_T")) {
    const auto v = cfg.get_doubles("beta_T");
    p.beta_T = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  }
  if (cfg.has("beta_O")) {
    const auto v = cfg.get_doubles("beta_O");
    p.beta_O = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  }
  p.alpha = cfg.get_double("alpha", p.alpha);
  p.gamma = cfg.get_double("gamma", p.gamma);
  p.delta = cfg.get_double("delta", p.delta);
  p.validate();
  return p;
}

McDesign mc_design_from(const ConfigFile& cfg) {
  McDesign d;
  if (cfg.has("n_list")) {
    d.n_list.clear();
    for (double x : cfg.get_doubles("n_list")) {
      if (!(x >= 1.0) || x != std::floor(x)) throw ValidationError("config key 'n_list': sizes must be positive integers");
      d.n_list.push_back(static_cast<std::size_t>(x));
    }
  }
  d.replications = cfg.get_count("replications", d.replications);
  d.max_degree = cfg.get_count("max_degree", d.max_degree);
  d.true_params = true_params_from(cfg);
  d.estimator = estimator_config_from(cfg);
  if (!cfg.has("se_method")) d.estimator.se_method = SeMethod::None;
  d.workers = cfg.get_count("workers", 0);
  if (const auto v = cfg.get("compute_apte")) d.compute_apte = *v == "true" || *v == "1";
  return d;
}

CounterfactualSpec counterfactual_spec_from(const ConfigFile& cfg, const LoadedDataset& ds) {
  CounterfactualSpec s;
  const std::string sel = cfg.get("selector").value_or("most-popular");
  if (sel == "most-popular") {
    s.selector = TargetSelector::MostPopular;
  } else if (sel == "lowest-covariate") {
    s.selector = TargetSelector::LowestCovariate;
    const std::string col = cfg.get("covariate").value_or("");
    const auto it = std::find(ds.z_names.begin(), ds.z_names.end(), col);
    if (it == ds.z_names.end()) {
      throw ValidationError("config key 'covariate': '" + col + "' is not a z_ column of the node file");
    }
    s.covariate_column = static_cast<Index>(it - ds.z_names.begin()) + 1;
  } else if (sel == "explicit") {
    s.selector = TargetSelector::Explicit;
    std::unordered_map<std::int64_t, std::size_t> index;
    for (std::size_t i = 0; i < ds.ids.size(); ++i) index.emplace(ds.ids[i], i);
    if (const auto v = cfg.get("targets")) {
      for (const auto& f : split_csv(*v)) {
        if (f.empty()) continue;
        std::int64_t id;
        if (!parse_int(f, id)) throw ValidationError("config key 'targets': '" + f + "' is not an id");
        const auto it = index.find(id);
        if (it == index.end()) throw ValidationError("config key 'targets': id " + f + " is not a node");
        s.targets.push_back(it->second);
      }
    }
  } else {
    throw ValidationError("config key 'selector': expected lowest-covariate, most-popular or explicit");
  }
  if (s.selector != TargetSelector::Explicit && !cfg.has("target_count")) {
    throw ValidationError("config key 'target_count' is required for selector " + sel);
  }
  s.target_count = cfg.get_count("target_count", s.targets.size());
  s.index_shift = cfg.get_double("index_shift", s.index_shift);
  s.draws = cfg.get_count("draws", s.draws);
  return s;
}

// ------------------------------------------------------------------- outputs --

void write_manifest(const std::string& dir, const Manifest& m) {
  ordered_json j;
  j["software"] = "peertreat";
  j["version"] = kVersion;
  j["subcommand"] = m.subcommand;
  j["seed"] = m.seed;
  j["seed_generated"] = m.seed_generated;
  ordered_json cfg = ordered_json::object();
  if (m.config) {
    for (const auto& [k, v] : m.config->values()) cfg[k] = v;
  }
  j["config_hash"] = m.config ? m.config->hash() : ConfigFile().hash();
  j["config"] = cfg;
  j["inputs"] = m.inputs;
  j["files"] = m.files;
  if (m.wall_seconds) j["wall_seconds"] = *m.wall_seconds;
  if (!m.extra_json.empty()) {
    const ordered_json extra = ordered_json::parse(m.extra_json);
    for (const auto& [k, v] : extra.items()) j[k] = v;
  }
  write_text(join_path(dir, "manifest.json"), j.dump(2) + "\n");
}

std::vector<std::string> write_estimation(const std::string& dir, const EstimationResult& res,
                                          const LoadedDataset& ds) {
  ensure_directory(dir);
  const ModelParams& th = res.theta_hat;
  const Vector theta = th.pack();
  const auto names = th.names();
  std::vector<std::string> labels;
  labels.push_back("intercept");
  for (const auto& z : ds.z_names) labels.push_back(z);
  labels.push_back("V");
  labels.push_back("intercept");
  for (const auto& x : ds.x_names) labels.push_back(x);
  labels.push_back("D");
  labels.push_back("W");
  labels.push_back("rho");

  ordered_json j;
  j["converged"] = res.converged;
  j["outer_iterations"] = res.outer_iterations;
  j["loglik"] = to_json(res.loglik);
  j["k_T"] = th.k_T();
  j["k_O"] = th.k_O();
  j["theta"] = vector_json(theta);
  ordered_json params = ordered_json::array();
  for (Index k = 0; k < theta.size(); ++k) {
    ordered_json p;
    p["name"] = names[static_cast<std::size_t>(k)];
    p["column"] = static_cast<std::size_t>(k) < labels.size() ? labels[static_cast<std::size_t>(k)] : "";
    p["estimate"] = to_json(theta[k]);
    p["std_error"] = to_json(res.std_errors.size() == theta.size() ? res.std_errors[k] : 0.0);
    p["fixed"] = std::find(res.fixed.begin(), res.fixed.end(), k) != res.fixed.end();
    params.push_back(p);
  }
  j["parameters"] = params;
  ordered_json diag;
  const auto& c = res.diagnostics.contraction;
  diag["contraction"] = {{"alpha_margin", to_json(c.alpha_margin)}, {"sup_psi", to_json(c.sup_psi)},
                         {"delta_margin", to_json(c.delta_margin)}, {"sup_psi_w", to_json(c.sup_psi_w)},
                         {"delta_margin_w", to_json(c.delta_margin_w)}, {"degree_ok", c.degree_ok},
                         {"satisfied", c.satisfied}};
  diag["clamp_events"] = res.diagnostics.clamp_events;
  diag["rank_ok"] = res.diagnostics.rank_ok;
  diag["rho_at_boundary"] = res.diagnostics.rho_at_boundary;
  diag["se_method"] = res.diagnostics.se_note;
  diag["warnings"] = res.diagnostics.warnings;
  j["diagnostics"] = diag;
  write_text(join_path(dir, "theta.json"), j.dump(2) + "\n");

  std::string se = "parameter,column,estimate,std_error\n";
  for (Index k = 0; k < theta.size(); ++k) {
    se += names[static_cast<std::size_t>(k)] + ',' + labels[static_cast<std::size_t>(k)] + ',' +
          format_double(theta[k]) + ',' + format_double(res.std_errors[k]) + '\n';
  }
  write_text(join_path(dir, "std_errors.csv"), se);

  std::string ccp = "id,p_T,p_O\n";
  for (std::size_t i = 0; i < ds.ids.size(); ++i) {
    const Index r = static_cast<Index>(i);
    ccp += std::to_string(ds.ids[i]) + ',' + format_double(res.profile_hat.p_T[r]) + ',' +
           format_double(res.profile_hat.p_O[r]) + '\n';
  }
  write_text(join_path(dir, "ccp_profile.csv"), ccp);

  std::string tr = "iteration,gap,loglik\n";
  for (const auto& t : res.trace) {
    tr += csv_row({std::to_string(t.iteration), format_double(t.gap), format_double(t.loglik)});
  }
  write_text(join_path(dir, "trace.csv"), tr);
  return {"theta.json", "std_errors.csv", "ccp_profile.csv", "trace.csv"};
}

std::vector<std::string> write_effects(const std::string& dir, const EffectsReport& rep, const LoadedDataset& ds) {
  ensure_directory(dir);
  const bool with_cte = rep.cte.size() == rep.pte.size() && rep.cte.size() > 0;
  std::string csv = with_cte ? "id,pte,cte\n" : "id,pte\n";
  for (std::size_t i = 0; i < ds.ids.size(); ++i) {
    const Index r = static_cast<Index>(i);
    csv += std::to_string(ds.ids[i]) + ',' + format_double(rep.pte[r]);
    if (with_cte) csv += ',' + format_double(rep.cte[r]);
    csv += '\n';
  }
  write_text(join_path(dir, "pte.csv"), csv);
  ordered_json j;
  j["n"] = rep.pte.size();
  j["apte"] = to_json(rep.apte);
  if (with_cte) {
    j["cte_mean"] = to_json(rep.cte.mean());
    j["cte_draws"] = rep.draws;
  }
  write_text(join_path(dir, "effects.json"), j.dump(2) + "\n");
  return {"pte.csv", "effects.json"};
}

std::vector<std::string> write_counterfactual(const std::string& dir, const CounterfactualReport& rep,
                                              const LoadedDataset& ds) {
  ensure_directory(dir);
  auto group = [](const GroupCounts& g) {
    ordered_json o;
    o["baseline_exercise_count"] = g.observed_treated;
    o["baseline_outcome_count"] = g.observed_outcome;
    o["sim_baseline_exercise_count_mean"] = to_json(g.baseline_treated.mean);
    o["sim_baseline_exercise_count_sd"] = to_json(g.baseline_treated.sd);
    o["sim_baseline_outcome_count_mean"] = to_json(g.baseline_outcome.mean);
    o["sim_baseline_outcome_count_sd"] = to_json(g.baseline_outcome.sd);
    o["cf_exercise_count_mean"] = to_json(g.counterfactual_treated.mean);
    o["cf_exercise_count_sd"] = to_json(g.counterfactual_treated.sd);
    o["cf_outcome_count_mean"] = to_json(g.counterfactual_outcome.mean);
    o["cf_outcome_count_sd"] = to_json(g.counterfactual_outcome.sd);
    return o;
  };
  ordered_json j;
  j["draws"] = rep.draws;
  j["target_count"] = rep.targets.size();
  j["whole_sample"] = group(rep.whole);
  j["targets"] = group(rep.target);
  j["composite_ratio"] = to_json(rep.composite_ratio);
  j["composite_ratio_simulated"] = to_json(rep.composite_ratio_simulated);
  j["target_composite_ratio"] = to_json(rep.target_composite_ratio);
  j["target_composite_ratio_simulated"] = to_json(rep.target_composite_ratio_simulated);
  j["target_apte"] = to_json(rep.target_apte);
  write_text(join_path(dir, "counterfactual.json"), j.dump(2) + "\n");

  std::string csv = "group,quantity,mean,sd\n";
  for (const auto& [label, g] : {std::pair<std::string, const GroupCounts*>{"whole_sample", &rep.whole},
                                 std::pair<std::string, const GroupCounts*>{"targets", &rep.target}}) {
    csv += label + ",observed_treated," + std::to_string(g->observed_treated) + ",0\n";
    csv += label + ",observed_outcome," + std::to_string(g->observed_outcome) + ",0\n";
    csv += csv_row({label, "baseline_treated", format_double(g->baseline_treated.mean),
                    format_double(g->baseline_treated.sd)});
    csv += csv_row({label, "baseline_outcome", format_double(g->baseline_outcome.mean),
                    format_double(g->baseline_outcome.sd)});
    csv += csv_row({label, "counterfactual_treated", format_double(g->counterfactual_treated.mean),
                    format_double(g->counterfactual_treated.sd)});
    csv += csv_row({label, "counterfactual_outcome", format_double(g->counterfactual_outcome.mean),
                    format_double(g->counterfactual_outcome.sd)});
  }
  write_text(join_path(dir, "counterfactual.csv"), csv);

  std::string targets = "id\n";
  for (std::size_t t : rep.targets) targets += std::to_string(ds.ids[t]) + '\n';
  write_text(join_path(dir, "targets.csv"), targets);
  return {"counterfactual.json", "counterfactual.csv", "targets.csv"};
}

std::vector<std::string> write_mc_study(const std::string& dir, const McResult& res) {
  ensure_directory(dir);
  std::string header = "n";
  for (const auto& name : res.names) header += "," + name;
  header += '\n';
  std::string bias = header, mse = header;
  std::string apte = "n,succeeded,failed,rho_at_boundary,apte_true,apte_est,apte_mse,apte_gap,mean_ccp_error\n";
  for (const auto& c : res.cells) {
    bias += std::to_string(c.n);
    mse += std::to_string(c.n);
    for (Index k = 0; k < c.avg_bias.size(); ++k) {
      bias += ',' + format_double(c.avg_bias[k]);
      mse += ',' + format_double(c.mse[k]);
    }
    bias += '\n';
    mse += '\n';
    apte += std::to_string(c.n) + ',' + std::to_string(c.succeeded) + ',' + std::to_string(c.failed) + ',' +
            std::to_string(c.rho_at_boundary) + ',' + format_double(c.apte_true) + ',' + format_double(c.apte_est) + ',' + format_double(c.apte_mse) + ',' +
            format_double(c.apte_gap) + ',' + format_double(c.mean_ccp_error) + '\n';
  }
  write_text(join_path(dir, "avg_bias.csv"), bias);
  write_text(join_path(dir, "mse.csv"), mse);
  write_text(join_path(dir, "apte.csv"), apte);

  std::string reps = "n,replication,seed,ok,outer_iterations,apte_true,apte_est,ccp_error";
  for (const auto& name : res.names) reps += "," + name;
  reps += '\n';
  for (const auto& r : res.records) {
    reps += std::to_string(r.n) + ',' + std::to_string(r.replication) + ',' + std::to_string(r.seed) + ',' +
            (r.ok ? "1" : "0") + ',' + std::to_string(r.outer_iterations) + ',' + format_double(r.apte_true) +
            ',' + format_double(r.apte_est) + ',' + format_double(r.ccp_error);
    for (Index k = 0; k < static_cast<Index>(res.names.size()); ++k) {
      reps += ',' + (r.ok ? format_double(r.theta_hat[k]) : std::string());
    }
    reps += '\n';
  }
  write_text(join_path(dir, "replications.csv"), reps);
  return {"avg_bias.csv", "mse.csv", "apte.csv", "replications.csv"};
}

ModelParams read_theta(const std::string& path, Index k_T, Index k_O) {
  std::ifstream in = open_in(path);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw ValidationError("theta file '" + path + "': " + e.what());
  }
  try {
    if (j.at("k_T").get<Index>() != k_T || j.at("k_O").get<Index>() != k_O) {
      throw ValidationError("theta file '" + path + "': dimensions do not match the dataset");
    }
    const auto v = j.at("theta").get<std::vector<double>>();
    const Vector theta = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
    if (theta.size() != k_T + k_O + 4) throw ValidationError("theta file '" + path + "': wrong parameter count");
    ModelParams p = ModelParams::unpack(theta, k_T, k_O);
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("theta file '" + path + "': " + e.what());
  }
}

}  // namespace peertreat

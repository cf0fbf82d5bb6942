#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <set>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "peertreat/errors.hpp"
#include "peertreat/effects.hpp"
#include "peertreat/io.hpp"
#include "support/fixtures.hpp"

using namespace peertreat;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("peertreat_io_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string load_error(const std::string& nodes, const std::string& edges, const QuantileThresholds& q = {}) {
  TempDir t;
  write(t.file("n.csv"), nodes);
  write(t.file("e.csv"), edges);
  try {
    load_dataset(t.file("n.csv"), t.file("e.csv"), q);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

const char* kNodes =
    "id,y,d,x_age,z_age,z_income\n"
    "10,1,0,0.5,0.5,-1.25\n"
    "20,0,1,1e-3,0.001,3.5\n"
    "30,1,1,-2,-2,0.1\n";
const char* kEdges = "source_id,target_id\n10,20\n10,30\n30,20\n";

}  // namespace

TEST_SUITE("io") {

TEST_CASE("three-node fixture loads with intercepts and dense ids") {
  TempDir t;
  write(t.file("n.csv"), kNodes);
  write(t.file("e.csv"), kEdges);
  const LoadedDataset ds = load_dataset(t.file("n.csv"), t.file("e.csv"));
  CHECK(ds.ids == std::vector<std::int64_t>{10, 20, 30});
  CHECK(ds.data.X.cols() == 2);
  CHECK(ds.data.Z.cols() == 3);
  CHECK(ds.data.X(0, 0) == 1.0);
  CHECK(ds.data.Z(1, 2) == 3.5);
  CHECK(ds.data.net.degree(0) == 2);
  CHECK(ds.data.net.friends(2)[0] == 1);
  CHECK(ds.z_names == std::vector<std::string>{"z_age", "z_income"});
}

TEST_CASE("save then load is bit-identical") {
  TempDir t;
  write(t.file("n.csv"), kNodes);
  write(t.file("e.csv"), kEdges);
  const LoadedDataset a = load_dataset(t.file("n.csv"), t.file("e.csv"));
  save_dataset(a, t.file("n2.csv"), t.file("e2.csv"));
  const LoadedDataset b = load_dataset(t.file("n2.csv"), t.file("e2.csv"));
  CHECK(a.data.X == b.data.X);
  CHECK(a.data.Z == b.data.Z);
  CHECK(a.data.D == b.data.D);
  CHECK(a.data.Y == b.data.Y);
  CHECK(a.data.net == b.data.net);
  CHECK(a.ids == b.ids);
  save_dataset(b, t.file("n3.csv"), t.file("e3.csv"));
  CHECK(slurp(t.file("n2.csv")) == slurp(t.file("n3.csv")));
  CHECK(slurp(t.file("e2.csv")) == slurp(t.file("e3.csv")));
}

TEST_CASE("doubles are written in round-trip form") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, 6.02214076e23}) {
    CHECK(std::stod(format_double(x)) == x);
  }
}

TEST_CASE("each malformed input has its own message") {
  CHECK(load_error("id,y,x_1,z_1\n1,1,0,0\n", "").find("missing column 'd'") != std::string::npos);
  CHECK(load_error("id,y,d\n1,2,0\n", "").find("not binary") != std::string::npos);
  CHECK(load_error("id,y,d\n1,1,0\n1,0,0\n", "").find("duplicate node id 1") != std::string::npos);
  CHECK(load_error("id,y,d\n1,1,0\n2,0,0\n", "source_id,target_id\n1,7\n").find("target id 7 is not a node") !=
        std::string::npos);
  CHECK(load_error("id,y,d\n1,1,0\n2,0,0\n", "source_id,target_id\n1,2\n2,2\n").find("row 3: self-loop") !=
        std::string::npos);
  CHECK(load_error("id,y,d\n1,1,0\n2,0,0\n", "1,2\n1,2\n").find("duplicate edge") != std::string::npos);
  CHECK(load_error("id,y,d\n1,1,abc\n", "").find("cannot parse 'abc'") != std::string::npos);
  CHECK(load_error("id,y,d,w\n1,1,0,3\n", "").find("unexpected column 'w'") != std::string::npos);
}

TEST_CASE("missing files raise IO errors") {
  CHECK_THROWS_AS(load_dataset("/nonexistent/n.csv", "/nonexistent/e.csv"), IoError);
}

TEST_CASE("quantile thresholds binarize continuous columns") {
  TempDir t;
  write(t.file("n.csv"), "id,y,d\n1,0.5,1\n2,3.0,0\n3,1.5,1\n4,2.0,0\n");
  write(t.file("e.csv"), "");
  QuantileThresholds q;
  parse_quantile_threshold("y=0.5", q);
  CHECK_FALSE(q.d.has_value());
  const LoadedDataset ds = load_dataset(t.file("n.csv"), t.file("e.csv"), q);
  // median of {0.5, 1.5, 2.0, 3.0} is 1.75
  CHECK(ds.data.Y == BinaryVector{0, 1, 0, 1});
  CHECK(ds.data.D == BinaryVector{1, 0, 1, 0});
  CHECK_THROWS_AS(parse_quantile_threshold("z=0.5", q), ValidationError);
  CHECK_THROWS_AS(parse_quantile_threshold("1.5", q), ValidationError);
}

TEST_CASE("config parsing") {
  const ConfigFile c = ConfigFile::parse("# comment\nouter_tol = 1e-9\nn_list = 100, 200\nfixed_rho=0 # inline\n");
  CHECK(c.get_double("outer_tol", 0) == 1e-9);
  CHECK(c.get_doubles("n_list") == std::vector<double>{100, 200});
  const EstimatorConfig e = estimator_config_from(c);
  CHECK(e.fixed_rho.value() == 0.0);
  CHECK(mc_design_from(c).n_list == std::vector<std::size_t>{100, 200});
  CHECK_THROWS_AS(ConfigFile::parse("bogus = 1\n"), ValidationError);
  CHECK_THROWS_AS(ConfigFile::parse("outer_tol\n"), ValidationError);
  CHECK_THROWS_AS(estimator_config_from(ConfigFile::parse("inner_mode = fast\n")), ValidationError);
}

TEST_CASE("counterfactual target selection from config") {
  TempDir t;
  write(t.file("n.csv"), kNodes);
  write(t.file("e.csv"), kEdges);
  const LoadedDataset ds = load_dataset(t.file("n.csv"), t.file("e.csv"));
  const auto explicit_spec = counterfactual_spec_from(ConfigFile::parse("selector = explicit\ntargets = 30, 10\n"), ds);
  CHECK(explicit_spec.targets == std::vector<std::size_t>{2, 0});
  CHECK(explicit_spec.target_count == 2);
  const auto low = counterfactual_spec_from(
      ConfigFile::parse("selector = lowest-covariate\ncovariate = z_income\ntarget_count = 1\n"), ds);
  CHECK(low.covariate_column == 2);
  CHECK_THROWS_AS(counterfactual_spec_from(ConfigFile::parse("selector = most-popular\n"), ds), ValidationError);
  CHECK_THROWS_AS(counterfactual_spec_from(ConfigFile::parse("selector = explicit\ntargets = 99\n"), ds),
                  ValidationError);
  CHECK_THROWS_AS(
      counterfactual_spec_from(ConfigFile::parse("selector = lowest-covariate\ncovariate = x_1\ntarget_count = 1\n"), ds),
      ValidationError);
}

TEST_CASE("config hash depends on content only") {
  const auto a = ConfigFile::parse("seed = 1\nn = 5\n");
  const auto b = ConfigFile::parse("n=5\n\nseed=1\n");
  const auto c = ConfigFile::parse("n=6\nseed=1\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("estimation output is complete and deterministic") {
  const ModelParams p = fixture::params(1.0, 1.0, 1.0, 0.5);
  LoadedDataset ds;
  ds.data = fixture::simulated(300, p, 60);
  for (std::size_t i = 0; i < 300; ++i) ds.ids.push_back(static_cast<std::int64_t>(i));
  ds.x_names = {"x_1"};
  ds.z_names = {"z_1", "z_2"};
  const EstimationResult r = npjl_estimate(ds.data);
  TempDir t;
  const auto files = write_estimation(t.file("a"), r, ds);
  write_estimation(t.file("b"), r, ds);
  for (const auto& f : {"theta.json", "std_errors.csv", "ccp_profile.csv", "trace.csv"}) {
    CHECK(fs::exists(t.path / "a" / f));
    CHECK(slurp(t.file(std::string("a/") + f)) == slurp(t.file(std::string("b/") + f)));
  }
  const ModelParams back = read_theta(t.file("a/theta.json"), 3, 2);
  CHECK(back.pack() == r.theta_hat.pack());
  CHECK_THROWS_AS(read_theta(t.file("a/theta.json"), 4, 2), ValidationError);

  const EffectsReport fx{partial_treatment_effects(r.theta_hat, ds.data, r.profile_hat), 0.0, {}, 0};
  EffectsReport rep = fx;
  rep.apte = rep.pte.mean();
  write_effects(t.file("fx"), rep, ds);
  const auto j = nlohmann::json::parse(slurp(t.file("fx/effects.json")));
  std::ifstream in(t.file("fx/pte.csv"));
  std::string line;
  std::getline(in, line);
  double sum = 0;
  int rows = 0;
  while (std::getline(in, line)) {
    sum += std::stod(line.substr(line.find(',') + 1));
    ++rows;
  }
  CHECK(rows == 300);
  CHECK(j["apte"].get<double>() == doctest::Approx(sum / rows).epsilon(1e-14));
}

TEST_CASE("large node file loads quickly") {
  TempDir t;
  RandomStream rng(8);
  std::string nodes = "id,y,d,x_1,x_2,z_1,z_2,z_3\n";
  std::string edges = "source_id,target_id\n";
  const int n = 9036;
  for (int i = 0; i < n; ++i) {
    nodes += std::to_string(1000 + i) + ',' + std::to_string(rng.uniform() < 0.5) + ',' +
             std::to_string(rng.uniform() < 0.4);
    for (int k = 0; k < 5; ++k) nodes += ',' + format_double(rng.normal());
    nodes += '\n';
    const auto deg = rng.uniform_index(11);
    std::set<int> fr;
    while (fr.size() < deg) {
      const int j = static_cast<int>(rng.uniform_index(n));
      if (j != i) fr.insert(j);
    }
    for (int j : fr) edges += std::to_string(1000 + i) + ',' + std::to_string(1000 + j) + '\n';
  }
  write(t.file("n.csv"), nodes);
  write(t.file("e.csv"), edges);
  const auto start = std::chrono::steady_clock::now();
  const LoadedDataset ds = load_dataset(t.file("n.csv"), t.file("e.csv"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(ds.data.size() == static_cast<std::size_t>(n));
  CHECK(secs < 1.0);
}

}

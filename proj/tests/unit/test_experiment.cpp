#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gemb/error.hpp"
#include "gemb/experiment.hpp"

using namespace gemb;

namespace {

const std::filesystem::path kData = GEMB_TEST_DATA;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops the trailing wall_time_s column.
std::string without_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gemb_experiment_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

const char* kMinimal = R"(graphon:
  kind: sbm
  pi: [0.5, 0.5]
  P: [0.7, 0.3, 0.3, 0.7]
n_grid: [200, 400]
replications: 2
schemes:
  - {name: uniform_vertex, k: 20}
signatures: [[2, 0]]
oracles:
  - {id: a, scheme: {name: uniform_vertex, k: 20}}
  - {id: b, scheme: {name: random_walk_unigram, k: 10}}
)";

}  // namespace

TEST_CASE("SBM2 config parses") {
  const auto cfg = load_config(kData / "sbm2.yaml");
  CHECK(cfg.spec.block_count() == 5);
  const std::vector<double> pi{0.1, 0.2, 0.2, 0.3, 0.2};
  CHECK(cfg.spec.as_sbm().pi == pi);
  CHECK((cfg.spec.as_sbm().P - sbm2().as_sbm().P).cwiseAbs().maxCoeff() == 0.0);
  CHECK(cfg.n_grid == std::vector<std::size_t>{200, 400, 800, 1600});
  CHECK(cfg.replications == 20);
  CHECK(cfg.schemes.size() == 2);
  CHECK(cfg.signatures.size() == 2);
  CHECK(cfg.oracles.size() == 3);
  CHECK(cfg.oracles[2].product == InnerProduct::regular);
  CHECK(cfg.train.epochs == 40);
  CHECK(cfg.master_seed == 20240601);
}

TEST_CASE("serialize and parse round trip") {
  for (const auto& cfg : {load_config(kData / "sbm2.yaml"), load_config(kData / "two_cell.yaml"), parse_config(kMinimal)}) {
    const auto text = serialize_config(cfg);
    const auto back = parse_config(text);
    CHECK(equivalent(cfg, back));
    CHECK(serialize_config(back) == text);
  }
  auto cosine = parse_config(kMinimal);
  cosine.spec = GraphonSpec::cosine(0.45, 0.3);
  cosine.rho_mode = RhoMode::log_squared_over_n;
  cosine.train.schedule = StepSchedule::linear;
  CHECK(equivalent(cosine, parse_config(serialize_config(cosine))));
  auto changed = cosine;
  changed.train.step_size *= 2;
  CHECK_FALSE(equivalent(cosine, changed));
}

TEST_CASE("pi that does not sum to one is rejected") {
  const std::string text = R"(graphon:
  kind: sbm
  pi: [0.5, 0.6]
  P: [0.7, 0.3, 0.3, 0.7]
n_grid: [10]
schemes: [{name: uniform_vertex, k: 5}]
signatures: [[1, 0]]
)";
  CHECK_THROWS_WITH_AS(parse_config(text), doctest::Contains("pi must sum to 1"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config(text), doctest::Contains("line 3"), ValidationError);
}

TEST_CASE("unknown keys are rejected with key and line") {
  std::string text = kMinimal;
  text += "learning_rate: 3\n";
  CHECK_THROWS_WITH_AS(parse_config(text), doctest::Contains("learning_rate"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config(text), doctest::Contains("line 13"), ValidationError);
  std::string nested = kMinimal;
  nested.replace(nested.find("k: 20}"), 6, "k: 20, beta: 1}");
  CHECK_THROWS_WITH_AS(parse_config(nested), doctest::Contains("schemes[0].beta"), ValidationError);
}

TEST_CASE("schema violations") {
  auto expect_error = [](std::string text, const std::string& from, const std::string& to, const char* needle) {
    text.replace(text.find(from), from.size(), to);
    CHECK_THROWS_WITH_AS(parse_config(text), doctest::Contains(needle), ValidationError);
  };
  expect_error(kMinimal, "[200, 400]", "[400, 200]", "ascending");
  expect_error(kMinimal, "replications: 2", "replications: 0", "replications");
  expect_error(kMinimal, "uniform_vertex, k: 20}\nsig", "bogus, k: 20}\nsig", "unknown scheme");
  expect_error(kMinimal, "[[2, 0]]", "[[0, 0]]", "signatures[0]");
  expect_error(kMinimal, "kind: sbm", "kind: blob", "graphon.kind");
  expect_error(kMinimal, "P: [0.7, 0.3, 0.3, 0.7]", "P: [0.7, 0.3, 0.2, 0.7]", "symmetric");
  expect_error(kMinimal, "P: [0.7, 0.3, 0.3, 0.7]", "P: [0.7, 0.3, 0.3]", "graphon.P");
  expect_error(kMinimal, "replications: 2", "replications: two", "replications");
  CHECK_THROWS_WITH_AS(parse_config("graphon: [1, 2"), doctest::Contains("malformed"), ValidationError);
}

TEST_CASE("rho modes") {
  std::string text = kMinimal;
  text.replace(text.find("  P:"), 0, "  rho: log_squared_over_n\n");
  const auto cfg = parse_config(text);
  CHECK(cfg.rho_mode == RhoMode::log_squared_over_n);
  const double l = std::log(400.0);
  CHECK(cfg.spec_at(400).rho == doctest::Approx(l * l / 400));
  CHECK(cfg.spec_at(1).rho == 1.0);
  CHECK(parse_config(kMinimal).spec_at(400).rho == 1.0);
}

TEST_CASE("seed derivation is a pure function of the cell") {
  CHECK(graph_seed(1, 200, 0) == graph_seed(1, 200, 0));
  CHECK(graph_seed(1, 200, 0) != graph_seed(1, 200, 1));
  CHECK(graph_seed(1, 200, 0) != graph_seed(1, 400, 0));
  CHECK(graph_seed(1, 200, 0) != graph_seed(2, 200, 0));
  CHECK(train_seed(1, 200, 0, 0, 0) != train_seed(1, 200, 0, 0, 1));
  CHECK(train_seed(1, 200, 0, 0, 0) != train_seed(1, 200, 0, 1, 0));
}

TEST_CASE("cell filters") {
  const CellId cell{400, 1, 0, 2};
  CHECK(cell.to_string() == "n=400,rep=1,scheme=0,sig=2");
  CHECK(cell_matches(cell, ""));
  CHECK(cell_matches(cell, "n=400"));
  CHECK(cell_matches(cell, "n=400,sig=2"));
  CHECK_FALSE(cell_matches(cell, "n=400,rep=0"));
  CHECK_THROWS_AS(cell_matches(cell, "size=400"), ValidationError);
  CHECK_THROWS_AS(cell_matches(cell, "n"), ValidationError);
}

TEST_CASE("grid cardinality") {
  auto cfg = parse_config(kMinimal);
  cfg.train.epochs = 1;
  const auto result = run_experiment(cfg);
  CHECK(result.records.size() == 8);
  CHECK(result.failures.empty());
  CHECK(result.summary.size() == 4);
  for (const auto& row : result.summary) CHECK(row.count == 2);
  // grid order: n outer, then replicate, then oracle
  CHECK(result.records[0].n == 200);
  CHECK(result.records[0].oracle == "a");
  CHECK(result.records[1].oracle == "b");
  CHECK(result.records[7].n == 400);
  for (const auto& r : result.records) CHECK(r.l1_error >= 0);

  RunOptions only;
  only.cell_filter = "n=400,rep=1";
  CHECK(run_experiment(cfg, only).records.size() == 2);
}

TEST_CASE("parallel runs write the same records as serial runs") {
  auto cfg = parse_config(kMinimal);
  cfg.train.epochs = 1;
  RunOptions serial, parallel;
  parallel.jobs = 3;
  const auto a = run_experiment(cfg, serial), b = run_experiment(cfg, parallel);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    auto x = a.records[i], y = b.records[i];
    x.wall_time_s = y.wall_time_s = 0;
    CHECK(x == y);
  }
}

TEST_CASE("failing cells are recorded and the run continues") {
  auto cfg = parse_config(kMinimal);
  cfg.train.epochs = 1;
  cfg.schemes = {UniformVertex{300}};  // larger than n = 200, fine at n = 400
  const auto result = run_experiment(cfg);
  CHECK(result.failures.size() == 2);
  CHECK(result.failures[0].cell.n == 200);
  CHECK(result.failures[0].error.find("exceeds") != std::string::npos);
  CHECK(result.records.size() == 4);
}

TEST_CASE("metrics files") {
  const auto dir = scratch("metrics");
  write_metrics({}, dir / "empty.csv");
  CHECK(slurp(dir / "empty.csv") == "n,seed,scheme,d_plus,d_minus,oracle,l1_error,epochs,wall_time_s\n");

  ConvergenceRecord r{200, 123456789012345ull, "random_walk_unigram(k=50,l=1,alpha=0.75)", 2, 2, "x", 0.1, 40, 1.5};
  write_metrics({r}, dir / "one.csv");
  const auto text = slurp(dir / "one.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.find("0.10000000000000001") != std::string::npos);

  std::vector<ConvergenceRecord> many;
  RngStream rng(1, 0);
  for (int t = 0; t < 20; ++t) {
    r.l1_error = rng.uniform01() * std::pow(10.0, t - 10);
    r.wall_time_s = rng.uniform01();
    r.oracle = t % 2 ? "plain" : "with \"quotes\", and commas";
    many.push_back(r);
  }
  write_metrics(many, dir / "many.csv");
  CHECK(read_metrics(dir / "many.csv") == many);
  CHECK_THROWS_AS(write_metrics({}, dir / "missing" / "x.csv"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("two-cell run matches the golden metrics") {
  const auto dir = scratch("golden");
  const auto cfg = load_config(kData / "two_cell.yaml");
  RunOptions opts;
  opts.out_dir = dir;
  const auto result = run_experiment(cfg, opts);
  CHECK(result.records.size() == 4);
  const auto metrics = without_wall_time(slurp(dir / "metrics.csv"));
  CHECK(metrics == slurp(kData / "two_cell_metrics.golden.csv"));
  CHECK(slurp(dir / "failures.csv") == "cell,error\n");
  const auto summary = slurp(dir / "summary.csv");
  CHECK(summary.rfind("n,scheme,d_plus,d_minus,oracle,mean_l1_error,sd_l1_error,count\n", 0) == 0);

  // same seed, same bytes
  const auto again = scratch("golden_again");
  opts.out_dir = again;
  run_experiment(cfg, opts);
  CHECK(without_wall_time(slurp(again / "metrics.csv")) == metrics);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(again);
}

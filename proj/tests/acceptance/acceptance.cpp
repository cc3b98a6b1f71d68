// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gemb/diagnostics.hpp"
#include "gemb/experiment.hpp"
#include "gemb/limits.hpp"

using namespace gemb;

namespace {

// Tolerances and sizes, pinned.
constexpr std::size_t kC1Vertices = 50, kC1K = 10, kC1Draws = 100000, kC1Pairs = 50;
constexpr double kC1Sigmas = 3.0;
constexpr std::size_t kC2Vertices = 1000, kC2Pairs = 200, kC2Draws = 200000;
constexpr double kC2RelTol = 0.10, kC2Coverage = 0.95;
constexpr double kC3MaxAbs = 1e-4;
constexpr std::size_t kTrendSeeds = 20, kTrendEpochs = 40, kSmallN = 200, kLargeN = 1600;
constexpr double kHalving = 0.5;
constexpr double kNoDecrease = 0.9;  // mismatched oracle: the large-n mean keeps >= 90% of the small-n mean
constexpr double kTrendStep = 0.05;  // linear decay from this step, shared by criteria 4 and 5
constexpr std::size_t kC6Vertices = 500, kC6Draws = 10000;
constexpr double kC6Low = 1.0 / 30, kC6High = 3.0 / 10;
constexpr std::size_t kC7Configs = 100;
constexpr double kC7RelErr = 1e-6, kC7Step = 1e-5;
constexpr std::size_t kC8Seeds = 10, kC8SignTestMin = 9;  // P(Bin(10, 1/2) >= 9) = 0.0107 < 0.05

int failures = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(int id, const std::string& name, bool pass, const std::string& detail, double seconds) {
  std::printf("[%s] criterion %d: %s | %s | %.1fs\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(),
              seconds);
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

void info(const std::string& line) {
  std::printf("       info: %s\n", line.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

void criterion1() {
  const auto t0 = Clock::now();
  const auto g = sample_graph(GraphonSpec::sbm_pq(0.7, 0.3, 2), kC1Vertices, 101);
  RngStream pick(102, 0);
  std::vector<Edge> pairs;
  while (pairs.size() < kC1Pairs) {
    const auto i = static_cast<std::uint32_t>(pick.uniform_below(kC1Vertices));
    const auto j = static_cast<std::uint32_t>(pick.uniform_below(kC1Vertices));
    if (i < j && std::find(pairs.begin(), pairs.end(), Edge{i, j}) == pairs.end()) pairs.emplace_back(i, j);
  }
  // every pair, to report the overall coverage alongside the tested set
  std::vector<Edge> all;
  for (std::uint32_t i = 0; i < kC1Vertices; ++i) {
    for (std::uint32_t j = i + 1; j < kC1Vertices; ++j) all.emplace_back(i, j);
  }
  RngStream rng(103, 0);
  const auto est = estimate_pair_probability(g, UniformVertex{kC1K}, all, kC1Draws, rng);
  const double p = double(kC1K * (kC1K - 1)) / double(kC1Vertices * (kC1Vertices - 1));
  const double se = std::sqrt(p * (1 - p) / kC1Draws);
  const double n2 = double(kC1Vertices * kC1Vertices);
  auto within = [&](const PairEstimate& e) { return std::abs(e.mc_estimate / n2 - p) <= kC1Sigmas * se; };
  std::size_t tested_ok = 0, all_ok = 0;
  double worst = 0;
  for (const auto& e : est) {
    all_ok += within(e);
    if (std::find(pairs.begin(), pairs.end(), Edge{e.i, e.j}) != pairs.end()) {
      tested_ok += within(e);
      worst = std::max(worst, std::abs(e.mc_estimate / n2 - p) / se);
    }
  }
  const double secs = seconds_since(t0);
  report(1, "uniform-vertex inclusion probability", tested_ok == pairs.size() && secs < 30,
         fmt("%zu/%zu tested pairs within %.0f SE of %.6f (worst %.2f SE)", tested_ok, pairs.size(), kC1Sigmas, p, worst),
         secs);
  info(fmt("all %zu pairs: %zu within %.0f SE (%.2f%%; 99.73%% expected)", all.size(), all_ok, kC1Sigmas,
           100.0 * all_ok / all.size()));
}

// ---------------------------------------------------------------------------

void criterion2() {
  const auto t0 = Clock::now();
  const auto spec = sbm1();
  const RandomWalkUnigram scheme{50, 1, 0.75, true};
  const auto g = sample_graph(spec, kC2Vertices, 201);
  RngStream pick(202, 0);
  std::vector<Edge> pairs;
  while (pairs.size() < kC2Pairs) pairs.push_back(g.edges()[pick.uniform_below(g.edge_count())]);
  while (pairs.size() < 2 * kC2Pairs) {
    const auto i = static_cast<std::uint32_t>(pick.uniform_below(kC2Vertices));
    const auto j = static_cast<std::uint32_t>(pick.uniform_below(kC2Vertices));
    if (i < j && !g.has_edge(i, j)) pairs.emplace_back(i, j);
  }
  const SamplingWeights weights(spec, scheme);
  auto coverage = [&](const std::vector<PairEstimate>& est, std::size_t& edges_ok, std::size_t& non_ok) {
    edges_ok = non_ok = 0;
    for (const auto& e : est) {
      const bool ok = std::abs(e.mc_estimate - e.formula_value) <= kC2RelTol * e.formula_value;
      (e.a_ij ? edges_ok : non_ok) += ok;
    }
  };
  RngStream rng(203, 0);
  const auto cond = estimate_pair_probability(g, scheme, pairs, kC2Draws, rng, PairEstimator::conditional, &weights);
  std::size_t e_ok, n_ok;
  coverage(cond, e_ok, n_ok);
  const double secs = seconds_since(t0);
  const bool pass = e_ok >= kC2Coverage * kC2Pairs && n_ok >= kC2Coverage * kC2Pairs && secs < 600;
  report(2, "random-walk pair estimates vs f_n (conditional estimator)", pass,
         fmt("within %.0f%%: %zu/%zu edges, %zu/%zu non-edges (need %.0f%% each)", 100 * kC2RelTol, e_ok, kC2Pairs,
             n_ok, kC2Pairs, 100 * kC2Coverage),
         secs);

  RngStream rng2(204, 0);
  const auto freq = estimate_pair_probability(g, scheme, pairs, kC2Draws, rng2, PairEstimator::frequency, &weights);
  coverage(freq, e_ok, n_ok);
  double rel_se = 0;
  for (std::size_t t = 0; t < kC2Pairs; ++t) rel_se += freq[t].std_err / freq[t].formula_value / kC2Pairs;
  info(fmt("plain inclusion frequency: %zu/%zu edges, %zu/%zu non-edges within %.0f%%; mean relative SE on edges %.1f%%",
           e_ok, kC2Pairs, n_ok, kC2Pairs, 100 * kC2RelTol, 100 * rel_se));
}

// ---------------------------------------------------------------------------

void criterion3() {
  const auto t0 = Clock::now();
  double worst = 0;
  int cases[4] = {0, 0, 0, 0};
  for (int a = 1; a <= 9; ++a) {
    for (int b = 1; b <= 9; ++b) {
      const double p = a / 10.0, q = b / 10.0;
      const auto solved = sbm_block_limit_psd(GraphonSpec::sbm_pq(p, q, 2), UniformVertex{100});
      worst = std::max(worst, (solved.values - two_block_closed_form(p, q).values).cwiseAbs().maxCoeff());
      ++cases[(p >= q ? 0 : 2) + (p + q >= 1.0 ? 0 : 1)];
    }
  }
  const double secs = seconds_since(t0);
  report(3, "PSD solver vs two-block closed form", worst <= kC3MaxAbs && secs < 60,
         fmt("max |diff| %.2e over 81 points (regimes a/b/c/d: %d/%d/%d/%d), tol %.0e", worst, cases[0], cases[1],
             cases[2], cases[3], kC3MaxAbs),
         secs);
}

// ---------------------------------------------------------------------------

struct TrendResult {
  double small_matched = 0, large_matched = 0, small_mismatched = 0, large_mismatched = 0;
};

TrendResult trend(double p, double q, SimilaritySignature sig, const BlockKernel& matched, const BlockKernel& mismatched,
                  StepSchedule schedule, double step) {
  const auto spec = GraphonSpec::sbm_pq(p, q, 2);
  TrendResult r;
  for (std::size_t n : {kSmallN, kLargeN}) {
    double em = 0, ex = 0;
    for (std::size_t s = 0; s < kTrendSeeds; ++s) {
      const auto g = sample_graph(spec, n, graph_seed(4000, n, s));
      TrainConfig tc;
      tc.scheme = UniformVertex{100};
      tc.signature = sig;
      tc.epochs = kTrendEpochs;
      tc.schedule = schedule;
      tc.step_size = step;
      tc.seed = train_seed(4000, n, s, 0, 0);
      const auto emb = train(g, tc);
      em += l1_kernel_error(emb, g, matched) / kTrendSeeds;
      ex += l1_kernel_error(emb, g, mismatched) / kTrendSeeds;
    }
    (n == kSmallN ? r.small_matched : r.large_matched) = em;
    (n == kSmallN ? r.small_mismatched : r.large_mismatched) = ex;
  }
  return r;
}

void criterion4() {
  const auto t0 = Clock::now();
  const auto spec = GraphonSpec::sbm_pq(0.7, 0.3, 2);
  const auto matched = sbm_block_limit_krein(spec, UniformVertex{100});
  const auto mismatched = sbm_block_limit_krein(spec, RandomWalkUnigram{50, 1, 0.75, true});
  const auto r = trend(0.7, 0.3, {2, 2}, matched, mismatched, StepSchedule::linear, kTrendStep);
  const bool halves = r.large_matched <= kHalving * r.small_matched;
  const bool other_does_not = r.large_mismatched > kHalving * r.small_mismatched;
  const double secs = seconds_since(t0);
  report(4, "Krein training converges to its own limit only", halves && other_does_not && secs < 3600,
         fmt("uniform-vertex oracle %.4f -> %.4f (ratio %.3f, need <= %.2f); node2vec oracle %.4f -> %.4f (ratio %.3f, "
             "need > %.2f)",
             r.small_matched, r.large_matched, r.large_matched / r.small_matched, kHalving, r.small_mismatched,
             r.large_mismatched, r.large_mismatched / r.small_mismatched, kHalving),
         secs);
  const auto c = trend(0.7, 0.3, {2, 2}, matched, mismatched, StepSchedule::constant, 0.025);
  info(fmt("constant step 0.025: matched %.4f -> %.4f (ratio %.3f); mismatched %.4f -> %.4f", c.small_matched,
           c.large_matched, c.large_matched / c.small_matched, c.small_mismatched, c.large_mismatched));
}

void criterion5() {
  const auto t0 = Clock::now();
  const auto spec = GraphonSpec::sbm_pq(0.3, 0.1, 2);
  const auto matched = sbm_block_limit_psd(spec, UniformVertex{100});
  const auto krein = sbm_block_limit_krein(spec, UniformVertex{100});
  const auto r = trend(0.3, 0.1, {4, 0}, matched, krein, StepSchedule::linear, kTrendStep);
  const bool halves = r.large_matched <= kHalving * r.small_matched;
  const bool other_flat = r.large_mismatched >= kNoDecrease * r.small_mismatched;
  const double secs = seconds_since(t0);
  report(5, "regular product converges to the PSD limit, not the Krein limit", halves && other_flat && secs < 3600,
         fmt("PSD oracle (K11=-K12=%.4f) %.4f -> %.4f (ratio %.3f, need <= %.2f); Krein oracle %.4f -> %.4f (ratio %.3f, "
             "need >= %.2f)",
             matched.values(0, 0), r.small_matched, r.large_matched, r.large_matched / r.small_matched, kHalving,
             r.small_mismatched, r.large_mismatched, r.large_mismatched / r.small_mismatched, kNoDecrease),
         secs);
  const auto c = trend(0.3, 0.1, {4, 0}, matched, krein, StepSchedule::constant, 0.025);
  info(fmt("constant step 0.025: PSD oracle %.4f -> %.4f (ratio %.3f); Krein oracle %.4f -> %.4f", c.small_matched,
           c.large_matched, c.large_matched / c.small_matched, c.small_mismatched, c.large_mismatched));
}

// ---------------------------------------------------------------------------

void criterion6() {
  const auto t0 = Clock::now();
  const auto g = sample_graph(GraphonSpec::sbm_pq(0.7, 0.3, 2), kC6Vertices, 601);
  TrainConfig tc;
  tc.signature = {2, 2};
  tc.init_scale = 1.0;
  tc.seed = 602;
  const auto emb = initial_embedding(kC6Vertices, tc);
  double var[2] = {0, 0};
  const std::size_t lengths[2] = {10, 100};
  for (int t = 0; t < 2; ++t) {
    RngStream rng(603, lengths[t]);
    const auto m = gradient_variance_probe(g, RandomWalkUnigram{lengths[t], 1, 0.75, true}, emb, 7, kC6Draws, rng);
    var[t] = m.variance.mean();
  }
  const double ratio = var[1] / var[0];
  const double secs = seconds_since(t0);
  report(6, "gradient variance scales as 1/k", ratio >= kC6Low && ratio <= kC6High && secs < 600,
         fmt("Var(k=100)/Var(k=10) = %.3e / %.3e = %.4f, need [%.4f, %.4f]", var[1], var[0], ratio, kC6Low, kC6High),
         secs);
}

// ---------------------------------------------------------------------------

void criterion7() {
  const auto t0 = Clock::now();
  RngStream rng(701, 0);
  double worst = 0;
  for (std::size_t c = 0; c < kC7Configs; ++c) {
    const std::size_t n = 3 + rng.uniform_below(6);
    const std::size_t dp = rng.uniform_below(4), dm = (dp == 0 ? 1 : 0) + rng.uniform_below(3);
    TrainConfig tc;
    tc.signature = {dp, dm};
    tc.init_scale = 0.2 + 1.5 * rng.uniform01();
    tc.seed = 7000 + c;
    auto emb = initial_embedding(n, tc);
    SampleBatch batch;
    const std::size_t m = 1 + rng.uniform_below(12);
    while (batch.pairs.size() < m) {
      const auto i = static_cast<std::uint32_t>(rng.uniform_below(n));
      const auto j = static_cast<std::uint32_t>(rng.uniform_below(n));
      if (i != j) batch.pairs.push_back({i, j, rng.uniform01() < 0.5 ? PairLabel::positive : PairLabel::negative});
    }
    const auto grad = batch_gradient(emb, batch);
    Eigen::MatrixXd fd(grad.rows(), grad.cols());
    for (Eigen::Index i = 0; i < grad.rows(); ++i) {
      for (Eigen::Index r = 0; r < grad.cols(); ++r) {
        const double keep = emb.vectors(i, r);
        emb.vectors(i, r) = keep + kC7Step;
        const double up = batch_loss(emb, batch);
        emb.vectors(i, r) = keep - kC7Step;
        const double down = batch_loss(emb, batch);
        emb.vectors(i, r) = keep;
        fd(i, r) = (up - down) / (2 * kC7Step);
      }
    }
    const double denom = std::max(grad.norm(), 1e-12);
    worst = std::max(worst, (fd - Eigen::MatrixXd(grad)).norm() / denom);
  }
  const double secs = seconds_since(t0);
  report(7, "batch gradient vs central differences", worst < kC7RelErr,
         fmt("worst relative error %.2e over %zu configurations, need < %.0e", worst, kC7Configs, kC7RelErr), secs);
}

// ---------------------------------------------------------------------------

void criterion8() {
  const auto t0 = Clock::now();
  const std::size_t sizes[3] = {200, 800, 3200};
  double dev[3][kC8Seeds];
  double mean[3] = {0, 0, 0};
  for (std::size_t s = 0; s < kC8Seeds; ++s) {
    for (int t = 0; t < 3; ++t) {
      dev[t][s] = degree_concentration_report(sample_graph(sbm1(), sizes[t], 8000 + s), sbm1()).max_rel_dev;
      mean[t] += dev[t][s] / kC8Seeds;
    }
  }
  std::size_t wins[2] = {0, 0};
  for (std::size_t s = 0; s < kC8Seeds; ++s) {
    wins[0] += dev[1][s] < dev[0][s];
    wins[1] += dev[2][s] < dev[1][s];
  }
  const bool pass = mean[1] < mean[0] && mean[2] < mean[1] && wins[0] >= kC8SignTestMin && wins[1] >= kC8SignTestMin;
  const double secs = seconds_since(t0);
  report(8, "max relative degree deviation decreases with n", pass && secs < 300,
         fmt("means %.4f > %.4f > %.4f; per-seed decreases %zu/%zu and %zu/%zu (sign test needs >= %zu)", mean[0],
             mean[1], mean[2], wins[0], kC8Seeds, wins[1], kC8Seeds, kC8SignTestMin),
         secs);
}

// ---------------------------------------------------------------------------

std::string metrics_without_wall_time(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

void criterion9() {
  const auto t0 = Clock::now();
  const char* text = R"(graphon:
  kind: sbm
  pi: [0.5, 0.5]
  P: [0.7, 0.3, 0.3, 0.7]
n_grid: [100, 150]
replications: 1
schemes:
  - {name: random_walk_unigram, k: 20, l: 1, alpha: 0.75}
signatures: [[2, 1]]
train: {epochs: 10}
oracles:
  - {id: uv, scheme: {name: uniform_vertex, k: 100}}
  - {id: n2v, scheme: {name: random_walk_unigram, k: 20, l: 1, alpha: 0.75}}
master_seed: 909
)";
  const auto cfg = parse_config(text);
  const auto base = std::filesystem::temp_directory_path() / "gemb_acceptance_c9";
  std::filesystem::remove_all(base);
  std::string runs[3];
  for (int r = 0; r < 3; ++r) {
    RunOptions opts;
    opts.jobs = r == 2 ? 2 : 1;
    opts.out_dir = base / std::to_string(r);
    run_experiment(cfg, opts);
    runs[r] = metrics_without_wall_time(opts.out_dir / "metrics.csv");
  }
  std::filesystem::remove_all(base);
  const bool same = runs[0] == runs[1] && runs[0] == runs[2];
  const auto lines = std::count(runs[0].begin(), runs[0].end(), '\n');
  const double secs = seconds_since(t0);
  report(9, "experiment output is byte-identical across runs", same && lines == 5,
         fmt("%ld metric lines; serial rerun %s, 2-worker rerun %s", static_cast<long>(lines),
             runs[0] == runs[1] ? "identical" : "DIFFERS", runs[0] == runs[2] ? "identical" : "DIFFERS"),
         secs);
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                    criterion6, criterion7, criterion8, criterion9};
  for (const auto& c : criteria) {
    try {
      c();
    } catch (const std::exception& e) {
      std::printf("[FAIL] criterion threw: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

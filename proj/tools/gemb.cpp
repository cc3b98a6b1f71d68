// gemb: command line front end for graph generation, embedding training,
// limit oracles and convergence experiments.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "gemb/diagnostics.hpp"
#include "gemb/error.hpp"
#include "gemb/experiment.hpp"
#include "gemb/limits.hpp"

namespace fs = std::filesystem;
using namespace gemb;

namespace {

struct Common {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

struct GraphInput {
  std::string edges;
  std::string latents;
  std::size_t n = 500;
};

template <typename T>
const T& pick(const std::vector<T>& items, std::size_t index, const char* what) {
  if (index >= items.size()) {
    throw ValidationError(std::string(what) + " index " + std::to_string(index) + " out of range (config has " +
                          std::to_string(items.size()) + ")");
  }
  return items[index];
}

// Reads a graph from --edges/--latents when given, otherwise samples one of size --n.
SampledGraph load_or_sample(const ExperimentConfig& cfg, const GraphInput& in, std::uint64_t seed) {
  if (!in.edges.empty()) {
    if (in.latents.empty()) throw ValidationError("--edges requires --latents");
    return read_edge_list(in.edges, in.latents, &cfg.spec);
  }
  return sample_graph(cfg.spec_at(in.n), in.n, seed);
}

void add_graph_input(CLI::App* cmd, GraphInput& in) {
  cmd->add_option("--edges", in.edges, "Edge list (one 'i j' per line); sampled from the config when omitted");
  cmd->add_option("--latents", in.latents, "Latents file matching --edges");
  cmd->add_option("--n", in.n, "Vertex count when sampling")->check(CLI::PositiveNumber);
}

void add_common(CLI::App* cmd, Common& c, bool out_is_file = false) {
  cmd->add_option("--config", c.config, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, out_is_file ? "Output file" : "Output directory");
  cmd->add_option("--seed", c.seed, "Seed (defaults to the config's master_seed)");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graphon graph generation, node embedding training and limiting-kernel oracles"};
  app.require_subcommand(1);

  Common common;
  GraphInput graph_in;
  std::size_t scheme_index = 0, signature_index = 0, vertex = 0, trials = 10000, pairs = 200, jobs = 1;
  std::string estimator = "frequency", cell, embedding_csv, embedding_json;

  auto* generate = app.add_subcommand("generate", "Sample a graph; writes edges.txt and latents.txt");
  add_common(generate, common);
  generate->add_option("--n", graph_in.n, "Vertex count")->check(CLI::PositiveNumber);

  auto* train_cmd = app.add_subcommand("train", "Train an embedding; writes embedding.csv and embedding.json");
  add_common(train_cmd, common);
  add_graph_input(train_cmd, graph_in);
  train_cmd->add_option("--scheme-index", scheme_index, "Which configured scheme to train with");
  train_cmd->add_option("--signature-index", signature_index, "Which configured signature to use");

  auto* oracle = app.add_subcommand("oracle", "Write every configured oracle kernel as <id>.csv (SBM only)");
  add_common(oracle, common);

  auto* verify = app.add_subcommand("verify-sampling", "Monte-Carlo pair inclusion estimates against f_n");
  add_common(verify, common, true);
  add_graph_input(verify, graph_in);
  verify->add_option("--scheme-index", scheme_index, "Which configured scheme to test");
  verify->add_option("--pairs", pairs, "Random edges and random non-edges to test (each)");
  verify->add_option("--trials", trials, "Monte-Carlo draws")->check(CLI::PositiveNumber);
  verify->add_option("--estimator", estimator, "frequency or conditional")
      ->check(CLI::IsMember({"frequency", "conditional"}));

  auto* probe = app.add_subcommand("probe-variance", "Mean and variance of the single-vertex gradient estimate");
  add_common(probe, common, true);
  add_graph_input(probe, graph_in);
  probe->add_option("--scheme-index", scheme_index, "Which configured scheme to sample with");
  probe->add_option("--signature-index", signature_index, "Signature of the random probe embedding");
  probe->add_option("--vertex", vertex, "Probed vertex");
  probe->add_option("--trials", trials, "Draws")->check(CLI::Range(std::size_t{2}, std::size_t(1) << 40));

  auto* experiment = app.add_subcommand("experiment", "Run the configured grid; writes metrics/summary/failures CSVs");
  add_common(experiment, common);
  experiment->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  experiment->add_option("--cell", cell, "Subset filter, e.g. n=400,rep=0,scheme=1,sig=0");

  auto* evaluate = app.add_subcommand("evaluate", "Score a trained embedding against the oracles and the graph");
  add_common(evaluate, common, true);
  add_graph_input(evaluate, graph_in);
  evaluate->add_option("--embedding", embedding_csv, "embedding.csv")->required();
  evaluate->add_option("--sidecar", embedding_json, "embedding.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = load_config(common.config);
    const std::uint64_t seed = common.seed.value_or(cfg.master_seed);

    if (*generate) {
      const auto g = sample_graph(cfg.spec_at(graph_in.n), graph_in.n, seed);
      fs::create_directories(common.out);
      write_edge_list(g, fs::path(common.out) / "edges.txt", fs::path(common.out) / "latents.txt");
      std::cout << "n=" << g.n() << " edges=" << g.edge_count() << '\n';
    } else if (*train_cmd) {
      const auto g = load_or_sample(cfg, graph_in, seed);
      TrainConfig tc = cfg.train;
      tc.scheme = pick(cfg.schemes, scheme_index, "scheme");
      tc.signature = pick(cfg.signatures, signature_index, "signature");
      tc.seed = seed;
      TrainStats stats;
      const auto emb = train(g, tc, &stats);
      fs::create_directories(common.out);
      write_embedding(emb, fs::path(common.out) / "embedding.csv", fs::path(common.out) / "embedding.json");
      std::cout << "iterations=" << stats.iterations << " pairs=" << stats.pairs_used << '\n';
    } else if (*oracle) {
      fs::create_directories(common.out);
      for (const auto& sel : cfg.oracles) {
        const auto spec = cfg.spec_at(cfg.n_grid.back());
        const auto kernel = sel.product == InnerProduct::krein ? sbm_block_limit_krein(spec, sel.scheme)
                                                               : sbm_block_limit_psd(spec, sel.scheme);
        write_block_kernel(kernel, fs::path(common.out) / (sel.id + ".csv"));
        const auto sig = signature_from_kernel(kernel);
        std::cout << sel.id << ": signature (" << sig.d_plus << ", " << sig.d_minus << ")\n";
      }
    } else if (*verify) {
      const auto g = load_or_sample(cfg, graph_in, seed);
      const auto& scheme = pick(cfg.schemes, scheme_index, "scheme");
      RngStream rng(seed, 0x76657269ull);
      std::vector<Edge> tested;
      for (std::size_t t = 0; t < pairs && g.edge_count() > 0; ++t) {
        tested.push_back(g.edges()[rng.uniform_below(g.edge_count())]);
      }
      for (std::size_t found = 0, guard = 0; found < pairs && guard < 1000 * pairs; ++guard) {
        const auto i = static_cast<std::uint32_t>(rng.uniform_below(g.n()));
        const auto j = static_cast<std::uint32_t>(rng.uniform_below(g.n()));
        if (i == j || g.has_edge(i, j)) continue;
        tested.emplace_back(std::min(i, j), std::max(i, j));
        ++found;
      }
      const SamplingWeights weights(cfg.spec_at(g.n()), scheme);
      const auto est = estimate_pair_probability(
          g, scheme, tested, trials, rng,
          estimator == "conditional" ? PairEstimator::conditional : PairEstimator::frequency, &weights);
      write_pair_estimates(est, common.out);
      std::size_t within = 0;
      for (const auto& e : est) within += std::abs(e.mc_estimate - e.formula_value) <= 0.1 * e.formula_value;
      std::cout << "pairs=" << est.size() << " within_10pct=" << within << '\n';
    } else if (*probe) {
      const auto g = load_or_sample(cfg, graph_in, seed);
      TrainConfig tc = cfg.train;
      tc.signature = pick(cfg.signatures, signature_index, "signature");
      tc.seed = seed;
      const auto emb = initial_embedding(g.n(), tc);
      RngStream rng(seed, 0x70726F62ull);
      const auto m = gradient_variance_probe(g, pick(cfg.schemes, scheme_index, "scheme"), emb, vertex, trials, rng);
      nlohmann::json out = {{"vertex", vertex}, {"trials", trials}, {"mean", std::vector<double>(m.mean.begin(), m.mean.end())},
                            {"variance", std::vector<double>(m.variance.begin(), m.variance.end())}};
      std::ofstream(common.out) << out.dump(2) << '\n';
      std::cout << "mean_variance=" << fmt(m.variance.mean()) << '\n';
    } else if (*experiment) {
      if (common.seed) cfg.master_seed = *common.seed;
      RunOptions opts;
      opts.jobs = jobs;
      opts.cell_filter = cell;
      opts.out_dir = common.out;
      const auto result = run_experiment(cfg, opts);
      std::cout << "records=" << result.records.size() << " failures=" << result.failures.size() << '\n';
      for (const auto& f : result.failures) std::cerr << "cell " << f.cell.to_string() << ": " << f.error << '\n';
      return result.failures.empty() ? 0 : 2;
    } else if (*evaluate) {
      const auto g = load_or_sample(cfg, graph_in, seed);
      const auto emb = read_embedding(embedding_csv, embedding_json);
      nlohmann::json out;
      const auto spec = cfg.spec_at(g.n());
      for (const auto& sel : cfg.oracles) {
        if (spec.is_sbm()) {
          const auto kernel = sel.product == InnerProduct::krein ? sbm_block_limit_krein(spec, sel.scheme)
                                                                 : sbm_block_limit_psd(spec, sel.scheme);
          out["l1_error"][sel.id] = l1_kernel_error(emb, g, kernel);
        } else if (sel.product == InnerProduct::krein) {
          const SamplingWeights w(spec, sel.scheme);
          out["l1_error"][sel.id] =
              l1_kernel_error(emb, g, LatentKernel([&](double l, double lp) { return unconstrained_limit(w, l, lp); }));
        }
      }
      const Eigen::MatrixXd scores = emb.gram();
      out["link_loss"]["zero_one"] = link_prediction_loss(scores, g, ZeroOneLoss{0.0});
      out["link_loss"]["cross_entropy"] = link_prediction_loss(scores, g, CrossEntropyLoss{});
      out["link_loss"]["hinge"] = link_prediction_loss(scores, g, HingeLoss{});
      std::ofstream(common.out) << out.dump(2) << '\n';
      std::cout << out.dump() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gemb/graphon.hpp"
#include "gemb/rng.hpp"

namespace gemb {

/// k vertices without replacement; the batch is the induced subgraph.
struct UniformVertex {
  std::size_t k = 100;
};

/// k edges without replacement; l unigram negatives for every vertex touched by them.
struct UniformEdgeUnigram {
  std::size_t k = 100;
  std::size_t l = 1;
  double alpha = 0.75;
  bool check_non_edges = true;
};

/// Induced subgraph on the endpoints of k edges sampled without replacement.
struct UniformEdgeInduced {
  std::size_t k = 100;
};

/// Simple random walk of length k started from deg/2E, l unigram negatives per walk vertex.
struct RandomWalkUnigram {
  std::size_t k = 50;
  std::size_t l = 1;
  double alpha = 0.75;
  bool check_non_edges = true;
};

using SamplingScheme = std::variant<UniformVertex, UniformEdgeUnigram, UniformEdgeInduced, RandomWalkUnigram>;

/// Throws ValidationError when hyperparameters violate the scheme invariants.
void validate_scheme(const SamplingScheme& scheme);
/// Stable identifier: uniform_vertex, uniform_edge_unigram, uniform_edge_induced, random_walk_unigram.
std::string scheme_name(const SamplingScheme& scheme);
/// Name plus hyperparameters, e.g. "random_walk_unigram(k=50,l=1,alpha=0.75)".
std::string scheme_label(const SamplingScheme& scheme);
/// The scheme's k (vertices, edges or walk length).
std::size_t scheme_k(const SamplingScheme& scheme);

enum class PairLabel : std::uint8_t { negative = 0, positive = 1 };

struct LabeledPair {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  PairLabel label = PairLabel::negative;

  int target() const noexcept { return label == PairLabel::positive ? 1 : 0; }
  bool operator==(const LabeledPair&) const = default;
};

/// One subsample. Pairs appear with multiplicity; see dedupe_pairs.
struct SampleBatch {
  std::vector<LabeledPair> pairs;
};

/// Removes repeated unordered pairs, keeping the first occurrence.
void dedupe_pairs(SampleBatch& batch);

/// Walker alias table over a fixed discrete distribution.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights);
  std::size_t sample(RngStream& rng) const;
  std::size_t size() const noexcept { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

/// Draws k distinct values from [0, population) by a partial Fisher-Yates shuffle.
std::vector<std::uint32_t> sample_without_replacement(std::size_t population, std::size_t k, RngStream& rng);

/// Unigram distribution deg(v)^alpha / sum_u deg(u)^alpha (isolated vertices get 0).
std::vector<double> unigram_weights(const SampledGraph& graph, double alpha);

/// Precomputes per-graph tables (unigram alias, edge array) so repeated draws are cheap.
/// Holds a reference to the graph, which must outlive the sampler.
class Sampler {
 public:
  Sampler(const SampledGraph& graph, SamplingScheme scheme);

  SampleBatch draw(RngStream& rng) const;
  /// As draw, also reporting the walk path (random-walk scheme) or the touched vertex set.
  SampleBatch draw(RngStream& rng, std::vector<std::uint32_t>* visited) const;

  const SamplingScheme& scheme() const noexcept { return scheme_; }
  const SampledGraph& graph() const noexcept { return *graph_; }
  /// Unigram probabilities used for negatives (empty for schemes without negatives).
  const std::vector<double>& unigram() const noexcept { return unigram_; }

 private:
  void append_induced(const std::vector<std::uint32_t>& vertices, SampleBatch& batch) const;
  void append_negatives(std::uint32_t u, std::size_t l, bool check, RngStream& rng, SampleBatch& batch) const;

  const SampledGraph* graph_;
  SamplingScheme scheme_;
  std::vector<double> unigram_;
  AliasTable unigram_table_;
};

/// One subsample; builds a Sampler internally.
SampleBatch draw_sample(const SampledGraph& graph, const SamplingScheme& scheme, RngStream& rng);

/// Asymptotic sampling weights f_n and their products with W_n for a (spec, scheme) pair.
/// Caches E_W and E_W(alpha).
class SamplingWeights {
 public:
  SamplingWeights(GraphonSpec spec, SamplingScheme scheme);

  /// f_n(l, l', a).
  double f(double l, double lp, int a) const;
  /// f_n with the degree functions W(l,.) and W(l',.) supplied by the caller.
  double f_with_degrees(double l, double lp, int a, double degree_l, double degree_lp) const;
  double tilde_f1(double l, double lp) const;
  double tilde_f0(double l, double lp) const;

  const GraphonSpec& spec() const noexcept { return spec_; }
  const SamplingScheme& scheme() const noexcept { return scheme_; }
  const GraphonMoments& moments() const noexcept { return moments_; }

 private:
  double degree(double l) const;

  GraphonSpec spec_;
  SamplingScheme scheme_;
  GraphonMoments moments_;
  double alpha_ = 1.0;
};

double sampling_weight_f(const GraphonSpec& spec, const SamplingScheme& scheme, double l, double lp, int a);

struct TildeWeights {
  double tilde_f1 = 0.0;
  double tilde_f0 = 0.0;
};

TildeWeights tilde_weights(const GraphonSpec& spec, const SamplingScheme& scheme, double l, double lp);

enum class PairEstimator {
  /// Fraction of draws containing the pair at least once.
  frequency,
  /// Per-draw expected multiplicity given the walk path (random walk) or the sampled edge
  /// set (uniform edge), averaged over draws. Unbiased for the expected number of
  /// occurrences, which differs from the inclusion probability by the chance of a repeat.
  conditional,
};

struct PairEstimate {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  int a_ij = 0;
  double mc_estimate = 0.0;  // n^2 * estimate
  double formula_value = std::numeric_limits<double>::quiet_NaN();
  double std_err = 0.0;      // n^2 * standard error
};

/// Monte-Carlo estimate of n^2 * P((i,j) in S(G) | G) for each requested pair. When weights
/// are supplied, formula_value holds f_n(lambda_i, lambda_j, a_ij).
std::vector<PairEstimate> estimate_pair_probability(const SampledGraph& graph, const SamplingScheme& scheme,
                                                    const std::vector<Edge>& pairs, std::size_t trials,
                                                    RngStream& rng,
                                                    PairEstimator estimator = PairEstimator::frequency,
                                                    const SamplingWeights* weights = nullptr);

/// CSV: pair_i,pair_j,a_ij,mc_estimate,formula_value,std_err
void write_pair_estimates(const std::vector<PairEstimate>& estimates, const std::filesystem::path& path);

}  // namespace gemb

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "gemb/graphon.hpp"
#include "gemb/sampling.hpp"

namespace gemb {

/// Krein signature (d_plus, d_minus); d_minus = 0 is the regular inner product.
struct SimilaritySignature {
  std::size_t d_plus = 1;
  std::size_t d_minus = 0;

  std::size_t dim() const noexcept { return d_plus + d_minus; }
  void validate() const;
  bool operator==(const SimilaritySignature&) const = default;
};

using EmbeddingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row i is the embedding of vertex i; every coordinate lies in [-box_bound, box_bound].
struct EmbeddingState {
  EmbeddingMatrix vectors;
  SimilaritySignature signature;
  double box_bound = 10.0;

  std::size_t n() const noexcept { return static_cast<std::size_t>(vectors.rows()); }
  std::span<const double> row(std::size_t i) const noexcept {
    return {vectors.data() + i * static_cast<std::size_t>(vectors.cols()), static_cast<std::size_t>(vectors.cols())};
  }
  /// Matrix of B(w_i, w_j).
  Eigen::MatrixXd gram() const;
};

enum class StepSchedule {
  constant,
  /// eta_t = step_size * max(1 - t/T, min_step_fraction) over the T planned iterations.
  linear,
};

struct TrainConfig {
  double step_size = 0.025;
  std::size_t epochs = 1;
  /// 0: an epoch ends once the pairs used since its start reach the graph's edge count.
  std::size_t draws_per_epoch = 0;
  std::uint64_t seed = 0;
  double clip_bound = 10.0;
  double init_scale = 0.1;
  SimilaritySignature signature{};
  SamplingScheme scheme = UniformVertex{};
  StepSchedule schedule = StepSchedule::constant;
  double min_step_fraction = 1e-4;
  bool dedupe = false;

  void validate() const;
};

/// B(w, w') = sum_{r < d+} w_r w'_r - sum_{r >= d+} w_r w'_r.
double similarity(const SimilaritySignature& sig, std::span<const double> w, std::span<const double> wp);

struct LossGrad {
  double loss = 0.0;
  double dloss_dy = 0.0;
};

/// Logistic cross-entropy l(y, x) = softplus(y) - x y and its derivative sigma(y) - x.
LossGrad loss_and_grad(double y, int x);

/// sum over batch pairs of l(B(w_i, w_j), label).
double batch_loss(const EmbeddingState& emb, const SampleBatch& batch);
/// Gradient of batch_loss with respect to every embedding vector (n x d).
EmbeddingMatrix batch_gradient(const EmbeddingState& emb, const SampleBatch& batch);

/// Coordinates i.i.d. uniform on [-init_scale, init_scale], Philox stream (seed, kInit).
EmbeddingState initial_embedding(std::size_t n, const TrainConfig& config);

struct TrainStats {
  std::size_t iterations = 0;
  std::size_t pairs_used = 0;
};

/// Constant- or decaying-step SGD on the raw per-batch loss, clipping to the box after
/// each step. Deterministic given config.seed. Throws NumericalError on a non-finite logit
/// or gradient.
EmbeddingState train(const SampledGraph& graph, const TrainConfig& config, TrainStats* stats = nullptr);

/// (1/n^2) sum_{i != j} f_n(lambda_i, lambda_j, a_ij) l(B(w_i, w_j), a_ij).
double empirical_risk(const SampledGraph& graph, const SamplingWeights& weights, const EmbeddingState& emb);

/// One draw of G_i = (1/k) sum over sampled pairs (i, j) of l'(B(w_i, w_j), a) * S w_j, pairs
/// counted with multiplicity.
Eigen::VectorXd gradient_estimate(const Sampler& sampler, const EmbeddingState& emb, std::size_t vertex,
                                  RngStream& rng);
Eigen::VectorXd gradient_estimate(const SampledGraph& graph, const SamplingScheme& scheme,
                                  const EmbeddingState& emb, std::size_t vertex, RngStream& rng);

/// n rows of d comma-separated values (17 significant digits) plus a JSON sidecar
/// {"n", "d_plus", "d_minus", "box_bound"}.
void write_embedding(const EmbeddingState& emb, const std::filesystem::path& csv_path,
                     const std::filesystem::path& sidecar_path);
EmbeddingState read_embedding(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path);

}  // namespace gemb

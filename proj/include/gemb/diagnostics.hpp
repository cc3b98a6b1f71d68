#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gemb/embedding.hpp"
#include "gemb/graphon.hpp"
#include "gemb/limits.hpp"
#include "gemb/sampling.hpp"

namespace gemb {

/// One row of the convergence metrics file.
struct ConvergenceRecord {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string scheme;
  std::size_t d_plus = 0;
  std::size_t d_minus = 0;
  std::string oracle;
  double l1_error = 0.0;
  std::size_t epochs = 0;
  double wall_time_s = 0.0;

  bool operator==(const ConvergenceRecord&) const = default;
};

/// Pointwise comparison kernel evaluated on latents.
using LatentKernel = std::function<double(double, double)>;
/// Comparison kernel evaluated on vertex indices (e.g. logits of a latent-vector model).
using VertexKernel = std::function<double(std::size_t, std::size_t)>;

/// (1/n^2) sum over all ordered pairs, diagonal included, of |B(w_i, w_j) - K(i, j)|.
double l1_kernel_error(const EmbeddingState& emb, const SampledGraph& graph, const BlockKernel& kernel);
double l1_kernel_error(const EmbeddingState& emb, const SampledGraph& graph, const LatentKernel& kernel);
double l1_kernel_error(const EmbeddingState& emb, const VertexKernel& kernel);

struct ZeroOneLoss {
  double threshold = 0.0;
};
struct CrossEntropyLoss {
  double clip = 30.0;
};
/// Scores are clipped to [0, 1] before applying max(0, 1 - (2b - 1) s).
struct HingeLoss {};

using LinkLoss = std::variant<ZeroOneLoss, CrossEntropyLoss, HingeLoss>;

/// D(S, B) = (1/(n(n-1))) sum_{i != j} d(S_ij, B_ij). The zero-one loss counts
/// misclassifications of the prediction 1[s >= threshold].
double link_prediction_loss(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& adjacency, const LinkLoss& loss);
double link_prediction_loss(const Eigen::MatrixXd& scores, const SampledGraph& graph, const LinkLoss& loss);

struct GradientMoments {
  Eigen::VectorXd mean;
  /// Unbiased per-coordinate sample variance.
  Eigen::VectorXd variance;
};

/// Sample mean and variance of gradient_estimate over independent draws (trials >= 2).
GradientMoments gradient_variance_probe(const SampledGraph& graph, const SamplingScheme& scheme,
                                        const EmbeddingState& emb, std::size_t vertex, std::size_t trials,
                                        RngStream& rng);

struct DegreeDeviation {
  std::size_t vertex = 0;
  std::size_t degree = 0;
  double expected = 0.0;  // (n - 1) rho W(lambda_i, .)
  double relative_deviation = 0.0;
  bool flagged = false;   // expected degree is zero; excluded from the maximum
};

struct DegreeConcentrationReport {
  double max_rel_dev = 0.0;
  std::vector<DegreeDeviation> vertices;
};

/// |deg(i) / ((n-1) rho W(lambda_i, .)) - 1| for every vertex.
DegreeConcentrationReport degree_concentration_report(const SampledGraph& graph, const GraphonSpec& spec);

}  // namespace gemb

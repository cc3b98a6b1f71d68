#include "gemb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gemb/error.hpp"

namespace gemb {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double sigmoid(double y) {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

}  // namespace

double l1_kernel_error(const EmbeddingState& emb, const VertexKernel& kernel) {
  const std::size_t n = emb.n();
  if (n == 0) return 0.0;
  const Eigen::MatrixXd gram = emb.gram();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      total += std::abs(gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - kernel(i, j));
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n));
}

double l1_kernel_error(const EmbeddingState& emb, const SampledGraph& graph, const LatentKernel& kernel) {
  if (emb.n() != graph.n()) throw ValidationError("embedding size does not match the graph");
  const auto& lat = graph.latents();
  return l1_kernel_error(emb, [&](std::size_t i, std::size_t j) { return kernel(lat[i], lat[j]); });
}

double l1_kernel_error(const EmbeddingState& emb, const SampledGraph& graph, const BlockKernel& kernel) {
  if (emb.n() != graph.n()) throw ValidationError("embedding size does not match the graph");
  std::vector<std::size_t> block(graph.n());
  for (std::size_t i = 0; i < graph.n(); ++i) block[i] = kernel.block_of(graph.latents()[i]);
  return l1_kernel_error(emb, [&](std::size_t i, std::size_t j) {
    return kernel.values(static_cast<Eigen::Index>(block[i]), static_cast<Eigen::Index>(block[j]));
  });
}

double link_prediction_loss(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& adjacency, const LinkLoss& loss) {
  const auto n = scores.rows();
  if (scores.cols() != n || adjacency.rows() != n || adjacency.cols() != n) {
    throw ValidationError("scores and adjacency must be square matrices of the same size");
  }
  if (n < 2) return 0.0;
  auto discrepancy = [&](double s, int b) {
    return std::visit(Overloaded{
                          [&](const ZeroOneLoss& z) {
                            const int predicted = s >= z.threshold ? 1 : 0;
                            return predicted == b ? 0.0 : 1.0;
                          },
                          [&](const CrossEntropyLoss& c) {
                            const double clipped = std::clamp(s, -c.clip, c.clip);
                            const double p = sigmoid(clipped);
                            return b == 1 ? -std::log(p) : -std::log1p(-p);
                          },
                          [&](const HingeLoss&) {
                            const double clipped = std::clamp(s, 0.0, 1.0);
                            return std::max(0.0, 1.0 - (2.0 * b - 1.0) * clipped);
                          },
                      },
                      loss);
  };
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) total += discrepancy(scores(i, j), adjacency(i, j) != 0 ? 1 : 0);
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

double link_prediction_loss(const Eigen::MatrixXd& scores, const SampledGraph& graph, const LinkLoss& loss) {
  const auto n = static_cast<Eigen::Index>(graph.n());
  Eigen::MatrixXi adjacency = Eigen::MatrixXi::Zero(n, n);
  for (const auto& [i, j] : graph.edges()) adjacency(i, j) = adjacency(j, i) = 1;
  return link_prediction_loss(scores, adjacency, loss);
}

GradientMoments gradient_variance_probe(const SampledGraph& graph, const SamplingScheme& scheme,
                                        const EmbeddingState& emb, std::size_t vertex, std::size_t trials,
                                        RngStream& rng) {
  if (trials < 2) throw ValidationError("gradient_variance_probe needs at least 2 trials");
  const Sampler sampler(graph, scheme);
  const auto d = static_cast<Eigen::Index>(emb.signature.dim());
  // Welford accumulation per coordinate.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d), m2 = Eigen::VectorXd::Zero(d);
  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::VectorXd g = gradient_estimate(sampler, emb, vertex, rng);
    const Eigen::VectorXd delta = g - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta.cwiseProduct(g - mean);
  }
  return {mean, m2 / static_cast<double>(trials - 1)};
}

DegreeConcentrationReport degree_concentration_report(const SampledGraph& graph, const GraphonSpec& spec) {
  DegreeConcentrationReport report;
  const std::size_t n = graph.n();
  if (n < 2) return report;
  const double others = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    DegreeDeviation row;
    row.vertex = i;
    row.degree = graph.degree(i);
    row.expected = others * spec.rho * degree_function(spec, graph.latents()[i]);
    if (!(row.expected > 0.0)) {
      row.flagged = true;
      row.relative_deviation = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.relative_deviation = std::abs(static_cast<double>(row.degree) / row.expected - 1.0);
      report.max_rel_dev = std::max(report.max_rel_dev, row.relative_deviation);
    }
    report.vertices.push_back(row);
  }
  return report;
}

}  // namespace gemb

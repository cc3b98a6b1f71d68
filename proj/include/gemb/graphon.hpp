#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace gemb {

/// Piecewise-constant graphon: block c covers [cum_pi[c], cum_pi[c+1]).
struct SbmKernel {
  std::vector<double> pi;
  Eigen::MatrixXd P;
};

/// W(l, l') = clamp(a + b cos(pi l) cos(pi l'), 0, 1).
struct CosineKernel {
  double a = 0.5;
  double b = 0.25;
};

/// Graphon generative model W_n = rho * W.
struct GraphonSpec {
  std::variant<SbmKernel, CosineKernel> kernel;
  double rho = 1.0;

  static GraphonSpec sbm(std::vector<double> pi, Eigen::MatrixXd P, double rho = 1.0);
  /// Balanced two-parameter model: p within blocks, q across, kappa equal blocks.
  static GraphonSpec sbm_pq(double p, double q, std::size_t kappa, double rho = 1.0);
  static GraphonSpec cosine(double a, double b, double rho = 1.0);

  bool is_sbm() const noexcept { return std::holds_alternative<SbmKernel>(kernel); }
  const SbmKernel& as_sbm() const;  // throws ValidationError when not an SBM
  std::size_t block_count() const;  // 1 for smooth kernels

  /// Throws ValidationError naming the violated invariant.
  void validate() const;

  /// Un-sparsified kernel W(l, l'), no domain check.
  double kernel_value(double l, double lp) const;
  /// SBM block containing l (cumulative pi partition, l = 1 maps to the last block).
  std::size_t block_of(double l) const;
  /// Midpoint of block c, a representative latent for block-constant quantities.
  double block_midpoint(std::size_t c) const;
};

/// The paper's two named simulation models.
GraphonSpec sbm1(double rho = 1.0);
GraphonSpec sbm2(double rho = 1.0);

/// rho * W(l, l'); throws DomainError outside [0,1]^2.
double graphon_value(const GraphonSpec& spec, double l, double lp);

/// Degree function W(l, .) = int_0^1 W(l, y) dy without the rho factor.
/// SBM: exact row average. Smooth: composite Simpson on kQuadraturePoints nodes; for the
/// cosine family the integrand is smooth away from clipping and the error is below 1e-12.
double degree_function(const GraphonSpec& spec, double l);

inline constexpr std::size_t kQuadraturePoints = 1025;

struct GraphonMoments {
  double edge_density = 0.0;       // E_W
  double degree_moment = 0.0;      // E_W(alpha)
};

/// E_W and E_W(alpha) = int W(l, .)^alpha dl; alpha must be positive.
GraphonMoments graphon_moments(const GraphonSpec& spec, double alpha);

using Edge = std::pair<std::uint32_t, std::uint32_t>;

/// Simple undirected graph together with the latents that generated it. Immutable.
class SampledGraph {
 public:
  SampledGraph() = default;
  /// Edges with i < j, no duplicates. communities may be empty (non-SBM).
  SampledGraph(std::size_t n, std::vector<Edge> edges, std::vector<double> latents,
               std::vector<std::uint32_t> communities);

  std::size_t n() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  bool has_edge(std::size_t i, std::size_t j) const noexcept {
    if (i == j) return false;
    if (i > j) std::swap(i, j);
    return adjacency_[upper_index(i, j)] != 0;
  }
  int a(std::size_t i, std::size_t j) const noexcept { return has_edge(i, j) ? 1 : 0; }
  std::span<const std::uint32_t> neighbors(std::size_t i) const noexcept {
    return {neighbors_.data() + offsets_[i], neighbors_.data() + offsets_[i + 1]};
  }
  std::size_t degree(std::size_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<double>& latents() const noexcept { return latents_; }
  const std::vector<std::uint32_t>& communities() const noexcept { return communities_; }
  std::vector<std::size_t> degrees() const;

  bool operator==(const SampledGraph& other) const;

 private:
  std::size_t upper_index(std::size_t i, std::size_t j) const noexcept {
    // row-major strict upper triangle, i < j
    return i * (2 * n_ - i - 1) / 2 + (j - i - 1);
  }

  std::size_t n_ = 0;
  std::vector<std::uint8_t> adjacency_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> neighbors_;
  std::vector<double> latents_;
  std::vector<std::uint32_t> communities_;
};

/// Latents lambda_i ~ U[0,1] from Philox counter (i, 0, kLatent, 0); pair {i<j} is an edge
/// when the Philox draw at counter (i, j, kEdge, 0) is below rho * W(lambda_i, lambda_j).
SampledGraph sample_graph(const GraphonSpec& spec, std::size_t n, std::uint64_t seed);

/// Edge list "i j" per line (0-indexed) and one latent per line.
void write_edge_list(const SampledGraph& graph, const std::filesystem::path& edges_path,
                     const std::filesystem::path& latents_path);
/// Reads the two files back; communities are recovered from the spec's partition when SBM.
SampledGraph read_edge_list(const std::filesystem::path& edges_path,
                            const std::filesystem::path& latents_path, const GraphonSpec* spec = nullptr);

}  // namespace gemb

#include "gemb/graphon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "gemb/error.hpp"
#include "gemb/rng.hpp"

namespace gemb {

namespace {

std::vector<double> cumulative(const std::vector<double>& pi) {
  std::vector<double> cum(pi.size() + 1, 0.0);
  std::partial_sum(pi.begin(), pi.end(), cum.begin() + 1);
  return cum;
}

void check_unit(double l, const char* what) {
  if (!(l >= 0.0 && l <= 1.0)) {
    throw DomainError(std::string(what) + " must lie in [0,1], got " + std::to_string(l));
  }
}

// Composite Simpson over [0,1] on kQuadraturePoints nodes.
template <typename F>
double simpson(F&& f) {
  constexpr std::size_t intervals = kQuadraturePoints - 1;
  const double h = 1.0 / static_cast<double>(intervals);
  double sum = f(0.0) + f(1.0);
  for (std::size_t i = 1; i < intervals; ++i) {
    sum += (i % 2 == 1 ? 4.0 : 2.0) * f(static_cast<double>(i) * h);
  }
  return sum * h / 3.0;
}

}  // namespace

GraphonSpec GraphonSpec::sbm(std::vector<double> pi, Eigen::MatrixXd P, double rho) {
  GraphonSpec spec{SbmKernel{std::move(pi), std::move(P)}, rho};
  spec.validate();
  return spec;
}

GraphonSpec GraphonSpec::sbm_pq(double p, double q, std::size_t kappa, double rho) {
  if (kappa == 0) throw ValidationError("kappa must be positive");
  Eigen::MatrixXd P = Eigen::MatrixXd::Constant(kappa, kappa, q);
  P.diagonal().setConstant(p);
  return sbm(std::vector<double>(kappa, 1.0 / static_cast<double>(kappa)), std::move(P), rho);
}

GraphonSpec GraphonSpec::cosine(double a, double b, double rho) {
  GraphonSpec spec{CosineKernel{a, b}, rho};
  spec.validate();
  return spec;
}

const SbmKernel& GraphonSpec::as_sbm() const {
  if (const auto* sbm = std::get_if<SbmKernel>(&kernel)) return *sbm;
  throw ValidationError("operation requires an SBM graphon");
}

std::size_t GraphonSpec::block_count() const {
  return is_sbm() ? as_sbm().pi.size() : 1;
}

void GraphonSpec::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("rho must lie in [0,1]");
  if (const auto* sbm = std::get_if<SbmKernel>(&kernel)) {
    const std::size_t kappa = sbm->pi.size();
    if (kappa == 0) throw ValidationError("pi must be nonempty");
    for (double w : sbm->pi) {
      if (!(w > 0.0)) throw ValidationError("pi entries must be positive");
    }
    const double total = std::accumulate(sbm->pi.begin(), sbm->pi.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("pi must sum to 1");
    if (static_cast<std::size_t>(sbm->P.rows()) != kappa || static_cast<std::size_t>(sbm->P.cols()) != kappa) {
      throw ValidationError("P must be a kappa x kappa matrix matching pi");
    }
    for (Eigen::Index i = 0; i < sbm->P.rows(); ++i) {
      for (Eigen::Index j = 0; j < sbm->P.cols(); ++j) {
        const double v = sbm->P(i, j);
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("P entries must lie in [0,1]");
        if (v != sbm->P(j, i)) throw ValidationError("P must be symmetric");
      }
    }
  } else {
    const auto& cos = std::get<CosineKernel>(kernel);
    if (!std::isfinite(cos.a) || !std::isfinite(cos.b)) {
      throw ValidationError("cosine kernel parameters must be finite");
    }
  }
}

std::size_t GraphonSpec::block_of(double l) const {
  if (!is_sbm()) return 0;
  const auto& pi = as_sbm().pi;
  double upper = 0.0;
  for (std::size_t c = 0; c + 1 < pi.size(); ++c) {
    upper += pi[c];
    if (l < upper) return c;
  }
  return pi.size() - 1;
}

double GraphonSpec::block_midpoint(std::size_t c) const {
  if (!is_sbm()) return 0.5;
  const auto cum = cumulative(as_sbm().pi);
  return 0.5 * (cum.at(c) + cum.at(c + 1));
}

double GraphonSpec::kernel_value(double l, double lp) const {
  if (const auto* sbm = std::get_if<SbmKernel>(&kernel)) {
    return sbm->P(static_cast<Eigen::Index>(block_of(l)), static_cast<Eigen::Index>(block_of(lp)));
  }
  const auto& cos = std::get<CosineKernel>(kernel);
  const double v = cos.a + cos.b * (std::cos(std::numbers::pi * l) * std::cos(std::numbers::pi * lp));
  return std::clamp(v, 0.0, 1.0);
}

GraphonSpec sbm1(double rho) {
  Eigen::MatrixXd P(3, 3);
  P << 0.7, 0.3, 0.1,
       0.3, 0.5, 0.6,
       0.1, 0.6, 0.2;
  return GraphonSpec::sbm({1.0 / 3, 1.0 / 3, 1.0 / 3}, P, rho);
}

GraphonSpec sbm2(double rho) {
  Eigen::MatrixXd P(5, 5);
  P << 0.75, 0.87, 0.025, 0.81, 0.25,
       0.87, 0.93, 0.58, 0.48, 0.45,
       0.025, 0.58, 0.68, 0.15, 0.48,
       0.81, 0.48, 0.15, 0.80, 0.92,
       0.25, 0.45, 0.48, 0.92, 0.62;
  return GraphonSpec::sbm({0.1, 0.2, 0.2, 0.3, 0.2}, P, rho);
}

double graphon_value(const GraphonSpec& spec, double l, double lp) {
  check_unit(l, "l");
  check_unit(lp, "l'");
  return spec.rho * spec.kernel_value(l, lp);
}

double degree_function(const GraphonSpec& spec, double l) {
  check_unit(l, "l");
  if (const auto* sbm = std::get_if<SbmKernel>(&spec.kernel)) {
    const auto row = static_cast<Eigen::Index>(spec.block_of(l));
    double sum = 0.0;
    for (std::size_t c = 0; c < sbm->pi.size(); ++c) sum += sbm->pi[c] * sbm->P(row, static_cast<Eigen::Index>(c));
    return sum;
  }
  return simpson([&](double y) { return spec.kernel_value(l, y); });
}

GraphonMoments graphon_moments(const GraphonSpec& spec, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  GraphonMoments m;
  if (const auto* sbm = std::get_if<SbmKernel>(&spec.kernel)) {
    for (std::size_t c = 0; c < sbm->pi.size(); ++c) {
      const double deg = degree_function(spec, spec.block_midpoint(c));
      m.edge_density += sbm->pi[c] * deg;
      m.degree_moment += sbm->pi[c] * (alpha == 1.0 ? deg : std::pow(deg, alpha));
    }
    return m;
  }
  m.edge_density = simpson([&](double l) { return degree_function(spec, l); });
  m.degree_moment = alpha == 1.0 ? m.edge_density
                                 : simpson([&](double l) { return std::pow(degree_function(spec, l), alpha); });
  return m;
}

SampledGraph::SampledGraph(std::size_t n, std::vector<Edge> edges, std::vector<double> latents,
                           std::vector<std::uint32_t> communities)
    : n_(n),
      adjacency_(n > 1 ? n * (n - 1) / 2 : 0, 0),
      edges_(std::move(edges)),
      latents_(std::move(latents)),
      communities_(std::move(communities)) {
  if (latents_.size() != n_) throw ValidationError("latents must have one entry per vertex");
  if (!communities_.empty() && communities_.size() != n_) {
    throw ValidationError("communities must be empty or have one entry per vertex");
  }
  std::vector<std::size_t> deg(n_, 0);
  for (auto& [i, j] : edges_) {
    if (i == j || i >= n_ || j >= n_) throw ValidationError("edge endpoints must be distinct vertices < n");
    if (i > j) std::swap(i, j);
    auto& cell = adjacency_[upper_index(i, j)];
    if (cell != 0) throw ValidationError("duplicate edge");
    cell = 1;
    ++deg[i];
    ++deg[j];
  }
  std::sort(edges_.begin(), edges_.end());
  offsets_.assign(n_ + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) offsets_[i + 1] = offsets_[i] + deg[i];
  neighbors_.resize(offsets_[n_]);
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (const auto& [i, j] : edges_) {
    neighbors_[fill[i]++] = j;
    neighbors_[fill[j]++] = i;
  }
  for (std::size_t i = 0; i < n_; ++i) {
    std::sort(neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
              neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
  }
}

std::vector<std::size_t> SampledGraph::degrees() const {
  std::vector<std::size_t> deg(n_);
  for (std::size_t i = 0; i < n_; ++i) deg[i] = degree(i);
  return deg;
}

bool SampledGraph::operator==(const SampledGraph& other) const {
  return n_ == other.n_ && edges_ == other.edges_ && latents_ == other.latents_ &&
         communities_ == other.communities_;
}

SampledGraph sample_graph(const GraphonSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("n must be at least 1");
  spec.validate();
  const auto key = key_from_seed(seed);
  std::vector<double> latents(n);
  std::vector<std::uint32_t> communities;
  for (std::size_t i = 0; i < n; ++i) {
    const auto block = philox4x32({static_cast<std::uint32_t>(i), 0u, streams::kLatent, 0u}, key);
    latents[i] = to_unit_interval(block[0], block[1]);
  }
  if (spec.is_sbm()) {
    communities.resize(n);
    for (std::size_t i = 0; i < n; ++i) communities[i] = static_cast<std::uint32_t>(spec.block_of(latents[i]));
  }
  std::vector<Edge> edges;
  if (spec.rho > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double prob = spec.rho * spec.kernel_value(latents[i], latents[j]);
        if (prob <= 0.0) continue;
        const auto block = philox4x32(
            {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), streams::kEdge, 0u}, key);
        if (to_unit_interval(block[0], block[1]) < prob) {
          edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        }
      }
    }
  }
  return SampledGraph(n, std::move(edges), std::move(latents), std::move(communities));
}

void write_edge_list(const SampledGraph& graph, const std::filesystem::path& edges_path,
                     const std::filesystem::path& latents_path) {
  std::ofstream edges(edges_path, std::ios::binary);
  if (!edges) throw Error("cannot open " + edges_path.string() + " for writing");
  for (const auto& [i, j] : graph.edges()) edges << i << ' ' << j << '\n';
  std::ofstream lat(latents_path, std::ios::binary);
  if (!lat) throw Error("cannot open " + latents_path.string() + " for writing");
  lat.precision(17);
  for (double l : graph.latents()) lat << l << '\n';
  if (!edges || !lat) throw Error("write failed for edge list or latents");
}

SampledGraph read_edge_list(const std::filesystem::path& edges_path, const std::filesystem::path& latents_path,
                            const GraphonSpec* spec) {
  std::ifstream lat(latents_path);
  if (!lat) throw Error("cannot open " + latents_path.string());
  std::vector<double> latents;
  for (double l; lat >> l;) latents.push_back(l);
  std::ifstream in(edges_path);
  if (!in) throw Error("cannot open " + edges_path.string());
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::uint64_t i = 0, j = 0;
    if (!(ss >> i >> j)) throw ValidationError(edges_path.string() + ":" + std::to_string(line_no) + ": expected 'i j'");
    edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
  }
  std::vector<std::uint32_t> communities;
  if (spec != nullptr && spec->is_sbm()) {
    communities.reserve(latents.size());
    for (double l : latents) communities.push_back(static_cast<std::uint32_t>(spec->block_of(l)));
  }
  const std::size_t n = latents.size();
  return SampledGraph(n, std::move(edges), std::move(latents), std::move(communities));
}

}  // namespace gemb

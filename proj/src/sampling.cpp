#include "gemb/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gemb/error.hpp"

namespace gemb {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::uint64_t pair_key(std::uint32_t i, std::uint32_t j) noexcept {
  if (i > j) std::swap(i, j);
  return (static_cast<std::uint64_t>(i) << 32) | j;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void validate_scheme(const SamplingScheme& scheme) {
  auto check_alpha = [](double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0,1]");
  };
  std::visit(Overloaded{
                 [](const UniformVertex& s) {
                   if (s.k < 2) throw ValidationError("uniform_vertex requires k >= 2");
                 },
                 [&](const UniformEdgeUnigram& s) {
                   if (s.k < 1 || s.l < 1) throw ValidationError("uniform_edge_unigram requires k >= 1 and l >= 1");
                   check_alpha(s.alpha);
                 },
                 [](const UniformEdgeInduced& s) {
                   if (s.k < 1) throw ValidationError("uniform_edge_induced requires k >= 1");
                 },
                 [&](const RandomWalkUnigram& s) {
                   if (s.k < 1 || s.l < 1) throw ValidationError("random_walk_unigram requires k >= 1 and l >= 1");
                   check_alpha(s.alpha);
                 },
             },
             scheme);
}

std::string scheme_name(const SamplingScheme& scheme) {
  return std::visit(Overloaded{
                        [](const UniformVertex&) { return std::string("uniform_vertex"); },
                        [](const UniformEdgeUnigram&) { return std::string("uniform_edge_unigram"); },
                        [](const UniformEdgeInduced&) { return std::string("uniform_edge_induced"); },
                        [](const RandomWalkUnigram&) { return std::string("random_walk_unigram"); },
                    },
                    scheme);
}

std::string scheme_label(const SamplingScheme& scheme) {
  std::ostringstream os;
  os << scheme_name(scheme) << "(k=" << scheme_k(scheme);
  std::visit(Overloaded{
                 [](const UniformVertex&) {},
                 [](const UniformEdgeInduced&) {},
                 [&](const auto& s) {
                   os << ",l=" << s.l << ",alpha=" << s.alpha;
                   if (!s.check_non_edges) os << ",unchecked";
                 },
             },
             scheme);
  os << ')';
  return os.str();
}

std::size_t scheme_k(const SamplingScheme& scheme) {
  return std::visit([](const auto& s) { return s.k; }, scheme);
}

void dedupe_pairs(SampleBatch& batch) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(batch.pairs.size());
  std::erase_if(batch.pairs, [&](const LabeledPair& p) { return !seen.insert(pair_key(p.i, p.j)).second; });
}

AliasTable::AliasTable(const std::vector<double>& weights) {
  const std::size_t n = weights.size();
  if (n == 0) throw ValidationError("alias table needs at least one outcome");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("alias weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("alias weights must not all be zero");
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto g = large.back();
    prob_[s] = scaled[s];
    alias_[s] = g;
    scaled[g] = (scaled[g] + scaled[s]) - 1.0;
    if (scaled[g] < 1.0) {
      large.pop_back();
      small.push_back(g);
    }
  }
  for (auto g : large) prob_[g] = 1.0;
  // leftovers from rounding
  for (auto s : small) prob_[s] = 1.0;
}

std::size_t AliasTable::sample(RngStream& rng) const {
  const auto column = static_cast<std::size_t>(rng.uniform_below(prob_.size()));
  return rng.uniform01() < prob_[column] ? column : alias_[column];
}

std::vector<std::uint32_t> sample_without_replacement(std::size_t population, std::size_t k, RngStream& rng) {
  if (k > population) {
    throw ValidationError("cannot draw " + std::to_string(k) + " distinct items from " + std::to_string(population));
  }
  std::vector<std::uint32_t> out(k);
  // Sparse view of the shuffled array: untouched positions hold their own index.
  std::unordered_map<std::uint32_t, std::uint32_t> moved;
  moved.reserve(2 * k);
  auto at = [&](std::uint32_t pos) {
    const auto it = moved.find(pos);
    return it == moved.end() ? pos : it->second;
  };
  for (std::size_t t = 0; t < k; ++t) {
    const auto pos = static_cast<std::uint32_t>(t);
    const auto r = static_cast<std::uint32_t>(t + rng.uniform_below(population - t));
    const auto picked = at(r);
    moved[r] = at(pos);
    out[t] = picked;
  }
  return out;
}

std::vector<double> unigram_weights(const SampledGraph& graph, double alpha) {
  if (!(alpha >= 0.0)) throw DomainError("alpha must be nonnegative");
  std::vector<double> w(graph.n(), 0.0);
  double total = 0.0;
  for (std::size_t v = 0; v < graph.n(); ++v) {
    const auto deg = graph.degree(v);
    if (deg == 0) continue;
    w[v] = alpha == 1.0 ? static_cast<double>(deg) : std::pow(static_cast<double>(deg), alpha);
    total += w[v];
  }
  if (!(total > 0.0)) throw ValidationError("unigram distribution undefined: every degree is zero");
  for (double& x : w) x /= total;
  return w;
}

Sampler::Sampler(const SampledGraph& graph, SamplingScheme scheme) : graph_(&graph), scheme_(std::move(scheme)) {
  validate_scheme(scheme_);
  std::visit(Overloaded{
                 [&](const UniformVertex& s) {
                   if (s.k > graph.n()) {
                     throw ValidationError("uniform_vertex k=" + std::to_string(s.k) + " exceeds n=" +
                                           std::to_string(graph.n()));
                   }
                 },
                 [&](const UniformEdgeInduced& s) {
                   if (s.k > graph.edge_count()) {
                     throw ValidationError("uniform_edge_induced k=" + std::to_string(s.k) + " exceeds edge count " +
                                           std::to_string(graph.edge_count()));
                   }
                 },
                 [&](const UniformEdgeUnigram& s) {
                   if (s.k > graph.edge_count()) {
                     throw ValidationError("uniform_edge_unigram k=" + std::to_string(s.k) + " exceeds edge count " +
                                           std::to_string(graph.edge_count()));
                   }
                   unigram_ = unigram_weights(graph, s.alpha);
                 },
                 [&](const RandomWalkUnigram& s) {
                   if (graph.edge_count() == 0) throw ValidationError("random_walk_unigram requires at least one edge");
                   unigram_ = unigram_weights(graph, s.alpha);
                 },
             },
             scheme_);
  if (!unigram_.empty()) unigram_table_ = AliasTable(unigram_);
}

void Sampler::append_induced(const std::vector<std::uint32_t>& vertices, SampleBatch& batch) const {
  for (std::size_t a = 0; a < vertices.size(); ++a) {
    for (std::size_t b = a + 1; b < vertices.size(); ++b) {
      const auto i = vertices[a], j = vertices[b];
      batch.pairs.push_back({i, j, graph_->has_edge(i, j) ? PairLabel::positive : PairLabel::negative});
    }
  }
}

void Sampler::append_negatives(std::uint32_t u, std::size_t l, bool check, RngStream& rng,
                               SampleBatch& batch) const {
  for (std::size_t r = 0; r < l; ++r) {
    const auto v = static_cast<std::uint32_t>(unigram_table_.sample(rng));
    if (v == u) continue;
    if (check && graph_->has_edge(u, v)) continue;
    batch.pairs.push_back({u, v, PairLabel::negative});
  }
}

SampleBatch Sampler::draw(RngStream& rng) const { return draw(rng, nullptr); }

SampleBatch Sampler::draw(RngStream& rng, std::vector<std::uint32_t>* visited) const {
  const SampledGraph& g = *graph_;
  SampleBatch batch;
  auto edge_vertices = [&](const std::vector<std::uint32_t>& edge_ids) {
    std::vector<std::uint32_t> vertices;
    std::unordered_set<std::uint32_t> seen;
    for (auto e : edge_ids) {
      const auto [i, j] = g.edges()[e];
      if (seen.insert(i).second) vertices.push_back(i);
      if (seen.insert(j).second) vertices.push_back(j);
    }
    return vertices;
  };
  std::visit(Overloaded{
                 [&](const UniformVertex& s) {
                   auto vertices = sample_without_replacement(g.n(), s.k, rng);
                   batch.pairs.reserve(s.k * (s.k - 1) / 2);
                   append_induced(vertices, batch);
                   if (visited) *visited = std::move(vertices);
                 },
                 [&](const UniformEdgeInduced& s) {
                   auto vertices = edge_vertices(sample_without_replacement(g.edge_count(), s.k, rng));
                   append_induced(vertices, batch);
                   if (visited) *visited = std::move(vertices);
                 },
                 [&](const UniformEdgeUnigram& s) {
                   const auto edge_ids = sample_without_replacement(g.edge_count(), s.k, rng);
                   for (auto e : edge_ids) {
                     const auto [i, j] = g.edges()[e];
                     batch.pairs.push_back({i, j, PairLabel::positive});
                   }
                   auto vertices = edge_vertices(edge_ids);
                   for (auto u : vertices) append_negatives(u, s.l, s.check_non_edges, rng, batch);
                   if (visited) *visited = std::move(vertices);
                 },
                 [&](const RandomWalkUnigram& s) {
                   // Stationary start: an endpoint of a uniform edge has law deg/2E.
                   const auto& [a, b] = g.edges()[rng.uniform_below(g.edge_count())];
                   std::vector<std::uint32_t> path;
                   path.reserve(s.k + 1);
                   path.push_back(rng.uniform_below(2) == 0 ? a : b);
                   for (std::size_t t = 0; t < s.k; ++t) {
                     const auto nbrs = g.neighbors(path.back());
                     const auto next = nbrs[rng.uniform_below(nbrs.size())];
                     batch.pairs.push_back({path.back(), next, PairLabel::positive});
                     path.push_back(next);
                   }
                   for (auto u : path) append_negatives(u, s.l, s.check_non_edges, rng, batch);
                   if (visited) *visited = std::move(path);
                 },
             },
             scheme_);
  return batch;
}

SampleBatch draw_sample(const SampledGraph& graph, const SamplingScheme& scheme, RngStream& rng) {
  return Sampler(graph, scheme).draw(rng);
}

SamplingWeights::SamplingWeights(GraphonSpec spec, SamplingScheme scheme)
    : spec_(std::move(spec)), scheme_(std::move(scheme)) {
  spec_.validate();
  validate_scheme(scheme_);
  std::visit(Overloaded{
                 [](const UniformVertex&) {},
                 [](const UniformEdgeInduced&) {},
                 [&](const auto& s) { alpha_ = s.alpha; },
             },
             scheme_);
  moments_ = graphon_moments(spec_, alpha_);
}

double SamplingWeights::degree(double l) const { return degree_function(spec_, l); }

double SamplingWeights::f(double l, double lp, int a) const {
  const bool needs_degrees = !std::holds_alternative<UniformVertex>(scheme_);
  return needs_degrees ? f_with_degrees(l, lp, a, degree(l), degree(lp)) : f_with_degrees(l, lp, a, 0.0, 0.0);
}

double SamplingWeights::f_with_degrees(double l, double lp, int a, double dl, double dlp) const {
  if (a != 0 && a != 1) throw DomainError("edge indicator must be 0 or 1");
  graphon_value(spec_, l, lp);  // domain check
  const double ew = moments_.edge_density;
  const double ewa = moments_.degree_moment;
  auto unigram_cross = [&] { return dl * std::pow(dlp, alpha_) + dlp * std::pow(dl, alpha_); };
  auto positive_rate = [&](double scale) {
    if (!(spec_.rho > 0.0)) throw DomainError("edge sampling weight undefined for rho = 0");
    return scale / (ew * spec_.rho);
  };
  return std::visit(Overloaded{
                        [&](const UniformVertex& s) {
                          return static_cast<double>(s.k) * static_cast<double>(s.k - 1);
                        },
                        [&](const UniformEdgeUnigram& s) {
                          const double k = static_cast<double>(s.k), lneg = static_cast<double>(s.l);
                          return a == 1 ? positive_rate(2.0 * k) : 2.0 * k * lneg / (ew * ewa) * unigram_cross();
                        },
                        [&](const UniformEdgeInduced& s) {
                          const double k = static_cast<double>(s.k);
                          const double induced = 4.0 * k * (k - 1.0) * dl * dlp / (ew * ew);
                          return a == 1 ? positive_rate(4.0 * k) + induced : induced;
                        },
                        [&](const RandomWalkUnigram& s) {
                          const double k = static_cast<double>(s.k), lneg = static_cast<double>(s.l);
                          return a == 1 ? positive_rate(2.0 * k)
                                        : lneg * (k + 1.0) / (ew * ewa) * unigram_cross();
                        },
                    },
                    scheme_);
}

double SamplingWeights::tilde_f1(double l, double lp) const {
  const double w = graphon_value(spec_, l, lp) / (spec_.rho > 0.0 ? spec_.rho : 1.0);
  const double wn = spec_.rho * w;
  const double ew = moments_.edge_density;
  return std::visit(Overloaded{
                        [&](const UniformVertex& s) {
                          return static_cast<double>(s.k) * static_cast<double>(s.k - 1) * wn;
                        },
                        [&](const UniformEdgeInduced& s) {
                          const double k = static_cast<double>(s.k);
                          return 4.0 * k * w / ew + 4.0 * k * (k - 1.0) * degree(l) * degree(lp) * wn / (ew * ew);
                        },
                        // f(.,.,1) * rho * W with the rho cancelled exactly
                        [&](const auto& s) { return 2.0 * static_cast<double>(s.k) * w / ew; },
                    },
                    scheme_);
}

double SamplingWeights::tilde_f0(double l, double lp) const {
  return f(l, lp, 0) * (1.0 - graphon_value(spec_, l, lp));
}

double sampling_weight_f(const GraphonSpec& spec, const SamplingScheme& scheme, double l, double lp, int a) {
  return SamplingWeights(spec, scheme).f(l, lp, a);
}

TildeWeights tilde_weights(const GraphonSpec& spec, const SamplingScheme& scheme, double l, double lp) {
  const SamplingWeights w(spec, scheme);
  return {w.tilde_f1(l, lp), w.tilde_f0(l, lp)};
}

std::vector<PairEstimate> estimate_pair_probability(const SampledGraph& graph, const SamplingScheme& scheme,
                                                    const std::vector<Edge>& pairs, std::size_t trials,
                                                    RngStream& rng, PairEstimator estimator,
                                                    const SamplingWeights* weights) {
  if (trials < 1) throw ValidationError("trials must be at least 1");
  const std::size_t n = graph.n();
  std::unordered_map<std::uint64_t, std::size_t> index;
  // incident[v] lists (pair index, other endpoint) for tested pairs touching v.
  std::unordered_map<std::uint32_t, std::vector<std::pair<std::size_t, std::uint32_t>>> incident;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    if (i == j || i >= n || j >= n) throw ValidationError("tested pairs must be distinct vertices < n");
    index.emplace(pair_key(i, j), p);
    incident[i].emplace_back(p, j);
    incident[j].emplace_back(p, i);
  }

  const Sampler sampler(graph, scheme);
  std::vector<double> sum(pairs.size(), 0.0), sumsq(pairs.size(), 0.0), draw_value(pairs.size(), 0.0);
  std::vector<std::size_t> touched;
  std::vector<std::uint32_t> visited;

  if (estimator == PairEstimator::frequency) {
    for (std::size_t t = 0; t < trials; ++t) {
      const auto batch = sampler.draw(rng);
      touched.clear();
      for (const auto& pr : batch.pairs) {
        const auto it = index.find(pair_key(pr.i, pr.j));
        if (it == index.end() || draw_value[it->second] != 0.0) continue;
        draw_value[it->second] = 1.0;
        touched.push_back(it->second);
      }
      for (auto p : touched) {
        sum[p] += 1.0;
        sumsq[p] += 1.0;
        draw_value[p] = 0.0;
      }
    }
  } else {
    const auto& ug = sampler.unigram();
    std::size_t k = 0, l = 0;
    bool check = true, walk = false;
    std::visit(Overloaded{
                   [&](const RandomWalkUnigram& s) { k = s.k, l = s.l, check = s.check_non_edges, walk = true; },
                   [&](const UniformEdgeUnigram& s) { k = s.k, l = s.l, check = s.check_non_edges; },
                   [](const auto&) {
                     throw ValidationError("conditional estimator needs a unigram negative-sampling scheme");
                   },
               },
               scheme);
    auto negative_rate = [&](std::uint32_t u, std::uint32_t v) {
      return (check && graph.has_edge(u, v)) ? 0.0 : static_cast<double>(l) * ug[v];
    };
    const double edge_rate = static_cast<double>(k) / static_cast<double>(graph.edge_count());
    for (std::size_t t = 0; t < trials; ++t) {
      sampler.draw(rng, &visited);
      touched.clear();
      for (std::size_t pos = 0; pos < visited.size(); ++pos) {
        const auto u = visited[pos];
        const auto it = incident.find(u);
        if (it == incident.end()) continue;
        for (const auto& [p, v] : it->second) {
          double value = negative_rate(u, v);
          if (walk && pos + 1 < visited.size() && graph.has_edge(u, v)) {
            value += 1.0 / static_cast<double>(graph.degree(u));
          }
          if (value == 0.0) continue;
          if (draw_value[p] == 0.0) touched.push_back(p);
          draw_value[p] += value;
        }
      }
      for (auto p : touched) {
        sum[p] += draw_value[p];
        sumsq[p] += draw_value[p] * draw_value[p];
        draw_value[p] = 0.0;
      }
    }
    if (!walk) {
      // Positive inclusion under uniform edge sampling is exactly k/E.
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        if (graph.has_edge(pairs[p].first, pairs[p].second)) {
          const double T = static_cast<double>(trials);
          sumsq[p] += 2.0 * edge_rate * sum[p] + T * edge_rate * edge_rate;
          sum[p] += T * edge_rate;
        }
      }
    }
  }

  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  const double T = static_cast<double>(trials);
  std::vector<PairEstimate> out;
  out.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    PairEstimate e;
    e.i = i;
    e.j = j;
    e.a_ij = graph.a(i, j);
    const double mean = sum[p] / T;
    const double var = trials > 1 ? std::max(0.0, (sumsq[p] - T * mean * mean) / (T - 1.0)) : 0.0;
    e.mc_estimate = n2 * mean;
    e.std_err = n2 * std::sqrt(var / T);
    if (weights != nullptr) e.formula_value = weights->f(graph.latents()[i], graph.latents()[j], e.a_ij);
    out.push_back(e);
  }
  return out;
}

void write_pair_estimates(const std::vector<PairEstimate>& estimates, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "pair_i,pair_j,a_ij,mc_estimate,formula_value,std_err\n";
  for (const auto& e : estimates) {
    out << e.i << ',' << e.j << ',' << e.a_ij << ',' << fmt_double(e.mc_estimate) << ','
        << fmt_double(e.formula_value) << ',' << fmt_double(e.std_err) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace gemb

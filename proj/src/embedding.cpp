#include "gemb/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gemb/error.hpp"

namespace gemb {

namespace {

double softplus(double y) { return std::max(y, 0.0) + std::log1p(std::exp(-std::abs(y))); }

double sigmoid(double y) {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

// Row-pointer similarity used in the hot loops.
inline double similarity_raw(const double* w, const double* wp, std::size_t d_plus, std::size_t d) {
  double pos = 0.0, neg = 0.0;
  for (std::size_t r = 0; r < d_plus; ++r) pos += w[r] * wp[r];
  for (std::size_t r = d_plus; r < d; ++r) neg += w[r] * wp[r];
  return pos - neg;
}

// grad += scale * S w
inline void add_signed(double* grad, const double* w, double scale, std::size_t d_plus, std::size_t d) {
  for (std::size_t r = 0; r < d_plus; ++r) grad[r] += scale * w[r];
  for (std::size_t r = d_plus; r < d; ++r) grad[r] -= scale * w[r];
}

}  // namespace

void SimilaritySignature::validate() const {
  if (d_plus + d_minus < 1) throw ValidationError("signature must have d_plus + d_minus >= 1");
}

Eigen::MatrixXd EmbeddingState::gram() const {
  Eigen::VectorXd s(signature.dim());
  for (std::size_t r = 0; r < signature.dim(); ++r) s[static_cast<Eigen::Index>(r)] = r < signature.d_plus ? 1.0 : -1.0;
  return vectors * s.asDiagonal() * vectors.transpose();
}

void TrainConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ValidationError("step_size must be positive");
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (!(clip_bound > 0.0)) throw ValidationError("clip_bound must be positive");
  if (!(init_scale > 0.0)) throw ValidationError("init_scale must be positive");
  if (!(min_step_fraction >= 0.0 && min_step_fraction <= 1.0)) {
    throw ValidationError("min_step_fraction must lie in [0,1]");
  }
  signature.validate();
  validate_scheme(scheme);
}

double similarity(const SimilaritySignature& sig, std::span<const double> w, std::span<const double> wp) {
  if (w.size() != sig.dim() || wp.size() != sig.dim()) {
    throw DomainError("similarity: vectors must have length " + std::to_string(sig.dim()));
  }
  return similarity_raw(w.data(), wp.data(), sig.d_plus, sig.dim());
}

LossGrad loss_and_grad(double y, int x) {
  const double xd = x != 0 ? 1.0 : 0.0;
  return {softplus(y) - xd * y, sigmoid(y) - xd};
}

double batch_loss(const EmbeddingState& emb, const SampleBatch& batch) {
  double total = 0.0;
  for (const auto& p : batch.pairs) {
    total += loss_and_grad(similarity(emb.signature, emb.row(p.i), emb.row(p.j)), p.target()).loss;
  }
  return total;
}

EmbeddingMatrix batch_gradient(const EmbeddingState& emb, const SampleBatch& batch) {
  const std::size_t d = emb.signature.dim(), dp = emb.signature.d_plus;
  EmbeddingMatrix grad = EmbeddingMatrix::Zero(emb.vectors.rows(), emb.vectors.cols());
  for (const auto& p : batch.pairs) {
    const double* wi = emb.vectors.row(p.i).data();
    const double* wj = emb.vectors.row(p.j).data();
    const double g = loss_and_grad(similarity_raw(wi, wj, dp, d), p.target()).dloss_dy;
    add_signed(grad.row(p.i).data(), wj, g, dp, d);
    add_signed(grad.row(p.j).data(), wi, g, dp, d);
  }
  return grad;
}

EmbeddingState initial_embedding(std::size_t n, const TrainConfig& config) {
  EmbeddingState emb;
  emb.signature = config.signature;
  emb.box_bound = config.clip_bound;
  emb.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(config.signature.dim()));
  RngStream rng(config.seed, streams::kInit);
  for (Eigen::Index i = 0; i < emb.vectors.size(); ++i) {
    emb.vectors.data()[i] = config.init_scale * (2.0 * rng.uniform01() - 1.0);
  }
  emb.vectors = emb.vectors.cwiseMax(-config.clip_bound).cwiseMin(config.clip_bound);
  return emb;
}

EmbeddingState train(const SampledGraph& graph, const TrainConfig& config, TrainStats* stats) {
  config.validate();
  if (graph.n() == 0) throw ValidationError("cannot train on an empty graph");
  EmbeddingState emb = initial_embedding(graph.n(), config);
  const Sampler sampler(graph, config.scheme);
  RngStream rng(config.seed, streams::kTrain);

  const std::size_t d = config.signature.dim(), dp = config.signature.d_plus;
  const double bound = config.clip_bound;
  const std::size_t pairs_per_epoch = std::max<std::size_t>(graph.edge_count(), 1);
  const double planned_pairs = static_cast<double>(pairs_per_epoch) * static_cast<double>(config.epochs);
  const double planned_draws = static_cast<double>(config.draws_per_epoch) * static_cast<double>(config.epochs);

  EmbeddingMatrix grad = EmbeddingMatrix::Zero(emb.vectors.rows(), emb.vectors.cols());
  std::vector<std::uint8_t> is_touched(graph.n(), 0);
  std::vector<std::uint32_t> touched;
  std::size_t iteration = 0, pairs_used = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::size_t epoch_pairs = 0, epoch_draws = 0;
    while (config.draws_per_epoch > 0 ? epoch_draws < config.draws_per_epoch : epoch_pairs < pairs_per_epoch) {
      SampleBatch batch = sampler.draw(rng);
      if (config.dedupe) dedupe_pairs(batch);

      double eta = config.step_size;
      if (config.schedule == StepSchedule::linear) {
        const double progress = config.draws_per_epoch > 0 ? static_cast<double>(iteration) / planned_draws
                                                           : static_cast<double>(pairs_used) / planned_pairs;
        eta *= std::max(1.0 - progress, config.min_step_fraction);
      }

      for (const auto& p : batch.pairs) {
        const double* wi = emb.vectors.row(p.i).data();
        const double* wj = emb.vectors.row(p.j).data();
        const double y = similarity_raw(wi, wj, dp, d);
        const double g = loss_and_grad(y, p.target()).dloss_dy;
        if (!std::isfinite(y) || !std::isfinite(g)) {
          std::ostringstream msg;
          msg << "non-finite gradient at iteration " << iteration << ", pair (" << p.i << ", " << p.j
              << "), logit " << y;
          throw NumericalError(msg.str());
        }
        add_signed(grad.row(p.i).data(), wj, g, dp, d);
        add_signed(grad.row(p.j).data(), wi, g, dp, d);
        for (auto v : {p.i, p.j}) {
          if (!is_touched[v]) {
            is_touched[v] = 1;
            touched.push_back(v);
          }
        }
      }
      for (auto v : touched) {
        double* w = emb.vectors.row(v).data();
        double* gv = grad.row(v).data();
        for (std::size_t r = 0; r < d; ++r) {
          w[r] = std::clamp(w[r] - eta * gv[r], -bound, bound);
          gv[r] = 0.0;
        }
        is_touched[v] = 0;
      }
      touched.clear();

      ++iteration;
      ++epoch_draws;
      epoch_pairs += batch.pairs.size();
      pairs_used += batch.pairs.size();
    }
  }
  if (stats != nullptr) *stats = {iteration, pairs_used};
  return emb;
}

double empirical_risk(const SampledGraph& graph, const SamplingWeights& weights, const EmbeddingState& emb) {
  const std::size_t n = graph.n();
  if (emb.n() != n) throw ValidationError("embedding size does not match the graph");
  if (n == 0) return 0.0;
  const auto& lat = graph.latents();
  std::vector<double> deg(n);
  for (std::size_t i = 0; i < n; ++i) deg[i] = degree_function(weights.spec(), lat[i]);
  const std::size_t d = emb.signature.dim(), dp = emb.signature.d_plus;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const int a = graph.a(i, j);
      const double f = weights.f_with_degrees(lat[i], lat[j], a, deg[i], deg[j]);
      const double y = similarity_raw(emb.vectors.row(i).data(), emb.vectors.row(j).data(), dp, d);
      total += f * loss_and_grad(y, a).loss;
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n));
}

Eigen::VectorXd gradient_estimate(const Sampler& sampler, const EmbeddingState& emb, std::size_t vertex,
                                  RngStream& rng) {
  if (vertex >= emb.n()) throw ValidationError("vertex out of range");
  const std::size_t d = emb.signature.dim(), dp = emb.signature.d_plus;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  const auto batch = sampler.draw(rng);
  const auto self = emb.vectors.row(vertex).data();
  for (const auto& p : batch.pairs) {
    if (p.i != vertex && p.j != vertex) continue;
    const auto other = p.i == vertex ? p.j : p.i;
    const double* wo = emb.vectors.row(other).data();
    const double dl = loss_and_grad(similarity_raw(self, wo, dp, d), p.target()).dloss_dy;
    add_signed(g.data(), wo, dl, dp, d);
  }
  return g / static_cast<double>(scheme_k(sampler.scheme()));
}

Eigen::VectorXd gradient_estimate(const SampledGraph& graph, const SamplingScheme& scheme,
                                  const EmbeddingState& emb, std::size_t vertex, RngStream& rng) {
  return gradient_estimate(Sampler(graph, scheme), emb, vertex, rng);
}

void write_embedding(const EmbeddingState& emb, const std::filesystem::path& csv_path,
                     const std::filesystem::path& sidecar_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw Error("cannot open " + csv_path.string() + " for writing");
  char buf[32];
  for (Eigen::Index i = 0; i < emb.vectors.rows(); ++i) {
    for (Eigen::Index r = 0; r < emb.vectors.cols(); ++r) {
      std::snprintf(buf, sizeof buf, "%.17g", emb.vectors(i, r));
      if (r > 0) csv << ',';
      csv << buf;
    }
    csv << '\n';
  }
  nlohmann::json side = {{"n", emb.n()},
                         {"d_plus", emb.signature.d_plus},
                         {"d_minus", emb.signature.d_minus},
                         {"box_bound", emb.box_bound}};
  std::ofstream js(sidecar_path, std::ios::binary);
  if (!js) throw Error("cannot open " + sidecar_path.string() + " for writing");
  js << side.dump(2) << '\n';
  if (!csv || !js) throw Error("write failed for embedding files");
}

EmbeddingState read_embedding(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path) {
  std::ifstream js(sidecar_path);
  if (!js) throw Error("cannot open " + sidecar_path.string());
  const auto side = nlohmann::json::parse(js);
  EmbeddingState emb;
  emb.signature = {side.at("d_plus").get<std::size_t>(), side.at("d_minus").get<std::size_t>()};
  emb.box_bound = side.at("box_bound").get<double>();
  const auto n = side.at("n").get<std::size_t>();
  const std::size_t d = emb.signature.dim();
  emb.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::ifstream csv(csv_path);
  if (!csv) throw Error("cannot open " + csv_path.string());
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(csv, line)) throw ValidationError(csv_path.string() + ": expected " + std::to_string(n) + " rows");
    std::istringstream ss(line);
    std::string cell;
    for (std::size_t r = 0; r < d; ++r) {
      if (!std::getline(ss, cell, ',')) {
        throw ValidationError(csv_path.string() + ":" + std::to_string(i + 1) + ": expected " + std::to_string(d) +
                              " columns");
      }
      emb.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = std::strtod(cell.c_str(), nullptr);
    }
  }
  return emb;
}

}  // namespace gemb

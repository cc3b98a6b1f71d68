#include <doctest.h>

#include <cmath>

#include "gemb/diagnostics.hpp"
#include "gemb/error.hpp"

using namespace gemb;

namespace {

EmbeddingState embedding_from(const Eigen::MatrixXd& v, SimilaritySignature sig) {
  EmbeddingState e;
  e.signature = sig;
  e.vectors = v;
  return e;
}

const GraphonSpec two_block = GraphonSpec::sbm_pq(0.7, 0.3, 2);

}  // namespace

TEST_CASE("l1 error hand case") {
  Eigen::MatrixXd v(2, 2);
  v << 1, 0, 0, 1;
  const auto emb = embedding_from(v, {2, 0});
  const SampledGraph g(2, {}, {0.1, 0.9}, {});
  const BlockKernel zero{{1.0}, Eigen::MatrixXd::Zero(1, 1)};
  CHECK(l1_kernel_error(emb, g, zero) == doctest::Approx(0.5));
}

TEST_CASE("l1 error of a planted oracle and of a constant offset") {
  // a rank-one kernel K = u u^T is realized exactly by embeddings w_i = u(lambda_i)
  const auto g = sample_graph(two_block, 40, 1);
  const double u[2] = {0.8, -0.3};
  BlockKernel k{{0.5, 0.5}, Eigen::MatrixXd(2, 2)};
  k.values << u[0] * u[0], u[0] * u[1], u[1] * u[0], u[1] * u[1];
  Eigen::MatrixXd v(40, 2);
  for (int i = 0; i < 40; ++i) v.row(i) << u[k.block_of(g.latents()[i])], 0.0;
  auto emb = embedding_from(v, {1, 1});
  CHECK(l1_kernel_error(emb, g, k) == doctest::Approx(0.0));
  // second coordinate set to c on the negative part adds exactly -c^2 to every Gram entry
  const double c = 0.5;
  emb.vectors.col(1).setConstant(c);
  CHECK(l1_kernel_error(emb, g, k) == doctest::Approx(c * c));
  // latent and vertex overloads agree with the block overload
  CHECK(l1_kernel_error(emb, g, LatentKernel([&](double l, double lp) { return k(l, lp); })) ==
        doctest::Approx(c * c));
  const Eigen::MatrixXd gram = emb.gram();
  CHECK(l1_kernel_error(emb, VertexKernel([&](std::size_t i, std::size_t j) { return gram(i, j); })) == 0.0);
}

TEST_CASE("l1 error is invariant under signature-preserving maps") {
  const auto g = sample_graph(two_block, 30, 2);
  TrainConfig c;
  c.signature = {1, 1};
  c.init_scale = 1.0;
  const auto emb = initial_embedding(30, c);
  const double s = 0.9;
  Eigen::Matrix2d boost;
  boost << std::cosh(s), std::sinh(s), std::sinh(s), std::cosh(s);
  auto moved = emb;
  moved.vectors = emb.vectors * boost.transpose();
  const auto k = sbm_block_limit_krein(two_block, UniformVertex{10});
  CHECK(l1_kernel_error(moved, g, k) == doctest::Approx(l1_kernel_error(emb, g, k)).epsilon(1e-12));
}

TEST_CASE("l1 error checks sizes") {
  const SampledGraph g(3, {}, {0.1, 0.2, 0.3}, {});
  const auto emb = embedding_from(Eigen::MatrixXd::Zero(2, 1), {1, 0});
  CHECK_THROWS_AS(l1_kernel_error(emb, g, BlockKernel{{1.0}, Eigen::MatrixXd::Zero(1, 1)}), ValidationError);
}

TEST_CASE("zero-one link loss") {
  Eigen::MatrixXi a(3, 3);
  a << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  Eigen::MatrixXd s(3, 3);
  s << 0, 0.9, 0.2, 0.9, 0, 0.4, 0.2, 0.4, 0;
  // ordered pairs: (0,1) edge 0.9 ok, (0,2) non-edge 0.2 ok, (1,2) edge 0.4 miss; each twice
  CHECK(link_prediction_loss(s, a, ZeroOneLoss{0.5}) == doctest::Approx(2.0 / 6));
  CHECK(link_prediction_loss(s, a, ZeroOneLoss{0.3}) == doctest::Approx(0.0));
  CHECK(link_prediction_loss(s, a, ZeroOneLoss{0.95}) == doctest::Approx(4.0 / 6));
}

TEST_CASE("zero-one loss decreases as the threshold moves into the gap") {
  const auto g = sample_graph(two_block, 25, 3);
  const auto n = static_cast<Eigen::Index>(g.n());
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) s(i, j) = g.a(i, j) ? 2.0 + 0.01 * (i + j) : -1.0 - 0.01 * (i + j);
  }
  double previous = 2.0;
  for (double tau = -3.0; tau <= 1.5; tau += 0.05) {
    const double loss = link_prediction_loss(s, g, ZeroOneLoss{tau});
    CHECK(loss <= previous);
    previous = loss;
  }
  CHECK(previous == 0.0);
}

TEST_CASE("cross-entropy and hinge link losses") {
  const auto g = sample_graph(two_block, 20, 4);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(20, 20);
  CHECK(link_prediction_loss(zero, g, CrossEntropyLoss{}) == doctest::Approx(std::log(2.0)));
  // clipping keeps the loss finite and bounded by softplus(clip)
  Eigen::MatrixXi a(2, 2);
  a << 0, 1, 1, 0;
  Eigen::MatrixXd s(2, 2);
  s << 0, -1e6, -1e6, 0;
  CHECK(link_prediction_loss(s, a, CrossEntropyLoss{30}) == doctest::Approx(30 + std::log1p(std::exp(-30))));
  // hinge on clipped scores: edge at s = 0.25 costs 0.75, non-edge at 0.25 costs 1.25
  s << 0, 0.25, 0.25, 0;
  CHECK(link_prediction_loss(s, a, HingeLoss{}) == doctest::Approx(0.75));
  a.setZero();
  CHECK(link_prediction_loss(s, a, HingeLoss{}) == doctest::Approx(1.25));
  s << 0, 7, 7, 0;
  CHECK(link_prediction_loss(s, a, HingeLoss{}) == doctest::Approx(2.0));
}

TEST_CASE("variance probe: deterministic and zero cases") {
  const auto g = sample_graph(two_block, 20, 5);
  TrainConfig c;
  c.signature = {2, 1};
  c.init_scale = 0.5;
  const auto emb = initial_embedding(20, c);
  RngStream rng(1, 0);
  const auto full = gradient_variance_probe(g, UniformVertex{20}, emb, 3, 10, rng);
  CHECK(full.variance.cwiseAbs().maxCoeff() < 1e-28);

  EmbeddingState zero = emb;
  zero.vectors.setZero();
  const auto z = gradient_variance_probe(g, RandomWalkUnigram{10, 1, 0.75, true}, zero, 3, 50, rng);
  CHECK(z.mean.isZero(0));
  CHECK(z.variance.isZero(0));
  CHECK_THROWS_AS(gradient_variance_probe(g, UniformVertex{5}, emb, 3, 1, rng), ValidationError);
}

TEST_CASE("variance probe mean converges to the enumerated expectation") {
  // Uniform vertex: E[G_i] = (1/k) sum_j k(k-1)/(n(n-1)) l'(B_ij, a_ij) S w_j.
  const std::size_t n = 25, k = 6;
  const auto g = sample_graph(sbm1(), n, 6);
  TrainConfig c;
  c.signature = {1, 1};
  c.init_scale = 1.0;
  const auto emb = initial_embedding(n, c);
  const std::size_t i = 4;
  Eigen::VectorXd exact = Eigen::VectorXd::Zero(2);
  const double incl = double(k * (k - 1)) / double(n * (n - 1));
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    const double dl = loss_and_grad(similarity(emb.signature, emb.row(i), emb.row(j)), g.a(i, j)).dloss_dy;
    exact[0] += incl * dl * emb.vectors(j, 0);
    exact[1] -= incl * dl * emb.vectors(j, 1);
  }
  exact /= double(k);
  RngStream rng(2, 0);
  const std::size_t trials = 20000;
  const auto m = gradient_variance_probe(g, UniformVertex{k}, emb, i, trials, rng);
  for (int r = 0; r < 2; ++r) CHECK(std::abs(m.mean[r] - exact[r]) <= 3 * std::sqrt(m.variance[r] / trials));
}

TEST_CASE("degree concentration report") {
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  const auto full = GraphonSpec::sbm({1.0}, one);
  const auto complete = sample_graph(full, 30, 1);
  CHECK(complete.edge_count() == 435);
  const auto r = degree_concentration_report(complete, full);
  CHECK(r.max_rel_dev == 0.0);
  CHECK(r.vertices.size() == 30);

  CHECK(degree_concentration_report(sample_graph(sbm1(), 1, 2), sbm1()).vertices.empty());

  Eigen::MatrixXd P(2, 2);
  P << 0.0, 0.0, 0.0, 0.8;
  const auto half_empty = GraphonSpec::sbm({0.5, 0.5}, P);
  const auto g = sample_graph(half_empty, 200, 3);
  const auto rep = degree_concentration_report(g, half_empty);
  std::size_t flagged = 0;
  double max_seen = 0;
  for (const auto& row : rep.vertices) {
    if (row.flagged) {
      ++flagged;
      CHECK(std::isnan(row.relative_deviation));
      CHECK(row.degree == 0);
    } else {
      max_seen = std::max(max_seen, row.relative_deviation);
    }
  }
  CHECK(flagged > 50);
  CHECK(rep.max_rel_dev == max_seen);
}

TEST_CASE("maximum relative degree deviation shrinks with n") {
  double means[3] = {0, 0, 0};
  const std::size_t sizes[3] = {200, 800, 3200};
  for (int s = 0; s < 10; ++s) {
    for (int t = 0; t < 3; ++t) means[t] += degree_concentration_report(sample_graph(sbm1(), sizes[t], 70 + s), sbm1()).max_rel_dev / 10;
  }
  CHECK(means[1] < means[0]);
  CHECK(means[2] < means[1]);
}

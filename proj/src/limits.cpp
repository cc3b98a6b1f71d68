#include "gemb/limits.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "gemb/embedding.hpp"
#include "gemb/error.hpp"

namespace gemb {

namespace {

double logit(double p) { return std::log(p) - std::log1p(-p); }

double sigmoid(double y) {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

}  // namespace

std::size_t BlockKernel::block_of(double l) const {
  double upper = 0.0;
  for (std::size_t c = 0; c + 1 < pi.size(); ++c) {
    upper += pi[c];
    if (l < upper) return c;
  }
  return pi.size() - 1;
}

double BlockKernel::operator()(double l, double lp) const {
  return values(static_cast<Eigen::Index>(block_of(l)), static_cast<Eigen::Index>(block_of(lp)));
}

Eigen::MatrixXd BlockKernel::operator_matrix() const {
  Eigen::VectorXd s(static_cast<Eigen::Index>(pi.size()));
  for (std::size_t c = 0; c < pi.size(); ++c) s[static_cast<Eigen::Index>(c)] = std::sqrt(pi[c]);
  return s.asDiagonal() * values * s.asDiagonal();
}

double unconstrained_limit(const SamplingWeights& weights, double l, double lp) {
  const double t1 = weights.tilde_f1(l, lp);
  const double t0 = weights.tilde_f0(l, lp);
  if (!(t1 + t0 > 0.0)) {
    throw SingularityError("unconstrained limit undefined: tilde_f1 + tilde_f0 = 0 at (" + std::to_string(l) + ", " +
                           std::to_string(lp) + ")");
  }
  if (!(t1 > 0.0) || !(t0 > 0.0)) {
    throw SingularityError("unconstrained limit is infinite: a tilde weight vanishes at (" + std::to_string(l) + ", " +
                           std::to_string(lp) + ")");
  }
  return std::log(t1) - std::log(t0);
}

double unconstrained_limit(const GraphonSpec& spec, const SamplingScheme& scheme, double l, double lp) {
  return unconstrained_limit(SamplingWeights(spec, scheme), l, lp);
}

BlockKernel sbm_block_limit_krein(const GraphonSpec& spec, const SamplingScheme& scheme) {
  const auto& sbm = spec.as_sbm();
  const SamplingWeights weights(spec, scheme);
  const std::size_t kappa = sbm.pi.size();
  BlockKernel kernel{sbm.pi, Eigen::MatrixXd(kappa, kappa)};
  for (std::size_t a = 0; a < kappa; ++a) {
    for (std::size_t b = a; b < kappa; ++b) {
      const double v = unconstrained_limit(weights, spec.block_midpoint(a), spec.block_midpoint(b));
      kernel.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
      kernel.values(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
    }
  }
  return kernel;
}

BlockRisk::BlockRisk(std::vector<double> pi, Eigen::MatrixXd c1, Eigen::MatrixXd c0)
    : pi_(std::move(pi)), c1_(std::move(c1)), c0_(std::move(c0)) {
  const auto kappa = static_cast<Eigen::Index>(pi_.size());
  if (kappa == 0 || c1_.rows() != kappa || c1_.cols() != kappa || c0_.rows() != kappa || c0_.cols() != kappa) {
    throw ValidationError("block risk weights must be kappa x kappa");
  }
  const double scale = (c1_ + c0_).maxCoeff();
  if (!(scale > 0.0) || c1_.minCoeff() < 0.0 || c0_.minCoeff() < 0.0) {
    throw ValidationError("block risk weights must be nonnegative and not all zero");
  }
  // The minimizer is invariant to a common positive scale; normalizing keeps L = 1/4.
  c1_ /= scale;
  c0_ /= scale;
  sqrt_pi_.resize(kappa);
  for (Eigen::Index c = 0; c < kappa; ++c) sqrt_pi_[c] = std::sqrt(pi_[static_cast<std::size_t>(c)]);
}

BlockRisk BlockRisk::from_scheme(const GraphonSpec& spec, const SamplingScheme& scheme) {
  const auto& sbm = spec.as_sbm();
  const SamplingWeights weights(spec, scheme);
  const auto kappa = static_cast<Eigen::Index>(sbm.pi.size());
  Eigen::MatrixXd c1(kappa, kappa), c0(kappa, kappa);
  for (Eigen::Index a = 0; a < kappa; ++a) {
    for (Eigen::Index b = 0; b < kappa; ++b) {
      const double l = spec.block_midpoint(static_cast<std::size_t>(a));
      const double lp = spec.block_midpoint(static_cast<std::size_t>(b));
      c1(a, b) = weights.tilde_f1(l, lp);
      c0(a, b) = weights.tilde_f0(l, lp);
    }
  }
  return BlockRisk(sbm.pi, c1, c0);
}

Eigen::MatrixXd BlockRisk::to_kernel(const Eigen::MatrixXd& M) const {
  return sqrt_pi_.cwiseInverse().asDiagonal() * M * sqrt_pi_.cwiseInverse().asDiagonal();
}

Eigen::MatrixXd BlockRisk::to_operator(const Eigen::MatrixXd& K) const {
  return sqrt_pi_.asDiagonal() * K * sqrt_pi_.asDiagonal();
}

double BlockRisk::objective(const Eigen::MatrixXd& M) const {
  const Eigen::MatrixXd K = to_kernel(M);
  double total = 0.0;
  for (Eigen::Index a = 0; a < K.rows(); ++a) {
    for (Eigen::Index b = 0; b < K.cols(); ++b) {
      const double w = pi_[static_cast<std::size_t>(a)] * pi_[static_cast<std::size_t>(b)];
      total += w * (c1_(a, b) * loss_and_grad(K(a, b), 1).loss + c0_(a, b) * loss_and_grad(K(a, b), 0).loss);
    }
  }
  return total;
}

Eigen::MatrixXd BlockRisk::gradient(const Eigen::MatrixXd& M) const {
  const Eigen::MatrixXd K = to_kernel(M);
  Eigen::MatrixXd G(K.rows(), K.cols());
  for (Eigen::Index a = 0; a < K.rows(); ++a) {
    for (Eigen::Index b = 0; b < K.cols(); ++b) {
      const double dk = (c1_(a, b) + c0_(a, b)) * sigmoid(K(a, b)) - c1_(a, b);
      G(a, b) = sqrt_pi_[a] * sqrt_pi_[b] * dk;
    }
  }
  return G;
}

double BlockRisk::lipschitz() const { return 0.25 * (c1_ + c0_).maxCoeff(); }

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& M) {
  const Eigen::MatrixXd sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
}

BlockKernel minimize_psd_block_risk(const BlockRisk& risk, const PsdSolveOptions& options, PsdSolveReport* report) {
  if (!(options.tol > 0.0)) throw ValidationError("tol must be positive");
  const double L = risk.lipschitz();
  const auto kappa = static_cast<Eigen::Index>(risk.pi().size());

  // Warm start: the projection of the zero-gradient point of each entry, when finite.
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(kappa, kappa);
  const Eigen::MatrixXd G0 = risk.gradient(M);
  M = project_psd(M - G0 / L);

  double f = risk.objective(M);
  auto kkt = [&](const Eigen::MatrixXd& X) { return L * (X - project_psd(X - risk.gradient(X) / L)).norm(); };
  std::size_t it = 0;
  for (; it < options.max_iterations; ++it) {
    Eigen::MatrixXd next = project_psd(M - risk.gradient(M) / L);
    const double f_next = risk.objective(next);
    const double decrease = f - f_next;
    M = std::move(next);
    f = f_next;
    if (decrease < options.tol) break;
  }
  const double residual = kkt(M);
  if (it == options.max_iterations) {
    throw ConvergenceError("PSD block solver did not converge in " + std::to_string(options.max_iterations) +
                               " iterations (KKT residual " + std::to_string(residual) + ")",
                           row_major(risk.to_kernel(M)), residual);
  }
  if (report != nullptr) *report = {it + 1, f, residual, M};
  Eigen::MatrixXd K = risk.to_kernel(M);
  K = 0.5 * (K + K.transpose());
  return BlockKernel{risk.pi(), K};
}

BlockKernel sbm_block_limit_psd(const GraphonSpec& spec, const SamplingScheme& scheme, double tol,
                                PsdSolveReport* report) {
  PsdSolveOptions options;
  options.tol = tol;
  return minimize_psd_block_risk(BlockRisk::from_scheme(spec, scheme), options, report);
}

BlockKernel two_block_closed_form(double p, double q) {
  if (!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0)) throw DomainError("p and q must lie in (0,1)");
  double within = 0.0, across = 0.0;
  if (p >= q && p + q >= 1.0) {
    within = logit(p);
    across = logit(q);
  } else if (p >= q) {
    within = logit((1.0 + p - q) / 2.0);
    across = -within;
  } else if (p + q >= 1.0) {
    within = across = logit((p + q) / 2.0);
  }
  Eigen::MatrixXd values(2, 2);
  values << within, across, across, within;
  return BlockKernel{{0.5, 0.5}, values};
}

KernelSignature signature_from_kernel(const BlockKernel& kernel, double threshold) {
  const Eigen::MatrixXd M = kernel.operator_matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()));
  const auto kappa = M.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(kappa));
  for (Eigen::Index i = 0; i < kappa; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(eig.eigenvalues()[a]) > std::abs(eig.eigenvalues()[b]);
  });
  KernelSignature sig;
  sig.eigenfunctions.resize(kappa, kappa);
  for (Eigen::Index r = 0; r < kappa; ++r) {
    const auto idx = order[static_cast<std::size_t>(r)];
    const double mu = eig.eigenvalues()[idx];
    const Eigen::VectorXd v = eig.eigenvectors().col(idx);
    sig.eigenvalues.push_back(mu);
    sig.residuals.push_back((M * v - mu * v).norm());
    for (Eigen::Index c = 0; c < kappa; ++c) {
      sig.eigenfunctions(c, r) = v[c] / std::sqrt(kernel.pi[static_cast<std::size_t>(c)]);
    }
    if (mu >= threshold) ++sig.d_plus;
    else if (mu <= -threshold) ++sig.d_minus;
  }
  return sig;
}

void write_block_kernel(const BlockKernel& kernel, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  char buf[32];
  auto put = [&](double v, bool first) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    if (!first) out << ',';
    out << buf;
  };
  for (std::size_t c = 0; c < kernel.pi.size(); ++c) put(kernel.pi[c], c == 0);
  out << '\n';
  for (Eigen::Index a = 0; a < kernel.values.rows(); ++a) {
    for (Eigen::Index b = 0; b < kernel.values.cols(); ++b) put(kernel.values(a, b), b == 0);
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

BlockKernel read_block_kernel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  auto parse_row = [](const std::string& line) {
    std::vector<double> row;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    return row;
  };
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": missing pi row");
  BlockKernel kernel;
  kernel.pi = parse_row(line);
  const auto kappa = static_cast<Eigen::Index>(kernel.pi.size());
  kernel.values.resize(kappa, kappa);
  for (Eigen::Index a = 0; a < kappa; ++a) {
    if (!std::getline(in, line)) throw ValidationError(path.string() + ": expected " + std::to_string(kappa) + " rows");
    const auto row = parse_row(line);
    if (static_cast<Eigen::Index>(row.size()) != kappa) {
      throw ValidationError(path.string() + ":" + std::to_string(a + 2) + ": wrong column count");
    }
    for (Eigen::Index b = 0; b < kappa; ++b) kernel.values(a, b) = row[static_cast<std::size_t>(b)];
  }
  return kernel;
}

}  // namespace gemb

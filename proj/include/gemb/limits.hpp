#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "gemb/graphon.hpp"
#include "gemb/sampling.hpp"

namespace gemb {

/// Symmetric kernel that is constant on the blocks of the partition induced by pi.
struct BlockKernel {
  std::vector<double> pi;
  Eigen::MatrixXd values;

  std::size_t kappa() const noexcept { return pi.size(); }
  std::size_t block_of(double l) const;
  double operator()(double l, double lp) const;
  /// D^{1/2} K D^{1/2}, the matrix of the kernel as an integral operator.
  Eigen::MatrixXd operator_matrix() const;
};

/// sigma^{-1}(tilde_f1 / (tilde_f1 + tilde_f0)) = log(tilde_f1 / tilde_f0).
double unconstrained_limit(const SamplingWeights& weights, double l, double lp);
double unconstrained_limit(const GraphonSpec& spec, const SamplingScheme& scheme, double l, double lp);

/// Limit of Krein-product Gram matrices: the unconstrained minimizer on every block pair.
BlockKernel sbm_block_limit_krein(const GraphonSpec& spec, const SamplingScheme& scheme);

/// Population risk over block kernels,
///   I[K] = sum_{l,m} pi_l pi_m [c1(l,m) l(K_lm, 1) + c0(l,m) l(K_lm, 0)],
/// parameterized by the operator matrix M = D^{1/2} K D^{1/2}.
class BlockRisk {
 public:
  BlockRisk(std::vector<double> pi, Eigen::MatrixXd c1, Eigen::MatrixXd c0);
  static BlockRisk from_scheme(const GraphonSpec& spec, const SamplingScheme& scheme);

  double objective(const Eigen::MatrixXd& M) const;
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& M) const;
  Eigen::MatrixXd to_kernel(const Eigen::MatrixXd& M) const;
  Eigen::MatrixXd to_operator(const Eigen::MatrixXd& K) const;
  /// Upper bound on the curvature of the objective in M.
  double lipschitz() const;
  const std::vector<double>& pi() const noexcept { return pi_; }

 private:
  std::vector<double> pi_;
  Eigen::VectorXd sqrt_pi_;
  Eigen::MatrixXd c1_, c0_;
};

/// Euclidean projection onto the PSD cone (eigenvalues clipped at zero).
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& M);

struct PsdSolveOptions {
  double tol = 1e-10;
  std::size_t max_iterations = 1'000'000;
};

struct PsdSolveReport {
  std::size_t iterations = 0;
  double objective = 0.0;
  /// Frobenius norm of the projected-gradient step M - P(M - grad / L), times L.
  double kkt_residual = 0.0;
  Eigen::MatrixXd operator_matrix;
};

/// Projected gradient with step 1/L. Stops once the objective decreases by less than tol.
/// Throws ConvergenceError (carrying the last kernel and KKT residual) at the iteration cap.
BlockKernel minimize_psd_block_risk(const BlockRisk& risk, const PsdSolveOptions& options = {},
                                    PsdSolveReport* report = nullptr);

/// Limit of regular-inner-product Gram matrices for an SBM.
BlockKernel sbm_block_limit_psd(const GraphonSpec& spec, const SamplingScheme& scheme, double tol = 1e-10,
                                PsdSolveReport* report = nullptr);

/// Closed-form PSD-constrained minimizer for a balanced two-block SBM(p, q) under uniform
/// vertex sampling.
BlockKernel two_block_closed_form(double p, double q);

struct KernelSignature {
  std::size_t d_plus = 0;
  std::size_t d_minus = 0;
  /// Sorted by decreasing magnitude.
  std::vector<double> eigenvalues;
  /// Column r is the block-constant eigenfunction D^{-1/2} v_r (unit L^2 norm).
  Eigen::MatrixXd eigenfunctions;
  /// ||M v - mu v|| per eigenpair.
  std::vector<double> residuals;
};

/// Eigenvalues >= threshold count as positive, <= -threshold as negative; the rest as zero.
KernelSignature signature_from_kernel(const BlockKernel& kernel, double threshold = 1e-9);

/// First line: pi values; then kappa rows of kernel values. 17 significant digits.
void write_block_kernel(const BlockKernel& kernel, const std::filesystem::path& path);
BlockKernel read_block_kernel(const std::filesystem::path& path);

}  // namespace gemb

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gemb/diagnostics.hpp"
#include "gemb/embedding.hpp"
#include "gemb/graphon.hpp"
#include "gemb/sampling.hpp"

namespace gemb {

enum class InnerProduct { krein, regular };

/// Which limiting kernel a trained embedding is compared against.
struct OracleSelector {
  std::string id;
  SamplingScheme scheme;
  InnerProduct product = InnerProduct::krein;
};

enum class RhoMode {
  fixed,
  /// rho(n) = (log n)^2 / n, capped at 1.
  log_squared_over_n,
};

struct ExperimentConfig {
  GraphonSpec spec;
  RhoMode rho_mode = RhoMode::fixed;
  std::vector<std::size_t> n_grid;
  std::size_t replications = 1;
  std::vector<SamplingScheme> schemes;
  std::vector<SimilaritySignature> signatures;
  /// scheme, signature and seed are filled in per cell.
  TrainConfig train;
  std::vector<OracleSelector> oracles;
  std::string output_path = "out";
  std::uint64_t master_seed = 0;

  void validate() const;
  /// The graphon used at size n (applies rho_mode).
  GraphonSpec spec_at(std::size_t n) const;
};

/// Parses the YAML experiment schema; unknown keys and invariant violations raise
/// ValidationError with the offending key and 1-based line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);
bool equivalent(const ExperimentConfig& a, const ExperimentConfig& b);

/// Seed of the network for (n, replicate); shared by every scheme and signature.
std::uint64_t graph_seed(std::uint64_t master_seed, std::size_t n, std::size_t replicate);
/// Seed of the SGD run for one cell.
std::uint64_t train_seed(std::uint64_t master_seed, std::size_t n, std::size_t replicate, std::size_t scheme_index,
                         std::size_t signature_index);

struct CellId {
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::size_t scheme = 0;
  std::size_t signature = 0;

  std::string to_string() const;
};

/// Comma-separated key=value terms over n, rep, scheme, sig; a cell matches when every term does.
bool cell_matches(const CellId& cell, const std::string& filter);

struct CellFailure {
  CellId cell;
  std::string error;
};

struct SummaryRow {
  std::size_t n = 0;
  std::string scheme;
  std::size_t d_plus = 0;
  std::size_t d_minus = 0;
  std::string oracle;
  double mean_l1_error = 0.0;
  double sd_l1_error = 0.0;
  std::size_t count = 0;
};

struct ExperimentResult {
  std::vector<ConvergenceRecord> records;
  std::vector<SummaryRow> summary;
  std::vector<CellFailure> failures;
};

struct RunOptions {
  std::size_t jobs = 1;
  std::string cell_filter;
  /// When set, metrics.csv, summary.csv and failures.csv are written here.
  std::filesystem::path out_dir;
};

/// Every (n, replicate, scheme, signature) cell: generate, train, score against every oracle.
/// Records are emitted in grid order whatever the completion order.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Header: n,seed,scheme,d_plus,d_minus,oracle,l1_error,epochs,wall_time_s
void write_metrics(const std::vector<ConvergenceRecord>& records, const std::filesystem::path& path);
std::vector<ConvergenceRecord> read_metrics(const std::filesystem::path& path);
void write_summary(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);

}  // namespace gemb

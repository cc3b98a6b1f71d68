#include "gemb/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "gemb/error.hpp"
#include "gemb/limits.hpp"
#include "gemb/rng.hpp"

namespace gemb {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// ---------------------------------------------------------------------------
// YAML helpers

std::string line_of(const YAML::Node& node) {
  const auto mark = node.Mark();
  return mark.line >= 0 ? std::to_string(mark.line + 1) : "?";
}

[[noreturn]] void fail(const YAML::Node& at, const std::string& key, const std::string& message) {
  throw ValidationError("line " + line_of(at) + ": " + key + ": " + message);
}

void reject_unknown(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& context) {
  if (!map.IsMap()) fail(map, context, "expected a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) {
      fail(kv.first, context.empty() ? key : context + "." + key, "unknown key");
    }
  }
}

YAML::Node require(const YAML::Node& map, const std::string& key, const std::string& path) {
  const YAML::Node node = map[key];
  if (!node) fail(map, path, "missing required key");
  return node;
}

template <typename T>
T as(const YAML::Node& node, const std::string& path) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, path, "invalid value '" + (node.IsScalar() ? node.Scalar() : std::string("<non-scalar>")) + "'");
  }
}

template <typename T>
T as_or(const YAML::Node& map, const std::string& key, const std::string& path, T fallback) {
  const YAML::Node node = map[key];
  return node ? as<T>(node, path) : fallback;
}

std::size_t as_count(const YAML::Node& node, const std::string& path) {
  const auto v = as<long long>(node, path);
  if (v < 0) fail(node, path, "must be nonnegative");
  return static_cast<std::size_t>(v);
}

SamplingScheme parse_scheme(const YAML::Node& node, const std::string& path) {
  if (!node.IsMap()) fail(node, path, "expected a mapping with a 'name' key");
  const auto name = as<std::string>(require(node, "name", path + ".name"), path + ".name");
  SamplingScheme scheme;
  auto count = [&](const char* key, std::size_t fallback) {
    const YAML::Node v = node[key];
    return v ? as_count(v, path + "." + key) : fallback;
  };
  if (name == "uniform_vertex") {
    reject_unknown(node, {"name", "k"}, path);
    scheme = UniformVertex{count("k", 100)};
  } else if (name == "uniform_edge_induced") {
    reject_unknown(node, {"name", "k"}, path);
    scheme = UniformEdgeInduced{count("k", 100)};
  } else if (name == "uniform_edge_unigram") {
    reject_unknown(node, {"name", "k", "l", "alpha", "check_non_edges"}, path);
    scheme = UniformEdgeUnigram{count("k", 100), count("l", 1), as_or(node, "alpha", path + ".alpha", 0.75),
                                as_or(node, "check_non_edges", path + ".check_non_edges", true)};
  } else if (name == "random_walk_unigram") {
    reject_unknown(node, {"name", "k", "l", "alpha", "check_non_edges"}, path);
    scheme = RandomWalkUnigram{count("k", 50), count("l", 1), as_or(node, "alpha", path + ".alpha", 0.75),
                               as_or(node, "check_non_edges", path + ".check_non_edges", true)};
  } else {
    fail(node["name"], path + ".name", "unknown scheme '" + name + "'");
  }
  try {
    validate_scheme(scheme);
  } catch (const ValidationError& e) {
    fail(node, path, e.what());
  }
  return scheme;
}

void emit_scheme(YAML::Emitter& out, const SamplingScheme& scheme) {
  out << YAML::Flow << YAML::BeginMap << YAML::Key << "name" << YAML::Value << scheme_name(scheme);
  out << YAML::Key << "k" << YAML::Value << scheme_k(scheme);
  std::visit(Overloaded{
                 [](const UniformVertex&) {},
                 [](const UniformEdgeInduced&) {},
                 [&](const auto& s) {
                   out << YAML::Key << "l" << YAML::Value << s.l;
                   out << YAML::Key << "alpha" << YAML::Value << s.alpha;
                   out << YAML::Key << "check_non_edges" << YAML::Value << s.check_non_edges;
                 },
             },
             scheme);
  out << YAML::EndMap;
}

bool same_scheme(const SamplingScheme& a, const SamplingScheme& b) {
  if (a.index() != b.index()) return false;
  return scheme_label(a) == scheme_label(b);
}

// ---------------------------------------------------------------------------
// CSV helpers

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

constexpr const char* kMetricsHeader = "n,seed,scheme,d_plus,d_minus,oracle,l1_error,epochs,wall_time_s";

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  spec.validate();
  if (n_grid.empty()) throw ValidationError("n_grid must be nonempty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw ValidationError("n_grid entries must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ValidationError("n_grid must be strictly ascending");
  }
  if (replications < 1) throw ValidationError("replications must be at least 1");
  if (schemes.empty()) throw ValidationError("schemes must be nonempty");
  if (signatures.empty()) throw ValidationError("signatures must be nonempty");
  for (const auto& s : schemes) validate_scheme(s);
  for (const auto& s : signatures) s.validate();
  std::set<std::string> ids;
  for (const auto& o : oracles) {
    if (o.id.empty()) throw ValidationError("oracle id must be nonempty");
    if (!ids.insert(o.id).second) throw ValidationError("duplicate oracle id '" + o.id + "'");
    validate_scheme(o.scheme);
  }
  TrainConfig t = train;
  t.scheme = schemes.front();
  t.signature = signatures.front();
  t.validate();
}

GraphonSpec ExperimentConfig::spec_at(std::size_t n) const {
  GraphonSpec s = spec;
  if (rho_mode == RhoMode::log_squared_over_n) {
    const double ln = std::log(static_cast<double>(n));
    s.rho = n > 1 ? std::min(1.0, ln * ln / static_cast<double>(n)) : 1.0;
  }
  return s;
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ValidationError("line " + std::to_string(e.mark.line + 1) + ": malformed YAML: " + e.msg);
  }
  if (!root || !root.IsMap()) throw ValidationError("line 1: config must be a YAML mapping");
  reject_unknown(root, {"graphon", "n_grid", "replications", "schemes", "signatures", "train", "oracles",
                        "output_path", "master_seed"},
                 "");
  ExperimentConfig cfg;

  // graphon
  const auto g = require(root, "graphon", "graphon");
  const auto kind = as<std::string>(require(g, "kind", "graphon.kind"), "graphon.kind");
  double rho = 1.0;
  if (const auto r = g["rho"]) {
    if (r.IsScalar() && r.Scalar() == "log_squared_over_n") {
      cfg.rho_mode = RhoMode::log_squared_over_n;
    } else {
      rho = as<double>(r, "graphon.rho");
    }
  }
  if (kind == "sbm") {
    reject_unknown(g, {"kind", "pi", "P", "rho"}, "graphon");
    const auto pi_node = require(g, "pi", "graphon.pi");
    const auto pi = as<std::vector<double>>(pi_node, "graphon.pi");
    const auto p_node = require(g, "P", "graphon.P");
    const auto flat = as<std::vector<double>>(p_node, "graphon.P");
    if (flat.size() != pi.size() * pi.size()) {
      fail(p_node, "graphon.P", "expected " + std::to_string(pi.size() * pi.size()) + " row-major entries");
    }
    const auto kappa = static_cast<Eigen::Index>(pi.size());
    Eigen::MatrixXd P(kappa, kappa);
    for (Eigen::Index i = 0; i < kappa; ++i) {
      for (Eigen::Index j = 0; j < kappa; ++j) P(i, j) = flat[static_cast<std::size_t>(i * kappa + j)];
    }
    cfg.spec = GraphonSpec{SbmKernel{pi, P}, rho};
    try {
      cfg.spec.validate();
    } catch (const ValidationError& e) {
      const std::string what = e.what();
      const bool about_pi = what.find("pi") == 0;
      fail(about_pi ? pi_node : p_node, about_pi ? "graphon.pi" : "graphon.P", what);
    }
  } else if (kind == "cosine") {
    reject_unknown(g, {"kind", "a", "b", "rho"}, "graphon");
    cfg.spec = GraphonSpec{CosineKernel{as<double>(require(g, "a", "graphon.a"), "graphon.a"),
                                        as<double>(require(g, "b", "graphon.b"), "graphon.b")},
                           rho};
    try {
      cfg.spec.validate();
    } catch (const ValidationError& e) {
      fail(g, "graphon", e.what());
    }
  } else {
    fail(g["kind"], "graphon.kind", "unknown graphon kind '" + kind + "' (expected sbm or cosine)");
  }

  // grid
  const auto grid = require(root, "n_grid", "n_grid");
  if (!grid.IsSequence() || grid.size() == 0) fail(grid, "n_grid", "must be a nonempty list");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto n = as_count(grid[i], "n_grid");
    if (n < 1) fail(grid[i], "n_grid", "entries must be positive");
    if (!cfg.n_grid.empty() && n <= cfg.n_grid.back()) fail(grid[i], "n_grid", "must be strictly ascending");
    cfg.n_grid.push_back(n);
  }
  if (const auto r = root["replications"]) {
    cfg.replications = as_count(r, "replications");
    if (cfg.replications < 1) fail(r, "replications", "must be at least 1");
  }

  const auto schemes = require(root, "schemes", "schemes");
  if (!schemes.IsSequence() || schemes.size() == 0) fail(schemes, "schemes", "must be a nonempty list");
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    cfg.schemes.push_back(parse_scheme(schemes[i], "schemes[" + std::to_string(i) + "]"));
  }

  const auto sigs = require(root, "signatures", "signatures");
  if (!sigs.IsSequence() || sigs.size() == 0) fail(sigs, "signatures", "must be a nonempty list");
  for (std::size_t i = 0; i < sigs.size(); ++i) {
    const auto path = "signatures[" + std::to_string(i) + "]";
    const auto pair = as<std::vector<long long>>(sigs[i], path);
    if (pair.size() != 2 || pair[0] < 0 || pair[1] < 0 || pair[0] + pair[1] < 1) {
      fail(sigs[i], path, "expected [d_plus, d_minus] with d_plus + d_minus >= 1");
    }
    cfg.signatures.push_back({static_cast<std::size_t>(pair[0]), static_cast<std::size_t>(pair[1])});
  }

  if (const auto t = root["train"]) {
    reject_unknown(t, {"step_size", "epochs", "draws_per_epoch", "clip_bound", "init_scale", "schedule",
                       "min_step_fraction", "dedupe"},
                   "train");
    auto& tr = cfg.train;
    tr.step_size = as_or(t, "step_size", "train.step_size", tr.step_size);
    if (const auto v = t["epochs"]) tr.epochs = as_count(v, "train.epochs");
    if (const auto v = t["draws_per_epoch"]) tr.draws_per_epoch = as_count(v, "train.draws_per_epoch");
    tr.clip_bound = as_or(t, "clip_bound", "train.clip_bound", tr.clip_bound);
    tr.init_scale = as_or(t, "init_scale", "train.init_scale", tr.init_scale);
    tr.min_step_fraction = as_or(t, "min_step_fraction", "train.min_step_fraction", tr.min_step_fraction);
    tr.dedupe = as_or(t, "dedupe", "train.dedupe", tr.dedupe);
    if (const auto v = t["schedule"]) {
      const auto s = as<std::string>(v, "train.schedule");
      if (s == "constant") tr.schedule = StepSchedule::constant;
      else if (s == "linear") tr.schedule = StepSchedule::linear;
      else fail(v, "train.schedule", "expected constant or linear");
    }
    try {
      TrainConfig probe = tr;
      probe.scheme = cfg.schemes.front();
      probe.signature = cfg.signatures.front();
      probe.validate();
    } catch (const ValidationError& e) {
      fail(t, "train", e.what());
    }
  }

  if (const auto o = root["oracles"]) {
    if (!o.IsSequence()) fail(o, "oracles", "must be a list");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < o.size(); ++i) {
      const auto path = "oracles[" + std::to_string(i) + "]";
      reject_unknown(o[i], {"id", "scheme", "product"}, path);
      OracleSelector sel;
      sel.id = as<std::string>(require(o[i], "id", path + ".id"), path + ".id");
      if (!ids.insert(sel.id).second) fail(o[i]["id"], path + ".id", "duplicate oracle id");
      sel.scheme = parse_scheme(require(o[i], "scheme", path + ".scheme"), path + ".scheme");
      const auto product = as_or<std::string>(o[i], "product", path + ".product", "krein");
      if (product == "krein") sel.product = InnerProduct::krein;
      else if (product == "regular") sel.product = InnerProduct::regular;
      else fail(o[i]["product"], path + ".product", "expected krein or regular");
      cfg.oracles.push_back(std::move(sel));
    }
  }
  cfg.output_path = as_or<std::string>(root, "output_path", "output_path", cfg.output_path);
  cfg.master_seed = as_or<std::uint64_t>(root, "master_seed", "master_seed", cfg.master_seed);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "graphon" << YAML::Value << YAML::BeginMap;
  if (const auto* sbm = std::get_if<SbmKernel>(&cfg.spec.kernel)) {
    out << YAML::Key << "kind" << YAML::Value << "sbm";
    out << YAML::Key << "pi" << YAML::Value << YAML::Flow << sbm->pi;
    std::vector<double> flat;
    for (Eigen::Index i = 0; i < sbm->P.rows(); ++i) {
      for (Eigen::Index j = 0; j < sbm->P.cols(); ++j) flat.push_back(sbm->P(i, j));
    }
    out << YAML::Key << "P" << YAML::Value << YAML::Flow << flat;
  } else {
    const auto& cos = std::get<CosineKernel>(cfg.spec.kernel);
    out << YAML::Key << "kind" << YAML::Value << "cosine";
    out << YAML::Key << "a" << YAML::Value << cos.a;
    out << YAML::Key << "b" << YAML::Value << cos.b;
  }
  out << YAML::Key << "rho" << YAML::Value;
  if (cfg.rho_mode == RhoMode::log_squared_over_n) out << "log_squared_over_n";
  else out << cfg.spec.rho;
  out << YAML::EndMap;

  out << YAML::Key << "n_grid" << YAML::Value << YAML::Flow << cfg.n_grid;
  out << YAML::Key << "replications" << YAML::Value << cfg.replications;
  out << YAML::Key << "schemes" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : cfg.schemes) emit_scheme(out, s);
  out << YAML::EndSeq;
  out << YAML::Key << "signatures" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : cfg.signatures) {
    out << YAML::Flow << YAML::BeginSeq << s.d_plus << s.d_minus << YAML::EndSeq;
  }
  out << YAML::EndSeq;

  const auto& t = cfg.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "step_size" << YAML::Value << t.step_size;
  out << YAML::Key << "epochs" << YAML::Value << t.epochs;
  out << YAML::Key << "draws_per_epoch" << YAML::Value << t.draws_per_epoch;
  out << YAML::Key << "clip_bound" << YAML::Value << t.clip_bound;
  out << YAML::Key << "init_scale" << YAML::Value << t.init_scale;
  out << YAML::Key << "schedule" << YAML::Value << (t.schedule == StepSchedule::linear ? "linear" : "constant");
  out << YAML::Key << "min_step_fraction" << YAML::Value << t.min_step_fraction;
  out << YAML::Key << "dedupe" << YAML::Value << t.dedupe;
  out << YAML::EndMap;

  out << YAML::Key << "oracles" << YAML::Value << YAML::BeginSeq;
  for (const auto& o : cfg.oracles) {
    out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << o.id;
    out << YAML::Key << "scheme" << YAML::Value;
    emit_scheme(out, o.scheme);
    out << YAML::Key << "product" << YAML::Value << (o.product == InnerProduct::krein ? "krein" : "regular");
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "output_path" << YAML::Value << cfg.output_path;
  out << YAML::Key << "master_seed" << YAML::Value << cfg.master_seed;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

bool equivalent(const ExperimentConfig& a, const ExperimentConfig& b) {
  if (a.spec.kernel.index() != b.spec.kernel.index() || a.spec.rho != b.spec.rho || a.rho_mode != b.rho_mode) {
    return false;
  }
  if (const auto* sa = std::get_if<SbmKernel>(&a.spec.kernel)) {
    const auto& sb = std::get<SbmKernel>(b.spec.kernel);
    if (sa->pi != sb.pi || sa->P != sb.P) return false;
  } else {
    const auto& ca = std::get<CosineKernel>(a.spec.kernel);
    const auto& cb = std::get<CosineKernel>(b.spec.kernel);
    if (ca.a != cb.a || ca.b != cb.b) return false;
  }
  if (a.n_grid != b.n_grid || a.replications != b.replications || a.signatures != b.signatures ||
      a.output_path != b.output_path || a.master_seed != b.master_seed) {
    return false;
  }
  if (a.schemes.size() != b.schemes.size() || a.oracles.size() != b.oracles.size()) return false;
  for (std::size_t i = 0; i < a.schemes.size(); ++i) {
    if (!same_scheme(a.schemes[i], b.schemes[i])) return false;
  }
  for (std::size_t i = 0; i < a.oracles.size(); ++i) {
    const auto &x = a.oracles[i], &y = b.oracles[i];
    if (x.id != y.id || x.product != y.product || !same_scheme(x.scheme, y.scheme)) return false;
  }
  const auto &s = a.train, &t = b.train;
  return s.step_size == t.step_size && s.epochs == t.epochs && s.draws_per_epoch == t.draws_per_epoch &&
         s.clip_bound == t.clip_bound && s.init_scale == t.init_scale && s.schedule == t.schedule &&
         s.min_step_fraction == t.min_step_fraction && s.dedupe == t.dedupe;
}

std::uint64_t graph_seed(std::uint64_t master_seed, std::size_t n, std::size_t replicate) {
  return derive_seed(master_seed, 0x6772617068ull /* "graph" */, n, replicate);
}

std::uint64_t train_seed(std::uint64_t master_seed, std::size_t n, std::size_t replicate, std::size_t scheme_index,
                         std::size_t signature_index) {
  return derive_seed(master_seed, 0x747261696Eull /* "train" */, n, replicate, scheme_index, signature_index);
}

std::string CellId::to_string() const {
  return "n=" + std::to_string(n) + ",rep=" + std::to_string(replicate) + ",scheme=" + std::to_string(scheme) +
         ",sig=" + std::to_string(signature);
}

bool cell_matches(const CellId& cell, const std::string& filter) {
  if (filter.empty()) return true;
  std::istringstream ss(filter);
  std::string term;
  while (std::getline(ss, term, ',')) {
    if (term.empty()) continue;
    const auto eq = term.find('=');
    if (eq == std::string::npos) throw ValidationError("cell filter term '" + term + "' must be key=value");
    const auto key = term.substr(0, eq);
    std::size_t value = 0;
    try {
      value = std::stoull(term.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("cell filter term '" + term + "' needs an integer value");
    }
    std::size_t actual = 0;
    if (key == "n") actual = cell.n;
    else if (key == "rep") actual = cell.replicate;
    else if (key == "scheme") actual = cell.scheme;
    else if (key == "sig") actual = cell.signature;
    else throw ValidationError("cell filter key '" + key + "' must be one of n, rep, scheme, sig");
    if (actual != value) return false;
  }
  return true;
}

namespace {

struct OracleKernel {
  std::string id;
  std::optional<BlockKernel> block;
  std::optional<SamplingWeights> pointwise;
  std::string error;
};

std::vector<OracleKernel> build_oracles(const ExperimentConfig& cfg, const GraphonSpec& spec) {
  std::vector<OracleKernel> out;
  for (const auto& sel : cfg.oracles) {
    OracleKernel k;
    k.id = sel.id;
    try {
      if (spec.is_sbm()) {
        k.block = sel.product == InnerProduct::krein ? sbm_block_limit_krein(spec, sel.scheme)
                                                     : sbm_block_limit_psd(spec, sel.scheme);
      } else if (sel.product == InnerProduct::krein) {
        k.pointwise.emplace(spec, sel.scheme);
      } else {
        throw ValidationError("regular-product oracle is only available for SBM graphons");
      }
    } catch (const std::exception& e) {
      k.error = e.what();
    }
    out.push_back(std::move(k));
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  std::vector<CellId> cells;
  for (auto n : config.n_grid) {
    for (std::size_t rep = 0; rep < config.replications; ++rep) {
      for (std::size_t s = 0; s < config.schemes.size(); ++s) {
        for (std::size_t g = 0; g < config.signatures.size(); ++g) {
          CellId cell{n, rep, s, g};
          if (cell_matches(cell, options.cell_filter)) cells.push_back(cell);
        }
      }
    }
  }

  std::map<std::size_t, std::vector<OracleKernel>> oracles_by_n;
  for (auto n : config.n_grid) oracles_by_n.emplace(n, build_oracles(config, config.spec_at(n)));

  struct CellOutcome {
    std::vector<ConvergenceRecord> records;
    std::optional<std::string> error;
  };
  std::vector<CellOutcome> outcomes(cells.size());

  auto run_cell = [&](std::size_t idx) {
    const CellId& cell = cells[idx];
    CellOutcome& outcome = outcomes[idx];
    try {
      const auto start = std::chrono::steady_clock::now();
      const GraphonSpec spec = config.spec_at(cell.n);
      const auto gseed = graph_seed(config.master_seed, cell.n, cell.replicate);
      const SampledGraph graph = sample_graph(spec, cell.n, gseed);
      TrainConfig tc = config.train;
      tc.scheme = config.schemes[cell.scheme];
      tc.signature = config.signatures[cell.signature];
      tc.seed = train_seed(config.master_seed, cell.n, cell.replicate, cell.scheme, cell.signature);
      const EmbeddingState emb = train(graph, tc);
      std::vector<std::string> oracle_errors;
      for (const auto& oracle : oracles_by_n.at(cell.n)) {
        ConvergenceRecord rec;
        rec.n = cell.n;
        rec.seed = gseed;
        rec.scheme = scheme_label(tc.scheme);
        rec.d_plus = tc.signature.d_plus;
        rec.d_minus = tc.signature.d_minus;
        rec.oracle = oracle.id;
        rec.epochs = tc.epochs;
        if (oracle.block) {
          rec.l1_error = l1_kernel_error(emb, graph, *oracle.block);
        } else if (oracle.pointwise) {
          const SamplingWeights& w = *oracle.pointwise;
          rec.l1_error = l1_kernel_error(emb, graph, [&w](double l, double lp) { return unconstrained_limit(w, l, lp); });
        } else {
          oracle_errors.push_back(oracle.id + ": " + oracle.error);
          continue;
        }
        outcome.records.push_back(rec);
      }
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      for (auto& rec : outcome.records) rec.wall_time_s = wall;
      if (!oracle_errors.empty()) {
        std::string joined;
        for (const auto& e : oracle_errors) joined += (joined.empty() ? "" : "; ") + e;
        outcome.error = joined;
      }
    } catch (const std::exception& e) {
      outcome.error = e.what();
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, cells.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
      });
    }
    for (auto& t : workers) t.join();
  }

  ExperimentResult result;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& o = outcomes[i];
    result.records.insert(result.records.end(), o.records.begin(), o.records.end());
    if (o.error) result.failures.push_back({cells[i], *o.error});
  }

  // Summary over replicates, keyed in first-appearance (grid) order.
  std::vector<SummaryRow> rows;
  std::map<std::tuple<std::size_t, std::string, std::size_t, std::size_t, std::string>, std::size_t> where;
  std::vector<std::vector<double>> values;
  for (const auto& r : result.records) {
    const auto key = std::make_tuple(r.n, r.scheme, r.d_plus, r.d_minus, r.oracle);
    auto it = where.find(key);
    if (it == where.end()) {
      it = where.emplace(key, rows.size()).first;
      rows.push_back({r.n, r.scheme, r.d_plus, r.d_minus, r.oracle, 0.0, 0.0, 0});
      values.emplace_back();
    }
    values[it->second].push_back(r.l1_error);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& v = values[i];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    rows[i].mean_l1_error = mean;
    rows[i].sd_l1_error = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    rows[i].count = v.size();
  }
  result.summary = std::move(rows);

  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    write_metrics(result.records, options.out_dir / "metrics.csv");
    write_summary(result.summary, options.out_dir / "summary.csv");
    std::ofstream fail_out(options.out_dir / "failures.csv", std::ios::binary);
    fail_out << "cell,error\n";
    for (const auto& f : result.failures) fail_out << csv_field(f.cell.to_string()) << ',' << csv_field(f.error) << '\n';
    if (!fail_out) throw Error("write failed: " + (options.out_dir / "failures.csv").string());
  }
  return result;
}

void write_metrics(const std::vector<ConvergenceRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    out << r.n << ',' << r.seed << ',' << csv_field(r.scheme) << ',' << r.d_plus << ',' << r.d_minus << ','
        << csv_field(r.oracle) << ',' << fmt17(r.l1_error) << ',' << r.epochs << ',' << fmt17(r.wall_time_s) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<ConvergenceRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ValidationError(path.string() + ":1: unexpected metrics header");
  }
  std::vector<ConvergenceRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 9) throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 9 fields");
    ConvergenceRecord r;
    r.n = std::stoull(f[0]);
    r.seed = std::stoull(f[1]);
    r.scheme = f[2];
    r.d_plus = std::stoull(f[3]);
    r.d_minus = std::stoull(f[4]);
    r.oracle = f[5];
    r.l1_error = std::strtod(f[6].c_str(), nullptr);
    r.epochs = std::stoull(f[7]);
    r.wall_time_s = std::strtod(f[8].c_str(), nullptr);
    out.push_back(std::move(r));
  }
  return out;
}

void write_summary(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "n,scheme,d_plus,d_minus,oracle,mean_l1_error,sd_l1_error,count\n";
  for (const auto& r : rows) {
    out << r.n << ',' << csv_field(r.scheme) << ',' << r.d_plus << ',' << r.d_minus << ',' << csv_field(r.oracle)
        << ',' << fmt17(r.mean_l1_error) << ',' << fmt17(r.sd_l1_error) << ',' << r.count << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace gemb

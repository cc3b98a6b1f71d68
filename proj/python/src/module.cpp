#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gemb/diagnostics.hpp"
#include "gemb/error.hpp"
#include "gemb/experiment.hpp"
#include "gemb/limits.hpp"

namespace py = pybind11;
using namespace gemb;

namespace {

SampledGraph sample(const GraphonSpec& spec, std::size_t n, std::uint64_t seed) {
  py::gil_scoped_release release;
  return sample_graph(spec, n, seed);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Graphon sampling, embedding training and limiting kernels";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<SingularityError>(m, "SingularityError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());

  py::class_<GraphonSpec>(m, "GraphonSpec")
      .def_static("sbm", &GraphonSpec::sbm, py::arg("pi"), py::arg("P"), py::arg("rho") = 1.0)
      .def_static("sbm_pq", &GraphonSpec::sbm_pq, py::arg("p"), py::arg("q"), py::arg("kappa"), py::arg("rho") = 1.0)
      .def_static("cosine", &GraphonSpec::cosine, py::arg("a"), py::arg("b"), py::arg("rho") = 1.0)
      .def_readwrite("rho", &GraphonSpec::rho)
      .def_property_readonly("is_sbm", &GraphonSpec::is_sbm)
      .def_property_readonly("block_count", &GraphonSpec::block_count)
      .def("__call__", [](const GraphonSpec& s, double l, double lp) { return graphon_value(s, l, lp); })
      .def("degree", [](const GraphonSpec& s, double l) { return degree_function(s, l); });
  m.def("sbm1", &sbm1, py::arg("rho") = 1.0);
  m.def("sbm2", &sbm2, py::arg("rho") = 1.0);

  py::class_<SampledGraph>(m, "SampledGraph")
      .def_property_readonly("n", &SampledGraph::n)
      .def_property_readonly("edge_count", &SampledGraph::edge_count)
      .def_property_readonly("edges", &SampledGraph::edges)
      .def_property_readonly("latents", &SampledGraph::latents)
      .def_property_readonly("communities", &SampledGraph::communities)
      .def("degrees", &SampledGraph::degrees)
      .def("has_edge", &SampledGraph::has_edge);
  m.def("sample_graph", &sample, py::arg("spec"), py::arg("n"), py::arg("seed"));

  py::class_<UniformVertex>(m, "UniformVertex")
      .def(py::init([](std::size_t k) { return UniformVertex{k}; }), py::arg("k") = 100)
      .def_readwrite("k", &UniformVertex::k);
  py::class_<UniformEdgeUnigram>(m, "UniformEdgeUnigram")
      .def(py::init([](std::size_t k, std::size_t l, double alpha, bool check) {
             return UniformEdgeUnigram{k, l, alpha, check};
           }),
           py::arg("k") = 100, py::arg("l") = 1, py::arg("alpha") = 0.75, py::arg("check_non_edges") = true);
  py::class_<UniformEdgeInduced>(m, "UniformEdgeInduced")
      .def(py::init([](std::size_t k) { return UniformEdgeInduced{k}; }), py::arg("k") = 100);
  py::class_<RandomWalkUnigram>(m, "RandomWalkUnigram")
      .def(py::init([](std::size_t k, std::size_t l, double alpha, bool check) {
             return RandomWalkUnigram{k, l, alpha, check};
           }),
           py::arg("k") = 50, py::arg("l") = 1, py::arg("alpha") = 0.75, py::arg("check_non_edges") = true);
  m.def("scheme_label", &scheme_label);
  m.def("sampling_weight", &sampling_weight_f, py::arg("spec"), py::arg("scheme"), py::arg("l"), py::arg("lp"),
        py::arg("a"));

  m.def(
      "estimate_pair_probability",
      [](const SampledGraph& g, const SamplingScheme& scheme, const std::vector<Edge>& pairs, std::size_t trials,
         std::uint64_t seed, bool conditional, std::optional<GraphonSpec> spec) {
        std::optional<SamplingWeights> w;
        if (spec) w.emplace(*spec, scheme);
        RngStream rng(seed, 0);
        py::gil_scoped_release release;
        std::vector<std::tuple<std::uint32_t, std::uint32_t, int, double, double, double>> out;
        for (const auto& e : estimate_pair_probability(g, scheme, pairs, trials, rng,
                                                       conditional ? PairEstimator::conditional
                                                                   : PairEstimator::frequency,
                                                       w ? &*w : nullptr)) {
          out.emplace_back(e.i, e.j, e.a_ij, e.mc_estimate, e.formula_value, e.std_err);
        }
        return out;
      },
      py::arg("graph"), py::arg("scheme"), py::arg("pairs"), py::arg("trials"), py::arg("seed"),
      py::arg("conditional") = false, py::arg("spec") = std::nullopt,
      "Rows (i, j, a_ij, n^2 estimate, f_n or nan, n^2 standard error).");

  py::class_<SimilaritySignature>(m, "Signature")
      .def(py::init([](std::size_t p, std::size_t q) { return SimilaritySignature{p, q}; }), py::arg("d_plus"),
           py::arg("d_minus") = 0)
      .def_readwrite("d_plus", &SimilaritySignature::d_plus)
      .def_readwrite("d_minus", &SimilaritySignature::d_minus);

  py::enum_<StepSchedule>(m, "StepSchedule")
      .value("constant", StepSchedule::constant)
      .value("linear", StepSchedule::linear);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("step_size", &TrainConfig::step_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("draws_per_epoch", &TrainConfig::draws_per_epoch)
      .def_readwrite("clip_bound", &TrainConfig::clip_bound)
      .def_readwrite("init_scale", &TrainConfig::init_scale)
      .def_readwrite("signature", &TrainConfig::signature)
      .def_readwrite("scheme", &TrainConfig::scheme)
      .def_readwrite("schedule", &TrainConfig::schedule)
      .def_readwrite("min_step_fraction", &TrainConfig::min_step_fraction)
      .def_readwrite("dedupe", &TrainConfig::dedupe)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<EmbeddingState>(m, "Embedding")
      .def_property_readonly("vectors", [](const EmbeddingState& e) { return Eigen::MatrixXd(e.vectors); })
      .def_readonly("signature", &EmbeddingState::signature)
      .def("gram", &EmbeddingState::gram);
  m.def("initial_embedding", &initial_embedding, py::arg("n"), py::arg("config"));
  m.def(
      "train",
      [](const SampledGraph& g, const TrainConfig& c) {
        py::gil_scoped_release release;
        return train(g, c);
      },
      py::arg("graph"), py::arg("config"));

  py::class_<BlockKernel>(m, "BlockKernel")
      .def_readonly("pi", &BlockKernel::pi)
      .def_readonly("values", &BlockKernel::values)
      .def("__call__", &BlockKernel::operator());
  m.def("unconstrained_limit", py::overload_cast<const GraphonSpec&, const SamplingScheme&, double, double>(
                                   &unconstrained_limit));
  m.def("block_limit_krein", &sbm_block_limit_krein, py::arg("spec"), py::arg("scheme"));
  m.def(
      "block_limit_psd",
      [](const GraphonSpec& s, const SamplingScheme& scheme, double tol) { return sbm_block_limit_psd(s, scheme, tol); },
      py::arg("spec"), py::arg("scheme"), py::arg("tol") = 1e-10);
  m.def("two_block_closed_form", &two_block_closed_form, py::arg("p"), py::arg("q"));
  m.def(
      "kernel_signature",
      [](const BlockKernel& k) {
        const auto s = signature_from_kernel(k);
        return py::make_tuple(s.d_plus, s.d_minus, s.eigenvalues);
      },
      "(d_plus, d_minus, eigenvalues)");

  m.def("l1_kernel_error", py::overload_cast<const EmbeddingState&, const SampledGraph&, const BlockKernel&>(
                               &l1_kernel_error));
  m.def("link_loss",
        [](const Eigen::MatrixXd& scores, const SampledGraph& g, const std::string& kind) {
          if (kind == "zero_one") return link_prediction_loss(scores, g, ZeroOneLoss{});
          if (kind == "cross_entropy") return link_prediction_loss(scores, g, CrossEntropyLoss{});
          if (kind == "hinge") return link_prediction_loss(scores, g, HingeLoss{});
          throw ValidationError("unknown loss '" + kind + "'");
        },
        py::arg("scores"), py::arg("graph"), py::arg("kind") = "zero_one");
  m.def("max_degree_deviation",
        [](const SampledGraph& g, const GraphonSpec& s) { return degree_concentration_report(g, s).max_rel_dev; });

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readwrite("master_seed", &ExperimentConfig::master_seed)
      .def_readwrite("n_grid", &ExperimentConfig::n_grid)
      .def_readwrite("replications", &ExperimentConfig::replications)
      .def("to_yaml", &serialize_config);
  m.def("parse_config", &parse_config, py::arg("text"));
  m.def("load_config", &load_config, py::arg("path"));
  m.def(
      "run_experiment",
      [](const ExperimentConfig& cfg, std::size_t jobs, const std::string& cell, const std::string& out_dir) {
        RunOptions opts{jobs, cell, out_dir};
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg, opts);
        }
        py::list records;
        for (const auto& x : r.records) {
          py::dict d;
          d["n"] = x.n;
          d["seed"] = x.seed;
          d["scheme"] = x.scheme;
          d["d_plus"] = x.d_plus;
          d["d_minus"] = x.d_minus;
          d["oracle"] = x.oracle;
          d["l1_error"] = x.l1_error;
          d["epochs"] = x.epochs;
          d["wall_time_s"] = x.wall_time_s;
          records.append(d);
        }
        py::list failures;
        for (const auto& f : r.failures) failures.append(py::make_tuple(f.cell.to_string(), f.error));
        return py::make_tuple(records, failures);
      },
      py::arg("config"), py::arg("jobs") = 1, py::arg("cell") = "", py::arg("out_dir") = "",
      "Returns (records, failures); records are dicts in grid order.");
}

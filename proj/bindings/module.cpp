#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "htn/archive.hpp"
#include "htn/dataset.hpp"
#include "htn/enumeration.hpp"
#include "htn/htmm.hpp"
#include "htn/metrics.hpp"
#include "htn/network.hpp"
#include "htn/training.hpp"
#include "htn/tree.hpp"

namespace py = pybind11;
using namespace htn;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hidden tree Markov networks: generative tree modules trained "
            "discriminatively under a contrastive softmax head.";

  py::register_exception<ParseError>(m, "TreeParseError", PyExc_ValueError);
  py::register_exception<VersionMismatch>(m, "VersionMismatch", PyExc_RuntimeError);
  py::register_exception<MalformedInput>(m, "MalformedInput", PyExc_ValueError);

  py::class_<LabelVocab>(m, "LabelVocab")
      .def(py::init<>())
      .def_static("placeholder", &LabelVocab::placeholder, py::arg("size"))
      .def("add", &LabelVocab::add, py::arg("label"))
      .def("lookup", &LabelVocab::lookup, py::arg("label"))
      .def("symbol", &LabelVocab::symbol, py::arg("index"))
      .def("__len__", &LabelVocab::size)
      .def_property_readonly("unk_index", &LabelVocab::unk_index);

  py::class_<TreeNode>(m, "TreeNode")
      .def_readonly("label", &TreeNode::label)
      .def_readonly("parent", &TreeNode::parent)
      .def_readonly("children", &TreeNode::children);

  py::class_<LabeledTree>(m, "LabeledTree")
      .def_readonly("nodes", &LabeledTree::nodes)
      .def_readwrite("klass", &LabeledTree::klass)
      .def("__len__", &LabeledTree::size)
      .def("arity", &LabeledTree::arity, py::arg("node"))
      .def("is_leaf", &LabeledTree::is_leaf, py::arg("node"))
      .def("max_arity", &LabeledTree::max_arity);

  m.def("parse_tree", &parse_tree, py::arg("text"), py::arg("vocab"),
        py::arg("grow_vocab") = true);
  m.def("serialize_tree", &serialize_tree, py::arg("tree"), py::arg("vocab"));
  m.def("isomorphic", &isomorphic, py::arg("a"), py::arg("b"));

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("trees", &Dataset::trees)
      .def_readwrite("vocab", &Dataset::vocab)
      .def_readwrite("K", &Dataset::K)
      .def_readwrite("L", &Dataset::L)
      .def_readonly("warnings", &Dataset::warnings)
      .def_property_readonly("V", &Dataset::V)
      .def("__len__", &Dataset::size)
      .def("validate", &Dataset::validate)
      .def("subset", &Dataset::subset, py::arg("indices"));

  m.def("load_dataset",
        py::overload_cast<const std::filesystem::path&>(&load_dataset), py::arg("path"));
  m.def("load_dataset",
        py::overload_cast<const std::filesystem::path&, const LabelVocab&>(&load_dataset),
        py::arg("path"), py::arg("vocab"));
  m.def("save_dataset",
        py::overload_cast<const Dataset&, const std::filesystem::path&>(&save_dataset),
        py::arg("dataset"), py::arg("path"));

  py::class_<FoldSplit>(m, "FoldSplit")
      .def_readonly("train", &FoldSplit::train)
      .def_readonly("test", &FoldSplit::test);
  m.def("stratified_folds", &stratified_folds, py::arg("dataset"), py::arg("k"),
        py::arg("seed"));

  py::class_<HtmmParameters>(m, "HtmmParameters")
      .def(py::init<std::size_t, std::size_t, std::size_t>(), py::arg("C"), py::arg("L"),
           py::arg("V"))
      .def_static("random_init", &HtmmParameters::random_init, py::arg("C"), py::arg("L"),
                  py::arg("V"), py::arg("seed"), py::arg("stddev") = 0.1)
      .def_readonly("C", &HtmmParameters::C)
      .def_readonly("L", &HtmmParameters::L)
      .def_readonly("V", &HtmmParameters::V)
      .def_readwrite("lambda_a", &HtmmParameters::lambda_a)
      .def_readwrite("lambda_pi", &HtmmParameters::lambda_pi)
      .def_readwrite("lambda_b", &HtmmParameters::lambda_b)
      .def_readwrite("lambda_phi", &HtmmParameters::lambda_phi);

  py::class_<ProbTables>(m, "ProbTables")
      .def_readonly("a", &ProbTables::a)
      .def_readonly("pi", &ProbTables::pi)
      .def_readonly("b", &ProbTables::b)
      .def_readonly("phi", &ProbTables::phi);
  m.def("materialize", &materialize, py::arg("params"));

  py::class_<NodePosteriors>(m, "NodePosteriors")
      .def_readonly("eps_node", &NodePosteriors::eps_node)
      .def_readonly("eps_pair", &NodePosteriors::eps_pair)
      .def_readonly("loglik", &NodePosteriors::loglik)
      .def("node", &NodePosteriors::node, py::arg("u"), py::arg("i"))
      .def("pair", &NodePosteriors::pair, py::arg("u"), py::arg("l"), py::arg("i"),
           py::arg("j"));

  m.def("upward_log_likelihood",
        py::overload_cast<const HtmmParameters&, const LabeledTree&>(&upward_log_likelihood),
        py::arg("params"), py::arg("tree"));
  m.def("upward_downward",
        py::overload_cast<const HtmmParameters&, const LabeledTree&>(&upward_downward),
        py::arg("params"), py::arg("tree"));
  m.def("brute_force_marginal", &brute_force_marginal, py::arg("params"), py::arg("tree"));
  m.def("brute_force_posteriors", &brute_force_posteriors, py::arg("params"),
        py::arg("tree"));
  m.def(
      "em_step",
      [](const HtmmParameters& params, const std::vector<LabeledTree>& trees,
         double smoothing) { return em_step(params, trees, smoothing); },
      py::arg("params"), py::arg("trees"), py::arg("smoothing") = 1e-8);
  m.def(
      "total_log_likelihood",
      [](const HtmmParameters& params, const std::vector<LabeledTree>& trees) {
        return total_log_likelihood(params, trees);
      },
      py::arg("params"), py::arg("trees"));

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("class_models", &SyntheticSpec::class_models)
      .def_readwrite("min_nodes", &SyntheticSpec::min_nodes)
      .def_readwrite("max_nodes", &SyntheticSpec::max_nodes)
      .def_readwrite("samples_per_class", &SyntheticSpec::samples_per_class);
  m.def("generate_synthetic", &generate_synthetic, py::arg("spec"), py::arg("seed"));

  py::enum_<Normalization>(m, "Normalization")
      .value("raw", Normalization::raw)
      .value("per_node", Normalization::per_node);

  py::class_<HtnModel>(m, "HtnModel")
      .def(py::init<std::size_t, std::size_t, std::size_t, std::size_t, std::size_t,
                    std::uint64_t, Normalization>(),
           py::arg("module_count"), py::arg("C"), py::arg("L"), py::arg("V"), py::arg("K"),
           py::arg("seed"), py::arg("normalization") = Normalization::raw)
      .def_readwrite("modules", &HtnModel::modules)
      .def_readonly("pairs", &HtnModel::pairs)
      .def_readwrite("w_out", &HtnModel::w_out)
      .def_readonly("K", &HtnModel::K)
      .def_readwrite("normalization", &HtnModel::normalization)
      .def("module_count", &HtnModel::module_count)
      .def("pair_count", &HtnModel::pair_count);
  m.def("pair_index", &pair_index, py::arg("module_count"));

  py::class_<ForwardTrace>(m, "ForwardTrace")
      .def_readonly("logliks", &ForwardTrace::logliks)
      .def_readonly("h", &ForwardTrace::h)
      .def_readonly("net", &ForwardTrace::net)
      .def_readonly("p", &ForwardTrace::p);
  m.def("forward", &forward, py::arg("model"), py::arg("tree"));
  m.def("loss", &loss, py::arg("trace"), py::arg("target_class"));
  m.def("predict", &predict, py::arg("model"), py::arg("tree"));

  py::class_<Metrics>(m, "Metrics")
      .def_readonly("accuracy", &Metrics::accuracy)
      .def_readonly("f1", &Metrics::f1)
      .def_readonly("auc", &Metrics::auc)
      .def_readonly("confusion", &Metrics::confusion)
      .def_readonly("K", &Metrics::K)
      .def("__repr__", &metrics_to_json);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("C", &TrainConfig::C)
      .def_readwrite("M", &TrainConfig::M)
      .def_readwrite("K", &TrainConfig::K)
      .def_readwrite("L", &TrainConfig::L)
      .def_readwrite("V", &TrainConfig::V)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("lr0", &TrainConfig::lr0)
      .def_readwrite("decay", &TrainConfig::decay)
      .def_readwrite("alpha0", &TrainConfig::alpha0)
      .def_readwrite("alphaT", &TrainConfig::alphaT)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("normalization", &TrainConfig::normalization)
      .def_readwrite("pretrain_em_iters", &TrainConfig::pretrain_em_iters)
      .def_readwrite("minibatch", &TrainConfig::minibatch);

  py::class_<EpochRecord>(m, "EpochRecord")
      .def_readonly("epoch", &EpochRecord::epoch)
      .def_readonly("mean_loss", &EpochRecord::mean_loss)
      .def_readonly("validation", &EpochRecord::validation);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("model", &TrainResult::model)
      .def_readonly("history", &TrainResult::history);

  m.def(
      "train",
      [](const TrainConfig& config, const Dataset& train_set, const Dataset* validation) {
        return train(config, train_set, validation);
      },
      py::arg("config"), py::arg("train_set"), py::arg("validation_set") = nullptr);
  m.def("evaluate", &evaluate, py::arg("model"), py::arg("dataset"));

  py::class_<SelectionScheme>(m, "SelectionScheme")
      .def(py::init<>())
      .def_readwrite("folds", &SelectionScheme::folds)
      .def_readwrite("holdout_fraction", &SelectionScheme::holdout_fraction);

  py::class_<GridCell>(m, "GridCell")
      .def_readonly("C", &GridCell::C)
      .def_readonly("M", &GridCell::M)
      .def_readonly("fold", &GridCell::fold)
      .def_readonly("score", &GridCell::score)
      .def_readonly("metrics", &GridCell::metrics);

  py::class_<GridSearchResult>(m, "GridSearchResult")
      .def_readonly("best", &GridSearchResult::best)
      .def_readonly("best_score", &GridSearchResult::best_score)
      .def_readonly("cells", &GridSearchResult::cells);

  m.def("grid_search", &grid_search, py::arg("c_grid"), py::arg("m_grid"),
        py::arg("dataset"), py::arg("scheme"), py::arg("base_config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("generative_baseline", &generative_baseline, py::arg("train_set"),
        py::arg("test_set"), py::arg("C"), py::arg("em_iters"), py::arg("seed"));

  py::class_<GroupCheck>(m, "GroupCheck")
      .def_readonly("group", &GroupCheck::group)
      .def_readonly("max_rel_error", &GroupCheck::max_rel_error)
      .def_readonly("max_abs_error", &GroupCheck::max_abs_error)
      .def_readonly("passed", &GroupCheck::passed);
  m.def("finite_difference_report", &finite_difference_report, py::arg("model"),
        py::arg("sample"), py::arg("target_class"), py::arg("step") = 1e-5,
        py::arg("rel_tolerance") = 1e-4, py::arg("abs_tolerance") = 1e-7);

  py::class_<ModelArchive>(m, "ModelArchive")
      .def(py::init<>())
      .def_readwrite("model", &ModelArchive::model)
      .def_readwrite("vocab", &ModelArchive::vocab)
      .def_readwrite("config", &ModelArchive::config)
      .def_readwrite("epochs_completed", &ModelArchive::epochs_completed);
  m.def("save_archive",
        py::overload_cast<const ModelArchive&, const std::filesystem::path&>(&save_archive),
        py::arg("archive"), py::arg("path"));
  m.def("load_archive",
        py::overload_cast<const std::filesystem::path&>(&load_archive), py::arg("path"));
}

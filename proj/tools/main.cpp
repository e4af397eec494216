#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "htn/archive.hpp"
#include "htn/dataset.hpp"
#include "htn/rng.hpp"
#include "htn/training.hpp"

namespace {

using nlohmann::json;

// Exit codes, kept distinct so scripts can react to the failure class:
//   0 success, 1 unexpected error, 2 usage or malformed configuration,
//   3 missing file / IO, 4 data parse error, 5 archive version mismatch,
//   6 gradient check out of tolerance.
enum ExitCode : int {
  kOk = 0,
  kError = 1,
  kBadConfig = 2,
  kMissingFile = 3,
  kDataError = 4,
  kVersionMismatch = 5,
  kGradCheckFailed = 6,
};

struct FileNotFound : std::runtime_error {
  explicit FileNotFound(const std::string& path) : std::runtime_error("no such file: " + path) {}
};

void require_exists(const std::string& path) {
  if (!std::filesystem::exists(path)) throw FileNotFound(path);
}

std::string slurp(const std::string& path) {
  require_exists(path);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw htn::MalformedInput(path + ": " + e.what());
  }
}

void print_warnings(const htn::Dataset& data) {
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_gen(const std::string& config_path, std::uint64_t seed, const std::string& out_path) {
  const json doc = parse_json_file(config_path);
  htn::SyntheticSpec spec;
  try {
    const auto C = doc.at("C").get<std::size_t>();
    const auto L = doc.at("L").get<std::size_t>();
    const auto V = doc.at("V").get<std::size_t>();
    spec.min_nodes = doc.at("min_nodes").get<std::size_t>();
    spec.max_nodes = doc.at("max_nodes").get<std::size_t>();
    spec.samples_per_class = doc.at("samples_per_class").get<std::size_t>();
    if (doc.contains("models")) {
      for (const auto& m : doc.at("models")) spec.class_models.push_back(htn::params_from_json(m));
    } else {
      const auto classes = doc.at("random_classes").get<std::size_t>();
      const double stddev = doc.value("stddev", 1.5);
      for (std::size_t k = 0; k < classes; ++k)
        spec.class_models.push_back(htn::HtmmParameters::random_init(
            C, L, V, htn::derive_seed(seed, 0x9e0 + k), stddev));
    }
    for (const auto& m : spec.class_models)
      if (m.C != C || m.L != L || m.V != V)
        throw htn::MalformedInput("model dimensions disagree with (C, L, V)");
  } catch (const json::exception& e) {
    throw htn::MalformedInput(std::string("gen spec: ") + e.what());
  }
  const htn::Dataset data = htn::generate_synthetic(spec, seed);
  htn::save_dataset(data, out_path);
  std::cerr << "wrote " << data.size() << " trees (K=" << data.K << ", V=" << data.V()
            << ", L=" << data.L << ") to " << out_path << '\n';
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::optional<std::string>& val_path, const std::string& out_path) {
  const htn::TrainConfig config = htn::parse_train_config(slurp(config_path));
  require_exists(data_path);
  const htn::Dataset data = htn::load_dataset(data_path);
  print_warnings(data);
  std::optional<htn::Dataset> val;
  if (val_path) {
    require_exists(*val_path);
    val = htn::load_dataset(*val_path, data.vocab);
  }

  const auto emit = [](const htn::EpochRecord& record) {
    json line{{"epoch", record.epoch}, {"mean_loss", record.mean_loss}};
    if (record.validation) line["validation"] = json::parse(htn::metrics_to_json(*record.validation));
    std::cout << line.dump() << std::endl;
  };
  const htn::TrainResult result =
      htn::train(config, data, val ? &*val : nullptr, emit);

  htn::ModelArchive archive;
  archive.model = result.model;
  archive.vocab = data.vocab;
  archive.config = config.resolved(data);
  archive.epochs_completed = config.epochs;
  htn::save_archive(archive, out_path);
  std::cerr << "saved model to " << out_path << '\n';
  return kOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path) {
  require_exists(model_path);
  const htn::ModelArchive archive = htn::load_archive(model_path);
  require_exists(data_path);
  const htn::Dataset data = htn::load_dataset(data_path, archive.vocab);
  print_warnings(data);
  if (data.K > archive.model.K)
    throw std::runtime_error("dataset has more classes than the model");
  const htn::Metrics metrics = htn::evaluate(archive.model, data);
  std::cout << htn::metrics_to_json(metrics) << std::endl;
  return kOk;
}

int cmd_gridsearch(const std::string& config_path, const std::string& data_path) {
  json doc = parse_json_file(config_path);
  std::vector<std::size_t> c_grid, m_grid;
  htn::SelectionScheme scheme;
  try {
    c_grid = doc.at("C_grid").get<std::vector<std::size_t>>();
    m_grid = doc.at("M_grid").get<std::vector<std::size_t>>();
    doc.erase("C_grid");
    doc.erase("M_grid");
    if (doc.contains("folds")) {
      scheme.folds = doc.at("folds").get<std::size_t>();
      doc.erase("folds");
    }
    if (doc.contains("holdout_fraction")) {
      scheme.holdout_fraction = doc.at("holdout_fraction").get<double>();
      doc.erase("holdout_fraction");
    }
  } catch (const json::exception& e) {
    throw htn::MalformedInput(std::string("grid config: ") + e.what());
  }
  const htn::TrainConfig base = htn::parse_train_config(doc.dump());
  require_exists(data_path);
  const htn::Dataset data = htn::load_dataset(data_path);
  print_warnings(data);

  const htn::GridSearchResult result = htn::grid_search(c_grid, m_grid, data, scheme, base);
  for (const auto& cell : result.cells) {
    json line{{"C", cell.C}, {"M", cell.M}, {"fold", cell.fold}, {"score", cell.score},
              {"metrics", json::parse(htn::metrics_to_json(cell.metrics))}};
    std::cout << line.dump() << std::endl;
  }
  json best{{"best", {{"C", result.best.C}, {"M", result.best.M}}},
            {"mean_score", result.best_score}};
  std::cout << best.dump() << std::endl;
  return kOk;
}

int cmd_gradcheck(const std::optional<std::string>& config_path, std::uint64_t seed) {
  htn::TrainConfig config;
  if (config_path) config = htn::parse_train_config(slurp(*config_path));
  if (config.K == 0) config.K = 2;
  if (config.L == 0) config.L = 2;
  if (config.V == 0) config.V = 3;

  htn::Rng rng(htn::derive_seed(seed, 0x9cad));
  bool all_passed = true;
  for (int rep = 0; rep < 5; ++rep) {
    const htn::HtnModel model(config.M, config.C, config.L, config.V, config.K,
                              htn::derive_seed(seed, rep), config.normalization);
    htn::LabeledTree tree;
    {
      // small random tree within the finite-difference budget
      const std::size_t nodes = 1 + rng.next_below(6);
      htn::SyntheticSpec spec;
      spec.class_models.push_back(
          htn::HtmmParameters::random_init(config.C, config.L, config.V, rep));
      spec.min_nodes = nodes;
      spec.max_nodes = nodes;
      spec.samples_per_class = 1;
      tree = htn::generate_synthetic(spec, htn::derive_seed(seed, 0x7e + rep)).trees[0];
    }
    const auto report = htn::finite_difference_report(
        model, tree, rng.next_below(config.K), 1e-5);
    for (const auto& group : report) {
      json line{{"rep", rep},
                {"group", group.group},
                {"max_rel_error", group.max_rel_error},
                {"max_abs_error", group.max_abs_error},
                {"passed", group.passed}};
      std::cout << line.dump() << std::endl;
      all_passed = all_passed && group.passed;
    }
  }
  return all_passed ? kOk : kGradCheckFailed;
}

double entropy(const std::vector<double>& p, std::size_t begin, std::size_t stride,
               std::size_t count) {
  double h = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double x = p[begin + k * stride];
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

int cmd_inspect(const std::string& model_path) {
  require_exists(model_path);
  const htn::ModelArchive archive = htn::load_archive(model_path);
  const htn::HtnModel& model = archive.model;
  const std::size_t C = model.modules.empty() ? 0 : model.modules[0].C;
  const std::size_t L = model.modules.empty() ? 0 : model.modules[0].L;
  const std::size_t V = model.modules.empty() ? 0 : model.modules[0].V;
  std::cout << "modules: " << model.module_count() << "  pairs: " << model.pair_count()
            << "  classes: " << model.K << '\n'
            << "C: " << C << "  L: " << L << "  V: " << V
            << "  vocab: " << archive.vocab.size() << " symbols" << '\n'
            << "normalization: " << htn::normalization_name(model.normalization) << '\n'
            << "epochs completed: " << archive.epochs_completed
            << "  seed: " << archive.config.seed << '\n';
  for (std::size_t m = 0; m < model.module_count(); ++m) {
    const htn::ProbTables t = htn::materialize(model.modules[m]);
    double ha = 0.0;
    for (std::size_t j = 0; j < C; ++j)
      for (std::size_t l = 0; l < L; ++l) ha += entropy(t.a, j * L + l, C * L, C);
    ha /= static_cast<double>(C * L);
    double hb = 0.0;
    for (std::size_t i = 0; i < C; ++i) hb += entropy(t.b, i * V, 1, V);
    hb /= static_cast<double>(C);
    std::cout << "module " << m << ": H(A)=" << ha << "  H(pi)=" << entropy(t.pi, 0, 1, C)
              << "  H(b)=" << hb << "  H(phi)=" << entropy(t.phi, 0, 1, L) << '\n';
  }
  for (std::size_t k = 0; k < model.K; ++k) {
    double norm = 0.0;
    for (std::size_t p = 0; p < model.pair_count(); ++p) norm += model.w(p, k) * model.w(p, k);
    std::cout << "|w_out[:," << k << "]| = " << std::sqrt(norm) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden tree Markov network trainer and classifier"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, model_path;
  std::optional<std::string> val_path, gradcheck_config;
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen", "Sample a synthetic dataset from generator models");
  gen->add_option("--config", config_path, "generator spec (JSON)")->required();
  gen->add_option("--seed", seed, "random seed");
  gen->add_option("--out", out_path, "output dataset path")->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config_path, "training configuration (JSON)")->required();
  tr->add_option("--data", data_path, "training dataset")->required();
  tr->add_option("--val", val_path, "validation dataset");
  tr->add_option("--out", out_path, "model archive output path")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a model archive on a dataset");
  ev->add_option("--model", model_path, "model archive")->required();
  ev->add_option("--data", data_path, "dataset to score")->required();

  auto* gs = app.add_subcommand("gridsearch", "Cross-validated (C, M) grid search");
  gs->add_option("--config", config_path, "grid configuration (JSON)")->required();
  gs->add_option("--data", data_path, "dataset")->required();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the gradients");
  gc->add_option("--config", gradcheck_config, "training configuration (JSON)");
  gc->add_option("--seed", seed, "random seed");

  auto* in = app.add_subcommand("inspect", "Summarize a model archive");
  in->add_option("--model", model_path, "model archive")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen(config_path, seed, out_path);
    if (tr->parsed()) return cmd_train(config_path, data_path, val_path, out_path);
    if (ev->parsed()) return cmd_eval(model_path, data_path);
    if (gs->parsed()) return cmd_gridsearch(config_path, data_path);
    if (gc->parsed()) return cmd_gradcheck(gradcheck_config, seed);
    if (in->parsed()) return cmd_inspect(model_path);
  } catch (const FileNotFound& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissingFile;
  } catch (const htn::VersionMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kVersionMismatch;
  } catch (const htn::MalformedInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const htn::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  } catch (...) {
    std::cerr << "error: unknown failure\n";
    return kError;
  }
  return kOk;
}

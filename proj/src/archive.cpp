#include "htn/archive.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace htn {

using nlohmann::json;

std::string normalization_name(Normalization n) {
  return n == Normalization::per_node ? "per_node" : "raw";
}

Normalization normalization_from_name(const std::string& name) {
  if (name == "raw") return Normalization::raw;
  if (name == "per_node") return Normalization::per_node;
  throw MalformedInput("unknown normalization mode '" + name + "'");
}

json params_to_json(const HtmmParameters& p) {
  return json{{"C", p.C},
              {"L", p.L},
              {"V", p.V},
              {"lambda_a", p.lambda_a},
              {"lambda_pi", p.lambda_pi},
              {"lambda_b", p.lambda_b},
              {"lambda_phi", p.lambda_phi}};
}

HtmmParameters params_from_json(const json& j) {
  HtmmParameters p(j.at("C").get<std::size_t>(), j.at("L").get<std::size_t>(),
                   j.at("V").get<std::size_t>());
  auto load = [&](const char* key, std::vector<double>& out) {
    const auto values = j.at(key).get<std::vector<double>>();
    if (values.size() != out.size())
      throw MalformedInput(std::string("bad shape for ") + key);
    out = values;
  };
  load("lambda_a", p.lambda_a);
  load("lambda_pi", p.lambda_pi);
  load("lambda_b", p.lambda_b);
  load("lambda_phi", p.lambda_phi);
  return p;
}

namespace {

json config_to_json_object(const TrainConfig& c) {
  return json{{"C", c.C},
              {"M", c.M},
              {"K", c.K},
              {"L", c.L},
              {"V", c.V},
              {"epochs", c.epochs},
              {"lr0", c.lr0},
              {"decay", c.decay},
              {"alpha0", c.alpha0},
              {"alphaT", c.alphaT},
              {"seed", c.seed},
              {"normalization", normalization_name(c.normalization)},
              {"pretrain_em_iters", c.pretrain_em_iters},
              {"minibatch", c.minibatch}};
}

TrainConfig config_from_json_object(const json& j) {
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "C") c.C = value.get<std::size_t>();
    else if (key == "M") c.M = value.get<std::size_t>();
    else if (key == "K") c.K = value.get<std::size_t>();
    else if (key == "L") c.L = value.get<std::size_t>();
    else if (key == "V") c.V = value.get<std::size_t>();
    else if (key == "epochs") c.epochs = value.get<std::size_t>();
    else if (key == "lr0") c.lr0 = value.get<double>();
    else if (key == "decay") c.decay = value.get<double>();
    else if (key == "alpha0") c.alpha0 = value.get<double>();
    else if (key == "alphaT") c.alphaT = value.get<double>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "normalization")
      c.normalization = normalization_from_name(value.get<std::string>());
    else if (key == "pretrain_em_iters") c.pretrain_em_iters = value.get<std::size_t>();
    else if (key == "minibatch") c.minibatch = value.get<std::size_t>();
    else throw MalformedInput("unknown config key '" + key + "'");
  }
  return c;
}

}  // namespace

void save_archive(const ModelArchive& archive, std::ostream& out) {
  json doc;
  doc["format_version"] = kArchiveFormatVersion;
  doc["K"] = archive.model.K;
  doc["M"] = archive.model.module_count();
  doc["normalization"] = normalization_name(archive.model.normalization);
  doc["modules"] = json::array();
  for (const auto& m : archive.model.modules) doc["modules"].push_back(params_to_json(m));
  doc["w_out"] = archive.model.w_out;
  json vocab = json::array();
  for (std::size_t i = 0; i < archive.vocab.size(); ++i) vocab.push_back(archive.vocab.symbol(i));
  doc["vocab"] = std::move(vocab);
  doc["unk_index"] = archive.vocab.unk_index();
  doc["config"] = config_to_json_object(archive.config);
  doc["epochs_completed"] = archive.epochs_completed;
  out << doc.dump(2) << '\n';
}

void save_archive(const ModelArchive& archive, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_archive(archive, out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ModelArchive load_archive(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("archive is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kArchiveFormatVersion)
      throw VersionMismatch("archive format_version " + std::to_string(version) +
                            " unsupported (expected " +
                            std::to_string(kArchiveFormatVersion) + ")");
    ModelArchive archive;
    archive.model.K = doc.at("K").get<std::size_t>();
    archive.model.normalization =
        normalization_from_name(doc.at("normalization").get<std::string>());
    for (const auto& m : doc.at("modules")) archive.model.modules.push_back(params_from_json(m));
    if (archive.model.module_count() != doc.at("M").get<std::size_t>())
      throw MalformedInput("module count disagrees with M");
    archive.model.pairs = pair_index(archive.model.module_count());
    archive.model.w_out = doc.at("w_out").get<std::vector<double>>();
    if (archive.model.w_out.size() != archive.model.pair_count() * archive.model.K)
      throw MalformedInput("bad w_out shape");
    for (const auto& symbol : doc.at("vocab"))
      archive.vocab.add(symbol.get<std::string>());
    const auto unk = doc.at("unk_index").get<std::size_t>();
    if (unk >= std::max<std::size_t>(archive.vocab.size(), 1))
      throw MalformedInput("unk_index out of range");
    if (archive.vocab.size() > 0) archive.vocab.set_unk_index(unk);
    archive.config = config_from_json_object(doc.at("config"));
    archive.epochs_completed = doc.at("epochs_completed").get<std::size_t>();
    return archive;
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("archive missing or mistyped field: ") + e.what());
  }
}

ModelArchive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_archive(in);
}

TrainConfig parse_train_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return config_from_json_object(doc);
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("bad config field: ") + e.what());
  }
}

std::string train_config_to_json(const TrainConfig& config) {
  return config_to_json_object(config).dump();
}

std::string metrics_to_json(const Metrics& metrics) {
  json doc;
  doc["accuracy"] = metrics.accuracy;
  if (metrics.f1) doc["f1"] = *metrics.f1;
  if (metrics.auc) doc["auc"] = *metrics.auc;
  json confusion = json::array();
  for (std::size_t t = 0; t < metrics.K; ++t) {
    json row = json::array();
    for (std::size_t p = 0; p < metrics.K; ++p) row.push_back(metrics.confusion_at(t, p));
    confusion.push_back(std::move(row));
  }
  doc["confusion"] = std::move(confusion);
  return doc.dump();
}

}  // namespace htn

#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "htn/archive.hpp"
#include "htn/rng.hpp"

#include "helpers.hpp"

using namespace htn;

namespace {

ModelArchive sample_archive() {
  ModelArchive archive;
  archive.model = HtnModel(3, 2, 2, 4, 2, 21, Normalization::per_node);
  archive.vocab = LabelVocab::placeholder(4);
  archive.config.C = 2;
  archive.config.M = 3;
  archive.config.K = 2;
  archive.config.L = 2;
  archive.config.V = 4;
  archive.config.seed = 21;
  archive.config.normalization = Normalization::per_node;
  archive.epochs_completed = 7;
  return archive;
}

}  // namespace

TEST_SUITE_BEGIN("archive");

TEST_CASE("round trip preserves every parameter bit") {
  const ModelArchive archive = sample_archive();
  std::stringstream buffer;
  save_archive(archive, buffer);
  const ModelArchive back = load_archive(buffer);
  CHECK(back.model == archive.model);  // exact double equality
  CHECK(back.vocab == archive.vocab);
  CHECK(back.epochs_completed == 7);
  CHECK(back.config.seed == 21);
  CHECK(back.config.normalization == Normalization::per_node);

  Rng rng(22);
  const LabeledTree t = testing::random_tree(rng, 8, 2, 4);
  const ForwardTrace a = forward(archive.model, t);
  const ForwardTrace b = forward(back.model, t);
  for (std::size_t k = 0; k < a.p.size(); ++k) CHECK(a.p[k] == b.p[k]);
}

TEST_CASE("unsupported format version") {
  const ModelArchive archive = sample_archive();
  std::stringstream buffer;
  save_archive(archive, buffer);
  auto doc = nlohmann::json::parse(buffer.str());
  doc["format_version"] = 99;
  std::stringstream doctored(doc.dump());
  CHECK_THROWS_AS(load_archive(doctored), VersionMismatch);
}

TEST_CASE("malformed documents") {
  std::stringstream not_json("this is not json");
  CHECK_THROWS_AS(load_archive(not_json), MalformedInput);
  std::stringstream missing(R"({"format_version": 1})");
  CHECK_THROWS_AS(load_archive(missing), MalformedInput);
}

TEST_CASE("config parsing applies defaults and rejects unknown keys") {
  const TrainConfig cfg = parse_train_config(R"({"C": 4, "M": 8, "seed": 5})");
  CHECK(cfg.C == 4);
  CHECK(cfg.M == 8);
  CHECK(cfg.seed == 5);
  CHECK(cfg.epochs == 100);
  CHECK(cfg.lr0 == 0.01);
  CHECK(cfg.decay == 0.97);
  CHECK(cfg.alpha0 == 0.5);
  CHECK(cfg.alphaT == 0.9);
  CHECK(cfg.minibatch == 1);
  CHECK(cfg.pretrain_em_iters == 0);
  CHECK(cfg.normalization == Normalization::raw);
  CHECK_THROWS_AS(parse_train_config(R"({"bogus": 1})"), MalformedInput);
  CHECK_THROWS_AS(parse_train_config("not json"), MalformedInput);
  CHECK_THROWS_AS(parse_train_config(R"({"normalization": "weird"})"), MalformedInput);

  const TrainConfig echo = parse_train_config(train_config_to_json(cfg));
  CHECK(echo.C == cfg.C);
  CHECK(echo.lr0 == cfg.lr0);
}

TEST_CASE("metrics records are single-line JSON") {
  Metrics m;
  m.K = 2;
  m.accuracy = 0.75;
  m.f1 = 0.5;
  m.confusion = {2, 1, 0, 1};
  const std::string line = metrics_to_json(m);
  CHECK(line.find('\n') == std::string::npos);
  const auto doc = nlohmann::json::parse(line);
  CHECK(doc["accuracy"] == 0.75);
  CHECK(doc["f1"] == 0.5);
  CHECK(doc["confusion"][0][0] == 2);
  CHECK(!doc.contains("auc"));
}

TEST_SUITE_END();

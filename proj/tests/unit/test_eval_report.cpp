#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "protoexplain/encoder_explainer.hpp"
#include "protoexplain/eval_report.hpp"
#include "test_support.hpp"

using namespace protoexplain;

namespace {

PrototypeBank embedding_bank(Matrix prototypes, std::vector<std::int64_t> class_of) {
  PrototypeBank b;
  b.prototypes = std::move(prototypes);
  b.class_of = std::move(class_of);
  b.k_per_class = 1;
  b.location = BankLocation::Embedding;
  return b;
}

struct FixtureModels {
  DatasetManifest manifest;
  std::vector<Predictor> predictors;
};

FixtureModels fixture_models() {
  FixtureModels f{load_manifest(testing::fixtures() / "synthetic" / "manifest.json"), {}};
  const DatasetManifest& m = f.manifest;
  const Matrix emb = load_embeddings(m);
  std::vector<float> rows;
  std::vector<std::int64_t> labels;
  const auto train_ids = m.sample_ids(SplitFilter::Train);
  for (auto id : train_ids) {
    const auto r = emb.row(static_cast<std::size_t>(id));
    rows.insert(rows.end(), r.begin(), r.end());
    labels.push_back(m.label_values[static_cast<std::size_t>(id)]);
  }
  KmexFitOptions kopts;
  f.predictors.push_back(Predictor::cnn(LinearClassifier(load_classifier_weights(m)), m.deepest_block()));
  f.predictors.push_back(Predictor::kmex(
      fit_kmex(Matrix(train_ids.size(), emb.cols(), rows), labels, m.num_classes, kopts, train_ids)));
  CompositeFitOptions copts;
  f.predictors.push_back(Predictor::composite(fit_composite_bank(m, 4, copts)));
  f.predictors.push_back(Predictor::composite(fit_composite_bank(m, 2, copts)));
  return f;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    out.push_back(cells);
  }
  return out;
}

}  // namespace

TEST_CASE("alignment of tight clusters around their prototypes is close to one") {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> noise(0.0f, 0.01f);
  Matrix emb(40, 3);
  std::vector<std::int64_t> labels(40);
  for (std::size_t i = 0; i < 40; ++i) {
    labels[i] = static_cast<std::int64_t>(i % 3);
    for (std::size_t j = 0; j < 3; ++j) emb(i, j) = (j == i % 3 ? 1.0f : 0.0f) + noise(rng);
  }
  const auto bank = embedding_bank(Matrix(3, 3, std::vector<float>{1, 0, 0, 0, 1, 0, 0, 0, 1}), {0, 1, 2});
  const AlignmentRow row = cosine_alignment(bank, emb, labels, "kmex");
  CHECK(row.model == "kmex");
  CHECK(row.cos_class > 0.99);
  CHECK(std::abs(row.cos_out) < 0.05);
  CHECK(row.zero_vectors == 0);
}

TEST_CASE("alignment: exact values, scale invariance, zero vectors and dimension checks") {
  const Matrix emb(3, 2, std::vector<float>{1, 0, 0, 1, 1, 1});
  const std::vector<std::int64_t> labels = {0, 1, 0};
  const auto bank = embedding_bank(Matrix(2, 2, std::vector<float>{1, 0, 0, 1}), {0, 1});
  const AlignmentRow a = cosine_alignment(bank, emb, labels, "m");
  // Prototype 0: own class {1, 1/sqrt2}, other {0}. Prototype 1: own {1}, other {0, 1/sqrt2}.
  const double h = 1.0 / std::sqrt(2.0);
  CHECK(a.cos_class == doctest::Approx(((1.0 + h) / 2.0 + 1.0) / 2.0));
  CHECK(a.cos_out == doctest::Approx((0.0 + h / 2.0) / 2.0));

  const auto scaled = embedding_bank(Matrix(2, 2, std::vector<float>{7, 0, 0, 0.25f}), {0, 1});
  Matrix emb2 = emb;
  for (float& v : emb2.data()) v *= 3.0f;
  const AlignmentRow b = cosine_alignment(scaled, emb2, labels, "m");
  CHECK(b.cos_class == doctest::Approx(a.cos_class));
  CHECK(b.cos_out == doctest::Approx(a.cos_out));

  Matrix with_zero = emb;
  with_zero(2, 0) = 0.0f;
  with_zero(2, 1) = 0.0f;
  CHECK(cosine_alignment(bank, with_zero, labels, "m").zero_vectors == 2);

  const auto wide = embedding_bank(Matrix(2, 3, 1.0f), {0, 1});
  CHECK_THROWS_AS(cosine_alignment(wide, emb, labels, "m"), Error);
}

TEST_CASE("orthogonal prototypes have zero alignment") {
  const Matrix emb(2, 2, std::vector<float>{0, 1, 0, 2});
  const std::vector<std::int64_t> labels = {0, 0};
  const auto bank = embedding_bank(Matrix(1, 2, std::vector<float>{5, 0}), {0});
  const AlignmentRow r = cosine_alignment(bank, emb, labels, "m");
  CHECK(r.cos_class == 0.0);
  CHECK(r.cos_out == 0.0);
}

TEST_CASE("accuracy_percent") {
  const std::vector<std::int64_t> p = {0, 1, 2, 2};
  const std::vector<std::int64_t> y = {0, 1, 1, 2};
  CHECK(accuracy_percent(p, y) == 75.0);
  CHECK_THROWS_AS(accuracy_percent(std::span(p).first(3), y), Error);
}

TEST_CASE("every canonical model is perfect on the synthetic fixture") {
  const FixtureModels f = fixture_models();
  const std::vector<std::uint64_t> seeds = {0};
  const AccuracyReport report = accuracy_report(f.manifest, f.predictors, seeds);
  REQUIRE(report.rows.size() == 4);
  CHECK(report.rows[0].model == "cnn");
  CHECK(report.rows[1].model == "kmex");
  CHECK(report.rows[2].model == "b4");
  CHECK(report.rows[3].model == "b234");
  for (const auto& r : report.rows) {
    CAPTURE(r.model);
    CHECK(r.train_acc == 100.0);
    CHECK(r.test_acc == 100.0);
  }

  const auto j = nlohmann::json::parse(to_json(report));
  CHECK(j["dataset"] == "synthetic_blobs");
  CHECK(j["rows"].size() == 8);
  CHECK(j["rows"][1]["model"] == "cnn");
  CHECK(j["rows"][1]["metric"] == "accuracy");
  CHECK(j["rows"][1]["split"] == "test");
  CHECK(j["rows"][1]["value"] == 100.0);
  CHECK(j["seeds"] == std::vector<std::uint64_t>{0});
  CHECK(to_json(accuracy_report(f.manifest, f.predictors, seeds)) == to_json(report));
  CHECK(to_text(report).find("b234") != std::string::npos);
}

TEST_CASE("a bank fitted on a test sample is refused") {
  const DatasetManifest m = load_manifest(testing::fixtures() / "synthetic" / "manifest.json");
  const auto test_id = m.sample_ids(SplitFilter::Test).front();
  PrototypeBank b;
  b.prototypes = Matrix(5, 24, 0.1f);
  b.class_of = {0, 1, 2, 3, 4};
  b.location = BankLocation::Composite;
  b.depth_from = 3;
  b.block_ids = {3, 4};
  b.fit_sample_ids = {m.sample_ids(SplitFilter::Train).front(), test_id};
  const Predictor p = Predictor::composite(b);
  try {
    check_split_integrity(p, m);
    FAIL("test sample accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Integrity);
    CHECK(std::string(e.what()).find(std::to_string(test_id)) != std::string::npos);
  }
  const std::vector<Predictor> models = {p};
  CHECK_THROWS_AS(predict_split(m, models, SplitFilter::Test), Error);
}

TEST_CASE("alignment report json and text") {
  AlignmentReport r;
  r.dataset = "d";
  r.k_per_class = 5;
  r.rows.push_back({"cnn", 0.5, -0.25, 0});
  r.notes.push_back("hello");
  const auto j = nlohmann::json::parse(to_json(r));
  CHECK(j["rows"].size() == 2);
  CHECK(j["rows"][0]["metric"] == "cos_class");
  CHECK(j["rows"][1]["value"] == -0.25);
  CHECK(j["k_per_class"] == 5);
  CHECK(j["notes"][0] == "hello");
  CHECK(to_text(r).find("0.5000") != std::string::npos);
}

TEST_CASE("projection csv has one row per point and prototype and parses back") {
  std::mt19937_64 rng(3);
  const Matrix emb = testing::random_matrix(10, 3, rng);
  std::vector<std::int64_t> labels(10);
  for (std::size_t i = 0; i < 10; ++i) labels[i] = static_cast<std::int64_t>(i % 2);
  const auto bank = embedding_bank(testing::random_matrix(2, 3, rng), {0, 1});
  const std::vector<ProjectionBank> plain = {{"kmex", &bank, false}};
  const auto rows = parse_csv(projection_csv(emb, labels, plain));
  REQUIRE(rows.size() == 13);
  CHECK(rows[0] == std::vector<std::string>{"id", "role", "class", "dim_0", "dim_1", "dim_2"});
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(rows[i + 1][0] == std::to_string(i));
    CHECK(rows[i + 1][1] == "point");
    CHECK(std::stoll(rows[i + 1][2]) == labels[i]);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::stof(rows[i + 1][3 + j]) == emb(i, j));
  }
  CHECK(rows[12][1] == "kmex");
  CHECK(std::stof(rows[12][5]) == bank.prototypes(1, 2));

  const std::vector<ProjectionBank> rescaled = {{"clf", &bank, true}};
  const auto rows2 = parse_csv(projection_csv(emb, labels, rescaled));
  REQUIRE(rows2.size() == 15);
  CHECK(rows2[13][1] == "clf_rescaled");
  double target = 0.0;
  for (std::size_t i = 0; i < 10; i += 2) target += std::sqrt(squared_norm(emb.row(i)));
  target /= 5.0;
  double norm = 0.0;
  for (std::size_t j = 0; j < 3; ++j) norm += std::pow(std::stod(rows2[13][3 + j]), 2);
  CHECK(std::sqrt(norm) == doctest::Approx(target).epsilon(1e-6));

  const auto wide = embedding_bank(Matrix(1, 4, 1.0f), {0});
  const std::vector<ProjectionBank> bad = {{"x", &wide, false}};
  CHECK_THROWS_AS(projection_csv(emb, labels, bad), Error);
}

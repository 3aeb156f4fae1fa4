#include <doctest.h>

#include <cmath>
#include <random>

#include "protoexplain/kmex.hpp"
#include "test_support.hpp"

using namespace protoexplain;

namespace {

KmexModel model_from(const Matrix& prototypes, std::size_t k_per_class, std::int64_t classes) {
  PrototypeBank bank;
  bank.prototypes = prototypes;
  bank.k_per_class = k_per_class;
  bank.location = BankLocation::Embedding;
  for (std::size_t k = 0; k < prototypes.rows(); ++k) bank.class_of.push_back(static_cast<std::int64_t>(k / k_per_class));
  return KmexModel{bank, classes};
}

std::size_t nearest_brute(std::span<const float> z, const Matrix& p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < p.rows(); ++k) {
    double d = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double diff = static_cast<double>(z[j]) - p(k, j);
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("similarity values") {
  const KmexModel m = model_from(Matrix(2, 2, std::vector<float>{0, 0, 1, 1}), 1, 2);
  const std::vector<float> z = {0.0f, 0.0f};
  const auto s = similarity(z, m.bank);
  CHECK(s[0] == 1.0);
  CHECK(s[1] == doctest::Approx(std::exp(-2.0)));
  const float r = static_cast<float>(std::sqrt(std::log(2.0)));
  const std::vector<float> half = {r, 0.0f};
  CHECK(similarity(half, model_from(Matrix(1, 2, 0.0f), 1, 1).bank)[0] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("prediction at a prototype and tie toward the lowest prototype") {
  // Two classes, five prototypes each, on a line.
  Matrix p(10, 1);
  for (std::size_t k = 0; k < 10; ++k) p(k, 0) = static_cast<float>(k) * 10.0f;
  p(7, 0) = 2.0f;
  p(0, 0) = -2.0f;
  const KmexModel m = model_from(p, 5, 2);
  const std::vector<float> at = {30.0f};
  CHECK(kmex_predict(at, m).class_id == 0);
  const std::vector<float> at7 = {2.0f};
  const auto hit = kmex_predict(at7, m);
  CHECK(hit.class_id == 1);
  CHECK(hit.one_hot == std::vector<double>{0.0, 1.0});
  CHECK(hit.winning_prototype == 7);
  const std::vector<float> mid = {0.0f};  // 2 away from prototype 0 and 7
  const auto tie = kmex_predict(mid, m);
  CHECK(tie.winning_prototype == 0);
  CHECK(tie.class_id == 0);
}

TEST_CASE("argmax similarity equals the brute-force nearest prototype, even after underflow") {
  std::mt19937_64 rng(99);
  const Matrix p = testing::random_matrix(15, 8, rng, -20.0f, 20.0f);
  const KmexModel m = model_from(p, 5, 3);
  for (int t = 0; t < 1000; ++t) {
    const Matrix z = testing::random_matrix(1, 8, rng, -40.0f, 40.0f);
    CHECK(kmex_predict(z.row(0), m).winning_prototype == nearest_brute(z.row(0), p));
  }
}

TEST_CASE("shifting inputs and prototypes together does not change predictions") {
  std::mt19937_64 rng(4);
  const Matrix p = testing::random_matrix(6, 3, rng);
  Matrix shifted = p;
  for (std::size_t k = 0; k < 6; ++k) shifted(k, 1) += 0.5f;
  for (int t = 0; t < 200; ++t) {
    Matrix z = testing::random_matrix(1, 3, rng);
    const auto a = kmex_predict(z.row(0), model_from(p, 2, 3)).class_id;
    z(0, 1) += 0.5f;
    CHECK(kmex_predict(z.row(0), model_from(shifted, 2, 3)).class_id == a);
  }
}

TEST_CASE("one prototype per class is the nearest class mean") {
  std::mt19937_64 rng(6);
  const Matrix x = testing::random_matrix(60, 4, rng);
  std::vector<std::int64_t> labels(60);
  for (std::size_t i = 0; i < 60; ++i) labels[i] = static_cast<std::int64_t>(i % 3);
  KmexFitOptions opts;
  opts.k_per_class = 1;
  const KmexModel m = fit_kmex(x, labels, 3, opts);
  Matrix means(3, 4);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t i = c; i < 60; i += 3) s += x(i, j);
      means(c, j) = static_cast<float>(s / 20.0);
      CHECK(m.bank.prototypes(c, j) == doctest::Approx(means(c, j)).epsilon(1e-6));
    }
  }
  for (int t = 0; t < 100; ++t) {
    const Matrix z = testing::random_matrix(1, 4, rng);
    CHECK(kmex_predict(z.row(0), m).class_id == static_cast<std::int64_t>(nearest_brute(z.row(0), means)));
  }
}

TEST_CASE("fit shape, determinism and recorded sample ids") {
  std::mt19937_64 rng(7);
  const Matrix x = testing::random_matrix(40, 3, rng);
  std::vector<std::int64_t> labels(40);
  std::vector<std::int64_t> ids(40);
  for (std::size_t i = 0; i < 40; ++i) {
    labels[i] = static_cast<std::int64_t>(i % 2);
    ids[i] = static_cast<std::int64_t>(100 + i);
  }
  KmexFitOptions opts;
  opts.seed = 12;
  const KmexModel a = fit_kmex(x, labels, 2, opts, ids);
  const KmexModel b = fit_kmex(x, labels, 2, opts, ids);
  CHECK(a.bank.size() == 10);
  CHECK(a.bank.location == BankLocation::Embedding);
  CHECK(a.bank.prototypes == b.bank.prototypes);
  CHECK(a.bank.fit_sample_ids == ids);
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("model validation") {
  KmexModel m = model_from(Matrix(4, 2, 0.5f), 2, 2);
  CHECK_NOTHROW(m.validate());
  m.num_classes = 3;
  CHECK_THROWS_AS(m.validate(), Error);
  KmexModel c = model_from(Matrix(2, 2, 0.5f), 1, 2);
  c.bank.location = BankLocation::ClassifierWeights;
  CHECK_THROWS_AS(c.validate(), Error);
  const std::vector<float> wrong = {1.0f};
  CHECK_THROWS_AS(kmex_predict(wrong, m), Error);
}

#include <doctest.h>

#include "protoexplain/prototype_bank.hpp"
#include "test_support.hpp"

using namespace protoexplain;

namespace {

PrototypeBank composite_bank() {
  PrototypeBank b;
  b.prototypes = Matrix(6, 3, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8, 9, -1, -2, -3, 0.5f, 0.25f, 0, 1e-7f, 3e8f, -0.0f});
  b.class_of = {0, 0, 1, 1, 2, 2};
  b.k_per_class = 2;
  b.location = BankLocation::Composite;
  b.depth_from = 3;
  b.block_ids = {3, 4};
  b.seed = 0xFFFFFFFFFFFFFFFFull;
  b.n_init = 10;
  b.row_cap = 200000;
  b.fit_sample_ids = {0, 4, 9};
  return b;
}

}  // namespace

TEST_CASE("bank round-trips through NPY and sidecar") {
  testing::TempDir tmp("bank");
  const PrototypeBank b = composite_bank();
  save_bank(b, tmp / "b.npy");
  CHECK(std::filesystem::exists(sidecar_path(tmp / "b.npy")));
  const PrototypeBank back = load_bank(tmp / "b.npy");
  CHECK(back.prototypes == b.prototypes);
  CHECK(back.class_of == b.class_of);
  CHECK(back.k_per_class == 2);
  CHECK(back.location == BankLocation::Composite);
  CHECK(back.depth_from == 3);
  CHECK(back.block_ids == b.block_ids);
  CHECK(back.seed == b.seed);
  CHECK(back.n_init == 10);
  CHECK(back.row_cap == 200000);
  CHECK(back.fit_sample_ids == b.fit_sample_ids);
  CHECK(back.num_classes() == 3);
}

TEST_CASE("missing bank files are a missing prerequisite") {
  testing::TempDir tmp("bank_missing");
  try {
    load_bank(tmp / "nope.npy");
    FAIL("loaded a missing bank");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingPrerequisite);
  }
  save_bank(composite_bank(), tmp / "b.npy");
  std::filesystem::remove(sidecar_path(tmp / "b.npy"));
  try {
    load_bank(tmp / "b.npy");
    FAIL("loaded a bank without sidecar");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingPrerequisite);
  }
}

TEST_CASE("bank invariants") {
  PrototypeBank b = composite_bank();
  CHECK_NOTHROW(b.validate());
  b.class_of = {0, 1, 0, 1, 2, 2};
  CHECK_THROWS_AS(b.validate(), Error);
  b = composite_bank();
  b.depth_from.reset();
  CHECK_THROWS_AS(b.validate(), Error);
  b = composite_bank();
  b.k_per_class = 4;
  CHECK_THROWS_AS(b.validate(), Error);
  b = composite_bank();
  b.location = BankLocation::ClassifierWeights;
  CHECK_THROWS_AS(b.validate(), Error);
  b = composite_bank();
  b.prototypes(1, 1) = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(b.validate(), Error);
}

TEST_CASE("location names") {
  for (auto loc : {BankLocation::ClassifierWeights, BankLocation::Embedding, BankLocation::Composite}) {
    CHECK(parse_bank_location(to_string(loc)) == loc);
  }
  CHECK_THROWS_AS(parse_bank_location("elsewhere"), Error);
}

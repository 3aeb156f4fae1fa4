#include <doctest.h>

#include "protoexplain/synthetic.hpp"
#include "test_support.hpp"

using namespace protoexplain;

TEST_CASE("regenerating the committed fixture is byte-identical") {
  testing::TempDir tmp("synthetic");
  write_synthetic_dataset(SyntheticSpec{}, tmp.path());
  const auto ref = testing::fixtures() / "synthetic";
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(ref)) {
    CAPTURE(e.path().filename().string());
    REQUIRE(std::filesystem::exists(tmp / e.path().filename()));
    CHECK(testing::read_bytes(tmp / e.path().filename()) == testing::read_bytes(e.path()));
    ++files;
  }
  std::size_t produced = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(tmp.path())) ++produced;
  CHECK(produced == files);
}

TEST_CASE("labels are balanced, splits follow the per-class counts") {
  testing::TempDir tmp("synthetic_small");
  SyntheticSpec spec;
  spec.num_classes = 3;
  spec.train_per_class = 4;
  spec.test_per_class = 2;
  spec.seed = 99;
  const DatasetManifest m = write_synthetic_dataset(spec, tmp.path());
  CHECK(m.num_samples == 18);
  CHECK(m.sample_ids(SplitFilter::Train).size() == 12);
  CHECK(m.sample_ids(SplitFilter::Test).size() == 6);
  std::vector<int> per_class(3, 0);
  for (auto l : m.label_values) ++per_class[static_cast<std::size_t>(l)];
  CHECK(per_class == std::vector<int>{6, 6, 6});
  CHECK_FALSE(std::filesystem::exists(tmp / "images"));
}

TEST_CASE("images are written when requested and listed in the manifest") {
  testing::TempDir tmp("synthetic_images");
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.train_per_class = 1;
  spec.test_per_class = 1;
  spec.with_images = true;
  spec.image_size = 32;
  const DatasetManifest m = write_synthetic_dataset(spec, tmp.path());
  REQUIRE(m.images.size() == 4);
  for (const auto& p : m.images) CHECK(std::filesystem::exists(p));
}

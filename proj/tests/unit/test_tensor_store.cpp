#include <doctest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "corruptions.hpp"
#include "protoexplain/tensor_store.hpp"
#include "test_support.hpp"

using namespace protoexplain;
using testing::TempDir;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected protoexplain::Error");
  return ErrorKind::Io;
}

TensorBlob random_blob(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> rank_d(1, 4);
  std::uniform_int_distribution<std::int64_t> ext_d(1, 6);
  std::vector<std::int64_t> shape(static_cast<std::size_t>(rank_d(rng)));
  std::size_t n = 1;
  for (auto& s : shape) {
    s = ext_d(rng);
    n *= static_cast<std::size_t>(s);
  }
  if (rng() % 2) {
    std::vector<float> v(n);
    // Raw bit patterns minus NaNs: any finite or infinite float must survive.
    for (auto& x : v) {
      std::uint32_t bits = static_cast<std::uint32_t>(rng());
      if ((bits & 0x7F800000u) == 0x7F800000u) bits &= 0xFF7FFFFFu;
      std::memcpy(&x, &bits, sizeof x);
    }
    return TensorBlob(shape, std::move(v));
  }
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = static_cast<std::int64_t>(rng());
  return TensorBlob(shape, std::move(v));
}

}  // namespace

TEST_CASE("numpy-written files decode to their values") {
  const auto dir = testing::fixtures() / "npy";
  const TensorBlob a = read_tensor(dir / "i64_2x2.npy");
  CHECK(a.dtype() == DType::I64);
  CHECK(a.shape() == std::vector<std::int64_t>{2, 2});
  CHECK(a.i64() == std::vector<std::int64_t>{1, 2, 3, 4});

  const TensorBlob b = read_tensor(dir / "f32_vec3.npy");
  CHECK(b.shape() == std::vector<std::int64_t>{3});
  CHECK(b.f32() == std::vector<float>{1.5f, -2.0f, 0.0f});

  const TensorBlob c = read_tensor(dir / "f32_2x3x4.npy");
  CHECK(c.shape() == std::vector<std::int64_t>{2, 3, 4});
  for (std::size_t i = 0; i < 24; ++i) CHECK(c.f32()[i] == static_cast<float>(i) / 8.0f);
}

TEST_CASE("rewriting a numpy file reproduces it byte for byte") {
  TempDir tmp("npy_rewrite");
  for (const char* name : {"i64_2x2.npy", "f32_vec3.npy", "f32_2x3x4.npy", "f32_block.npy", "i64_long.npy"}) {
    CAPTURE(name);
    const auto src = testing::fixtures() / "npy" / name;
    write_tensor(read_tensor(src), tmp / name);
    CHECK(testing::read_bytes(tmp / name) == testing::read_bytes(src));
  }
}

TEST_CASE("header is padded to a 64-byte boundary and ends in a newline") {
  for (const auto& shape : std::vector<std::vector<std::int64_t>>{{3}, {2, 2}, {1000000, 49, 512}}) {
    const std::string bytes = npy_header_bytes(DType::F32, shape);
    CHECK(bytes.size() % 64 == 0);
    CHECK(bytes.back() == '\n');
    std::istringstream in(bytes);
    CHECK(read_npy_header(in, "mem").shape == shape);
  }
}

TEST_CASE("randomized round trip is bitwise exact") {
  TempDir tmp("npy_random");
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const TensorBlob blob = random_blob(rng);
    const auto p = tmp / ("t" + std::to_string(i) + ".npy");
    write_tensor(blob, p);
    const TensorBlob back = read_tensor(p);
    REQUIRE(bitwise_equal(blob, back));
    write_tensor(back, tmp / "again.npy");
    REQUIRE(testing::read_bytes(p) == testing::read_bytes(tmp / "again.npy"));
  }
}

TEST_CASE("unsupported and malformed files are classified") {
  const auto dir = testing::fixtures() / "npy";
  CHECK(kind_of([&] { read_tensor(dir / "f64_vec.npy"); }) == ErrorKind::Unsupported);
  CHECK(kind_of([&] { read_tensor(dir / "i32_vec.npy"); }) == ErrorKind::Unsupported);
  CHECK(kind_of([&] { read_tensor(dir / "f32_fortran.npy"); }) == ErrorKind::Unsupported);
  CHECK(kind_of([&] { read_tensor(dir / "f32_v2.npy"); }) == ErrorKind::Unsupported);
  CHECK(kind_of([&] { read_tensor(dir / "does_not_exist.npy"); }) == ErrorKind::Io);

  TempDir tmp("npy_bad");
  const std::string good = testing::read_bytes(dir / "f32_vec3.npy");

  std::string bad_magic = good;
  bad_magic[1] = 'X';
  testing::write_bytes(tmp / "magic.npy", bad_magic);
  CHECK(kind_of([&] { read_tensor(tmp / "magic.npy"); }) == ErrorKind::Format);

  testing::write_bytes(tmp / "short.npy", good.substr(0, good.size() - 2));
  CHECK(kind_of([&] { read_tensor(tmp / "short.npy"); }) == ErrorKind::Format);

  testing::write_bytes(tmp / "long.npy", good + "xx");
  CHECK(kind_of([&] { read_tensor(tmp / "long.npy"); }) == ErrorKind::Format);

  testing::write_bytes(tmp / "stub.npy", good.substr(0, 7));
  CHECK(kind_of([&] { read_tensor(tmp / "stub.npy"); }) == ErrorKind::Format);

  std::string garbled = good;
  const auto at = garbled.find("'shape'");
  garbled[at + 1] = 'z';
  testing::write_bytes(tmp / "garbled.npy", garbled);
  CHECK(kind_of([&] { read_tensor(tmp / "garbled.npy"); }) == ErrorKind::Format);
}

TEST_CASE("a blob whose size disagrees with its shape is refused before writing") {
  TempDir tmp("npy_invalid");
  const TensorBlob blob({2, 3}, std::vector<float>(5, 0.0f));
  CHECK(kind_of([&] { write_tensor(blob, tmp / "x.npy"); }) == ErrorKind::Validation);
  CHECK_FALSE(std::filesystem::exists(tmp / "x.npy"));
  CHECK(kind_of([&] { TensorBlob({0}, std::vector<float>{}).validate(); }) == ErrorKind::Validation);
}

TEST_CASE("dtype accessors reject the other dtype") {
  const TensorBlob f({1}, std::vector<float>{1.0f});
  CHECK(kind_of([&] { (void)f.i64(); }) == ErrorKind::Validation);
}

TEST_CASE("sliced reads match whole-file reads") {
  const auto p = testing::fixtures() / "npy" / "f32_block.npy";
  const TensorBlob all = read_tensor(p);
  TensorFile file(p);
  CHECK(file.leading() == 2);
  const auto s1 = file.read_f32_slice(1);
  REQUIRE(s1.size() == 7u * 7u * 3u);
  CHECK(std::equal(s1.begin(), s1.end(), all.f32().begin() + 147));
  CHECK(kind_of([&] { file.read_f32_slice(2); }) == ErrorKind::Validation);
  CHECK(kind_of([&] { file.read_i64_slice(0); }) == ErrorKind::Validation);
}

TEST_CASE("synthetic fixture manifest loads") {
  const DatasetManifest m = load_manifest(testing::fixtures() / "synthetic" / "manifest.json");
  CHECK(m.dataset_name == "synthetic_blobs");
  CHECK(m.num_classes == 5);
  CHECK(m.num_samples == 150);
  CHECK(m.embedding_dim == 16);
  REQUIRE(m.blocks.size() == 3);
  CHECK(m.blocks[0].height == 8);
  CHECK(m.deepest_block() == 4);
  CHECK(m.block_ids_from(3) == std::vector<int>{3, 4});
  CHECK(kind_of([&] { (void)m.block_ids_from(5); }) == ErrorKind::Config);
  CHECK(m.sample_ids(SplitFilter::Train).size() == 75);
  CHECK(m.sample_ids(SplitFilter::Test).size() == 75);
  CHECK(m.sample_ids(SplitFilter::All).size() == 150);
}

TEST_CASE("manifest write and reload is stable") {
  TempDir tmp("manifest_write");
  testing::copy_dataset(testing::fixtures() / "synthetic", tmp.path());
  const DatasetManifest m = load_manifest(tmp / "manifest.json");
  write_manifest(m, tmp / "again.json");
  const DatasetManifest back = load_manifest(tmp / "again.json");
  CHECK(back.label_values == m.label_values);
  CHECK(back.blocks.size() == m.blocks.size());
  CHECK(testing::read_bytes(tmp / "again.json") == testing::read_bytes(tmp / "manifest.json"));
}

TEST_CASE("each seeded manifest corruption is caught and names its file") {
  for (const auto& c : testing::manifest_corruptions()) {
    CAPTURE(c.label);
    TempDir tmp("corrupt");
    testing::copy_dataset(testing::fixtures() / "synthetic", tmp.path());
    c.apply(tmp.path());
    try {
      (void)load_manifest(tmp / "manifest.json");
      FAIL("corruption not detected");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Validation);
      CHECK(std::string(e.what()).find(c.names) != std::string::npos);
    }
  }
}

TEST_CASE("record stream yields the filtered ids in order with consistent blocks") {
  const DatasetManifest m = load_manifest(testing::fixtures() / "synthetic" / "manifest.json");
  const Matrix emb = load_embeddings(m);
  RecordStream stream(m, SplitFilter::Test, 3);
  CHECK(stream.size() == 75);
  std::int64_t last = -1;
  std::size_t seen = 0;
  while (auto rec = stream.next()) {
    CHECK(rec->sample_id > last);
    last = rec->sample_id;
    CHECK(rec->split == Split::Test);
    CHECK(rec->per_block.count(2) == 0);
    CHECK(rec->block(3).height == 4);
    CHECK(rec->block(4).channels == 16);
    const auto row = emb.row(static_cast<std::size_t>(rec->sample_id));
    CHECK(std::equal(row.begin(), row.end(), rec->embedding.begin()));
    ++seen;
  }
  CHECK(seen == 75);
  const auto train_id = m.sample_ids(SplitFilter::Train).front();
  CHECK(kind_of([&] { stream.load(train_id); }) == ErrorKind::Config);
}

#include "protoexplain/prototype_bank.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "protoexplain/tensor_store.hpp"

namespace protoexplain {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* to_string(BankLocation location) {
  switch (location) {
    case BankLocation::ClassifierWeights: return "classifier_weights";
    case BankLocation::Embedding: return "embedding";
    case BankLocation::Composite: return "composite";
  }
  return "unknown";
}

BankLocation parse_bank_location(const std::string& text) {
  if (text == "classifier_weights") return BankLocation::ClassifierWeights;
  if (text == "embedding") return BankLocation::Embedding;
  if (text == "composite") return BankLocation::Composite;
  fail(ErrorKind::Format, "unknown bank location '" + text + "'");
}

std::int64_t PrototypeBank::num_classes() const {
  return class_of.empty() ? 0 : class_of.back() + 1;
}

void PrototypeBank::validate() const {
  if (prototypes.rows() == 0 || prototypes.cols() == 0) {
    fail(ErrorKind::Validation, "prototype bank is empty");
  }
  if (class_of.size() != prototypes.rows()) {
    fail(ErrorKind::Validation, "prototype bank: class_of length differs from prototype count");
  }
  if (k_per_class < 1) fail(ErrorKind::Validation, "prototype bank: k_per_class must be positive");
  for (float v : prototypes.data()) {
    if (!std::isfinite(v)) fail(ErrorKind::Validation, "prototype bank contains non-finite values");
  }
  if (location == BankLocation::ClassifierWeights && k_per_class != 1) {
    fail(ErrorKind::Validation, "classifier-weights bank has exactly one prototype per class");
  }
  if (size() % k_per_class != 0) {
    fail(ErrorKind::Validation, "prototype count is not a multiple of k_per_class");
  }
  for (std::size_t k = 0; k < size(); ++k) {
    if (class_of[k] != static_cast<std::int64_t>(k / k_per_class)) {
      fail(ErrorKind::Validation, "prototype bank is not class-major blocked at prototype " +
                                      std::to_string(k));
    }
  }
  if (location == BankLocation::Composite && !depth_from) {
    fail(ErrorKind::Validation, "composite bank needs depth_from");
  }
}

fs::path sidecar_path(const fs::path& npy_path) {
  fs::path p = npy_path;
  p.replace_extension(".json");
  return p;
}

void save_bank(const PrototypeBank& bank, const fs::path& npy_path) {
  bank.validate();
  write_tensor(TensorBlob({static_cast<std::int64_t>(bank.size()), static_cast<std::int64_t>(bank.dim())},
                          bank.prototypes.data()),
               npy_path);
  json meta;
  meta["class_of_cluster"] = bank.class_of;
  meta["k_per_class"] = bank.k_per_class;
  meta["num_classes"] = bank.num_classes();
  meta["location"] = to_string(bank.location);
  meta["depth_from"] = bank.depth_from ? json(*bank.depth_from) : json(nullptr);
  meta["block_ids"] = bank.block_ids;
  meta["seed"] = bank.seed;
  meta["n_init"] = bank.n_init;
  meta["row_cap"] = bank.row_cap;
  meta["fit_sample_ids"] = bank.fit_sample_ids;
  std::ofstream out(sidecar_path(npy_path), std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + sidecar_path(npy_path).string());
  out << meta.dump(2) << '\n';
}

PrototypeBank load_bank(const fs::path& npy_path) {
  if (!fs::exists(npy_path)) {
    fail(ErrorKind::MissingPrerequisite, "prototype bank " + npy_path.string() + " not found");
  }
  const fs::path meta_path = sidecar_path(npy_path);
  std::ifstream in(meta_path);
  if (!in) fail(ErrorKind::MissingPrerequisite, "bank sidecar " + meta_path.string() + " not found");
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, meta_path.string() + ": " + e.what());
  }

  TensorBlob blob = read_tensor(npy_path);
  if (blob.shape().size() != 2) fail(ErrorKind::Validation, npy_path.string() + ": bank must be 2-D");

  PrototypeBank bank;
  try {
    bank.prototypes = Matrix(static_cast<std::size_t>(blob.shape()[0]),
                             static_cast<std::size_t>(blob.shape()[1]), std::move(blob.f32()));
    bank.class_of = meta.at("class_of_cluster").get<std::vector<std::int64_t>>();
    bank.k_per_class = meta.at("k_per_class").get<std::size_t>();
    bank.location = parse_bank_location(meta.at("location").get<std::string>());
    if (!meta.at("depth_from").is_null()) bank.depth_from = meta.at("depth_from").get<int>();
    bank.block_ids = meta.value("block_ids", std::vector<int>{});
    bank.seed = meta.value("seed", std::uint64_t{0});
    bank.n_init = meta.value("n_init", std::size_t{0});
    bank.row_cap = meta.value("row_cap", std::size_t{0});
    bank.fit_sample_ids = meta.value("fit_sample_ids", std::vector<std::int64_t>{});
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, meta_path.string() + ": " + e.what());
  }
  bank.validate();
  return bank;
}

}  // namespace protoexplain

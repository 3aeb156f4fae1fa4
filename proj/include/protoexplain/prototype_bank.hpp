#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "protoexplain/matrix.hpp"

namespace protoexplain {

enum class BankLocation { ClassifierWeights, Embedding, Composite };

const char* to_string(BankLocation location);
BankLocation parse_bank_location(const std::string& text);

// K prototype vectors with class ownership. Outside the classifier view the
// rows are class-major: class c owns rows [c*k_per_class, (c+1)*k_per_class).
// Count-based prediction windows rely on that ordering.
struct PrototypeBank {
  Matrix prototypes;
  std::vector<std::int64_t> class_of;
  std::size_t k_per_class = 1;
  BankLocation location = BankLocation::Embedding;
  std::optional<int> depth_from;
  std::vector<int> block_ids;  // composite banks: blocks included, ascending

  // Fitting metadata.
  std::uint64_t seed = 0;
  std::size_t n_init = 0;
  std::size_t row_cap = 0;  // 0 when no sub-sampling cap applies
  std::vector<std::int64_t> fit_sample_ids;

  std::size_t size() const noexcept { return prototypes.rows(); }
  std::size_t dim() const noexcept { return prototypes.cols(); }
  std::int64_t num_classes() const;

  void validate() const;
};

// Writes the centroids as an f32 NPY at `npy_path` and the metadata as a
// JSON sidecar next to it (same stem, .json extension).
void save_bank(const PrototypeBank& bank, const std::filesystem::path& npy_path);
PrototypeBank load_bank(const std::filesystem::path& npy_path);

std::filesystem::path sidecar_path(const std::filesystem::path& npy_path);

}  // namespace protoexplain

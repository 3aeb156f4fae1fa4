#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "protoexplain/matrix.hpp"

namespace protoexplain {

enum class DType { F32, I64 };

const char* to_string(DType dtype);

// Dense row-major array with shape metadata. Only the two on-disk dtypes
// exist: f32 for activations and weights, i64 for labels and assignments.
class TensorBlob {
 public:
  using Storage = std::variant<std::vector<float>, std::vector<std::int64_t>>;

  TensorBlob() = default;
  TensorBlob(std::vector<std::int64_t> shape, std::vector<float> data);
  TensorBlob(std::vector<std::int64_t> shape, std::vector<std::int64_t> data);

  const std::vector<std::int64_t>& shape() const noexcept { return shape_; }
  DType dtype() const noexcept {
    return std::holds_alternative<std::vector<float>>(data_) ? DType::F32
                                                             : DType::I64;
  }
  std::size_t size() const noexcept;
  std::size_t element_bytes() const noexcept { return 4 + 4 * (dtype() == DType::I64); }

  const std::vector<float>& f32() const;
  const std::vector<std::int64_t>& i64() const;
  std::vector<float>& f32();
  std::vector<std::int64_t>& i64();

  const void* bytes() const noexcept;

  // Throws Validation when the shape is empty, has a non-positive extent,
  // or disagrees with the element count.
  void validate() const;

  // Bitwise comparison (NaN payloads included).
  friend bool bitwise_equal(const TensorBlob& a, const TensorBlob& b);

 private:
  std::vector<std::int64_t> shape_;
  Storage data_ = std::vector<float>{};
};

struct NpyHeader {
  DType dtype = DType::F32;
  std::vector<std::int64_t> shape;
  std::size_t data_offset = 0;
};

// Parses the NPY v1.0 preamble at the start of `in`.
NpyHeader read_npy_header(std::istream& in, const std::string& origin);

// Canonical header bytes (numpy layout, 64-byte aligned, growth padding).
std::string npy_header_bytes(DType dtype, const std::vector<std::int64_t>& shape);

TensorBlob read_tensor(const std::filesystem::path& path);
void write_tensor(const TensorBlob& blob, const std::filesystem::path& path);

// Random access to the leading axis of an NPY file without loading the whole
// payload, e.g. one sample of an (N, H, W, D) activation tensor.
class TensorFile {
 public:
  explicit TensorFile(std::filesystem::path path);

  const NpyHeader& header() const noexcept { return header_; }
  const std::filesystem::path& path() const noexcept { return path_; }
  std::int64_t leading() const noexcept { return header_.shape.front(); }
  std::size_t slice_size() const noexcept;

  std::vector<float> read_f32_slice(std::int64_t index);
  std::vector<std::int64_t> read_i64_slice(std::int64_t index);

 private:
  void seek_slice(std::int64_t index, std::size_t element_bytes);

  std::filesystem::path path_;
  std::ifstream in_;
  NpyHeader header_;
};

// ---------------------------------------------------------------------------
// Dataset manifests

enum class Split : std::int64_t { Train = 0, Test = 1 };

enum class SplitFilter { Train, Test, All };

const char* to_string(Split split);
SplitFilter parse_split_filter(const std::string& text);

struct BlockSpec {
  int id = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t channels = 0;
  std::filesystem::path path;
};

struct DatasetManifest {
  std::filesystem::path source;
  std::string dataset_name;
  std::int64_t num_classes = 0;
  std::int64_t embedding_dim = 0;
  std::int64_t num_samples = 0;
  std::vector<BlockSpec> blocks;  // ascending id, i.e. increasing depth
  std::filesystem::path embeddings;
  std::filesystem::path classifier;
  std::filesystem::path labels;
  std::filesystem::path split_path;
  std::vector<std::int64_t> label_values;
  std::vector<Split> split_values;
  // Optional per-sample input images (used only for rendering).
  std::vector<std::filesystem::path> images;
  std::string bias_handling;

  const BlockSpec& block(int id) const;
  bool has_block(int id) const;
  int deepest_block() const { return blocks.back().id; }
  std::vector<int> block_ids_from(int depth_from) const;
  std::vector<std::int64_t> sample_ids(SplitFilter filter) const;
};

// Loads and fully validates a manifest: every referenced file is opened and
// its header checked against the declared shapes before anything is returned.
DatasetManifest load_manifest(const std::filesystem::path& path);

void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path);

struct ActivationRecord {
  std::int64_t sample_id = 0;
  std::map<int, FeatureGrid> per_block;
  std::vector<float> embedding;
  std::int64_t label = 0;
  Split split = Split::Train;

  const FeatureGrid& block(int id) const;
};

// Streams records in ascending sample id, materializing only blocks with
// id >= depth_from.
class RecordStream {
 public:
  RecordStream(const DatasetManifest& manifest, SplitFilter filter,
               int depth_from);

  std::optional<ActivationRecord> next();
  void reset() { cursor_ = 0; }
  std::size_t size() const noexcept { return ids_.size(); }

  // Random access by sample id (must belong to the stream's filter).
  ActivationRecord load(std::int64_t sample_id);

 private:
  const DatasetManifest* manifest_;
  std::vector<std::int64_t> ids_;
  std::size_t cursor_ = 0;
  std::vector<std::pair<int, TensorFile>> blocks_;
  TensorFile embeddings_;
};

Matrix load_embeddings(const DatasetManifest& manifest);
// D x C classifier weights.
Matrix load_classifier_weights(const DatasetManifest& manifest);

}  // namespace protoexplain

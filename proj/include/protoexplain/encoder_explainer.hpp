#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "protoexplain/matrix.hpp"
#include "protoexplain/prototype_bank.hpp"
#include "protoexplain/tensor_store.hpp"

namespace protoexplain {

// Bilinear resize with half-pixel centers: target cell i samples the source
// at (i + 0.5) * src / dst - 0.5, clamped to the grid. Only upscaling is
// allowed; equal sizes pass values through untouched.
FeatureGrid upsample_bilinear(const FeatureGrid& source, std::size_t target_h,
                              std::size_t target_w);

// Single-channel variant in double precision, used for attribution maps.
std::vector<double> upsample_bilinear(std::span<const double> source, std::size_t source_h,
                                      std::size_t source_w, std::size_t target_h,
                                      std::size_t target_w);

// Multi-depth feature matrix: one row per cell of the shallowest included
// block, channels of every block b >= depth_from concatenated in ascending
// order, each slice scaled by 1 / (D_b * ||u_b||_F).
struct CompositeFeature {
  Matrix rows;  // (height * width) x sum(D_b)
  std::size_t height = 0;
  std::size_t width = 0;
  int depth_from = 0;
  std::vector<int> block_ids;
  std::vector<std::size_t> channel_offsets;
  std::vector<std::string> warnings;  // zero-norm blocks
};

CompositeFeature compose(const ActivationRecord& record, int depth_from);

// Hard assignment of composite rows to prototypes, laid out on the grid.
struct ExplanationMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int64_t> assignments;  // row-major, values in [0, K)
  int depth_from = 0;
  std::size_t num_prototypes = 0;
  std::int64_t num_classes = 0;
  std::size_t k_per_class = 1;
};

struct CompositeFitOptions {
  std::size_t k_per_class = 5;
  std::uint64_t seed = 0;
  std::size_t n_init = 10;
  std::size_t max_iter = 300;
  double rel_tol = 1e-6;
  std::size_t threads = 1;
  std::size_t row_cap = 200000;  // per class; reservoir-sampled beyond this
};

// Visits every training record of one class in ascending sample id.
using ClassRecordSource =
    std::function<void(std::int64_t class_id, const std::function<void(const ActivationRecord&)>&)>;

PrototypeBank fit_composite_bank(const ClassRecordSource& source, std::int64_t num_classes,
                                 int depth_from, const CompositeFitOptions& options);

// In-memory records (the caller guarantees they are training samples).
PrototypeBank fit_composite_bank(std::span<const ActivationRecord> train,
                                 std::int64_t num_classes, int depth_from,
                                 const CompositeFitOptions& options);

// Streams the manifest's training split once per class.
PrototypeBank fit_composite_bank(const DatasetManifest& manifest, int depth_from,
                                 const CompositeFitOptions& options);

// Nearest prototype (over all K, lowest index on ties) for every row.
std::vector<std::int64_t> assign_rows(const Matrix& rows, const PrototypeBank& bank);

ExplanationMap explain(const CompositeFeature& feature, const PrototypeBank& bank);

struct CountPrediction {
  std::vector<std::int64_t> histogram;  // K cells counts, sums to H' * W'
  std::vector<double> class_scores;     // windowed mean of the histogram, length C
  std::size_t winning_prototype = 0;    // most frequent cluster
  std::int64_t class_id = 0;            // class of the most frequent cluster
  std::int64_t class_by_mean = 0;       // argmax of class_scores
};

CountPrediction predict_counts(const ExplanationMap& map);

void save_explanation_map(const ExplanationMap& map, const std::filesystem::path& npy_path,
                          const std::filesystem::path& bank_path);
ExplanationMap load_explanation_map(const std::filesystem::path& npy_path);

// For each requested prototype, the training cell whose composite row is
// closest (ties: lowest sample id, then lowest cell).
struct RepresentativeCell {
  std::size_t prototype = 0;
  std::int64_t sample_id = -1;
  std::size_t cell = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  double distance2 = 0.0;
};

std::vector<RepresentativeCell> nearest_training_cells(
    const std::function<void(const std::function<void(const ActivationRecord&)>&)>& for_each_train,
    const PrototypeBank& bank, std::span<const std::size_t> prototypes);

// "b" followed by the included block ids, e.g. "b234".
std::string composite_model_name(std::span<const int> block_ids);

}  // namespace protoexplain

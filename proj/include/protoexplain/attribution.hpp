#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "protoexplain/encoder_explainer.hpp"
#include "protoexplain/sem_core.hpp"

namespace protoexplain {

// Per-cell relevance for one class at one depth. Refined (shallower) maps
// are piecewise constant over the segments of that depth's explanation map.
struct AttributionMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row-major
  int depth = 0;
  std::int64_t class_index = 0;
  bool discrete = false;

  double min() const;
  double max() const;
};

// att(h_wh, c_j) = (h_wh . c_j) / ||c_j||^2 over the deepest block.
AttributionMap base_attribution(const FeatureGrid& encoder_output, const LinearClassifier& clf,
                                std::size_t class_index, int depth);

// Upsamples `coarser` onto the explanation map's grid, then replaces every
// cell by the mean over all cells sharing its prototype id.
AttributionMap refine(const AttributionMap& coarser, const ExplanationMap& segments);

// Maps ordered deepest first, down to depth_from. `banks` must hold a
// composite bank for every block id in [depth_from, deepest).
std::vector<AttributionMap> attribution_cascade(const ActivationRecord& record,
                                                const LinearClassifier& clf,
                                                const std::map<int, PrototypeBank>& banks,
                                                std::size_t class_index, int depth_from);

// f32 NPY plus sidecar {depth, class, discrete, min, max}.
void save_attribution(const AttributionMap& map, const std::filesystem::path& npy_path);

}  // namespace protoexplain

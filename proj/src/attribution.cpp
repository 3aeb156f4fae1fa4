#include "protoexplain/attribution.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "protoexplain/tensor_store.hpp"

namespace protoexplain {

double AttributionMap::min() const { return *std::min_element(values.begin(), values.end()); }
double AttributionMap::max() const { return *std::max_element(values.begin(), values.end()); }

AttributionMap base_attribution(const FeatureGrid& encoder_output, const LinearClassifier& clf,
                                std::size_t class_index, int depth) {
  if (class_index >= clf.num_classes()) {
    fail(ErrorKind::Config, "class " + std::to_string(class_index) + " is outside the classifier's " +
                                std::to_string(clf.num_classes()) + " classes");
  }
  if (encoder_output.channels != clf.dim()) {
    fail(ErrorKind::Validation, "encoder output has " + std::to_string(encoder_output.channels) +
                                    " channels, classifier expects " + std::to_string(clf.dim()));
  }
  const auto column = clf.column(class_index);
  // Same accumulation as the squared norm, so a pixel equal to c_j scores 1.
  const double norm2 = dot(column, column);
  AttributionMap out;
  out.height = encoder_output.height;
  out.width = encoder_output.width;
  out.depth = depth;
  out.class_index = static_cast<std::int64_t>(class_index);
  out.discrete = false;
  out.values.resize(encoder_output.cells());
  for (std::size_t r = 0; r < encoder_output.cells(); ++r) {
    out.values[r] = dot(encoder_output.cell(r), column) / norm2;
  }
  return out;
}

AttributionMap refine(const AttributionMap& coarser, const ExplanationMap& segments) {
  const std::vector<double> up = upsample_bilinear(coarser.values, coarser.height, coarser.width,
                                                   segments.height, segments.width);
  if (up.size() != segments.assignments.size()) {
    fail(ErrorKind::Validation, "upsampled attribution does not match the explanation grid");
  }
  std::vector<double> sums(segments.num_prototypes, 0.0);
  std::vector<std::size_t> counts(segments.num_prototypes, 0);
  for (std::size_t r = 0; r < up.size(); ++r) {
    const auto id = static_cast<std::size_t>(segments.assignments[r]);
    if (id >= segments.num_prototypes) {
      fail(ErrorKind::Validation, "segment id outside [0, K)");
    }
    sums[id] += up[r];
    ++counts[id];
  }
  AttributionMap out;
  out.height = segments.height;
  out.width = segments.width;
  out.depth = segments.depth_from;
  out.class_index = coarser.class_index;
  out.discrete = true;
  out.values.resize(up.size());
  for (std::size_t r = 0; r < up.size(); ++r) {
    const auto id = static_cast<std::size_t>(segments.assignments[r]);
    out.values[r] = sums[id] / static_cast<double>(counts[id]);
  }
  return out;
}

std::vector<AttributionMap> attribution_cascade(const ActivationRecord& record,
                                                const LinearClassifier& clf,
                                                const std::map<int, PrototypeBank>& banks,
                                                std::size_t class_index, int depth_from) {
  std::vector<int> depths;
  for (const auto& [id, grid] : record.per_block) {
    if (id >= depth_from) depths.push_back(id);
  }
  if (depths.empty() || depths.front() != depth_from) {
    fail(ErrorKind::Config, "record " + std::to_string(record.sample_id) + " lacks block " +
                                std::to_string(depth_from));
  }
  const int deepest = depths.back();

  std::vector<AttributionMap> maps;
  maps.push_back(base_attribution(record.block(deepest), clf, class_index, deepest));
  for (auto it = depths.rbegin() + 1; it != depths.rend(); ++it) {
    const auto bank = banks.find(*it);
    if (bank == banks.end()) {
      fail(ErrorKind::Config, "attribution at depth " + std::to_string(*it) +
                                  " needs a composite bank fitted from that depth");
    }
    const ExplanationMap segments = explain(compose(record, *it), bank->second);
    maps.push_back(refine(maps.back(), segments));
  }
  return maps;
}

void save_attribution(const AttributionMap& map, const std::filesystem::path& npy_path) {
  std::vector<float> values(map.values.begin(), map.values.end());
  write_tensor(TensorBlob({static_cast<std::int64_t>(map.height), static_cast<std::int64_t>(map.width)},
                          std::move(values)),
               npy_path);
  nlohmann::json meta;
  meta["depth"] = map.depth;
  meta["class"] = map.class_index;
  meta["discrete"] = map.discrete;
  meta["min"] = map.min();
  meta["max"] = map.max();
  std::filesystem::path sidecar = npy_path;
  sidecar.replace_extension(".json");
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + sidecar.string());
  out << meta.dump(2) << '\n';
}

}  // namespace protoexplain

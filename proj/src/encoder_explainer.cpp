#include "protoexplain/encoder_explainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "protoexplain/kmeans.hpp"

namespace protoexplain {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Tap {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;
};

std::vector<Tap> sampling_taps(std::size_t source, std::size_t target) {
  std::vector<Tap> taps(target);
  for (std::size_t i = 0; i < target; ++i) {
    if (source == target) {
      taps[i] = {i, i, 0.0};
      continue;
    }
    double pos = (static_cast<double>(i) + 0.5) * static_cast<double>(source) /
                     static_cast<double>(target) - 0.5;
    pos = std::max(pos, 0.0);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    if (lo >= source - 1) {
      taps[i] = {source - 1, source - 1, 0.0};
    } else {
      taps[i] = {lo, lo + 1, pos - static_cast<double>(lo)};
    }
  }
  return taps;
}

void check_upscale(std::size_t sh, std::size_t sw, std::size_t th, std::size_t tw) {
  if (sh == 0 || sw == 0) fail(ErrorKind::Validation, "cannot upsample an empty grid");
  if (th < sh || tw < sw) {
    fail(ErrorKind::Validation, "bilinear resize only upsamples: " + std::to_string(sh) + "x" +
                                    std::to_string(sw) + " -> " + std::to_string(th) + "x" +
                                    std::to_string(tw));
  }
}

// Interpolates `channels` interleaved values per cell.
template <typename In, typename Out>
void bilinear(const In* src, std::size_t sh, std::size_t sw, std::size_t channels, Out* dst,
              std::size_t th, std::size_t tw) {
  const auto ty = sampling_taps(sh, th);
  const auto tx = sampling_taps(sw, tw);
  for (std::size_t y = 0; y < th; ++y) {
    const Tap& a = ty[y];
    for (std::size_t x = 0; x < tw; ++x) {
      const Tap& b = tx[x];
      const In* v00 = src + (a.lo * sw + b.lo) * channels;
      const In* v01 = src + (a.lo * sw + b.hi) * channels;
      const In* v10 = src + (a.hi * sw + b.lo) * channels;
      const In* v11 = src + (a.hi * sw + b.hi) * channels;
      Out* out = dst + (y * tw + x) * channels;
      if (a.frac == 0.0 && b.frac == 0.0) {
        for (std::size_t c = 0; c < channels; ++c) out[c] = static_cast<Out>(v00[c]);
        continue;
      }
      for (std::size_t c = 0; c < channels; ++c) {
        const double top = (1.0 - b.frac) * v00[c] + b.frac * v01[c];
        const double bottom = (1.0 - b.frac) * v10[c] + b.frac * v11[c];
        out[c] = static_cast<Out>((1.0 - a.frac) * top + a.frac * bottom);
      }
    }
  }
}

constexpr std::uint64_t kReservoirSalt = 0x5EED5A17C0FFEE11ULL;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

FeatureGrid upsample_bilinear(const FeatureGrid& source, std::size_t target_h,
                              std::size_t target_w) {
  check_upscale(source.height, source.width, target_h, target_w);
  FeatureGrid out(target_h, target_w, source.channels);
  bilinear(source.values.data(), source.height, source.width, source.channels,
           out.values.data(), target_h, target_w);
  return out;
}

std::vector<double> upsample_bilinear(std::span<const double> source, std::size_t source_h,
                                      std::size_t source_w, std::size_t target_h,
                                      std::size_t target_w) {
  check_upscale(source_h, source_w, target_h, target_w);
  if (source.size() != source_h * source_w) {
    fail(ErrorKind::Validation, "map size does not match its grid");
  }
  std::vector<double> out(target_h * target_w);
  bilinear(source.data(), source_h, source_w, 1, out.data(), target_h, target_w);
  return out;
}

CompositeFeature compose(const ActivationRecord& record, int depth_from) {
  if (!record.per_block.contains(depth_from)) {
    fail(ErrorKind::Config, "record " + std::to_string(record.sample_id) + " lacks block " +
                                std::to_string(depth_from));
  }
  CompositeFeature out;
  out.depth_from = depth_from;
  std::size_t total_channels = 0;
  for (const auto& [id, grid] : record.per_block) {
    if (id < depth_from) continue;
    out.block_ids.push_back(id);
    out.channel_offsets.push_back(total_channels);
    total_channels += grid.channels;
  }
  const FeatureGrid& shallowest = record.per_block.at(depth_from);
  out.height = shallowest.height;
  out.width = shallowest.width;
  out.rows = Matrix(out.height * out.width, total_channels);

  for (std::size_t i = 0; i < out.block_ids.size(); ++i) {
    const FeatureGrid& grid = record.per_block.at(out.block_ids[i]);
    const FeatureGrid up = upsample_bilinear(grid, out.height, out.width);
    double norm2 = 0.0;
    for (float v : up.values) norm2 += static_cast<double>(v) * v;
    const double norm = std::sqrt(norm2);
    double scale = 0.0;
    if (norm > 0.0) {
      scale = 1.0 / (static_cast<double>(grid.channels) * norm);
    } else {
      out.warnings.push_back("sample " + std::to_string(record.sample_id) + ": block " +
                             std::to_string(out.block_ids[i]) +
                             " is all zeros, slice left at zero");
    }
    const std::size_t offset = out.channel_offsets[i];
    for (std::size_t r = 0; r < up.cells(); ++r) {
      const auto src = up.cell(r);
      auto dst = out.rows.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) {
        dst[offset + c] = static_cast<float>(src[c] * scale);
      }
    }
  }
  return out;
}

PrototypeBank fit_composite_bank(const ClassRecordSource& source, std::int64_t num_classes,
                                 int depth_from, const CompositeFitOptions& options) {
  if (options.k_per_class < 1) fail(ErrorKind::Config, "k_per_class must be at least 1");
  if (options.row_cap < options.k_per_class) {
    fail(ErrorKind::Config, "row cap must be at least k_per_class");
  }

  PrototypeBank bank;
  bank.location = BankLocation::Composite;
  bank.depth_from = depth_from;
  bank.k_per_class = options.k_per_class;
  bank.seed = options.seed;
  bank.n_init = options.n_init;
  bank.row_cap = options.row_cap;

  std::vector<float> prototypes;
  std::size_t dim = 0;
  for (std::int64_t c = 0; c < num_classes; ++c) {
    std::vector<float> reservoir;
    std::size_t kept = 0;
    std::size_t seen = 0;
    std::mt19937_64 rng(derive_class_seed(options.seed ^ kReservoirSalt, c));

    source(c, [&](const ActivationRecord& rec) {
      const CompositeFeature feature = compose(rec, depth_from);
      if (dim == 0) {
        dim = feature.rows.cols();
        bank.block_ids = feature.block_ids;
      } else if (feature.rows.cols() != dim) {
        fail(ErrorKind::Validation, "composite width changed between records");
      }
      bank.fit_sample_ids.push_back(rec.sample_id);
      for (std::size_t r = 0; r < feature.rows.rows(); ++r, ++seen) {
        const auto row = feature.rows.row(r);
        if (kept < options.row_cap) {
          reservoir.insert(reservoir.end(), row.begin(), row.end());
          ++kept;
          continue;
        }
        const auto slot = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(seen + 1));
        if (slot < options.row_cap) {
          std::copy(row.begin(), row.end(), reservoir.begin() + static_cast<std::ptrdiff_t>(slot * dim));
        }
      }
    });

    if (kept < options.k_per_class) {
      fail(ErrorKind::InsufficientPoints,
           "class " + std::to_string(c) + " has " + std::to_string(kept) +
               " composite rows, fewer than k_per_class=" + std::to_string(options.k_per_class));
    }
    KMeansConfig cfg;
    cfg.k = options.k_per_class;
    cfg.seed = derive_class_seed(options.seed, c);
    cfg.n_init = options.n_init;
    cfg.max_iter = options.max_iter;
    cfg.rel_tol = options.rel_tol;
    cfg.threads = options.threads;
    const KMeansResult fit = kmeans_fit(Matrix(kept, dim, std::move(reservoir)), cfg);
    for (double v : fit.centroids.data()) prototypes.push_back(static_cast<float>(v));
    for (std::size_t j = 0; j < options.k_per_class; ++j) bank.class_of.push_back(c);
  }
  std::sort(bank.fit_sample_ids.begin(), bank.fit_sample_ids.end());
  bank.prototypes = Matrix(bank.class_of.size(), dim, std::move(prototypes));
  bank.validate();
  return bank;
}

PrototypeBank fit_composite_bank(std::span<const ActivationRecord> train,
                                 std::int64_t num_classes, int depth_from,
                                 const CompositeFitOptions& options) {
  return fit_composite_bank(
      [&](std::int64_t c, const std::function<void(const ActivationRecord&)>& visit) {
        for (const auto& rec : train) {
          if (rec.label == c) visit(rec);
        }
      },
      num_classes, depth_from, options);
}

PrototypeBank fit_composite_bank(const DatasetManifest& manifest, int depth_from,
                                 const CompositeFitOptions& options) {
  RecordStream stream(manifest, SplitFilter::Train, depth_from);
  const auto train_ids = manifest.sample_ids(SplitFilter::Train);
  return fit_composite_bank(
      [&](std::int64_t c, const std::function<void(const ActivationRecord&)>& visit) {
        for (auto id : train_ids) {
          if (manifest.label_values[static_cast<std::size_t>(id)] == c) visit(stream.load(id));
        }
      },
      manifest.num_classes, depth_from, options);
}

std::vector<std::int64_t> assign_rows(const Matrix& rows, const PrototypeBank& bank) {
  if (rows.cols() != bank.dim()) {
    fail(ErrorKind::Validation, "feature rows have " + std::to_string(rows.cols()) +
                                    " dims, bank prototypes have " + std::to_string(bank.dim()));
  }
  std::vector<std::int64_t> out(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    out[r] = static_cast<std::int64_t>(nearest_centroid(rows.row(r), bank.prototypes).first);
  }
  return out;
}

ExplanationMap explain(const CompositeFeature& feature, const PrototypeBank& bank) {
  if (bank.location != BankLocation::Composite || bank.depth_from != feature.depth_from) {
    fail(ErrorKind::Config, "bank was not fitted on composite features from depth " +
                                std::to_string(feature.depth_from));
  }
  ExplanationMap map;
  map.height = feature.height;
  map.width = feature.width;
  map.assignments = assign_rows(feature.rows, bank);
  map.depth_from = feature.depth_from;
  map.num_prototypes = bank.size();
  map.num_classes = bank.num_classes();
  map.k_per_class = bank.k_per_class;
  return map;
}

CountPrediction predict_counts(const ExplanationMap& map) {
  if (map.num_prototypes != static_cast<std::size_t>(map.num_classes) * map.k_per_class) {
    fail(ErrorKind::Validation, "count prediction needs K = C * k_per_class");
  }
  CountPrediction out;
  out.histogram.assign(map.num_prototypes, 0);
  for (auto id : map.assignments) {
    if (id < 0 || static_cast<std::size_t>(id) >= map.num_prototypes) {
      fail(ErrorKind::Validation, "explanation map holds prototype id " + std::to_string(id) +
                                      " outside [0, K)");
    }
    ++out.histogram[static_cast<std::size_t>(id)];
  }
  out.class_scores.assign(static_cast<std::size_t>(map.num_classes), 0.0);
  for (std::size_t k = 0; k < map.num_prototypes; ++k) {
    out.class_scores[k / map.k_per_class] += static_cast<double>(out.histogram[k]);
  }
  for (double& v : out.class_scores) v /= static_cast<double>(map.k_per_class);

  out.winning_prototype = static_cast<std::size_t>(
      std::max_element(out.histogram.begin(), out.histogram.end()) - out.histogram.begin());
  out.class_id = static_cast<std::int64_t>(out.winning_prototype / map.k_per_class);
  out.class_by_mean = static_cast<std::int64_t>(
      std::max_element(out.class_scores.begin(), out.class_scores.end()) - out.class_scores.begin());
  return out;
}

void save_explanation_map(const ExplanationMap& map, const fs::path& npy_path,
                          const fs::path& bank_path) {
  write_tensor(TensorBlob({static_cast<std::int64_t>(map.height), static_cast<std::int64_t>(map.width)},
                          map.assignments),
               npy_path);
  json meta;
  meta["depth_from"] = map.depth_from;
  meta["K"] = map.num_prototypes;
  meta["C"] = map.num_classes;
  meta["k_per_class"] = map.k_per_class;
  meta["bank_path"] = bank_path.generic_string();
  fs::path sidecar = npy_path;
  sidecar.replace_extension(".json");
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + sidecar.string());
  out << meta.dump(2) << '\n';
}

ExplanationMap load_explanation_map(const fs::path& npy_path) {
  TensorBlob blob = read_tensor(npy_path);
  if (blob.shape().size() != 2) fail(ErrorKind::Validation, npy_path.string() + ": map must be 2-D");
  fs::path sidecar = npy_path;
  sidecar.replace_extension(".json");
  std::ifstream in(sidecar);
  if (!in) fail(ErrorKind::MissingPrerequisite, "map sidecar " + sidecar.string() + " not found");
  ExplanationMap map;
  try {
    json meta;
    in >> meta;
    map.depth_from = meta.at("depth_from").get<int>();
    map.num_prototypes = meta.at("K").get<std::size_t>();
    map.num_classes = meta.at("C").get<std::int64_t>();
    map.k_per_class = meta.at("k_per_class").get<std::size_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, sidecar.string() + ": " + e.what());
  }
  map.height = static_cast<std::size_t>(blob.shape()[0]);
  map.width = static_cast<std::size_t>(blob.shape()[1]);
  map.assignments = std::move(blob.i64());
  return map;
}

std::vector<RepresentativeCell> nearest_training_cells(
    const std::function<void(const std::function<void(const ActivationRecord&)>&)>& for_each_train,
    const PrototypeBank& bank, std::span<const std::size_t> prototypes) {
  if (!bank.depth_from) fail(ErrorKind::Config, "representative search needs a composite bank");
  std::vector<RepresentativeCell> best(prototypes.size());
  for (std::size_t i = 0; i < prototypes.size(); ++i) {
    best[i].prototype = prototypes[i];
    best[i].distance2 = std::numeric_limits<double>::infinity();
  }
  for_each_train([&](const ActivationRecord& rec) {
    const CompositeFeature feature = compose(rec, *bank.depth_from);
    for (std::size_t r = 0; r < feature.rows.rows(); ++r) {
      const auto row = feature.rows.row(r);
      for (auto& entry : best) {
        const double d2 = squared_distance(row, bank.prototypes.row(entry.prototype));
        if (d2 < entry.distance2) {
          entry = {entry.prototype, rec.sample_id, r, feature.height, feature.width, d2};
        }
      }
    }
  });
  return best;
}

std::string composite_model_name(std::span<const int> block_ids) {
  std::string name = "b";
  for (int id : block_ids) name += std::to_string(id);
  return name;
}

}  // namespace protoexplain

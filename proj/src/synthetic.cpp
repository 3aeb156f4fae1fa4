#include "protoexplain/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <opencv2/imgproc.hpp>

#include "protoexplain/render.hpp"

namespace protoexplain {

namespace fs = std::filesystem;

namespace {

// Portable samplers: the std distributions are implementation-defined and
// the committed fixture must regenerate byte-identically.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace

DatasetManifest write_synthetic_dataset(const SyntheticSpec& spec, const fs::path& dir) {
  if (spec.blocks.empty()) fail(ErrorKind::Config, "synthetic dataset needs at least one block");
  for (const auto& b : spec.blocks) {
    if (b.channels < static_cast<std::size_t>(spec.num_classes)) {
      fail(ErrorKind::Config, "synthetic block " + std::to_string(b.id) +
                                  " needs at least one channel per class");
    }
  }
  fs::create_directories(dir);
  Sampler sampler(spec.seed);

  struct Sample {
    std::int64_t label;
    Split split;
  };
  std::vector<Sample> samples;
  for (std::int64_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.train_per_class; ++i) samples.push_back({c, Split::Train});
    for (std::size_t i = 0; i < spec.test_per_class; ++i) samples.push_back({c, Split::Test});
  }
  for (std::size_t i = samples.size(); i > 1; --i) {
    std::swap(samples[i - 1], samples[sampler.below(i)]);
  }
  const auto n = static_cast<std::int64_t>(samples.size());

  const auto& deepest = spec.blocks.back();
  const std::size_t d = deepest.channels;
  std::vector<std::vector<float>> block_data(spec.blocks.size());
  std::vector<float> embeddings;
  embeddings.reserve(static_cast<std::size_t>(n) * d);

  for (const Sample& s : samples) {
    for (std::size_t bi = 0; bi < spec.blocks.size(); ++bi) {
      const auto& b = spec.blocks[bi];
      const double scale = spec.separation * spec.sigma * std::sqrt(static_cast<double>(b.channels) / 2.0);
      std::vector<double> v(b.channels);
      for (std::size_t ch = 0; ch < b.channels; ++ch) {
        v[ch] = spec.sigma * sampler.normal() + (ch == static_cast<std::size_t>(s.label) ? scale : 0.0);
      }
      std::vector<double> mean(b.channels, 0.0);
      const std::size_t cells = b.height * b.width;
      for (std::size_t r = 0; r < cells; ++r) {
        for (std::size_t ch = 0; ch < b.channels; ++ch) {
          const double jitter = spec.cell_jitter > 0.0 ? spec.cell_jitter * sampler.normal() : 0.0;
          const auto value = static_cast<float>(v[ch] + jitter);
          block_data[bi].push_back(value);
          mean[ch] += value;
        }
      }
      if (bi + 1 == spec.blocks.size()) {
        for (double m : mean) embeddings.push_back(static_cast<float>(m / static_cast<double>(cells)));
      }
    }
  }

  DatasetManifest m;
  m.dataset_name = spec.name;
  m.num_classes = spec.num_classes;
  m.embedding_dim = static_cast<std::int64_t>(d);
  m.bias_handling = "dropped";
  for (std::size_t bi = 0; bi < spec.blocks.size(); ++bi) {
    const auto& b = spec.blocks[bi];
    BlockSpec bs{b.id, static_cast<std::int64_t>(b.height), static_cast<std::int64_t>(b.width),
                 static_cast<std::int64_t>(b.channels), dir / ("block" + std::to_string(b.id) + ".npy")};
    write_tensor(TensorBlob({n, bs.height, bs.width, bs.channels}, std::move(block_data[bi])), bs.path);
    m.blocks.push_back(bs);
  }

  // Unit class directions: the linear head is a nearest-mean classifier.
  std::vector<float> weights(d * static_cast<std::size_t>(spec.num_classes), 0.0f);
  for (std::int64_t c = 0; c < spec.num_classes; ++c) {
    weights[static_cast<std::size_t>(c) * static_cast<std::size_t>(spec.num_classes) + static_cast<std::size_t>(c)] = 1.0f;
  }

  std::vector<std::int64_t> labels;
  std::vector<std::int64_t> splits;
  for (const Sample& s : samples) {
    labels.push_back(s.label);
    splits.push_back(static_cast<std::int64_t>(s.split));
  }
  m.embeddings = dir / "embeddings.npy";
  m.classifier = dir / "classifier.npy";
  m.labels = dir / "labels.npy";
  m.split_path = dir / "split.npy";
  write_tensor(TensorBlob({n, static_cast<std::int64_t>(d)}, std::move(embeddings)), m.embeddings);
  write_tensor(TensorBlob({static_cast<std::int64_t>(d), spec.num_classes}, std::move(weights)), m.classifier);
  write_tensor(TensorBlob({n}, labels), m.labels);
  write_tensor(TensorBlob({n}, splits), m.split_path);

  if (spec.with_images) {
    fs::create_directories(dir / "images");
    for (std::int64_t i = 0; i < n; ++i) {
      const Rgb base = palette_color(static_cast<std::size_t>(samples[static_cast<std::size_t>(i)].label));
      cv::Mat img(spec.image_size, spec.image_size, CV_8UC3);
      for (int y = 0; y < img.rows; ++y) {
        auto* px = img.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.cols; ++x) {
          const int shade = ((x / 16 + y / 16) % 2) * 40;
          px[x] = cv::Vec3b(static_cast<std::uint8_t>(std::max(0, base.b - shade)),
                            static_cast<std::uint8_t>(std::max(0, base.g - shade)),
                            static_cast<std::uint8_t>(std::max(0, base.r - shade)));
        }
      }
      char name[32];
      std::snprintf(name, sizeof name, "%05lld.png", static_cast<long long>(i));
      const fs::path p = dir / "images" / name;
      write_png(p, img);
      m.images.push_back(p);
    }
  }

  const fs::path manifest_path = dir / "manifest.json";
  write_manifest(m, manifest_path);
  return load_manifest(manifest_path);
}

}  // namespace protoexplain

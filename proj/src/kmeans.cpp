#include "protoexplain/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "protoexplain/parallel.hpp"

namespace protoexplain {

namespace {

// Uniform double in [0, 1) from the top 53 bits; avoids the
// implementation-defined std::uniform_real_distribution.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Row order used for seeding draws. Sorting rows lexicographically makes the
// draws depend only on the multiset of points, not on their storage order.
std::vector<std::size_t> canonical_order(const Matrix& points) {
  std::vector<std::size_t> order(points.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = points.row(a);
    const auto rb = points.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return order;
}

struct Assignment {
  std::vector<std::int64_t> labels;
  std::vector<double> dist2;
  double inertia = 0.0;
};

class LloydRun {
 public:
  LloydRun(const Matrix& points, const std::vector<std::size_t>& order,
           const KMeansConfig& cfg, std::size_t threads)
      : points_(points), order_(order), cfg_(cfg), threads_(threads) {
    for (std::size_t pos = 0; pos < order_.size(); ++pos) {
      const auto row = points_.row(order_[pos]);
      if (pos == 0 || !std::equal(row.begin(), row.end(), points_.row(groups_.back().front()).begin())) {
        groups_.emplace_back();
      }
      groups_.back().push_back(order_[pos]);
    }
  }

  // Lloyd iterations to convergence, then a pass of single-point moves; the
  // two alternate until the moves stop paying off. Every accepted step
  // lowers the inertia.
  KMeansResult run(std::mt19937_64& rng) {
    MatrixD centroids = seed_plus_plus(rng);
    Assignment current = assign(centroids);

    KMeansResult result;
    result.inertia_history.push_back(current.inertia);
    std::size_t iter = 0;
    while (iter < cfg_.max_iter) {
      MatrixD next_centroids = means(current.labels);
      Assignment next = assign(next_centroids);
      // An increase is only reachable through rounding once converged.
      if (next.inertia <= current.inertia) {
        const bool unchanged = next.labels == current.labels;
        const double previous = current.inertia;
        centroids = std::move(next_centroids);
        current = std::move(next);
        ++iter;
        result.inertia_history.push_back(current.inertia);
        const bool converged = unchanged || current.inertia == 0.0 ||
                               (previous - current.inertia) / previous < cfg_.rel_tol;
        if (!converged) continue;
      }
      if (iter >= cfg_.max_iter || current.inertia == 0.0) break;
      std::vector<std::int64_t> moved = current.labels;
      if (!single_moves(moved)) break;
      MatrixD polished_centroids = means(moved);
      Assignment polished = assign(polished_centroids);
      if (!(polished.inertia < current.inertia)) break;
      centroids = std::move(polished_centroids);
      current = std::move(polished);
      ++iter;
      result.inertia_history.push_back(current.inertia);
    }
    result.centroids = std::move(centroids);
    result.assignments = std::move(current.labels);
    result.inertia = current.inertia;
    result.iterations_run = iter;
    return result;
  }

 private:
  MatrixD seed_plus_plus(std::mt19937_64& rng) const {
    const std::size_t n = points_.rows();
    const std::size_t d = points_.cols();
    MatrixD centroids(cfg_.k, d);

    auto place = [&](std::size_t c, std::size_t point) {
      const auto src = points_.row(point);
      auto dst = centroids.row(c);
      std::copy(src.begin(), src.end(), dst.begin());
    };

    auto pick_uniform = [&] {
      const auto pos = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
      return order_[pos];
    };

    place(0, pick_uniform());
    std::vector<double> min_d2(n);
    for (std::size_t i = 0; i < n; ++i) {
      min_d2[i] = squared_distance(points_.row(i), std::span<const double>(centroids.row(0)));
    }

    // Greedy k-means++: draw several D^2-weighted candidates per step and
    // keep the one that lowers the seeding potential most.
    const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(cfg_.k)));
    std::vector<double> candidate_d2(n);
    std::vector<double> best_d2(n);
    for (std::size_t c = 1; c < cfg_.k; ++c) {
      double total = 0.0;
      for (std::size_t idx : order_) total += min_d2[idx];
      if (total <= 0.0) {
        // Fewer distinct points than clusters; empty-cluster repair fixes it.
        place(c, pick_uniform());
        continue;
      }
      double best_potential = std::numeric_limits<double>::infinity();
      std::size_t best = 0;
      for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t candidate = draw_weighted(min_d2, total, rng);
        double potential = 0.0;
        for (std::size_t idx : order_) {
          candidate_d2[idx] = std::min(min_d2[idx], squared_distance(points_.row(idx), points_.row(candidate)));
          potential += candidate_d2[idx];
        }
        if (potential < best_potential) {
          best_potential = potential;
          best = candidate;
          best_d2.swap(candidate_d2);
        }
      }
      place(c, best);
      min_d2.swap(best_d2);
    }
    return centroids;
  }

  // Index drawn with probability weight[i] / total, scanning in canonical
  // order so the draw is independent of row storage order.
  std::size_t draw_weighted(const std::vector<double>& weight, double total, std::mt19937_64& rng) const {
    const double target = uniform01(rng) * total;
    double cumulative = 0.0;
    std::size_t last_positive = order_.front();
    for (std::size_t idx : order_) {
      if (weight[idx] <= 0.0) continue;
      last_positive = idx;
      cumulative += weight[idx];
      if (cumulative > target) return idx;
    }
    return last_positive;
  }

  Assignment assign(MatrixD& centroids) const {
    const std::size_t n = points_.rows();
    Assignment a;
    a.labels.resize(n);
    a.dist2.resize(n);
    parallel_for(n, threads_, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto [best, d2] = nearest_centroid(points_.row(i), centroids);
        a.labels[i] = static_cast<std::int64_t>(best);
        a.dist2[i] = d2;
      }
    });
    repair_empty(a, centroids);
    a.inertia = 0.0;
    for (double v : a.dist2) a.inertia += v;
    return a;
  }

  void repair_empty(Assignment& a, MatrixD& centroids) const {
    std::vector<std::size_t> counts(cfg_.k, 0);
    for (auto l : a.labels) ++counts[static_cast<std::size_t>(l)];
    for (std::size_t j = 0; j < cfg_.k; ++j) {
      if (counts[j] > 0) continue;
      std::size_t farthest = points_.rows();
      double worst = -1.0;
      for (std::size_t i = 0; i < points_.rows(); ++i) {
        if (counts[static_cast<std::size_t>(a.labels[i])] > 1 && a.dist2[i] > worst) {
          worst = a.dist2[i];
          farthest = i;
        }
      }
      --counts[static_cast<std::size_t>(a.labels[farthest])];
      a.labels[farthest] = static_cast<std::int64_t>(j);
      a.dist2[farthest] = 0.0;
      ++counts[j];
      const auto src = points_.row(farthest);
      auto dst = centroids.row(j);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }

  // Sums run in ascending point index so the result never depends on the
  // thread count.
  MatrixD means(const std::vector<std::int64_t>& labels) const {
    MatrixD sums(cfg_.k, points_.cols());
    std::vector<std::size_t> counts(cfg_.k, 0);
    for (std::size_t i = 0; i < points_.rows(); ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      auto dst = sums.row(c);
      const auto src = points_.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      ++counts[c];
    }
    for (std::size_t c = 0; c < cfg_.k; ++c) {
      auto row = sums.row(c);
      for (double& v : row) v /= static_cast<double>(counts[c]);
    }
    return sums;
  }

  // One sweep of Hartigan-style moves over groups of identical rows in
  // canonical order. A group (all copies sharing a label) moves to the
  // cluster that lowers the exact inertia the most; moving copies together
  // keeps the outcome unchanged when every point is duplicated.
  bool single_moves(std::vector<std::int64_t>& labels) const {
    MatrixD c = means(labels);
    std::vector<double> count(cfg_.k, 0.0);
    for (auto l : labels) count[static_cast<std::size_t>(l)] += 1.0;
    bool any = false;
    std::vector<std::int64_t> seen;
    for (const auto& group : groups_) {
      const auto x = points_.row(group.front());
      seen.clear();
      for (std::size_t i : group) {
        if (std::find(seen.begin(), seen.end(), labels[i]) == seen.end()) seen.push_back(labels[i]);
      }
      std::sort(seen.begin(), seen.end());
      for (const std::int64_t from : seen) {
        const auto a = static_cast<std::size_t>(from);
        double w = 0.0;
        for (std::size_t i : group) w += labels[i] == from;
        if (count[a] <= w) continue;
        const double remove = w * count[a] / (count[a] - w) * squared_distance(x, std::span<const double>(c.row(a)));
        double best_add = std::numeric_limits<double>::infinity();
        std::size_t best = a;
        for (std::size_t b = 0; b < cfg_.k; ++b) {
          if (b == a) continue;
          const double add = w * count[b] / (count[b] + w) * squared_distance(x, std::span<const double>(c.row(b)));
          if (add < best_add) {
            best_add = add;
            best = b;
          }
        }
        if (best == a || !(best_add < remove * (1.0 - 1e-12))) continue;
        auto ca = c.row(a);
        auto cb = c.row(best);
        for (std::size_t j = 0; j < x.size(); ++j) {
          ca[j] = (count[a] * ca[j] - w * x[j]) / (count[a] - w);
          cb[j] = (count[best] * cb[j] + w * x[j]) / (count[best] + w);
        }
        count[a] -= w;
        count[best] += w;
        for (std::size_t i : group) {
          if (labels[i] == from) labels[i] = static_cast<std::int64_t>(best);
        }
        any = true;
      }
    }
    return any;
  }

  const Matrix& points_;
  const std::vector<std::size_t>& order_;
  std::vector<std::vector<std::size_t>> groups_;  // identical rows, canonical order
  const KMeansConfig& cfg_;
  std::size_t threads_;
};

template <typename T>
std::pair<std::size_t, double> nearest_impl(std::span<const float> point,
                                            const BasicMatrix<T>& centroids) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d2 = squared_distance(point, std::span<const T>(centroids.row(c)));
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return {best, best_d2};
}

}  // namespace

void KMeansConfig::validate() const {
  if (k < 1) fail(ErrorKind::Config, "k-means needs k >= 1");
  if (!(rel_tol > 0.0)) fail(ErrorKind::Config, "k-means rel_tol must be positive");
  if (max_iter < 1) fail(ErrorKind::Config, "k-means max_iter must be positive");
  if (n_init < 1) fail(ErrorKind::Config, "k-means n_init must be positive");
}

std::pair<std::size_t, double> nearest_centroid(std::span<const float> point,
                                                const MatrixD& centroids) {
  return nearest_impl(point, centroids);
}

std::pair<std::size_t, double> nearest_centroid(std::span<const float> point,
                                                const Matrix& centroids) {
  return nearest_impl(point, centroids);
}

KMeansResult kmeans_fit(const Matrix& points, const KMeansConfig& cfg) {
  cfg.validate();
  if (points.cols() < 1) fail(ErrorKind::Validation, "k-means points need at least one dimension");
  if (points.rows() < cfg.k) {
    fail(ErrorKind::InsufficientPoints, "k-means needs at least k=" + std::to_string(cfg.k) +
                                            " points, got " + std::to_string(points.rows()));
  }
  for (float v : points.data()) {
    if (!std::isfinite(v)) fail(ErrorKind::Validation, "k-means input contains non-finite values");
  }

  const std::size_t threads = cfg.threads == 0 ? thread_count() : cfg.threads;
  const auto order = canonical_order(points);
  std::mt19937_64 rng(cfg.seed);
  LloydRun lloyd(points, order, cfg, threads);

  KMeansResult best;
  for (std::size_t r = 0; r < cfg.n_init; ++r) {
    KMeansResult candidate = lloyd.run(rng);
    if (r == 0 || candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_class_seed(std::uint64_t seed, std::int64_t class_index) {
  return seed ^ splitmix64(static_cast<std::uint64_t>(class_index));
}

ClasswiseResult kmeans_fit_classwise(const Matrix& points,
                                     std::span<const std::int64_t> labels,
                                     std::int64_t num_classes,
                                     std::size_t k_per_class,
                                     const KMeansConfig& cfg) {
  if (labels.size() != points.rows()) {
    fail(ErrorKind::Validation, "classwise k-means: labels and points differ in length");
  }
  if (k_per_class < 1) fail(ErrorKind::Config, "k_per_class must be at least 1");

  ClasswiseResult out;
  out.prototypes = Matrix(static_cast<std::size_t>(num_classes) * k_per_class, points.cols());
  for (std::int64_t c = 0; c < num_classes; ++c) {
    std::vector<float> rows;
    std::size_t count = 0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
      if (labels[i] != c) continue;
      const auto r = points.row(i);
      rows.insert(rows.end(), r.begin(), r.end());
      ++count;
    }
    if (count < k_per_class) {
      fail(ErrorKind::InsufficientPoints,
           "class " + std::to_string(c) + " has " + std::to_string(count) +
               " training points, fewer than k_per_class=" + std::to_string(k_per_class));
    }
    KMeansConfig class_cfg = cfg;
    class_cfg.k = k_per_class;
    class_cfg.seed = derive_class_seed(cfg.seed, c);
    const KMeansResult fit = kmeans_fit(Matrix(count, points.cols(), std::move(rows)), class_cfg);
    for (std::size_t j = 0; j < k_per_class; ++j) {
      const auto src = fit.centroids.row(j);
      auto dst = out.prototypes.row(static_cast<std::size_t>(c) * k_per_class + j);
      std::transform(src.begin(), src.end(), dst.begin(), [](double v) { return static_cast<float>(v); });
      out.class_of.push_back(c);
    }
    out.inertia_per_class.push_back(fit.inertia);
  }
  return out;
}

}  // namespace protoexplain

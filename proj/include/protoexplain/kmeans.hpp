#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "protoexplain/matrix.hpp"

namespace protoexplain {

struct KMeansConfig {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
  double rel_tol = 1e-6;
  // Independent k-means++ restarts; the lowest-inertia run is kept.
  std::size_t n_init = 10;
  // 0 means thread_count(); 1 forces the sequential path.
  std::size_t threads = 1;

  void validate() const;
};

struct KMeansResult {
  MatrixD centroids;                      // k x d
  std::vector<std::int64_t> assignments;  // length n, values in [0, k)
  double inertia = 0.0;
  std::size_t iterations_run = 0;
  // Inertia after every assignment step of the kept run, first entry is the
  // seeding assignment.
  std::vector<double> inertia_history;
};

// Lloyd's algorithm with k-means++ seeding. Ties between equidistant
// centroids go to the lowest index; empty clusters take the point farthest
// from its centroid. Sequential and threaded runs are bit-identical since
// only the assignment step is parallel.
KMeansResult kmeans_fit(const Matrix& points, const KMeansConfig& cfg);

// Index of the nearest row of `centroids` (lowest index on ties) and its
// squared distance.
std::pair<std::size_t, double> nearest_centroid(std::span<const float> point,
                                                const MatrixD& centroids);
std::pair<std::size_t, double> nearest_centroid(std::span<const float> point,
                                                const Matrix& centroids);

// Per-class seed: seed XOR splitmix64(class index).
std::uint64_t derive_class_seed(std::uint64_t seed, std::int64_t class_index);
std::uint64_t splitmix64(std::uint64_t x);

struct ClasswiseResult {
  Matrix prototypes;                 // (C * k_per_class) x d, class-major
  std::vector<std::int64_t> class_of;
  std::vector<double> inertia_per_class;
};

// Clusters every class separately with k_per_class centroids. Class c's
// clusters occupy rows [c * k_per_class, (c + 1) * k_per_class).
ClasswiseResult kmeans_fit_classwise(const Matrix& points,
                                     std::span<const std::int64_t> labels,
                                     std::int64_t num_classes,
                                     std::size_t k_per_class,
                                     const KMeansConfig& cfg);

}  // namespace protoexplain

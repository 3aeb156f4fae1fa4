#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "protoexplain/kmeans.hpp"
#include "protoexplain/prototype_bank.hpp"

namespace protoexplain {

// Nearest-prototype classifier over pooled embeddings, replacing the linear
// head. The bank holds num_classes * k_per_class class-wise centroids.
struct KmexModel {
  PrototypeBank bank;
  std::int64_t num_classes = 0;

  void validate() const;
};

struct KmexFitOptions {
  std::size_t k_per_class = 5;
  std::uint64_t seed = 0;
  std::size_t n_init = 10;
  std::size_t max_iter = 300;
  double rel_tol = 1e-6;
  std::size_t threads = 1;
};

// `sample_ids` (optional, same length as labels) is recorded in the bank so
// evaluation can refuse banks that saw test samples.
KmexModel fit_kmex(const Matrix& train_embeddings, std::span<const std::int64_t> labels,
                   std::int64_t num_classes, const KmexFitOptions& options,
                   std::span<const std::int64_t> sample_ids = {});

// Squared l2 distance from z to every prototype, computed in double.
std::vector<double> prototype_distances(std::span<const float> z, const PrototypeBank& bank);

// s_k = exp(-||z - p_k||^2), each in [0, 1].
std::vector<double> similarity(std::span<const float> z, const PrototypeBank& bank);

struct KmexPrediction {
  std::int64_t class_id = 0;
  std::vector<double> one_hot;
  std::size_t winning_prototype = 0;
};

// Winner = largest similarity. When similarities tie (including underflow
// to zero) the smaller distance wins, then the lower prototype index.
KmexPrediction kmex_predict(std::span<const float> z, const KmexModel& model);

}  // namespace protoexplain

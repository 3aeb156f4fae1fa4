#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "protoexplain/matrix.hpp"
#include "protoexplain/prototype_bank.hpp"

namespace protoexplain {

// Bias-free linear head y = z . C with C stored D x C. Columns are the
// class prototypes of the self-explainable reading of the network.
class LinearClassifier {
 public:
  // Throws Validation on non-finite entries or an all-zero column.
  explicit LinearClassifier(Matrix weights);

  std::size_t dim() const noexcept { return weights_.rows(); }
  std::size_t num_classes() const noexcept { return weights_.cols(); }
  const Matrix& weights() const noexcept { return weights_; }

  std::span<const float> column(std::size_t j) const { return columns_.row(j); }
  double column_squared_norm(std::size_t j) const { return squared_norms_[j]; }

 private:
  Matrix weights_;
  Matrix columns_;  // C x D, column j contiguous
  std::vector<double> squared_norms_;
};

// Mean over the R rows of an R x D activation matrix.
std::vector<double> avg_pool(const Matrix& h);

std::vector<double> classify(std::span<const double> z, const LinearClassifier& clf);
std::vector<double> classify(std::span<const float> z, const LinearClassifier& clf);

// Average of the per-position scores h_r . c_j. Equal to
// classify(avg_pool(h)) up to rounding.
std::vector<double> sem_forward(const Matrix& h, const LinearClassifier& clf);

// Largest component, lowest index on ties.
std::size_t argmax(std::span<const double> values);

PrototypeBank classifier_as_bank(const LinearClassifier& clf);
LinearClassifier bank_as_classifier(const PrototypeBank& bank);

}  // namespace protoexplain

#include "protoexplain/sem_core.hpp"

#include <cmath>
#include <string>

namespace protoexplain {

LinearClassifier::LinearClassifier(Matrix weights) : weights_(std::move(weights)) {
  if (weights_.rows() == 0 || weights_.cols() == 0) {
    fail(ErrorKind::Validation, "classifier weights must be a non-empty D x C matrix");
  }
  columns_ = Matrix(weights_.cols(), weights_.rows());
  for (std::size_t d = 0; d < weights_.rows(); ++d) {
    for (std::size_t j = 0; j < weights_.cols(); ++j) {
      const float v = weights_(d, j);
      if (!std::isfinite(v)) {
        fail(ErrorKind::Validation, "classifier weights contain a non-finite entry");
      }
      columns_(j, d) = v;
    }
  }
  squared_norms_.resize(weights_.cols());
  for (std::size_t j = 0; j < weights_.cols(); ++j) {
    squared_norms_[j] = squared_norm(columns_.row(j));
    if (squared_norms_[j] == 0.0) {
      fail(ErrorKind::Validation, "classifier column " + std::to_string(j) + " is the zero vector");
    }
  }
}

std::vector<double> avg_pool(const Matrix& h) {
  if (h.rows() == 0) fail(ErrorKind::Validation, "avg_pool needs at least one row");
  std::vector<double> z(h.cols(), 0.0);
  for (std::size_t r = 0; r < h.rows(); ++r) {
    const auto row = h.row(r);
    for (std::size_t d = 0; d < z.size(); ++d) z[d] += row[d];
  }
  for (double& v : z) v /= static_cast<double>(h.rows());
  return z;
}

namespace {

template <typename T>
std::vector<double> classify_impl(std::span<const T> z, const LinearClassifier& clf) {
  if (z.size() != clf.dim()) {
    fail(ErrorKind::Validation, "embedding has " + std::to_string(z.size()) +
                                    " dims, classifier expects " + std::to_string(clf.dim()));
  }
  std::vector<double> y(clf.num_classes(), 0.0);
  for (std::size_t j = 0; j < y.size(); ++j) {
    const auto c = clf.column(j);
    double acc = 0.0;
    for (std::size_t d = 0; d < z.size(); ++d) acc += static_cast<double>(z[d]) * c[d];
    y[j] = acc;
  }
  return y;
}

}  // namespace

std::vector<double> classify(std::span<const double> z, const LinearClassifier& clf) {
  return classify_impl(z, clf);
}

std::vector<double> classify(std::span<const float> z, const LinearClassifier& clf) {
  return classify_impl(z, clf);
}

std::vector<double> sem_forward(const Matrix& h, const LinearClassifier& clf) {
  if (h.rows() == 0) fail(ErrorKind::Validation, "sem_forward needs at least one row");
  std::vector<double> y(clf.num_classes(), 0.0);
  for (std::size_t r = 0; r < h.rows(); ++r) {
    const auto scores = classify(h.row(r), clf);
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += scores[j];
  }
  for (double& v : y) v /= static_cast<double>(h.rows());
  return y;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

PrototypeBank classifier_as_bank(const LinearClassifier& clf) {
  PrototypeBank bank;
  bank.location = BankLocation::ClassifierWeights;
  bank.k_per_class = 1;
  bank.prototypes = Matrix(clf.num_classes(), clf.dim());
  for (std::size_t j = 0; j < clf.num_classes(); ++j) {
    const auto c = clf.column(j);
    std::copy(c.begin(), c.end(), bank.prototypes.row(j).begin());
    bank.class_of.push_back(static_cast<std::int64_t>(j));
  }
  return bank;
}

LinearClassifier bank_as_classifier(const PrototypeBank& bank) {
  if (bank.location != BankLocation::ClassifierWeights) {
    fail(ErrorKind::Config, "only a classifier-weights bank converts back to a classifier");
  }
  Matrix weights(bank.dim(), bank.size());
  for (std::size_t j = 0; j < bank.size(); ++j) {
    for (std::size_t d = 0; d < bank.dim(); ++d) weights(d, j) = bank.prototypes(j, d);
  }
  return LinearClassifier(std::move(weights));
}

}  // namespace protoexplain

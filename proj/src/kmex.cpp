#include "protoexplain/kmex.hpp"

#include <cmath>
#include <string>

namespace protoexplain {

void KmexModel::validate() const {
  bank.validate();
  if (bank.location != BankLocation::Embedding) {
    fail(ErrorKind::Validation, "KMEx model needs an embedding-location bank");
  }
  if (bank.num_classes() != num_classes) {
    fail(ErrorKind::Validation, "KMEx bank covers " + std::to_string(bank.num_classes()) +
                                    " classes, model declares " + std::to_string(num_classes));
  }
}

KmexModel fit_kmex(const Matrix& train_embeddings, std::span<const std::int64_t> labels,
                   std::int64_t num_classes, const KmexFitOptions& options,
                   std::span<const std::int64_t> sample_ids) {
  KMeansConfig cfg;
  cfg.seed = options.seed;
  cfg.n_init = options.n_init;
  cfg.max_iter = options.max_iter;
  cfg.rel_tol = options.rel_tol;
  cfg.threads = options.threads;
  ClasswiseResult fit =
      kmeans_fit_classwise(train_embeddings, labels, num_classes, options.k_per_class, cfg);

  KmexModel model;
  model.num_classes = num_classes;
  model.bank.prototypes = std::move(fit.prototypes);
  model.bank.class_of = std::move(fit.class_of);
  model.bank.k_per_class = options.k_per_class;
  model.bank.location = BankLocation::Embedding;
  model.bank.seed = options.seed;
  model.bank.n_init = options.n_init;
  model.bank.fit_sample_ids.assign(sample_ids.begin(), sample_ids.end());
  model.validate();
  return model;
}

std::vector<double> prototype_distances(std::span<const float> z, const PrototypeBank& bank) {
  if (z.size() != bank.dim()) {
    fail(ErrorKind::Validation, "embedding has " + std::to_string(z.size()) +
                                    " dims, bank prototypes have " + std::to_string(bank.dim()));
  }
  std::vector<double> d2(bank.size());
  for (std::size_t k = 0; k < bank.size(); ++k) {
    d2[k] = squared_distance(z, bank.prototypes.row(k));
  }
  return d2;
}

std::vector<double> similarity(std::span<const float> z, const PrototypeBank& bank) {
  std::vector<double> s = prototype_distances(z, bank);
  for (double& v : s) v = std::exp(-v);
  return s;
}

KmexPrediction kmex_predict(std::span<const float> z, const KmexModel& model) {
  const std::vector<double> d2 = prototype_distances(z, model.bank);
  std::size_t best = 0;
  double best_s = std::exp(-d2[0]);
  for (std::size_t k = 1; k < d2.size(); ++k) {
    const double s = std::exp(-d2[k]);
    if (s > best_s || (s == best_s && d2[k] < d2[best])) {
      best = k;
      best_s = s;
    }
  }
  KmexPrediction out;
  out.winning_prototype = best;
  out.class_id = model.bank.class_of[best];
  out.one_hot.assign(static_cast<std::size_t>(model.num_classes), 0.0);
  out.one_hot[static_cast<std::size_t>(out.class_id)] = 1.0;
  return out;
}

}  // namespace protoexplain

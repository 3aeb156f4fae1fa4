#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protoexplain/kmex.hpp"
#include "protoexplain/prototype_bank.hpp"
#include "protoexplain/sem_core.hpp"
#include "protoexplain/tensor_store.hpp"

namespace protoexplain {

// ---------------------------------------------------------------------------
// Prototype alignment

struct AlignmentRow {
  std::string model;
  double cos_class = 0.0;  // mean over prototypes of mean cosine to own-class points
  double cos_out = 0.0;    // same against points of every other class
  std::size_t zero_vectors = 0;  // zero-norm points/prototypes counted as cosine 0
};

struct AlignmentReport {
  std::string dataset;
  std::size_t k_per_class = 0;
  std::vector<AlignmentRow> rows;
  std::vector<std::string> notes;
};

AlignmentRow cosine_alignment(const PrototypeBank& bank, const Matrix& embeddings,
                              std::span<const std::int64_t> labels, const std::string& model);

// ---------------------------------------------------------------------------
// Accuracy

enum class ModelKind { Cnn, Kmex, Composite };

// One of the four canonical predictors: the backbone head, the KMEx head, or
// a count-based composite explainer at some depth.
class Predictor {
 public:
  static Predictor cnn(LinearClassifier clf, int deepest_block);
  static Predictor kmex(KmexModel model);
  static Predictor composite(PrototypeBank bank);

  const std::string& id() const noexcept { return id_; }
  ModelKind kind() const noexcept { return kind_; }
  // Shallowest block the predictor reads.
  int depth_needed() const noexcept { return depth_; }
  const PrototypeBank* bank() const noexcept;

  std::int64_t predict(const ActivationRecord& record) const;

 private:
  std::string id_;
  ModelKind kind_ = ModelKind::Cnn;
  int depth_ = 0;
  std::optional<LinearClassifier> clf_;
  std::optional<KmexModel> kmex_;
  std::optional<PrototypeBank> bank_;
};

// Throws Integrity if the predictor's bank was fitted on any sample the
// manifest tags as test.
void check_split_integrity(const Predictor& predictor, const DatasetManifest& manifest);

struct SplitPredictions {
  std::vector<std::int64_t> sample_ids;
  std::vector<std::int64_t> labels;
  std::vector<std::vector<std::int64_t>> per_model;  // [model][sample]
};

SplitPredictions predict_split(const DatasetManifest& manifest, std::span<const Predictor> models,
                               SplitFilter split);

double accuracy_percent(std::span<const std::int64_t> predictions,
                        std::span<const std::int64_t> labels);

struct AccuracyRow {
  std::string model;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

struct AccuracyReport {
  std::string dataset;
  std::vector<std::uint64_t> seeds;
  std::vector<AccuracyRow> rows;
};

AccuracyReport accuracy_report(const DatasetManifest& manifest, std::span<const Predictor> models,
                               std::span<const std::uint64_t> seeds);

// ---------------------------------------------------------------------------
// Rendering of reports

// {dataset, rows:[{model, metric, split, value}]} plus report-specific extras.
std::string to_json(const AlignmentReport& report);
std::string to_json(const AccuracyReport& report);
std::string to_text(const AlignmentReport& report);
std::string to_text(const AccuracyReport& report);

// ---------------------------------------------------------------------------
// Projection CSV

struct ProjectionBank {
  std::string role;
  const PrototypeBank* bank = nullptr;
  // Adds "<role>_rescaled" rows: each prototype scaled to the mean norm of
  // its class's embeddings.
  bool rescale_to_class_norm = false;
};

// Header "id,role,class,dim_0..dim_{D-1}"; points first (role "point", id =
// sample index), then prototypes of each bank in order.
std::string projection_csv(const Matrix& embeddings, std::span<const std::int64_t> labels,
                           std::span<const ProjectionBank> banks);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace protoexplain

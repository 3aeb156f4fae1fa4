#include "protoexplain/eval_report.hpp"

#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "protoexplain/encoder_explainer.hpp"
#include "protoexplain/parallel.hpp"

namespace protoexplain {

using ojson = nlohmann::ordered_json;

AlignmentRow cosine_alignment(const PrototypeBank& bank, const Matrix& embeddings,
                              std::span<const std::int64_t> labels, const std::string& model) {
  if (bank.dim() != embeddings.cols()) {
    fail(ErrorKind::Validation, "alignment: prototypes live in " + std::to_string(bank.dim()) +
                                    " dims, embeddings in " + std::to_string(embeddings.cols()));
  }
  if (labels.size() != embeddings.rows()) {
    fail(ErrorKind::Validation, "alignment: labels and embeddings differ in length");
  }

  std::vector<double> point_norms(embeddings.rows());
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    point_norms[i] = std::sqrt(squared_norm(embeddings.row(i)));
  }

  struct PerPrototype {
    double class_mean = 0.0;
    double out_mean = 0.0;
    bool has_class = false;
    bool has_out = false;
    std::size_t zeros = 0;
  };
  std::vector<PerPrototype> per(bank.size());
  parallel_for(bank.size(), thread_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto p = bank.prototypes.row(k);
      const double p_norm = std::sqrt(squared_norm(p));
      double in_sum = 0.0;
      double out_sum = 0.0;
      std::size_t in_n = 0;
      std::size_t out_n = 0;
      std::size_t zeros = p_norm == 0.0 ? 1 : 0;
      for (std::size_t i = 0; i < embeddings.rows(); ++i) {
        double cos = 0.0;
        if (p_norm > 0.0 && point_norms[i] > 0.0) {
          cos = dot(p, embeddings.row(i)) / (p_norm * point_norms[i]);
        } else if (point_norms[i] == 0.0) {
          ++zeros;
        }
        if (labels[i] == bank.class_of[k]) {
          in_sum += cos;
          ++in_n;
        } else {
          out_sum += cos;
          ++out_n;
        }
      }
      per[k] = {in_n ? in_sum / static_cast<double>(in_n) : 0.0,
                out_n ? out_sum / static_cast<double>(out_n) : 0.0, in_n > 0, out_n > 0, zeros};
    }
  });

  AlignmentRow row;
  row.model = model;
  double in_total = 0.0;
  double out_total = 0.0;
  std::size_t in_count = 0;
  std::size_t out_count = 0;
  for (const auto& p : per) {
    if (p.has_class) {
      in_total += p.class_mean;
      ++in_count;
    }
    if (p.has_out) {
      out_total += p.out_mean;
      ++out_count;
    }
    row.zero_vectors += p.zeros;
  }
  row.cos_class = in_count ? in_total / static_cast<double>(in_count) : 0.0;
  row.cos_out = out_count ? out_total / static_cast<double>(out_count) : 0.0;
  return row;
}

// ---------------------------------------------------------------------------

Predictor Predictor::cnn(LinearClassifier clf, int deepest_block) {
  Predictor p;
  p.id_ = "cnn";
  p.kind_ = ModelKind::Cnn;
  p.depth_ = deepest_block;
  p.clf_ = std::move(clf);
  return p;
}

Predictor Predictor::kmex(KmexModel model) {
  model.validate();
  Predictor p;
  p.id_ = "kmex";
  p.kind_ = ModelKind::Kmex;
  p.depth_ = INT_MAX;
  p.kmex_ = std::move(model);
  return p;
}

Predictor Predictor::composite(PrototypeBank bank) {
  bank.validate();
  if (bank.location != BankLocation::Composite) {
    fail(ErrorKind::Config, "composite predictor needs a composite bank");
  }
  Predictor p;
  p.id_ = composite_model_name(bank.block_ids);
  p.kind_ = ModelKind::Composite;
  p.depth_ = *bank.depth_from;
  p.bank_ = std::move(bank);
  return p;
}

const PrototypeBank* Predictor::bank() const noexcept {
  if (kmex_) return &kmex_->bank;
  return bank_ ? &*bank_ : nullptr;
}

std::int64_t Predictor::predict(const ActivationRecord& record) const {
  switch (kind_) {
    case ModelKind::Cnn: {
      const auto y = classify(avg_pool(record.block(depth_).as_rows()), *clf_);
      return static_cast<std::int64_t>(argmax(y));
    }
    case ModelKind::Kmex:
      return kmex_predict(record.embedding, *kmex_).class_id;
    case ModelKind::Composite:
      return predict_counts(explain(compose(record, depth_), *bank_)).class_id;
  }
  return 0;
}

void check_split_integrity(const Predictor& predictor, const DatasetManifest& manifest) {
  const PrototypeBank* bank = predictor.bank();
  if (!bank) return;
  for (auto id : bank->fit_sample_ids) {
    if (id < 0 || id >= manifest.num_samples) {
      fail(ErrorKind::Integrity, predictor.id() + " bank references sample " + std::to_string(id) +
                                     " which is not in the manifest");
    }
    if (manifest.split_values[static_cast<std::size_t>(id)] == Split::Test) {
      fail(ErrorKind::Integrity, predictor.id() + " bank was fitted with test sample " +
                                     std::to_string(id) + "; refusing to report accuracy");
    }
  }
}

SplitPredictions predict_split(const DatasetManifest& manifest, std::span<const Predictor> models,
                               SplitFilter split) {
  int depth = manifest.deepest_block();
  for (const auto& m : models) {
    check_split_integrity(m, manifest);
    depth = std::min(depth, m.depth_needed());
  }
  SplitPredictions out;
  out.per_model.resize(models.size());
  RecordStream stream(manifest, split, depth);
  while (auto rec = stream.next()) {
    out.sample_ids.push_back(rec->sample_id);
    out.labels.push_back(rec->label);
    for (std::size_t m = 0; m < models.size(); ++m) {
      out.per_model[m].push_back(models[m].predict(*rec));
    }
  }
  return out;
}

double accuracy_percent(std::span<const std::int64_t> predictions,
                        std::span<const std::int64_t> labels) {
  if (predictions.size() != labels.size()) {
    fail(ErrorKind::Validation, "accuracy: predictions and labels differ in length");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

AccuracyReport accuracy_report(const DatasetManifest& manifest, std::span<const Predictor> models,
                               std::span<const std::uint64_t> seeds) {
  AccuracyReport report;
  report.dataset = manifest.dataset_name;
  report.seeds.assign(seeds.begin(), seeds.end());
  const SplitPredictions train = predict_split(manifest, models, SplitFilter::Train);
  const SplitPredictions test = predict_split(manifest, models, SplitFilter::Test);
  for (std::size_t m = 0; m < models.size(); ++m) {
    report.rows.push_back({models[m].id(), accuracy_percent(train.per_model[m], train.labels),
                           accuracy_percent(test.per_model[m], test.labels)});
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string to_json(const AlignmentReport& report) {
  ojson doc;
  doc["dataset"] = report.dataset;
  doc["rows"] = ojson::array();
  for (const auto& r : report.rows) {
    doc["rows"].push_back({{"model", r.model}, {"metric", "cos_class"}, {"split", "train"}, {"value", r.cos_class}});
    doc["rows"].push_back({{"model", r.model}, {"metric", "cos_out"}, {"split", "train"}, {"value", r.cos_out}});
  }
  doc["k_per_class"] = report.k_per_class;
  doc["notes"] = report.notes;
  return doc.dump(2) + "\n";
}

std::string to_json(const AccuracyReport& report) {
  ojson doc;
  doc["dataset"] = report.dataset;
  doc["rows"] = ojson::array();
  for (const auto& r : report.rows) {
    doc["rows"].push_back({{"model", r.model}, {"metric", "accuracy"}, {"split", "train"}, {"value", r.train_acc}});
    doc["rows"].push_back({{"model", r.model}, {"metric", "accuracy"}, {"split", "test"}, {"value", r.test_acc}});
  }
  doc["seeds"] = report.seeds;
  return doc.dump(2) + "\n";
}

namespace {

std::size_t name_width(const auto& rows) {
  std::size_t w = 5;
  for (const auto& r : rows) w = std::max(w, r.model.size());
  return w;
}

}  // namespace

std::string to_text(const AlignmentReport& report) {
  std::ostringstream out;
  const std::size_t w = name_width(report.rows);
  out << "Prototype alignment (" << report.dataset << ", K/C=" << report.k_per_class << ")\n";
  out << std::left << std::setw(static_cast<int>(w)) << "model" << std::right << std::setw(10)
      << "class" << std::setw(10) << "out" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& r : report.rows) {
    out << std::left << std::setw(static_cast<int>(w)) << r.model << std::right << std::setw(10)
        << r.cos_class << std::setw(10) << r.cos_out << '\n';
  }
  for (const auto& n : report.notes) out << "note: " << n << '\n';
  return out.str();
}

std::string to_text(const AccuracyReport& report) {
  std::ostringstream out;
  const std::size_t w = name_width(report.rows);
  out << "Accuracy % (" << report.dataset << ")\n";
  out << std::left << std::setw(static_cast<int>(w)) << "model" << std::right << std::setw(10)
      << "train" << std::setw(10) << "test" << '\n';
  out << std::fixed << std::setprecision(2);
  for (const auto& r : report.rows) {
    out << std::left << std::setw(static_cast<int>(w)) << r.model << std::right << std::setw(10)
        << r.train_acc << std::setw(10) << r.test_acc << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  out += buf;
}

}  // namespace

std::string projection_csv(const Matrix& embeddings, std::span<const std::int64_t> labels,
                           std::span<const ProjectionBank> banks) {
  if (labels.size() != embeddings.rows()) {
    fail(ErrorKind::Validation, "projection: labels and embeddings differ in length");
  }
  const std::size_t d = embeddings.cols();
  std::string out = "id,role,class";
  for (std::size_t j = 0; j < d; ++j) out += ",dim_" + std::to_string(j);
  out += '\n';

  auto emit = [&](std::size_t id, const std::string& role, std::int64_t cls, auto&& values) {
    out += std::to_string(id);
    out += ',';
    out += role;
    out += ',';
    out += std::to_string(cls);
    for (const auto v : values) {
      out += ',';
      append_number(out, static_cast<double>(v));
    }
    out += '\n';
  };

  for (std::size_t i = 0; i < embeddings.rows(); ++i) emit(i, "point", labels[i], embeddings.row(i));

  for (const auto& pb : banks) {
    const PrototypeBank& bank = *pb.bank;
    if (bank.dim() != d) {
      fail(ErrorKind::Validation, "projection: bank '" + pb.role + "' has dimension " +
                                      std::to_string(bank.dim()) + ", embeddings " + std::to_string(d));
    }
    for (std::size_t k = 0; k < bank.size(); ++k) emit(k, pb.role, bank.class_of[k], bank.prototypes.row(k));
    if (!pb.rescale_to_class_norm) continue;

    std::vector<double> norm_sum(static_cast<std::size_t>(bank.num_classes()), 0.0);
    std::vector<std::size_t> norm_n(norm_sum.size(), 0);
    for (std::size_t i = 0; i < embeddings.rows(); ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      if (c >= norm_sum.size()) continue;
      norm_sum[c] += std::sqrt(squared_norm(embeddings.row(i)));
      ++norm_n[c];
    }
    for (std::size_t k = 0; k < bank.size(); ++k) {
      const auto c = static_cast<std::size_t>(bank.class_of[k]);
      const auto p = bank.prototypes.row(k);
      const double p_norm = std::sqrt(squared_norm(p));
      const double target = norm_n[c] ? norm_sum[c] / static_cast<double>(norm_n[c]) : 0.0;
      const double scale = p_norm > 0.0 ? target / p_norm : 0.0;
      std::vector<double> scaled(p.begin(), p.end());
      for (double& v : scaled) v = static_cast<float>(v * scale);
      emit(k, pb.role + "_rescaled", bank.class_of[k], scaled);
    }
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace protoexplain

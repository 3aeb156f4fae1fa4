#include "protoexplain/cli.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "protoexplain/attribution.hpp"
#include "protoexplain/encoder_explainer.hpp"
#include "protoexplain/eval_report.hpp"
#include "protoexplain/kmex.hpp"
#include "protoexplain/render.hpp"
#include "protoexplain/sem_core.hpp"
#include "protoexplain/tensor_store.hpp"

namespace protoexplain {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingPrerequisite: return 3;
    case ErrorKind::Io: return 4;
    case ErrorKind::Format:
    case ErrorKind::Unsupported:
    case ErrorKind::Validation:
    case ErrorKind::InsufficientPoints:
    case ErrorKind::Config:
    case ErrorKind::Integrity: return 2;
  }
  return 2;
}

namespace {

struct RunConfig {
  fs::path manifest;
  fs::path out = "out";
  std::optional<int> depth_from;
  std::size_t k_per_class = 5;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> class_override;
  double alpha = 0.5;
  std::string split = "test";
  std::vector<std::int64_t> samples;
  std::size_t n_init = 10;
  std::size_t row_cap = 200000;
  std::string model = "composite";
  bool cascade = false;
};

// Per-command state: the resolved manifest plus every file written, which
// ends up in out/outputs_<command>.json.
class Run {
 public:
  Run(const RunConfig& cfg, std::string command, std::ostream& out)
      : cfg_(cfg), command_(std::move(command)), out_(out), manifest_(load_manifest(cfg.manifest)) {
    if (cfg.k_per_class == 0) fail(ErrorKind::Config, "--k-per-class must be at least 1");
    if (cfg.n_init == 0) fail(ErrorKind::Config, "--n-init must be at least 1");
    if (cfg.alpha < 0.0 || cfg.alpha > 1.0) fail(ErrorKind::Config, "--alpha must lie in [0, 1]");
    depth_ = cfg.depth_from.value_or(manifest_.deepest_block());
    depths_ = manifest_.block_ids_from(depth_);
  }

  const RunConfig& cfg() const { return cfg_; }
  const DatasetManifest& manifest() const { return manifest_; }
  int depth() const { return depth_; }
  const std::vector<int>& depths() const { return depths_; }
  std::ostream& out() { return out_; }

  fs::path dir(const char* sub) const {
    const fs::path d = cfg_.out / sub;
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + d.string() + ": " + ec.message());
    return d;
  }

  fs::path composite_path(int depth) const {
    return cfg_.out / "banks" /
           ("composite_d" + std::to_string(depth) + "_k" + std::to_string(cfg_.k_per_class) + "_s" +
            std::to_string(cfg_.seed) + ".npy");
  }
  fs::path kmex_path() const {
    return cfg_.out / "banks" /
           ("kmex_k" + std::to_string(cfg_.k_per_class) + "_s" + std::to_string(cfg_.seed) + ".npy");
  }

  std::string fit_hint(const std::string& extra) const {
    return "run `protoexplain fit --manifest " + cfg_.manifest.string() + " --out " +
           cfg_.out.string() + " --k-per-class " + std::to_string(cfg_.k_per_class) + " --seed " +
           std::to_string(cfg_.seed) + extra + "` first";
  }

  PrototypeBank composite_bank(int depth) const {
    const fs::path p = composite_path(depth);
    if (!fs::exists(p)) {
      fail(ErrorKind::MissingPrerequisite,
           "no composite bank for depth " + std::to_string(depth) + " at " + p.string() + "; " +
               fit_hint(" --depth-from " + std::to_string(depth)));
    }
    return load_bank(p);
  }

  KmexModel kmex_model() const {
    const fs::path p = kmex_path();
    if (!fs::exists(p)) {
      fail(ErrorKind::MissingPrerequisite,
           "no KMEx bank at " + p.string() + "; " + fit_hint(" --model kmex"));
    }
    KmexModel m{load_bank(p), manifest_.num_classes};
    m.validate();
    return m;
  }

  LinearClassifier classifier() const { return LinearClassifier(load_classifier_weights(manifest_)); }

  std::vector<std::int64_t> selected_samples() const {
    if (cfg_.samples.empty()) return manifest_.sample_ids(parse_split_filter(cfg_.split));
    for (std::int64_t id : cfg_.samples) {
      if (id < 0 || id >= manifest_.num_samples) {
        fail(ErrorKind::Validation, "sample " + std::to_string(id) + " is outside [0, " +
                                        std::to_string(manifest_.num_samples) + ")");
      }
    }
    return cfg_.samples;
  }

  void wrote(const fs::path& p) {
    written_.insert(fs::relative(p, cfg_.out).generic_string());
    if (fs::exists(sidecar_of(p))) written_.insert(fs::relative(sidecar_of(p), cfg_.out).generic_string());
    out_ << "wrote " << p.string() << "\n";
  }

  void finish() {
    json doc;
    doc["command"] = command_;
    doc["manifest"] = fs::absolute(cfg_.manifest).lexically_normal().string();
    doc["outputs"] = std::vector<std::string>(written_.begin(), written_.end());
    std::error_code ec;
    fs::create_directories(cfg_.out, ec);
    write_text_file(cfg_.out / ("outputs_" + command_ + ".json"), doc.dump(2) + "\n");
  }

 private:
  static fs::path sidecar_of(const fs::path& p) {
    fs::path s = p;
    return s.replace_extension(".json");
  }

  RunConfig cfg_;
  std::string command_;
  std::ostream& out_;
  DatasetManifest manifest_;
  int depth_ = 0;
  std::vector<int> depths_;
  std::set<std::string> written_;
};

fs::path map_path(Run& run, std::int64_t id, int depth) {
  return run.dir("maps") / (std::to_string(id) + "_d" + std::to_string(depth) + ".npy");
}

fs::path attr_path(Run& run, std::int64_t id, int depth) {
  return run.dir("attr") / (std::to_string(id) + "_d" + std::to_string(depth) + ".npy");
}

void cmd_fit(Run& run) {
  const RunConfig& cfg = run.cfg();
  const bool composite = cfg.model == "composite" || cfg.model == "all";
  const bool kmex = cfg.model == "kmex" || cfg.model == "all";
  run.dir("banks");
  if (composite) {
    const std::vector<int> depths =
        cfg.cascade || cfg.model == "all" ? run.depths() : std::vector<int>{run.depth()};
    CompositeFitOptions opts;
    opts.k_per_class = cfg.k_per_class;
    opts.seed = cfg.seed;
    opts.n_init = cfg.n_init;
    opts.row_cap = cfg.row_cap;
    opts.threads = 0;
    for (int depth : depths) {
      const PrototypeBank bank = fit_composite_bank(run.manifest(), depth, opts);
      save_bank(bank, run.composite_path(depth));
      run.wrote(run.composite_path(depth));
    }
  }
  if (kmex) {
    const Matrix all = load_embeddings(run.manifest());
    const auto ids = run.manifest().sample_ids(SplitFilter::Train);
    Matrix train(ids.size(), all.cols());
    std::vector<std::int64_t> labels;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto src = all.row(static_cast<std::size_t>(ids[i]));
      std::copy(src.begin(), src.end(), train.row(i).begin());
      labels.push_back(run.manifest().label_values[static_cast<std::size_t>(ids[i])]);
    }
    KmexFitOptions opts;
    opts.k_per_class = cfg.k_per_class;
    opts.seed = cfg.seed;
    opts.n_init = cfg.n_init;
    opts.threads = 0;
    const KmexModel model = fit_kmex(train, labels, run.manifest().num_classes, opts, ids);
    save_bank(model.bank, run.kmex_path());
    run.wrote(run.kmex_path());
  }
}

void cmd_predict(Run& run) {
  const RunConfig& cfg = run.cfg();
  const auto& manifest = run.manifest();
  std::optional<Predictor> predictor;
  if (cfg.model == "composite") {
    predictor = Predictor::composite(run.composite_bank(run.depth()));
  } else if (cfg.model == "kmex") {
    predictor = Predictor::kmex(run.kmex_model());
  } else if (cfg.model == "cnn") {
    predictor = Predictor::cnn(run.classifier(), manifest.deepest_block());
  } else {
    fail(ErrorKind::Config, "predict supports --model composite, kmex or cnn");
  }
  check_split_integrity(*predictor, manifest);

  const auto ids = run.selected_samples();
  RecordStream stream(manifest, SplitFilter::All, std::min(predictor->depth_needed(), manifest.deepest_block()));
  std::vector<std::int64_t> predicted;
  json samples = json::array();
  std::size_t correct = 0;
  for (std::int64_t id : ids) {
    const ActivationRecord rec = stream.load(id);
    json row;
    row["id"] = id;
    row["label"] = rec.label;
    if (const PrototypeBank* bank = predictor->bank(); bank && predictor->kind() == ModelKind::Composite) {
      const CountPrediction cp = predict_counts(explain(compose(rec, run.depth()), *bank));
      predicted.push_back(cp.class_id);
      row["predicted"] = cp.class_id;
      row["class_by_mean"] = cp.class_by_mean;
      row["winning_prototype"] = cp.winning_prototype;
      row["histogram"] = cp.histogram;
      row["class_scores"] = cp.class_scores;
    } else {
      predicted.push_back(predictor->predict(rec));
      row["predicted"] = predicted.back();
    }
    correct += predicted.back() == rec.label;
    samples.push_back(std::move(row));
  }

  const std::string stem = "predictions_" + predictor->id() + "_" + cfg.split;
  const fs::path dir = run.dir("reports");
  write_tensor(TensorBlob({static_cast<std::int64_t>(predicted.size())}, predicted), dir / (stem + ".npy"));
  json summary;
  summary["dataset"] = manifest.dataset_name;
  summary["model"] = predictor->id();
  summary["split"] = cfg.samples.empty() ? cfg.split : "selected";
  summary["count"] = ids.size();
  summary["accuracy"] = ids.empty() ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(ids.size());
  summary["samples"] = std::move(samples);
  write_text_file(dir / (stem + ".json"), summary.dump(2) + "\n");
  run.wrote(dir / (stem + ".npy"));
  run.out() << predictor->id() << " accuracy on " << ids.size() << " samples: "
            << summary["accuracy"].get<double>() << "%\n";
}

void cmd_explain(Run& run) {
  const PrototypeBank bank = run.composite_bank(run.depth());
  const fs::path bank_file = run.composite_path(run.depth());
  RecordStream stream(run.manifest(), SplitFilter::All, run.depth());
  for (std::int64_t id : run.selected_samples()) {
    const ExplanationMap map = explain(compose(stream.load(id), run.depth()), bank);
    const fs::path p = map_path(run, id, run.depth());
    save_explanation_map(map, p, bank_file);
    run.wrote(p);
  }
}

void cmd_attribute(Run& run) {
  const auto& manifest = run.manifest();
  const LinearClassifier clf = run.classifier();
  if (run.cfg().class_override &&
      (*run.cfg().class_override < 0 || *run.cfg().class_override >= manifest.num_classes)) {
    fail(ErrorKind::Validation, "--class " + std::to_string(*run.cfg().class_override) +
                                    " is outside [0, " + std::to_string(manifest.num_classes) + ")");
  }
  std::map<int, PrototypeBank> banks;
  for (int depth : run.depths()) {
    if (depth != manifest.deepest_block()) banks.emplace(depth, run.composite_bank(depth));
  }
  RecordStream stream(manifest, SplitFilter::All, run.depth());
  for (std::int64_t id : run.selected_samples()) {
    const ActivationRecord rec = stream.load(id);
    const auto j = run.cfg().class_override
                       ? static_cast<std::size_t>(*run.cfg().class_override)
                       : argmax(classify(avg_pool(rec.block(manifest.deepest_block()).as_rows()), clf));
    for (const AttributionMap& m : attribution_cascade(rec, clf, banks, j, run.depth())) {
      const fs::path p = attr_path(run, id, m.depth);
      save_attribution(m, p);
      run.wrote(p);
    }
  }
}

void cmd_eval(Run& run) {
  const auto& manifest = run.manifest();
  const LinearClassifier clf = run.classifier();
  const KmexModel kmex = run.kmex_model();

  std::vector<Predictor> models;
  models.push_back(Predictor::cnn(clf, manifest.deepest_block()));
  models.push_back(Predictor::kmex(kmex));
  for (auto it = run.depths().rbegin(); it != run.depths().rend(); ++it) {
    models.push_back(Predictor::composite(run.composite_bank(*it)));
  }
  for (const Predictor& p : models) check_split_integrity(p, manifest);

  const std::vector<std::uint64_t> seeds = {run.cfg().seed};
  const AccuracyReport accuracy = accuracy_report(manifest, models, seeds);

  const Matrix all = load_embeddings(manifest);
  const auto ids = manifest.sample_ids(SplitFilter::Train);
  Matrix train(ids.size(), all.cols());
  std::vector<std::int64_t> labels;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto src = all.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), train.row(i).begin());
    labels.push_back(manifest.label_values[static_cast<std::size_t>(ids[i])]);
  }
  KmexFitOptions k1;
  k1.k_per_class = 1;
  k1.seed = run.cfg().seed;
  k1.n_init = run.cfg().n_init;
  k1.threads = 0;
  const KmexModel kmex_k1 = fit_kmex(train, labels, manifest.num_classes, k1, ids);
  const PrototypeBank weights = classifier_as_bank(clf);

  AlignmentReport alignment;
  alignment.dataset = manifest.dataset_name;
  alignment.k_per_class = run.cfg().k_per_class;
  alignment.rows.push_back(cosine_alignment(weights, train, labels, "cnn"));
  alignment.rows.push_back(cosine_alignment(kmex_k1.bank, train, labels, "kmex_k1"));
  alignment.rows.push_back(cosine_alignment(kmex.bank, train, labels, "kmex"));
  alignment.notes.push_back("cosines computed on train-split embeddings");

  const std::vector<ProjectionBank> projected = {{"classifier", &weights, true}, {"kmex", &kmex.bank, false}};

  const fs::path dir = run.dir("reports");
  write_text_file(dir / "accuracy.json", to_json(accuracy));
  write_text_file(dir / "accuracy.txt", to_text(accuracy));
  write_text_file(dir / "alignment.json", to_json(alignment));
  write_text_file(dir / "alignment.txt", to_text(alignment));
  write_text_file(dir / "projection.csv", projection_csv(train, labels, projected));
  for (const char* name : {"accuracy.json", "accuracy.txt", "alignment.json", "alignment.txt", "projection.csv"}) run.wrote(dir / name);
  run.out() << to_text(accuracy) << to_text(alignment);
}

AttributionMap load_attribution(const fs::path& p) {
  TensorBlob blob = read_tensor(p);
  if (blob.dtype() != DType::F32 || blob.shape().size() != 2) {
    fail(ErrorKind::Format, p.string() + " is not a 2-D f32 attribution map");
  }
  AttributionMap m;
  m.height = static_cast<std::size_t>(blob.shape()[0]);
  m.width = static_cast<std::size_t>(blob.shape()[1]);
  m.values.assign(blob.f32().begin(), blob.f32().end());
  return m;
}

void cmd_render(Run& run) {
  const auto& manifest = run.manifest();
  if (manifest.images.empty()) {
    fail(ErrorKind::Validation, "manifest " + manifest.source.string() + " lists no \"images\"; render needs them");
  }
  const PrototypeBank bank = run.composite_bank(run.depth());
  const auto ids = run.selected_samples();

  struct Inputs {
    ExplanationMap map;
    AttributionMap attr;
  };
  std::vector<Inputs> inputs;
  std::set<std::size_t> present;
  for (std::int64_t id : ids) {
    const fs::path mp = map_path(run, id, run.depth());
    const fs::path ap = attr_path(run, id, run.depth());
    if (!fs::exists(mp)) {
      fail(ErrorKind::MissingPrerequisite, "no explanation map at " + mp.string() +
                                               "; run `protoexplain explain` with the same flags first");
    }
    if (!fs::exists(ap)) {
      fail(ErrorKind::MissingPrerequisite, "no attribution map at " + ap.string() +
                                               "; run `protoexplain attribute` with the same flags first");
    }
    Inputs in{load_explanation_map(mp), load_attribution(ap)};
    if (in.map.num_prototypes != bank.size()) {
      fail(ErrorKind::Validation, mp.string() + " was not produced by " + run.composite_path(run.depth()).string());
    }
    for (std::int64_t a : in.map.assignments) present.insert(static_cast<std::size_t>(a));
    inputs.push_back(std::move(in));
  }

  const std::vector<std::size_t> wanted(present.begin(), present.end());
  RecordStream train(manifest, SplitFilter::Train, run.depth());
  const auto cells = nearest_training_cells(
      [&](const std::function<void(const ActivationRecord&)>& visit) {
        train.reset();
        while (auto rec = train.next()) visit(*rec);
      },
      bank, wanted);
  std::map<std::size_t, cv::Mat> patches;
  for (const RepresentativeCell& c : cells) {
    if (c.sample_id < 0) continue;
    const cv::Mat img = load_image(manifest.images[static_cast<std::size_t>(c.sample_id)]);
    patches[c.prototype] = img(patch_rect(img.size(), c.grid_h, c.grid_w, c.cell)).clone();
  }

  const fs::path dir = run.dir("render");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const cv::Mat img = load_image(manifest.images[static_cast<std::size_t>(ids[i])]);
    const std::string stem = std::to_string(ids[i]);
    write_png(dir / (stem + "_explanation.png"), overlay_explanation(img, inputs[i].map, run.cfg().alpha));
    write_png(dir / (stem + "_attribution.png"), overlay_attribution(img, inputs[i].attr, run.cfg().alpha));
    std::set<std::size_t> own(inputs[i].map.assignments.begin(), inputs[i].map.assignments.end());
    std::vector<GalleryTile> tiles;
    for (std::size_t k : own) {
      if (auto it = patches.find(k); it != patches.end()) tiles.push_back({it->second, k});
    }
    write_png(dir / (stem + "_gallery.png"), render_gallery(tiles));
    for (const char* suffix : {"_explanation.png", "_attribution.png", "_gallery.png"}) run.wrote(dir / (stem + suffix));
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Concept explanations for frozen CNN activations", "protoexplain"};
  app.require_subcommand(1);
  RunConfig cfg;

  const auto add_common = [&cfg](CLI::App* sub) {
    sub->add_option("--manifest", cfg.manifest, "Dataset manifest JSON")->required();
    sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
    sub->add_option("--depth-from", cfg.depth_from, "Shallowest block (default: deepest)");
    sub->add_option("--k-per-class", cfg.k_per_class, "Prototypes per class")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Clustering seed")->capture_default_str();
    sub->add_option("--n-init", cfg.n_init, "k-means restarts")->capture_default_str();
  };
  const auto add_samples = [&cfg](CLI::App* sub) {
    sub->add_option("--split", cfg.split, "Split to process")
        ->check(CLI::IsMember({"train", "test"}))
        ->capture_default_str();
    sub->add_option("--sample", cfg.samples, "Explicit sample ids (overrides --split)");
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit prototype banks on the train split");
  add_common(fit);
  fit->add_option("--model", cfg.model, "Bank to fit")
      ->check(CLI::IsMember({"composite", "kmex", "all"}))
      ->capture_default_str();
  fit->add_flag("--cascade", cfg.cascade, "Fit composite banks for every depth from --depth-from down");
  fit->add_option("--row-cap", cfg.row_cap, "Per-class cap on composite rows")->capture_default_str();

  CLI::App* predict = app.add_subcommand("predict", "Predict classes");
  add_common(predict);
  add_samples(predict);
  predict->add_option("--model", cfg.model, "Model to predict with")
      ->check(CLI::IsMember({"composite", "kmex", "cnn"}))
      ->capture_default_str();

  CLI::App* explain_cmd = app.add_subcommand("explain", "Write explanation maps");
  add_common(explain_cmd);
  add_samples(explain_cmd);

  CLI::App* attribute = app.add_subcommand("attribute", "Write attribution maps");
  add_common(attribute);
  add_samples(attribute);
  attribute->add_option("--class", cfg.class_override, "Class to attribute (default: predicted)");

  CLI::App* eval = app.add_subcommand("eval", "Accuracy, alignment and projection reports");
  add_common(eval);

  CLI::App* render = app.add_subcommand("render", "Draw overlays and prototype galleries");
  add_common(render);
  add_samples(render);
  render->add_option("--alpha", cfg.alpha, "Overlay opacity")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::vector<std::pair<CLI::App*, void (*)(Run&)>> commands = {
        {fit, cmd_fit},           {predict, cmd_predict}, {explain_cmd, cmd_explain},
        {attribute, cmd_attribute}, {eval, cmd_eval},     {render, cmd_render},
    };
    for (const auto& [sub, body] : commands) {
      if (!sub->parsed()) continue;
      Run run(cfg, sub->get_name(), out);
      body(run);
      run.finish();
    }
    return 0;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace protoexplain

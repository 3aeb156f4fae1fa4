// Writes the Gaussian-blob fixture used by the tests and the acceptance run.
#include <iostream>

#include <CLI11.hpp>

#include "protoexplain/cli.hpp"
#include "protoexplain/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic activation fixture", "protoexplain-make-fixture"};
  protoexplain::SyntheticSpec spec;
  std::string out;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  app.add_option("--classes", spec.num_classes, "Number of classes")->capture_default_str();
  app.add_option("--train-per-class", spec.train_per_class)->capture_default_str();
  app.add_option("--test-per-class", spec.test_per_class)->capture_default_str();
  app.add_option("--separation", spec.separation, "Class-mean gap in noise norms")->capture_default_str();
  app.add_option("--cell-jitter", spec.cell_jitter, "Per-cell noise std")->capture_default_str();
  app.add_flag("--images", spec.with_images, "Also write 224x224 PNG inputs");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    const auto m = protoexplain::write_synthetic_dataset(spec, out);
    std::cout << "wrote " << m.num_samples << " samples to " << out << "\n";
  } catch (const protoexplain::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return protoexplain::exit_code(e.kind());
  }
  return 0;
}

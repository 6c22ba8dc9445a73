// Writes a small synthetic model zoo for trying the sms CLI:
//   <out>/logits/<id>.csv   candidate logits over the target samples
//   <out>/labels.csv        target labels
//   <out>/accuracies.csv    hidden quality of each candidate (stand-in for retrained accuracy)

#include <synthetic_zoo.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic model zoo"};
  std::string out;
  sms::testing::ZooSpec spec;
  bool binary = false;
  app.add_option("out", out, "output directory")->required();
  app.add_option("--candidates", spec.candidates)->capture_default_str();
  app.add_option("--classes", spec.classes)->capture_default_str();
  app.add_option("--samples", spec.samples)->capture_default_str();
  app.add_option("--outputs", spec.outputs)->capture_default_str();
  app.add_option("--seed", spec.seed)->capture_default_str();
  app.add_flag("--binary", binary, "write SMSL binary logits instead of CSV");
  CLI11_PARSE(app, argc, argv);

  const auto zoo = sms::testing::make_zoo(spec);
  const std::filesystem::path root(out);
  sms::testing::write_zoo(zoo, root, binary);
  std::cout << "wrote " << zoo.ids.size() << " candidates to " << root.string() << "\n";
  return 0;
}

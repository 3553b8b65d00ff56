#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gridstart/dcopf.hpp"
#include "gridstart/network.hpp"
#include "gridstart/report.hpp"
#include "gridstart/scenario.hpp"
#include "gridstart/textio.hpp"

namespace gs = gridstart;

namespace {

const std::vector<std::string> kFamilies = {"lr", "svm", "knn", "dtr", "nn"};

gs::Variant parse_variant(const std::string& name) {
  return name == "congested" ? gs::Variant::congested : gs::Variant::non_congested;
}

bool known_family(const std::string& family) {
  for (const std::string& f : kFamilies)
    if (f == family) return true;
  return false;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

int cmd_generate(const std::string& variant, int count, std::uint64_t seed,
                 const std::string& out_path) {
  const gs::NetworkCase net = gs::three_bus_case(parse_variant(variant));
  gs::SamplingSpec spec;
  spec.count = count;
  spec.seed = seed;
  const std::vector<gs::LoadScenario> scenarios = gs::sample_scenarios(net, spec);
  const gs::DatasetBuild build = gs::build_dataset(net, scenarios);
  gs::save_dataset(build.dataset, out_path);
  std::cout << "variant " << variant << ", " << count << " scenarios: "
            << build.dataset.rows() << " feasible, " << build.infeasible
            << " infeasible (dropped)\n";
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& family,
              const std::string& model_path, std::uint64_t seed) {
  const gs::Dataset data = gs::load_dataset(data_path);
  const gs::GridSearchSpec spec = gs::default_grid(family, seed);
  const gs::GridSearchResult search = gs::grid_search(spec, data);

  std::cout << "grid search (" << spec.folds << "-fold CV, " << data.rows()
            << " rows):\n";
  for (std::size_t i = 0; i < search.combos.size(); ++i) {
    const gs::GridCombo& combo = search.combos[i];
    std::cout << (static_cast<int>(i) == search.best_index ? "  * " : "    ");
    if (combo.params.empty()) std::cout << "(no parameters)";
    for (const auto& [name, value] : combo.params)
      std::cout << name << "=" << gs::format_double(value) << " ";
    std::cout << " cv=" << combo.cv_score << "\n";
  }

  const std::unique_ptr<gs::Model> model =
      gs::fit_family(family, data, search.combos[search.best_index].params);
  gs::save_model(*model, model_path);
  std::cout << "wrote " << model_path << "\n";
  return 0;
}

int cmd_accuracy(const std::string& train_path, const std::string& test_path,
                 const std::vector<std::string>& families, const std::string& variant,
                 std::uint64_t seed, const std::string& out_path) {
  const gs::Dataset train = gs::load_dataset(train_path);
  const gs::Dataset test = gs::load_dataset(test_path);
  const bool include_pg1 = parse_variant(variant) == gs::Variant::congested;
  const gs::AccuracyTable table = gs::run_accuracy(train, test, families, include_pg1, seed);
  std::cout << gs::render_accuracy(table);
  if (!out_path.empty()) {
    write_file(out_path, gs::accuracy_to_csv(table));
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_compare(const std::string& variant, const std::string& model_path, int n_test,
                std::uint64_t seed, const std::string& out_path) {
  const gs::NetworkCase net = gs::three_bus_case(parse_variant(variant));
  const std::unique_ptr<gs::Model> model = gs::load_model(model_path);
  const gs::CompareReport report = gs::run_compare(net, *model, n_test, seed);
  std::cout << gs::render_comparison(report);
  if (!out_path.empty()) {
    write_file(out_path, gs::comparison_to_csv(report.rows));
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_warmstart(const std::string& variant, const std::string& model_path, int n_test,
                  std::uint64_t seed, const std::string& out_path) {
  const gs::NetworkCase net = gs::three_bus_case(parse_variant(variant));
  const std::unique_ptr<gs::Model> model = gs::load_model(model_path);
  const gs::WarmStartReport report = gs::run_warmstart(net, *model, n_test, seed);
  std::cout << gs::render_warmstart(report);
  if (!out_path.empty()) {
    write_file(out_path, gs::warmstart_to_csv(report.rows));
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Warm-start pipeline for the 3-bus ACOPF benchmark"};
  app.require_subcommand(1);
  const auto variant_check = CLI::IsMember({"non-congested", "congested"});

  std::string variant = "non-congested";
  int count = 0;
  std::uint64_t seed = 1;
  std::string family = "knn";
  std::string model_path;
  std::string out_path;
  int n_test = 15;
  std::string data_path, train_path, test_path;

  CLI::App* generate = app.add_subcommand("generate", "Sample scenarios, solve each, write a dataset CSV");
  generate->add_option("--variant", variant, "Network variant")->check(variant_check);
  generate->add_option("--count", count, "Scenario count")->required()->check(CLI::Range(1, 100000000));
  generate->add_option("--seed", seed, "Sampling seed");
  generate->add_option("--out", out_path, "Output dataset path")->required();

  CLI::App* train = app.add_subcommand("train", "Grid-search a family on a dataset and save the best model");
  train->add_option("dataset", data_path, "Training dataset CSV")->required();
  train->add_option("--family", family, "Estimator family")->required();
  train->add_option("--model", model_path, "Output model path")->required();
  train->add_option("--seed", seed, "Cross-validation seed");

  CLI::App* accuracy = app.add_subcommand("accuracy", "Tune families on a training set and score them held out");
  accuracy->add_option("train", train_path, "Training dataset CSV")->required();
  accuracy->add_option("test", test_path, "Held-out dataset CSV")->required();
  accuracy->add_option("--family", family, "Comma-separated families (default: all)");
  accuracy->add_option("--variant", variant, "Network variant")->check(variant_check);
  accuracy->add_option("--seed", seed, "Cross-validation seed");
  accuracy->add_option("--out", out_path, "Optional CSV output path");

  CLI::App* compare = app.add_subcommand("compare", "Reference cost vs ML+PF and DCOPF+PF pipelines on fresh scenarios");
  compare->add_option("--variant", variant, "Network variant")->check(variant_check);
  compare->add_option("--model", model_path, "Trained model path")->required();
  compare->add_option("--n-test", n_test, "Fresh scenario count")->check(CLI::Range(1, 100000000));
  compare->add_option("--seed", seed, "Sampling seed");
  compare->add_option("--out", out_path, "Optional CSV output path");

  CLI::App* warmstart = app.add_subcommand("warmstart", "SLP iteration counts from four initializations");
  warmstart->add_option("--variant", variant, "Network variant")->check(variant_check);
  warmstart->add_option("--model", model_path, "Trained model path")->required();
  warmstart->add_option("--n-test", n_test, "Fresh scenario count")->check(CLI::Range(1, 100000000));
  warmstart->add_option("--seed", seed, "Sampling seed");
  warmstart->add_option("--out", out_path, "Optional CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (generate->parsed()) return cmd_generate(variant, count, seed, out_path);
    if (train->parsed()) {
      if (!known_family(family)) {
        std::cerr << "error: unknown family '" << family << "'\n";
        return 2;
      }
      return cmd_train(data_path, family, model_path, seed);
    }
    if (accuracy->parsed()) {
      std::vector<std::string> families = kFamilies;
      if (accuracy->count("--family") > 0) {
        families.clear();
        for (const std::string& f : gs::split(family, ',')) {
          const std::string name = gs::trim(f);
          if (!known_family(name)) {
            std::cerr << "error: unknown family '" << name << "'\n";
            return 2;
          }
          families.push_back(name);
        }
      }
      return cmd_accuracy(train_path, test_path, families, variant, seed, out_path);
    }
    if (compare->parsed()) return cmd_compare(variant, model_path, n_test, seed, out_path);
    if (warmstart->parsed()) return cmd_warmstart(variant, model_path, n_test, seed, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 2;
}

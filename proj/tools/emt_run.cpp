// Command-line front end of the experiment harness.
#include <exception>
#include <iostream>

#include "emt/experiment.hpp"

int main(int argc, char** argv) {
  emt::ExperimentConfig config;
  try {
    config = emt::parse_cli(argc, argv);
  } catch (const emt::UsageError& e) {
    if (e.help()) {
      std::cout << e.what();
      return 0;
    }
    std::cerr << "emt_run: " << e.what() << "\n\n" << emt::cli_help();
    return 2;
  }

  try {
    const auto result = emt::run_experiment(config);
    std::cout << emt::render_summary_table(result.summary);
    std::cout << "outputs written to " << config.output_dir.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "emt_run: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

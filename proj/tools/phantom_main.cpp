#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "voleval/phantom.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a synthetic dataset of deformed-ellipsoid mask pairs", "voleval-phantom"};
  std::string root;
  std::size_t cases = 20;
  std::uint64_t seed = 2024;
  app.add_option("root", root, "Output directory (pred/ and gt/ are created)")->required();
  app.add_option("--cases", cases, "Number of cases")->check(CLI::Range(1, 100000))->capture_default_str();
  app.add_option("--seed", seed, "Dataset seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    voleval::write_phantom_dataset(root, cases, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  std::cerr << "voleval-phantom: wrote " << cases << " cases to " << root << '\n';
  return 0;
}

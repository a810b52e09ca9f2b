// Writes the synthetic bibliography: two overlapping source exports and the
// works payloads the mock API serves.

#include <iostream>

#include <CLI11.hpp>

#include "bibliograph/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic bibliography fixture"};
  std::string out_dir = "data/synthetic";
  std::uint64_t seed = bibliograph::synthetic::kBundleSeed;
  app.add_option("--out-dir", out_dir, "Directory for the generated files");
  app.add_option("--seed", seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [name, content] : bibliograph::synthetic::bundle_files(seed)) {
      bibliograph::text::write_file(std::filesystem::path(out_dir) / name, content);
      std::cout << "wrote " << (std::filesystem::path(out_dir) / name).string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

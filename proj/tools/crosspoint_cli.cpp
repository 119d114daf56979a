#include <iostream>

#include <CLI11.hpp>

#include "crosspoint/runner.hpp"

int main(int argc, char** argv) {
  using namespace crosspoint;
  CLI::App app{"crosspoint: MMSE single-crossing scans, mutual information, matchers and broadcast regions"};
  std::string config_path, out_dir = "out", format = "json";
  unsigned threads = 0;
  app.add_option("--config", config_path, "Scenario JSON file")->required();
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--threads", threads, "Worker cap (0 = hardware); never changes results");
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code::config_error;
  }

  json config;
  try {
    config = read_json_file(config_path);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::config_error;
  }
  const auto out = run_scenario(config, threads, format_from_string(format));
  if (out.status == exit_code::config_error || out.status == exit_code::numerical_error) {
    std::cerr << "error: " << out.message << '\n';
    return out.status;
  }
  try {
    write_outputs(out, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::config_error;
  }
  for (const auto& [name, body] : out.files) std::cout << (std::filesystem::path(out_dir) / name).string() << '\n';
  if (out.status == exit_code::violation) std::cerr << "violation verdict found\n";
  return out.status;
}

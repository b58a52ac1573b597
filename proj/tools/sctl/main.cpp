#include "spectral_ct/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Spectral CT simulation, dictionary training, reconstruction and evaluation"};
  app.require_subcommand(1);

  std::string config;
  std::string method = "l0tdl";
  std::size_t views = 0;
  std::uint64_t seed = 0;
  std::string out;

  const auto add = [&](const std::string& name, const std::string& help, bool with_method) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Run configuration (YAML)")->required();
    if (with_method) sub->add_option("--method", method, "fbp, ossqs, tv, tdl or l0tdl")->capture_default_str();
    sub->add_option("--views", views, "Override the number of reconstruction views");
    sub->add_option("--seed", seed, "Override the random seed");
    sub->add_option("--out", out, "Override the output directory");
    return sub;
  };
  add("simulate", "Rasterize the phantom and simulate full- and sparse-view sinograms", false);
  add("train-dict", "Train the tensor dictionary from the full-view FBP images", false);
  add("reconstruct", "Reconstruct the sparse-view data", true);
  add("evaluate", "RMSE, SSIM, FSIM and ROI statistics against the truth", true);
  CLI::App* decompose = add("decompose", "Basis-material decomposition and color fusion", true);
  decompose->get_option("--method")->description("fbp, ossqs, tv, tdl, l0tdl, or truth");
  add("report", "Summarize the metrics of every evaluated method", false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(sct::ExitCode::config_error);
  }

  const CLI::App* sub = app.get_subcommands().front();
  sct::CommandOverrides overrides;
  if (sub->count("--views")) overrides.views = views;
  if (sub->count("--seed")) overrides.seed = seed;
  if (sub->count("--out")) overrides.out = out;
  return sct::run_command(sub->get_name(), config, method, overrides, std::cerr);
}

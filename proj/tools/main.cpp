#include <CLI11.hpp>
#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "commands.hpp"
#include "config.hpp"
#include "flood/error.hpp"

namespace {

using namespace flood::cli;

constexpr int exit_validation = static_cast<int>(flood::ErrorKind::validation);

struct Args {
  std::string config;
  double level = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> forecasts;
  std::vector<std::string> truths;
  int demo_rows = 60;
  int demo_cols = 40;
};

bool given(const CLI::App& sub, const std::string& name) {
  const CLI::Option* opt = sub.get_option_no_throw(name);
  return opt && opt->count() > 0;
}

Overrides overrides(const CLI::App& sub, const Args& a) {
  Overrides o;
  if (given(sub, "--level")) o.level = a.level;
  if (given(sub, "--seed")) o.seed = a.seed;
  if (given(sub, "--out")) o.out = a.out;
  for (const auto& f : a.forecasts) o.forecasts.emplace_back(f);
  for (const auto& t : a.truths) o.truths.emplace_back(t);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flood forecasting pipeline: steady-state library, threshold model, risk maps."};
  app.require_subcommand(1);
  Args a;

  using Runner = std::function<void(const PipelineConfig&, const Overrides&)>;
  const std::map<std::string, std::pair<std::string, Runner>> commands{
      {"flatten", {"Write the DEM with its riverbed flattened", run_flatten}},
      {"build", {"Run the steady-state simulations and persist the library", run_build}},
      {"train", {"Fit the per-pixel threshold model from historical snapshots", run_train}},
      {"forecast", {"Produce a risk map for one gauge level", run_forecast}},
      {"evaluate", {"Score forecasts against ground-truth rasters", run_evaluate}},
      {"render", {"Render a forecast over the hillshaded terrain", run_render}},
      {"pipeline",
       {"build, train and forecast in one go",
        [](const PipelineConfig& c, const Overrides& o) {
          Overrides inner = o;
          inner.out.reset();
          run_build(c, inner);
          run_train(c, inner);
          run_forecast(c, o);
        }}},
  };

  std::map<CLI::App*, const Runner*> runners;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", a.config, "Pipeline config (JSON)")->required();
    sub->add_option("--out", a.out, "Output directory (overrides the config)");
    if (name == "forecast" || name == "pipeline") {
      sub->add_option("--level", a.level, "Forecast gauge level in meters");
      sub->add_option("--seed", a.seed, "Seed for the level sampling");
    }
    if (name == "evaluate" || name == "render") {
      sub->add_option("--forecast", a.forecasts, "Forecast directory (repeatable for evaluate)");
      sub->add_option("--truth", a.truths, "Ground-truth wet/dry raster (repeatable for evaluate)");
    }
    runners[sub] = &entry.second;
  }
  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic demo dataset with its config");
  synth->add_option("--out", a.out, "Dataset directory")->required();
  synth->add_option("--rows", a.demo_rows, "Valley length in cells")->check(CLI::Range(8, 4000));
  synth->add_option("--cols", a.demo_cols, "Valley width in cells")->check(CLI::Range(8, 4000));
  synth->add_option("--seed", a.seed, "Seed for the synthetic observations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : exit_validation;
  }

  try {
    if (synth->parsed()) {
      write_demo_dataset(a.out, a.demo_rows, a.demo_cols, a.seed);
      return 0;
    }
    for (const auto& [sub, run] : runners) {
      if (!sub->parsed()) continue;
      const PipelineConfig config = load_config(a.config);
      (*run)(config, overrides(*sub, a));
    }
    return 0;
  } catch (const flood::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(flood::ErrorKind::io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_validation;
  }
}

// wcdiff: analyze | simulate | msd | verify
//
// Exit codes: 0 ok, 1 configuration error, 2 divergence, 3 verification failure.

#include "wcdiff/acceptance.hpp"
#include "wcdiff/commands.hpp"
#include "wcdiff/presets.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kDiverged = 2;
constexpr int kVerifyFailed = 3;

struct Args {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool with_sim = false;
  std::string filter;
};

// A path on disk wins over a preset of the same name.
wcdiff::ExperimentConfig load(const Args& args) {
  if (args.config.empty()) throw wcdiff::Error(wcdiff::ErrorCode::Config, "--config is required");
  wcdiff::ExperimentConfig cfg;
  if (std::filesystem::exists(args.config)) {
    cfg = wcdiff::load_config(args.config);
  } else if (wcdiff::presets::find(args.config)) {
    cfg = wcdiff::presets::load(args.config);
  } else {
    std::string names;
    for (const auto& [name, doc] : wcdiff::presets::all()) names += " " + name;
    throw wcdiff::Error(wcdiff::ErrorCode::Config,
                        args.config + ": no such file or preset (presets:" + names + ")");
  }
  if (args.seed) cfg.seed = *args.seed;
  return cfg;
}

std::optional<std::filesystem::path> out_override(const Args& args) {
  if (args.out.empty()) return std::nullopt;
  return std::filesystem::path(args.out);
}

int verify(const Args& args) {
  const auto results = wcdiff::acceptance::run(args.filter, {}, &std::cout);
  if (results.empty()) {
    std::cerr << "wcdiff: --filter '" << args.filter << "' matches no criterion\n";
    return kConfigError;
  }
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed ? 1 : 0;
  std::cout << passed << "/" << results.size() << " criteria passed\n";
  return passed == results.size() ? kOk : kVerifyFailed;
}

int dispatch(const std::string& command, const Args& args) {
  if (command == "verify") return verify(args);
  const auto cfg = load(args);
  try {
    const auto out = wcdiff::output_dir(cfg, out_override(args));
    if (command == "analyze") {
      wcdiff::cmd_analyze(cfg, out, std::cout);
    } else if (command == "simulate") {
      wcdiff::cmd_simulate(cfg, out, std::cout);
    } else {
      wcdiff::cmd_msd(cfg, out, args.with_sim, std::cout);
    }
  } catch (const wcdiff::Error& e) {
    if (e.code() != wcdiff::ErrorCode::Diverged) throw;
    std::cerr << "wcdiff: " << e.what() << "\nconfiguration:\n" << cfg.document.dump(2) << "\n";
    return kDiverged;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion adaptation over weakly-connected networks"};
  app.require_subcommand(1);
  Args args;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", args.config, "configuration file or preset name");
    if (needs_config) opt->required();
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--seed", args.seed, "base seed; overrides the configuration");
  };
  auto* analyze = app.add_subcommand("analyze", "network structure, W, A_inf and limit points");
  add_common(analyze, true);
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo diffusion runs");
  add_common(simulate, true);
  auto* msd = app.add_subcommand("msd", "theoretical steady-state MSD");
  add_common(msd, true);
  msd->add_flag("--with-sim", args.with_sim, "also simulate and compare");
  auto* verify_cmd = app.add_subcommand("verify", "run the acceptance checks");
  verify_cmd->add_option("--filter", args.filter, "all, a category, a number or a name fragment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, args);
  } catch (const wcdiff::Error& e) {
    std::cerr << "wcdiff: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "wcdiff: " << e.what() << "\n";
    return kConfigError;
  }
}

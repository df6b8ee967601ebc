#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "pgp_lqr/commands.hpp"

int main(int argc, char** argv) {
  using namespace pgp_lqr;
  CLI::App app{"Policy gradient for structured static output-feedback LQR"};
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  const std::map<std::string, std::pair<std::string, std::function<int(const commands::Context&)>>> table{
      {"gen-system", {"generate or load a plant and write system.json", commands::gen_system}},
      {"constants", {"sublevel-set constants and derived schedules", commands::constants_cmd}},
      {"grad-error", {"relative gradient error study", commands::grad_error}},
      {"train", {"projected policy-gradient training run", commands::train}},
      {"validate", {"property and reproduction checks", commands::validate}},
  };
  for (const auto& [name, entry] : table) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed")->required();
    sub->add_option("--out", out, "output directory")->required();
  }
  CLI11_PARSE(app, argc, argv);

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    const commands::Context ctx = commands::make_context(config, seed, out);
    return table.at(name).second(ctx);
  } catch (const ParseError& e) {
    std::cerr << "pgp-lqr: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "pgp-lqr: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pgp-lqr: " << e.what() << "\n";
    return 1;
  }
}

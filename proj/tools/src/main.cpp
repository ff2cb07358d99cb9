#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "splitpit/error.hpp"
#include "src/commands.hpp"
#include "src/run_config.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Override {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace splitpit;
  using namespace splitpit::cli;

  CLI::App app{"Fact-aware sentence split and rephrase with permutation invariant training"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "flat key = value config file (default: $SPLITPIT_CONFIG)");

  std::vector<std::unique_ptr<Override>> overrides;
  for (const auto& spec : schema()) {
    auto o = std::make_unique<Override>();
    o->key = spec.key;
    o->option = app.add_option("--" + spec.key, o->value, spec.help)->default_str(spec.default_value);
    overrides.push_back(std::move(o));
  }
  const std::vector<std::pair<std::string, std::string>> aliases = {
      {"--lambda", "train.lambda"}, {"--model", "eval.model"},   {"--input", "eval.input"},
      {"--output", "eval.output"},  {"--beam", "eval.beam"},
  };
  for (const auto& [flag, key] : aliases) {
    auto o = std::make_unique<Override>();
    o->key = key;
    o->option = app.add_option(flag, o->value, "alias for --" + key);
    overrides.push_back(std::move(o));
  }

  using Command = int (*)(const RunConfig&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"gen-data", "write a synthetic split corpus, fact dataset and stats", cmd_gen_data},
      {"train", "train a model on data.dir", cmd_train},
      {"eval", "score a checkpoint on held-out or given pairs", cmd_eval},
      {"split", "split every line of an input file", cmd_split},
      {"gradcheck", "compare analytic and finite-difference gradients", cmd_gradcheck},
      {"ablate", "compare PIT modes across seeds", cmd_ablate},
  };
  Command selected = nullptr;
  for (const auto& [name, help, fn] : commands) {
    app.add_subcommand(name, help)->callback([&selected, fn = fn] { selected = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    RunConfig config;
    if (config_path.empty()) {
      if (const char* env = std::getenv("SPLITPIT_CONFIG"); env && *env) config_path = env;
    }
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& o : overrides) {
      if (o->option->count() > 0) config.set(o->key, o->value);
    }
    return selected(config, std::cout);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

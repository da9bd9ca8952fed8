#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "volt/commands.hpp"
#include "volt/error.hpp"
#include "volt/run_config.hpp"

namespace {

struct Invocation {
  std::string config_file;
  std::map<std::string, std::string> flags;
  bool force = false;
};

void add_shared_flags(CLI::App* cmd, Invocation& inv) {
  cmd->add_option("--config", inv.config_file, "key = value config file");
  for (const std::string& key : volt::RunConfig::keys()) {
    cmd->add_option_function<std::string>(
        "--" + key, [&inv, key](const std::string& v) { inv.flags[key] = v; }, key);
  }
}

// defaults, then preset, then config file, then flags.
volt::RunConfig resolve(const Invocation& inv, const std::string& default_preset) {
  std::map<std::string, std::string> file;
  if (!inv.config_file.empty()) file = volt::read_config_file(inv.config_file);

  std::string preset = default_preset;
  if (auto it = file.find("preset"); it != file.end()) preset = it->second;
  if (auto it = inv.flags.find("preset"); it != inv.flags.end()) preset = it->second;

  volt::RunConfig cfg;
  cfg.apply_preset(preset);
  for (const auto& [k, v] : file) {
    if (k != "preset") cfg.set(k, v);
  }
  for (const auto& [k, v] : inv.flags) {
    if (k != "preset") cfg.set(k, v);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VolT / EVolT multi-view voxel reconstruction"};
  app.require_subcommand(1);

  Invocation inv;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic multi-view dataset");
  CLI::App* train = app.add_subcommand("train", "train a model on a generated dataset");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  CLI::App* diagnose = app.add_subcommand("diagnose", "attention divergence diagnostics");
  CLI::App* grad = app.add_subcommand("grad-check", "finite-difference gradient check");
  for (CLI::App* c : {gen, train, eval, diagnose, grad}) add_shared_flags(c, inv);
  gen->add_flag("--force", inv.force, "overwrite an existing dataset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return volt::kExitConfig;
  }

  try {
    if (gen->parsed()) {
      volt::cmd_gen(resolve(inv, ""), inv.force, std::cout);
    } else if (train->parsed()) {
      volt::cmd_train(resolve(inv, ""), std::cout);
    } else if (eval->parsed()) {
      volt::cmd_eval(resolve(inv, ""), std::cout);
    } else if (diagnose->parsed()) {
      volt::cmd_diagnose(resolve(inv, ""), std::cout);
    } else if (grad->parsed()) {
      volt::cmd_grad_check(resolve(inv, "micro"), std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return volt::exit_code_for_current_exception();
  }
  return volt::kExitOk;
}

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "acefr/commands.hpp"

using namespace acefr;

int main(int argc, char** argv) {
  CLI::App app{"Fault-recovery control with ACE layer selection and selective adaptation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--out", out_dir, "Output directory (default: $ACEFR_OUT_DIR or config)");
    sub->add_option("--threads", threads, "Worker threads for rollout batches")
        ->check(CLI::NonNegativeNumber);
  };

  CLI::App* train = app.add_subcommand("train", "Generate the cloning dataset and train the net");
  CLI::App* ace = app.add_subcommand("ace", "Rank layers by average causal effect");
  CLI::App* run = app.add_subcommand("run", "Simulate one case-study variant and write its trace");
  CLI::App* sweep = app.add_subcommand("sweep", "Compare adapting each layer against none");
  CLI::App* verify = app.add_subcommand("verify", "Check the case-study claims on current outputs");
  for (CLI::App* s : {train, ace, run, sweep, verify}) add_common(s);

  CLI::App* schema = app.add_subcommand("schema-check", "Validate output CSV files");
  std::vector<std::string> files;
  schema->add_option("files", files, "CSV files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (schema->parsed()) return cmd_schema_check(files, std::cout);

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) {
      cfg.output_dir = out_dir;
    } else if (const char* env = std::getenv("ACEFR_OUT_DIR"); env && *env) {
      cfg.output_dir = env;
    }
    if (threads > 0) set_threads(threads);
    std::filesystem::create_directories(cfg.out_path());

    if (train->parsed()) return cmd_train(cfg, std::cout);
    if (ace->parsed()) return cmd_ace(cfg, std::cout);
    if (run->parsed()) return cmd_run(cfg, std::cout);
    if (sweep->parsed()) return cmd_sweep(cfg, std::cout);
    if (verify->parsed()) return cmd_verify(cfg, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const WeightFormatError& e) {
    std::cerr << "weight file error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid setting: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

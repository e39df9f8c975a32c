#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "indexcast/errors.hpp"
#include "indexcast/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string checkpoint;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
  bool features = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "path to the run config JSON")
      ->required();
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--out", args.out_dir, "override the output directory");
  cmd->add_option("--set", args.sets,
                  "override one config key as section.key=value (repeatable; the value is "
                  "parsed as JSON, falling back to a plain string)");
}

indexcast::pipeline::RunConfig resolve_config(CLI::App* cmd, const CommonArgs& args) {
  std::vector<std::string> overrides = args.sets;
  if (cmd->count("--seed") > 0) {
    overrides.push_back("seed=" + std::to_string(args.seed));
  }
  if (cmd->count("--out") > 0) {
    overrides.push_back("output_dir=" + nlohmann::json(args.out_dir).dump());
  }
  return indexcast::pipeline::load_run_config(args.config_path, overrides);
}

std::string resolve_checkpoint(const CommonArgs& args,
                               const indexcast::pipeline::RunConfig& cfg) {
  return args.checkpoint.empty() ? cfg.output_dir + "/checkpoint.json" : args.checkpoint;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stock-index return forecasting pipeline"};
  app.require_subcommand(1);
  CommonArgs args;

  CLI::App* ingest = app.add_subcommand(
      "ingest", "load the CSV manifest, align dates, split and write dataset.json");
  add_common(ingest, args);
  ingest->add_flag("--features", args.features, "also write the standardized feature CSV");

  CLI::App* train =
      app.add_subcommand("train", "train the model on the ingested dataset and write a checkpoint");
  add_common(train, args);

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "compute IC / ICIR / DA for a checkpoint on one segment");
  add_common(evaluate, args);
  evaluate->add_option("--checkpoint", args.checkpoint,
                       "checkpoint path (default <output_dir>/checkpoint.json)");

  CLI::App* backtest = app.add_subcommand(
      "backtest", "run the long-short and confidence-guided backtests for a checkpoint");
  add_common(backtest, args);
  backtest->add_option("--checkpoint", args.checkpoint,
                       "checkpoint path (default <output_dir>/checkpoint.json)");

  CLI::App* plot = app.add_subcommand(
      "plot-data", "write the per-day prediction/position/equity CSV used for plotting");
  add_common(plot, args);
  plot->add_option("--checkpoint", args.checkpoint,
                   "checkpoint path (default <output_dir>/checkpoint.json)");

  try {
    app.parse(argc, argv);
    if (ingest->parsed()) {
      indexcast::pipeline::cmd_ingest(resolve_config(ingest, args), args.features);
    } else if (train->parsed()) {
      indexcast::pipeline::cmd_train(resolve_config(train, args));
    } else if (evaluate->parsed()) {
      auto cfg = resolve_config(evaluate, args);
      indexcast::pipeline::cmd_evaluate(cfg, resolve_checkpoint(args, cfg));
    } else if (backtest->parsed()) {
      auto cfg = resolve_config(backtest, args);
      indexcast::pipeline::cmd_backtest(cfg, resolve_checkpoint(args, cfg));
    } else if (plot->parsed()) {
      auto cfg = resolve_config(plot, args);
      indexcast::pipeline::cmd_plot_data(cfg, resolve_checkpoint(args, cfg));
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const indexcast::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", e.category().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [internal]: %s\n", e.what());
    return 1;
  }
  return 0;
}

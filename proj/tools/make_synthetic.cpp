#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "indexcast/errors.hpp"
#include "indexcast/pipeline.hpp"
#include "indexcast/synthetic.hpp"

// Generates a learnable synthetic market and a ready-to-run config so the
// whole pipeline can be exercised without real data.
int main(int argc, char** argv) {
  CLI::App app{"synthetic market generator"};

  std::string out_dir;
  indexcast::synth::SynthConfig scfg;
  app.add_option("--out", out_dir, "directory for the CSVs and config.json")->required();
  app.add_option("--stocks", scfg.n_stocks, "number of constituent stocks");
  app.add_option("--days", scfg.n_days, "number of trading days");
  app.add_option("--seed", scfg.seed, "generator seed (also written into the config)");
  app.add_option("--noise", scfg.noise, "noise-to-signal ratio of the index return");
  app.add_option("--return-scale", scfg.return_scale, "daily return magnitude");
  app.add_option("--start-date", scfg.start_date, "first calendar date (ISO)");

  try {
    app.parse(argc, argv);
    indexcast::synth::SyntheticMarket market = indexcast::synth::generate(scfg);
    std::string data_dir = out_dir + "/data";
    indexcast::synth::write_csvs(market, data_dir);

    indexcast::pipeline::RunConfig cfg;
    cfg.data.index_path = data_dir + "/index.csv";
    for (const auto& s : market.stocks) {
      cfg.data.stock_paths.push_back(data_dir + "/" + s.symbol + ".csv");
    }
    cfg.output_dir = out_dir + "/run";
    cfg.seed = scfg.seed;
    cfg.train.loss_variant = indexcast::losses::LossVariant::ce_conf_mean;
    cfg.validate();
    std::string cfg_path = out_dir + "/config.json";
    std::string text = indexcast::pipeline::resolved_config_json(cfg);
    {
      std::FILE* f = std::fopen(cfg_path.c_str(), "wb");
      if (!f) throw indexcast::io_error("cannot write " + cfg_path);
      std::fwrite(text.data(), 1, text.size(), f);
      std::fclose(f);
    }

    std::printf("wrote %d stock CSVs and index.csv to %s\n", scfg.n_stocks, data_dir.c_str());
    std::printf("wrote %s\n", cfg_path.c_str());
    std::printf("next: indexcast ingest --config %s && indexcast train --config %s\n",
                cfg_path.c_str(), cfg_path.c_str());
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

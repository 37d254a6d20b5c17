// cryptofc: prepare OHLCV data, run the LSTM / SVR / polynomial sweeps, and
// rank the models by test MSE.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>

#include "cryptofc/config.hpp"
#include "cryptofc/pipeline.hpp"

namespace {

using cryptofc::RunConfig;
using cryptofc::pipeline::ModelKind;

struct Flags {
  std::string input;
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> models{"lstm", "svr", "poly"};
  bool subset_ok = false;
};

RunConfig resolve(const Flags& flags) {
  RunConfig cfg = flags.config.empty() ? RunConfig{} : cryptofc::load_config(flags.config);
  if (!flags.input.empty()) cfg.input_path = flags.input;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.seed) cfg.seed = *flags.seed;
  cfg.validate();
  return cfg;
}

std::vector<ModelKind> model_list(const Flags& flags) {
  std::vector<ModelKind> out;
  for (const auto& m : flags.models) out.push_back(cryptofc::pipeline::parse_model_kind(m));
  return out;
}

int fetch(const std::string& url, const std::string& path) {
  const auto scheme_end = url.find("://");
  const auto path_start = scheme_end == std::string::npos ? std::string::npos : url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    std::cerr << "fetch: expected a URL like https://host/path\n";
    return cryptofc::pipeline::exit_code::kDataFailure;
  }
  httplib::Client client(url.substr(0, path_start));
  client.set_follow_location(true);
  const auto res = client.Get(url.substr(path_start));
  if (!res || res->status != 200) {
    std::cerr << "fetch: request failed"
              << (res ? " with HTTP " + std::to_string(res->status) : ": " + httplib::to_string(res.error())) << '\n';
    return cryptofc::pipeline::exit_code::kDataFailure;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << res->body)) {
    std::cerr << "fetch: cannot write '" << path << "'\n";
    return cryptofc::pipeline::exit_code::kDataFailure;
  }
  std::cout << "fetched " << res->body.size() << " bytes into " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cryptocurrency price forecasting benchmark: LSTM vs SVR vs polynomial regression"};
  app.require_subcommand(1);

  Flags flags;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--input", flags.input, "OHLCV CSV file");
    cmd->add_option("--config", flags.config, "INI config file");
    cmd->add_option("--out-dir", flags.out_dir, "Directory for prepared data, tables and reports");
    cmd->add_option("--seed", flags.seed, "Random seed (overrides the config)");
  };

  auto* prepare = app.add_subcommand("prepare", "Clean, split and normalize the input CSV");
  add_common(prepare);

  std::string run_model;
  auto* run = app.add_subcommand("run", "Run one model family's sweep on prepared data");
  run->add_option("model", run_model, "lstm, svr or poly")->required()->check(CLI::IsMember({"lstm", "svr", "poly"}));
  add_common(run);

  auto* compare = app.add_subcommand("compare", "Rank model results by test MSE");
  add_common(compare);
  compare->add_option("--models", flags.models, "Models to include")->delimiter(',');
  compare->add_flag("--subset-ok", flags.subset_ok, "Allow a report over the models that have results");

  auto* all = app.add_subcommand("all", "prepare, run every model, compare");
  add_common(all);
  all->add_option("--models", flags.models, "Models to run")->delimiter(',');

  std::string url;
  auto* fetch_cmd = app.add_subcommand("fetch", "Download a CSV over HTTP(S) into --input");
  fetch_cmd->add_option("--url", url, "Source URL")->required();
  fetch_cmd->add_option("--input", flags.input, "Destination file")->required();

  CLI11_PARSE(app, argc, argv);

  if (fetch_cmd->parsed()) return fetch(url, flags.input);

  RunConfig cfg;
  std::vector<ModelKind> models;
  try {
    cfg = resolve(flags);
    models = model_list(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cryptofc::pipeline::exit_code::kDataFailure;
  }

  namespace p = cryptofc::pipeline;
  if (prepare->parsed()) return p::cmd_prepare(cfg, std::cout, std::cerr);
  if (run->parsed()) return p::cmd_run(p::parse_model_kind(run_model), cfg, std::cout, std::cerr);
  if (compare->parsed()) return p::cmd_compare(cfg, models, flags.subset_ok, std::cout, std::cerr);
  if (all->parsed()) return p::cmd_all(cfg, models, std::cout, std::cerr);
  return 1;
}

#include "cryptofc/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "cryptofc/eval.hpp"
#include "cryptofc/lstm.hpp"
#include "cryptofc/parallel.hpp"
#include "cryptofc/polyreg.hpp"
#include "cryptofc/svr.hpp"

namespace cryptofc::pipeline {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kFormatVersion = 1;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content) || !out.flush()) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
}

void write_json(const fs::path& path, const json& doc) { write_file(path, doc.dump(2) + "\n"); }

// First line of every CSV artifact.
std::string csv_banner(std::string_view artifact, const RunConfig& cfg) {
  return "# cryptofc " + std::string(artifact) + " config_hash=" + cfg.hash() + " seed=" + std::to_string(cfg.seed) +
         "\n";
}

json stamp(const RunConfig& cfg) {
  return {{"format_version", kFormatVersion}, {"config_hash", cfg.hash()}, {"seed", cfg.seed}};
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::runtime_error("malformed number '" + std::string(text) + "'");
  }
  return v;
}

struct ModelOutput {
  std::string config_summary;
  std::vector<std::string> test_dates;
  std::vector<double> actual;     // normalized
  std::vector<double> predicted;  // normalized
};

void write_result(const fs::path& dir, ModelKind kind, const RunConfig& cfg, const PreparedData& data,
                  const ModelOutput& result) {
  const auto scaler = data.scaler();
  const auto actual_raw = dataset::inverse_scale(result.actual, scaler);
  const auto predicted_raw = dataset::inverse_scale(result.predicted, scaler);
  json doc = stamp(cfg);
  doc["model"] = to_string(kind);
  doc["model_name"] = display_name(kind);
  doc["dataset_fingerprint"] = data.dataset_fingerprint;
  doc["mse_normalized"] = eval::mse(result.actual, result.predicted);
  doc["mse_raw"] = eval::mse(actual_raw, predicted_raw);
  doc["config_summary"] = result.config_summary;
  doc["test"] = {{"dates", result.test_dates}, {"actual", result.actual}, {"predicted", result.predicted}};
  write_json(dir / (std::string(to_string(kind)) + "_result.json"), doc);
}

std::vector<std::string> test_dates(const PreparedData& data) {
  return {data.dates.begin() + static_cast<long>(data.train_size), data.dates.end()};
}

std::span<const double> train_values(const PreparedData& data) {
  return std::span<const double>(data.normalized).first(data.train_size);
}

std::span<const double> test_values(const PreparedData& data) {
  return std::span<const double>(data.normalized).subspan(data.train_size);
}

// ---- LSTM -----------------------------------------------------------------

int run_lstm(const RunConfig& cfg, const PreparedData& data, const fs::path& dir, std::ostream& out,
             std::ostream& err) {
  const auto train = dataset::make_windows(train_values(data), cfg.window);
  const auto test = dataset::make_windows_with_context(train_values(data), test_values(data), cfg.window);

  struct Slot {
    std::optional<lstm::TrainResult> result;
    std::string error;
  };
  std::vector<Slot> slots(cfg.epochs.size());
  parallel_for(slots.size(), [&](std::size_t k) {
    try {
      slots[k].result = lstm::train(train, test, cfg.epochs[k], cfg.seed, cfg.lstm);
    } catch (const std::exception& e) {
      slots[k].error = e.what();
    }
  });

  std::string table = csv_banner("lstm-epochs", cfg) + "epoch,mse\n";
  std::optional<std::size_t> best;
  std::string failure;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (!slots[k].result) {
      failure = "epochs=" + std::to_string(cfg.epochs[k]) + ": " + slots[k].error;
      break;
    }
    const auto& hist = slots[k].result->history;
    const double test_mse = hist.back().test_mse;
    table += std::to_string(cfg.epochs[k]) + "," + format_double(test_mse) + "\n";
    out << "  epochs " << cfg.epochs[k] << "  test mse " << format_double(test_mse) << '\n';

    std::string history = csv_banner("lstm-history", cfg) + "epoch,train_mse,test_mse\n";
    for (const auto& rec : hist) {
      history += std::to_string(rec.epoch) + "," + format_double(rec.train_mse) + "," +
                 format_double(rec.test_mse) + "\n";
    }
    write_file(dir / ("lstm_history_" + std::to_string(cfg.epochs[k]) + ".csv"), history);

    if (!best || test_mse < slots[*best].result->history.back().test_mse) best = k;
  }
  write_file(dir / "lstm_epochs.csv", table);
  if (!failure.empty()) {
    err << "lstm: training failed (" << failure << ")\n";
    return exit_code::kModelFailure;
  }

  const auto& model = slots[*best].result->model;
  lstm::Checkpoint ckpt{model, data.scaler_min, data.scaler_max, cfg.seed, cfg.epochs[*best], cfg.hash()};
  std::ostringstream ckpt_text;
  lstm::save_checkpoint(ckpt_text, ckpt);
  write_file(dir / "lstm_model.ckpt", ckpt_text.str());

  ModelOutput result;
  result.config_summary = "epochs=" + std::to_string(cfg.epochs[*best]) +
                          " hidden=" + std::to_string(cfg.lstm.hidden_size) +
                          " window=" + std::to_string(cfg.window) + " lr=" + format_double(cfg.lstm.adam.learning_rate);
  result.test_dates = test_dates(data);
  result.actual = test.targets;
  result.predicted = lstm::predict_all(test, model);
  write_result(dir, ModelKind::Lstm, cfg, data, result);
  return exit_code::kOk;
}

// ---- SVR ------------------------------------------------------------------

struct SvrSamples {
  std::vector<svr::FeatureVector> train_x, test_x;
  std::vector<double> train_y, test_y;
};

SvrSamples svr_samples(const RunConfig& cfg, const PreparedData& data) {
  SvrSamples s;
  if (cfg.svr_features == SvrFeatures::Window) {
    auto train = dataset::make_windows(train_values(data), cfg.window);
    auto test = dataset::make_windows_with_context(train_values(data), test_values(data), cfg.window);
    s.train_x = std::move(train.inputs);
    s.train_y = std::move(train.targets);
    s.test_x = std::move(test.inputs);
    s.test_y = std::move(test.targets);
    return s;
  }
  if (data.train_size < 2) throw std::runtime_error("svr: need at least two training records");
  // Time index scaled so the training span maps onto [0, 1].
  const double span = static_cast<double>(data.train_size - 1);
  for (std::size_t i = 0; i < data.normalized.size(); ++i) {
    const svr::FeatureVector x{static_cast<double>(i) / span};
    if (i < data.train_size) {
      s.train_x.push_back(x);
      s.train_y.push_back(data.normalized[i]);
    } else {
      s.test_x.push_back(x);
      s.test_y.push_back(data.normalized[i]);
    }
  }
  return s;
}

json kernel_json(const svr::KernelSpec& k) {
  return {{"kind", svr::to_string(k.kind)}, {"gamma", k.gamma}, {"coef0", k.coef0}};
}

int run_svr(const RunConfig& cfg, const PreparedData& data, const fs::path& dir, std::ostream& out,
            std::ostream& err) {
  const auto samples = svr_samples(cfg, data);
  const auto grid = svr::grid_search(samples.train_x, samples.train_y, cfg.svr);

  std::string table = csv_banner("svr-grid", cfg) + "kernel,gamma,c,mse\n";
  std::size_t unconverged = 0;
  for (const auto& cell : grid.cells) {
    table += std::string(svr::to_string(cell.kernel)) + "," + format_double(cell.gamma) + "," +
             format_double(cell.c) + "," + format_double(cell.cv_mse) + "\n";
    if (!cell.converged) ++unconverged;
  }
  write_file(dir / "svr_grid.csv", table);
  if (unconverged > 0) {
    err << "svr: warning: " << unconverged << " of " << grid.cells.size()
        << " cells hit the iteration cap in at least one fold\n";
  }

  const auto& best = grid.cells[grid.best];
  json best_doc = stamp(cfg);
  best_doc["index"] = grid.best;
  best_doc["kernel"] = svr::to_string(best.kernel);
  best_doc["gamma"] = best.gamma;
  best_doc["c"] = best.c;
  best_doc["cv_mse"] = best.cv_mse;
  best_doc["converged"] = best.converged;
  write_json(dir / "svr_best.json", best_doc);
  out << "  best cell: " << svr::to_string(best.kernel) << " gamma=" << format_double(best.gamma)
      << " C=" << format_double(best.c) << " cv mse " << format_double(best.cv_mse) << '\n';

  svr::SvrConfig fit_cfg;
  fit_cfg.kernel = {best.kernel, best.gamma, cfg.svr.coef0};
  fit_cfg.c = best.c;
  fit_cfg.epsilon = cfg.svr.epsilon;
  fit_cfg.tol = cfg.svr.tol;
  fit_cfg.max_iter = cfg.svr.max_iter;
  const auto model = svr::fit(samples.train_x, samples.train_y, fit_cfg);
  if (!model.converged) {
    err << "svr: warning: refit stopped at the iteration cap (KKT violation "
        << format_double(model.kkt_violation) << ")\n";
  }

  json model_doc = stamp(cfg);
  model_doc["kernel"] = kernel_json(model.kernel);
  model_doc["c"] = fit_cfg.c;
  model_doc["epsilon"] = fit_cfg.epsilon;
  model_doc["bias"] = model.bias;
  model_doc["support_vectors"] = model.support_vectors;
  model_doc["dual_coefs"] = model.dual_coefs;
  model_doc["converged"] = model.converged;
  model_doc["kkt_violation"] = model.kkt_violation;
  model_doc["features"] = cfg.svr_features == SvrFeatures::Time ? "time" : "window";
  model_doc["scaler"] = {{"min", data.scaler_min}, {"max", data.scaler_max}};
  write_json(dir / "svr_model.json", model_doc);

  ModelOutput result;
  result.config_summary = "kernel=" + std::string(svr::to_string(best.kernel)) +
                          " gamma=" + format_double(best.gamma) + " C=" + format_double(best.c) +
                          " epsilon=" + format_double(cfg.svr.epsilon);
  result.test_dates = test_dates(data);
  result.actual = samples.test_y;
  result.predicted = svr::predict(model, samples.test_x);
  write_result(dir, ModelKind::Svr, cfg, data, result);
  return exit_code::kOk;
}

// ---- Polynomial -----------------------------------------------------------

int run_poly(const RunConfig& cfg, const PreparedData& data, const fs::path& dir, std::ostream& out,
             std::ostream& err) {
  std::vector<double> train_x, train_y, test_x, test_y;
  const std::size_t first = cfg.poly_feature == PolyFeature::Lag ? 1 : 0;
  for (std::size_t i = first; i < data.normalized.size(); ++i) {
    const double x = cfg.poly_feature == PolyFeature::Lag ? data.normalized[i - 1] : static_cast<double>(i);
    (i < data.train_size ? train_x : test_x).push_back(x);
    (i < data.train_size ? train_y : test_y).push_back(data.normalized[i]);
  }

  std::string table = csv_banner("poly-degrees", cfg) + "degree,mse\n";
  polyreg::DegreeSweep sweep;
  try {
    sweep = polyreg::degree_sweep(train_x, train_y, test_x, test_y, cfg.degrees);
  } catch (const std::exception& e) {
    // Flush the degrees that do fit before reporting the failure.
    for (int degree : cfg.degrees) {
      try {
        const int one[] = {degree};
        const auto row = polyreg::degree_sweep(train_x, train_y, test_x, test_y, one).rows.front();
        table += std::to_string(row.degree) + "," + format_double(row.test_mse) + "\n";
      } catch (const std::exception&) {
        break;
      }
    }
    write_file(dir / "poly_degrees.csv", table);
    err << "poly: " << e.what() << '\n';
    return exit_code::kModelFailure;
  }
  for (const auto& row : sweep.rows) {
    table += std::to_string(row.degree) + "," + format_double(row.test_mse) + "\n";
    out << "  degree " << row.degree << "  test mse " << format_double(row.test_mse) << '\n';
  }
  write_file(dir / "poly_degrees.csv", table);

  const int best_degree = sweep.rows[sweep.best].degree;
  const auto model = polyreg::fit(train_x, train_y, best_degree);
  json model_doc = stamp(cfg);
  model_doc["degree"] = model.degree;
  model_doc["intercept"] = model.intercept;
  model_doc["coefficients"] = model.coefficients;
  model_doc["feature_scale"] = {{"offset", model.scale.offset}, {"span", model.scale.span}};
  model_doc["feature"] = cfg.poly_feature == PolyFeature::Time ? "time" : "lag";
  model_doc["scaler"] = {{"min", data.scaler_min}, {"max", data.scaler_max}};
  write_json(dir / "poly_model.json", model_doc);

  ModelOutput result;
  result.config_summary = "degree=" + std::to_string(best_degree) +
                          " feature=" + (cfg.poly_feature == PolyFeature::Time ? "time" : "lag");
  result.test_dates = test_dates(data);
  result.actual = test_y;
  result.predicted = polyreg::predict(model, test_x);
  write_result(dir, ModelKind::Poly, cfg, data, result);
  return exit_code::kOk;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Lstm: return "lstm";
    case ModelKind::Svr: return "svr";
    case ModelKind::Poly: return "poly";
  }
  return "lstm";
}

std::string_view display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Lstm: return "Long Short Term Memory";
    case ModelKind::Svr: return "Support Vector Regression";
    case ModelKind::Poly: return "Polynomial Regression";
  }
  return "";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "lstm") return ModelKind::Lstm;
  if (name == "svr" || name == "svm") return ModelKind::Svr;
  if (name == "poly" || name == "polyreg") return ModelKind::Poly;
  throw std::invalid_argument("unknown model '" + std::string(name) + "' (expected lstm, svr or poly)");
}

PreparedData load_prepared(const fs::path& out_dir) {
  const auto meta = json::parse(read_file(out_dir / "dataset_meta.json"));
  PreparedData data;
  data.scaler_min = meta.at("scaler").at("min").get<double>();
  data.scaler_max = meta.at("scaler").at("max").get<double>();
  data.train_size = meta.at("split").at("train_size").get<std::size_t>();
  data.config_hash = meta.at("config_hash").get<std::string>();
  data.dataset_fingerprint = meta.at("dataset_fingerprint").get<std::string>();

  std::istringstream csv(read_file(out_dir / "dataset.csv"));
  std::string line;
  bool header_seen = false;
  while (std::getline(csv, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "index,date,normalized_close") throw std::runtime_error("dataset.csv: unexpected header");
      header_seen = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw std::runtime_error("dataset.csv: bad row");
    data.dates.push_back(line.substr(c1 + 1, c2 - c1 - 1));
    data.normalized.push_back(parse_double(std::string_view(line).substr(c2 + 1)));
  }
  if (data.train_size == 0 || data.train_size >= data.normalized.size()) {
    throw std::runtime_error("dataset_meta.json: split boundary out of range");
  }
  return data;
}

int cmd_prepare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.validate();
    if (cfg.input_path.empty()) throw std::runtime_error("no input file given");
    if (!fs::exists(cfg.input_path)) throw std::runtime_error("input file '" + cfg.input_path + "' does not exist");
    const auto bytes = read_file(cfg.input_path);

    std::vector<std::string> warnings;
    const auto parsed = dataset::parse_csv(std::string_view(bytes), &warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    const auto cleaned = dataset::clean(parsed);
    const auto split = dataset::chronological_split(cleaned, cfg.train_fraction);
    const auto scaler = dataset::fit_scaler(split.train.column(cfg.target));
    const auto normalized = dataset::scale(cleaned.column(cfg.target), scaler);

    const auto boundary = split.train.size();
    const auto fingerprint =
        eval::to_hex(eval::fnv1a64("split=" + std::to_string(boundary), eval::fnv1a64(bytes)));

    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    std::string csv = csv_banner("dataset", cfg) + "index,date,normalized_close\n";
    for (std::size_t i = 0; i < cleaned.size(); ++i) {
      csv += std::to_string(i) + "," + cleaned.records[i].date.iso() + "," + format_double(normalized[i]) + "\n";
    }
    write_file(dir / "dataset.csv", csv);

    json meta = stamp(cfg);
    meta["input"] = cfg.input_path;
    meta["input_fingerprint"] = eval::to_hex(eval::fnv1a64(bytes));
    meta["dataset_fingerprint"] = fingerprint;
    meta["target_column"] = dataset::to_string(cfg.target);
    meta["records"] = {{"parsed", parsed.size()}, {"clean", cleaned.size()}, {"dropped", parsed.size() - cleaned.size()}};
    meta["scaler"] = {{"kind", "min-max"}, {"min", scaler.min()}, {"max", scaler.max()}};
    meta["split"] = {{"train_fraction", cfg.train_fraction},
                     {"train_size", boundary},
                     {"test_size", split.test.size()},
                     {"first_test_date", split.test.records.front().date.iso()}};
    write_json(dir / "dataset_meta.json", meta);

    out << "prepared " << cleaned.size() << " records (" << parsed.size() - cleaned.size() << " dropped): "
        << boundary << " train / " << split.test.size() << " test, scaler [" << format_double(scaler.min()) << ", "
        << format_double(scaler.max()) << "]\n";
    return exit_code::kOk;
  } catch (const std::exception& e) {
    err << "prepare failed: " << e.what() << '\n';
    return exit_code::kDataFailure;
  }
}

int cmd_run(ModelKind model, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  PreparedData data;
  try {
    cfg.validate();
    data = load_prepared(cfg.out_dir);
  } catch (const std::exception& e) {
    err << "run " << to_string(model) << ": cannot load prepared data: " << e.what() << '\n';
    return exit_code::kDataFailure;
  }
  if (data.config_hash != cfg.hash()) {
    err << "run " << to_string(model) << ": warning: prepared data came from config " << data.config_hash
        << ", current config is " << cfg.hash() << '\n';
  }

  out << "run " << to_string(model) << " (" << display_name(model) << ")\n";
  const fs::path dir(cfg.out_dir);
  try {
    switch (model) {
      case ModelKind::Lstm: return run_lstm(cfg, data, dir, out, err);
      case ModelKind::Svr: return run_svr(cfg, data, dir, out, err);
      case ModelKind::Poly: return run_poly(cfg, data, dir, out, err);
    }
  } catch (const std::exception& e) {
    err << "run " << to_string(model) << " failed: " << e.what() << '\n';
  }
  return exit_code::kModelFailure;
}

int cmd_compare(const RunConfig& cfg, const std::vector<ModelKind>& models, bool subset_ok, std::ostream& out,
                std::ostream& err) {
  const fs::path dir(cfg.out_dir);
  PreparedData data;
  try {
    data = load_prepared(dir);
  } catch (const std::exception& e) {
    err << "compare: cannot load prepared data: " << e.what() << '\n';
    return exit_code::kMissingResults;
  }

  std::vector<eval::ModelResult> results;
  std::vector<std::pair<ModelKind, json>> docs;
  for (auto kind : models) {
    const auto path = dir / (std::string(to_string(kind)) + "_result.json");
    if (!fs::exists(path)) {
      if (!subset_ok) {
        err << "compare: missing result for " << to_string(kind) << " (" << path.string() << ")\n";
        return exit_code::kMissingResults;
      }
      continue;
    }
    try {
      auto doc = json::parse(read_file(path));
      if (doc.at("dataset_fingerprint").get<std::string>() != data.dataset_fingerprint) {
        err << "compare: warning: " << to_string(kind) << " result was produced from a different dataset\n";
      }
      results.push_back({doc.at("model_name").get<std::string>(), doc.at("mse_normalized").get<double>(),
                         doc.at("mse_raw").get<double>(), doc.at("config_summary").get<std::string>()});
      docs.emplace_back(kind, std::move(doc));
    } catch (const std::exception& e) {
      err << "compare: unreadable result for " << to_string(kind) << ": " << e.what() << '\n';
      return exit_code::kMissingResults;
    }
  }
  if (results.empty()) {
    err << "compare: no model results found in " << dir.string() << '\n';
    return exit_code::kMissingResults;
  }

  try {
    const auto report = eval::compare(results, data.dataset_fingerprint);
    const auto scaler = data.scaler();

    std::string csv = csv_banner("comparison", cfg) + "model,mse_normalized,mse_raw\n";
    json rows = json::array();
    for (const auto& r : report.results) {
      csv += r.model_name + "," + format_double(r.mse_normalized) + "," + format_double(r.mse_raw) + "\n";
      rows.push_back({{"model", r.model_name},
                      {"mse_normalized", r.mse_normalized},
                      {"mse_raw", r.mse_raw},
                      {"config_summary", r.config_summary}});
    }
    write_file(dir / "comparison.csv", csv);

    json doc = stamp(cfg);
    doc["dataset_fingerprint"] = report.dataset_fingerprint;
    doc["winner"] = report.winner;
    doc["results"] = rows;
    write_json(dir / "comparison.json", doc);

    const auto table = format_report_table(report);
    write_file(dir / "comparison.txt", "config_hash: " + cfg.hash() + "  seed: " + std::to_string(cfg.seed) +
                                           "\n\n" + table);
    out << table;

    for (const auto& [kind, result] : docs) {
      const auto& test = result.at("test");
      const auto dates = test.at("dates").get<std::vector<std::string>>();
      const auto actual = dataset::inverse_scale(test.at("actual").get<std::vector<double>>(), scaler);
      const auto predicted = dataset::inverse_scale(test.at("predicted").get<std::vector<double>>(), scaler);
      std::string dump = csv_banner("predictions-" + std::string(to_string(kind)), cfg) + "date,actual,predicted\n";
      for (std::size_t i = 0; i < dates.size() && i < actual.size() && i < predicted.size(); ++i) {
        dump += dates[i] + "," + format_double(actual[i]) + "," + format_double(predicted[i]) + "\n";
      }
      write_file(dir / ("predictions_" + std::string(to_string(kind)) + ".csv"), dump);
    }
  } catch (const std::exception& e) {
    err << "compare failed: " << e.what() << '\n';
    return exit_code::kMissingResults;
  }
  return exit_code::kOk;
}

int cmd_all(const RunConfig& cfg, const std::vector<ModelKind>& models, std::ostream& out, std::ostream& err) {
  if (const int rc = cmd_prepare(cfg, out, err); rc != exit_code::kOk) return rc;
  for (auto kind : models) {
    if (const int rc = cmd_run(kind, cfg, out, err); rc != exit_code::kOk) return rc;
  }
  return cmd_compare(cfg, models, false, out, err);
}

}  // namespace cryptofc::pipeline

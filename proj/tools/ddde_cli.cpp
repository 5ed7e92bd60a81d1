// ddde: generate data, train density estimators and evaluate them.
//
//   ddde gen-data <generator> --n N [--seed S] [generator flags] [--out data.csv]
//   ddde train --config run.json [overrides]
//   ddde eval --checkpoint model.ddde --test test.csv
//   ddde grid --checkpoint model.ddde [--resolution 200] [--out grid.csv]
//   ddde score --checkpoint model.ddde --data data.csv [--labeled] [--out scores.csv]
//   ddde weights --checkpoint model.ddde --data data.csv [--out weights.csv]
//   ddde kde --train train.csv --test test.csv [--grid b1,b2,...] [--folds 5] [--seed S]
//
// Exit codes: 0 success, 2 usage or validation error, 3 training diverged,
// 4 file could not be read or written.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ddde/ddde.hpp"

namespace fs = std::filesystem;
using namespace ddde;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitIo = 4;

std::string six(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void require_dim(const DddeModel& model, const Dataset& data) {
  if (data.dim() != model.dim())
    throw ShapeError("dimension mismatch: checkpoint has dimension " + std::to_string(model.dim()) +
                     ", data has dimension " + std::to_string(data.dim()));
}

std::string column_csv(const std::string& header, const std::vector<double>& values) {
  std::string out = header + "\n";
  for (double v : values) out += format_real(v) + "\n";
  return out;
}

struct GenDataArgs {
  GeneratorSpec spec;
  std::vector<double> mean{0.5};
  std::uint64_t seed = 0;
  std::string out = "data.csv";
};

int run_gen_data(const GenDataArgs& a) {
  GeneratorSpec spec = a.spec;
  spec.mean = a.mean.size() == 1 ? std::vector<double>(2, a.mean.front()) : a.mean;
  spec.validate();
  Rng rng = Rng::stream(a.seed, "data");
  const Dataset data = generate(spec, rng);
  save_csv(data, a.out);
  const nlohmann::json echo{{"command", "gen-data"}, {"seed", a.seed}, {"generator", to_json(spec)}};
  write_file_atomic(a.out + ".json", echo.dump(2) + "\n");
  std::cout << "wrote " << data.size() << " rows of dimension " << data.dim() << " to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  std::optional<std::string> history;
  std::optional<std::string> variant;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(a.config));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  // Relative data paths are taken from the config file's directory.
  const fs::path base = fs::absolute(a.config).parent_path();
  if (j.contains("data") && j.at("data").is_string()) {
    const fs::path p = j.at("data").get<std::string>();
    j["data"] = (p.is_absolute() ? p : base / p).lexically_normal().string();
  }
  if (a.seed) j["seed"] = *a.seed;
  if (a.epochs) j["epochs"] = *a.epochs;
  if (a.data) {
    j["data"] = fs::absolute(*a.data).lexically_normal().string();
    j.erase("generator");
  }
  if (a.checkpoint) j["output"]["checkpoint"] = *a.checkpoint;
  if (a.history) j["output"]["history"] = *a.history;
  if (a.variant) j["objective_variant"] = *a.variant;
  const RunConfig cfg = run_config_from_json(j);

  Dataset data;
  if (cfg.generator) {
    Rng rng = Rng::stream(cfg.seed, "data");
    data = generate(*cfg.generator, rng);
  } else {
    data = load_csv(*cfg.data, cfg.labeled);
  }
  const Domain domain = cfg.domain(data.dim());

  const auto progress = [&](const EpochRecord& e) {
    if (!a.quiet && (e.epoch % 10 == 9 || e.epoch + 1 == cfg.epochs))
      std::cerr << "epoch " << e.epoch + 1 << "/" << cfg.epochs << "  objective " << six(e.objective) << "  ema "
                << six(e.ema) << "  lr " << six(e.lr) << "\n";
  };
  const TrainResult result = train(data, domain, cfg.train_config(), progress);

  save_checkpoint(result.model, cfg.checkpoint);
  std::string hist = "epoch,objective,ema,lr\n";
  for (const auto& e : result.history)
    hist += std::to_string(e.epoch) + "," + format_real(e.objective) + "," + format_real(e.ema) + "," +
            format_real(e.lr) + "\n";
  write_file_atomic(cfg.history, hist);
  write_file_atomic(cfg.checkpoint + ".json", to_json(cfg).dump(2) + "\n");

  if (result.history.empty())
    std::cout << "final objective: none (0 epochs)\n";
  else
    std::cout << "final objective: " << six(result.history.back().objective) << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& test, bool labeled) {
  const DddeModel model = load_checkpoint(checkpoint);
  const Dataset data = load_csv(test, labeled);
  require_dim(model, data);
  const double value = nll([&](const Matrix& m) { return model.log_density(m); }, data, model.domain);
  std::cout << "nll: " << six(value) << "\n";
  return 0;
}

int run_grid(const std::string& checkpoint, std::size_t resolution, const std::string& out) {
  const DddeModel model = load_checkpoint(checkpoint);
  if (model.dim() != 2)
    throw ShapeError("grid export needs a 2-dimensional checkpoint, this one has dimension " +
                     std::to_string(model.dim()));
  const auto grid =
      grid_eval([&](const Matrix& m) { return model.log_density(m); }, model.domain, {resolution, resolution});
  write_file_atomic(out, format_grid_csv(grid));
  std::cout << "wrote " << grid.values.size() << " cells to " << out << "\n";
  std::cout << "normalization integral: " << six(normalization_integral(grid)) << "\n";
  return 0;
}

int run_score(const std::string& checkpoint, const std::string& input, bool labeled,
              const std::optional<std::string>& out) {
  const DddeModel model = load_checkpoint(checkpoint);
  const Dataset data = load_csv(input, labeled);
  require_dim(model, data);
  const auto scores = anomaly_scores(model, data.points);
  if (out) write_file_atomic(*out, column_csv("score", scores));
  std::cout << "scored " << scores.size() << " rows\n";
  // Label 1 marks an anomaly, so a good score ranks it above label 0.
  if (data.labels) std::cout << "auroc: " << six(auroc(scores, *data.labels)) << "\n";
  return 0;
}

int run_weights(const std::string& checkpoint, const std::string& input, const std::string& out) {
  const DddeModel model = load_checkpoint(checkpoint);
  const Dataset data = load_csv(input);
  require_dim(model, data);
  write_file_atomic(out, column_csv("weight", sample_weights(model, data)));
  std::cout << "wrote " << data.size() << " weights to " << out << "\n";
  return 0;
}

struct KdeArgs {
  std::string train;
  std::string test;
  std::vector<double> grid = default_bandwidth_grid();
  std::size_t folds = 5;
  std::uint64_t seed = 0;
};

int run_kde(const KdeArgs& a) {
  const Dataset train_set = load_csv(a.train);
  const Dataset test_set = load_csv(a.test);
  if (train_set.dim() != test_set.dim())
    throw ShapeError("dimension mismatch: train data has dimension " + std::to_string(train_set.dim()) +
                     ", test data has dimension " + std::to_string(test_set.dim()));
  Rng folds = Rng::stream(a.seed, "folds");
  const auto sel = select_bandwidth_cv(train_set, a.grid, a.folds, folds);
  const KdeModel model(train_set.points, sel.bandwidth);
  std::cout << "bandwidth: " << six(sel.bandwidth) << "\n";
  std::cout << "nll: " << six(kde_nll(model, test_set)) << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density estimation with a Donsker-Varadhan critic"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  gen_cmd->add_option("generator", gen.spec.name, "gaussian | correlated | mixture9 | moons | circles | uniform")
      ->required();
  gen_cmd->add_option("--n", gen.spec.n, "Number of points")->required();
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--mean", gen.mean, "Gaussian mean; one value is used for both axes")->delimiter(',');
  gen_cmd->add_option("--sigma", gen.spec.sigma);
  gen_cmd->add_option("--rho", gen.spec.rho);
  gen_cmd->add_option("--noise", gen.spec.noise);
  gen_cmd->add_option("--factor", gen.spec.factor);
  gen_cmd->add_option("--margin", gen.spec.margin);
  gen_cmd->add_option("--out", gen.out);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON run config");
  train_cmd->add_option("--config", tr.config)->required();
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_option("--epochs", tr.epochs);
  train_cmd->add_option("--data", tr.data, "CSV training data (replaces the config's data source)");
  train_cmd->add_option("--checkpoint", tr.checkpoint);
  train_cmd->add_option("--history", tr.history);
  train_cmd->add_option("--objective-variant", tr.variant, "log-ema | paper-literal");
  train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");

  std::string checkpoint, input, out;
  bool labeled = false;
  std::size_t resolution = 200;
  std::optional<std::string> score_out;

  auto* eval_cmd = app.add_subcommand("eval", "Test-set negative log-likelihood");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--test", input)->required();
  eval_cmd->add_flag("--labeled", labeled, "Last CSV column is a label");

  auto* grid_cmd = app.add_subcommand("grid", "Log-density on a regular grid (2-d models)");
  grid_cmd->add_option("--checkpoint", checkpoint)->required();
  grid_cmd->add_option("--resolution", resolution);
  grid_cmd->add_option("--out", out)->default_val("grid.csv");

  auto* score_cmd = app.add_subcommand("score", "Anomaly scores -log p(x); AUROC when labels are given");
  score_cmd->add_option("--checkpoint", checkpoint)->required();
  score_cmd->add_option("--data", input)->required();
  score_cmd->add_flag("--labeled", labeled, "Last CSV column is a label, 1 = anomaly");
  score_cmd->add_option("--out", score_out);

  auto* weights_cmd = app.add_subcommand("weights", "Normalised density weights of each row");
  weights_cmd->add_option("--checkpoint", checkpoint)->required();
  weights_cmd->add_option("--data", input)->required();
  weights_cmd->add_option("--out", out)->default_val("weights.csv");

  KdeArgs kde;
  auto* kde_cmd = app.add_subcommand("kde", "KDE baseline with cross-validated bandwidth");
  kde_cmd->add_option("--train", kde.train)->required();
  kde_cmd->add_option("--test", kde.test)->required();
  kde_cmd->add_option("--grid", kde.grid, "Candidate bandwidths")->delimiter(',');
  kde_cmd->add_option("--folds", kde.folds);
  kde_cmd->add_option("--seed", kde.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_eval(checkpoint, input, labeled);
    if (*grid_cmd) return run_grid(checkpoint, resolution, out);
    if (*score_cmd) return run_score(checkpoint, input, labeled, score_out);
    if (*weights_cmd) return run_weights(checkpoint, input, out);
    if (*kde_cmd) return run_kde(kde);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

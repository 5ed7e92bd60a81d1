#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ddde/data.hpp"
#include "ddde/dv_estimator.hpp"
#include "ddde/errors.hpp"
#include "ddde/kde.hpp"
#include "ddde/rng.hpp"

namespace ddde {

/// Named synthetic data source and its parameters.
struct GeneratorSpec {
  std::string name = "gaussian"; // gaussian | correlated | mixture9 | moons | circles | uniform
  std::size_t n = 2048;
  std::vector<double> mean{0.5, 0.5};
  double sigma = 0.1;
  double rho = 0.9;
  double noise = 0.05;
  double factor = 0.5;
  double margin = 0.05;

  static const std::vector<std::string>& names() {
    static const std::vector<std::string> all{"gaussian", "correlated", "mixture9", "moons", "circles", "uniform"};
    return all;
  }

  void validate() const {
    bool known = false;
    for (const auto& n_ : names()) known = known || n_ == name;
    if (!known) throw ConfigError("unknown generator '" + name + "'");
    if (n == 0) throw ConfigError("generator: n must be at least 1");
    if (name == "gaussian" && (mean.empty() || !(sigma > 0.0)))
      throw ConfigError("generator gaussian: need a non-empty mean and sigma > 0");
    if (name == "correlated" && !(std::abs(rho) < 1.0)) throw ConfigError("generator correlated: |rho| must be < 1");
    if ((name == "moons" || name == "circles") && !(noise >= 0.0))
      throw ConfigError("generator: noise must be non-negative");
    if (name == "circles" && !(factor > 0.0 && factor < 1.0))
      throw ConfigError("generator circles: factor must lie in (0, 1)");
    if (!(margin >= 0.0 && margin < 0.5)) throw ConfigError("generator: margin must lie in [0, 0.5)");
  }
};

/// Produces the dataset described by `spec`. Every generator lands in the
/// unit box of its dimension.
inline Dataset generate(const GeneratorSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.name == "gaussian") return gen_gaussian(spec.n, spec.mean, spec.sigma, rng);
  if (spec.name == "correlated") return gen_correlated_gaussian(spec.n, spec.rho, rng);
  if (spec.name == "mixture9") return gen_gaussian_mixture(spec.n, rng);
  if (spec.name == "moons") return gen_two_moons(spec.n, spec.noise, rng, spec.margin);
  if (spec.name == "circles") return gen_circles(spec.n, spec.noise, spec.factor, rng, spec.margin);
  return sample_uniform(Domain::unit_box(spec.mean.empty() ? 2 : spec.mean.size()), spec.n, rng);
}

/// Full description of one training run; JSON keys mirror the field names.
struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<std::string> data;
  bool labeled = false;
  std::optional<GeneratorSpec> generator;
  std::optional<std::vector<double>> domain_low;
  std::optional<std::vector<double>> domain_high;
  std::vector<std::size_t> hidden{512, 512, 512};
  std::size_t epochs = 200;
  double lr = 1e-3;
  double lr_decay_factor = kDefaultLrDecay;
  std::size_t lr_decay_every = 50;
  std::size_t n_data = 32;
  std::size_t n_unif = 64;
  double beta = 0.9999;
  double epsilon = 1e-20;
  ObjectiveVariant objective_variant = ObjectiveVariant::log_ema;
  double dropout_p = 0.0;
  std::vector<double> kde_grid = default_bandwidth_grid();
  std::size_t kde_folds = 5;
  std::string checkpoint = "model.ddde";
  std::string history = "history.csv";

  TrainConfig train_config() const {
    TrainConfig c;
    c.epochs = epochs;
    c.lr = lr;
    c.lr_decay_factor = lr_decay_factor;
    c.lr_decay_every = lr_decay_every;
    c.n_data = n_data;
    c.n_unif = n_unif;
    c.beta = beta;
    c.epsilon = epsilon;
    c.seed = seed;
    c.hidden = hidden;
    c.dropout_p = dropout_p;
    c.variant = objective_variant;
    return c;
  }

  /// The configured box, or the unit box of dimension `dim` when none is set.
  Domain domain(std::size_t dim) const {
    if (domain_low && domain_high) return Domain(*domain_low, *domain_high);
    return Domain::unit_box(dim);
  }

  void validate() const {
    if (data.has_value() == generator.has_value())
      throw ConfigError("config: set exactly one of 'data' and 'generator'");
    if (generator) generator->validate();
    if (domain_low.has_value() != domain_high.has_value())
      throw ConfigError("config: domain needs both 'low' and 'high'");
    if (domain_low) {
      try {
        (void)Domain(*domain_low, *domain_high);
      } catch (const ParameterError& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
    try {
      train_config().validate();
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    if (kde_grid.empty()) throw ConfigError("config: kde grid must not be empty");
    for (double b : kde_grid)
      if (!(b > 0.0)) throw ConfigError("config: kde bandwidths must be positive");
    if (kde_folds < 2) throw ConfigError("config: kde folds must be at least 2");
    if (checkpoint.empty() || history.empty()) throw ConfigError("config: output paths must not be empty");
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                                std::string_view where) {
  if (!obj.is_object()) throw ConfigError("config: '" + std::string(where) + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("config: unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void read_key(const nlohmann::json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

} // namespace detail

inline GeneratorSpec generator_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j, {"name", "n", "mean", "sigma", "rho", "noise", "factor", "margin"}, "generator");
  GeneratorSpec g;
  detail::read_key(j, "name", g.name);
  detail::read_key(j, "n", g.n);
  detail::read_key(j, "mean", g.mean);
  detail::read_key(j, "sigma", g.sigma);
  detail::read_key(j, "rho", g.rho);
  detail::read_key(j, "noise", g.noise);
  detail::read_key(j, "factor", g.factor);
  detail::read_key(j, "margin", g.margin);
  return g;
}

inline nlohmann::json to_json(const GeneratorSpec& g) {
  return {{"name", g.name}, {"n", g.n},         {"mean", g.mean},     {"sigma", g.sigma},
          {"rho", g.rho},   {"noise", g.noise}, {"factor", g.factor}, {"margin", g.margin}};
}

/// Parses and validates a config document; unknown keys are errors.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j,
                              {"seed", "data", "labeled", "generator", "domain", "hidden", "epochs", "lr", "lr_decay",
                               "n_data", "n_unif", "beta", "epsilon", "objective_variant", "dropout_p", "kde",
                               "output"},
                              "config");
  RunConfig c;
  detail::read_key(j, "seed", c.seed);
  if (j.contains("data") && !j.at("data").is_null()) {
    std::string path;
    detail::read_key(j, "data", path);
    c.data = path;
  }
  detail::read_key(j, "labeled", c.labeled);
  if (j.contains("generator") && !j.at("generator").is_null()) c.generator = generator_from_json(j.at("generator"));
  if (j.contains("domain")) {
    const auto& d = j.at("domain");
    detail::reject_unknown_keys(d, {"low", "high"}, "domain");
    std::vector<double> low, high;
    detail::read_key(d, "low", low);
    detail::read_key(d, "high", high);
    if (d.contains("low")) c.domain_low = low;
    if (d.contains("high")) c.domain_high = high;
  }
  detail::read_key(j, "hidden", c.hidden);
  detail::read_key(j, "epochs", c.epochs);
  detail::read_key(j, "lr", c.lr);
  if (j.contains("lr_decay")) {
    const auto& d = j.at("lr_decay");
    detail::reject_unknown_keys(d, {"factor", "every"}, "lr_decay");
    detail::read_key(d, "factor", c.lr_decay_factor);
    detail::read_key(d, "every", c.lr_decay_every);
  }
  detail::read_key(j, "n_data", c.n_data);
  detail::read_key(j, "n_unif", c.n_unif);
  detail::read_key(j, "beta", c.beta);
  detail::read_key(j, "epsilon", c.epsilon);
  if (j.contains("objective_variant")) {
    std::string v;
    detail::read_key(j, "objective_variant", v);
    try {
      c.objective_variant = parse_objective_variant(v);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  detail::read_key(j, "dropout_p", c.dropout_p);
  if (j.contains("kde")) {
    const auto& k = j.at("kde");
    detail::reject_unknown_keys(k, {"grid", "folds"}, "kde");
    detail::read_key(k, "grid", c.kde_grid);
    detail::read_key(k, "folds", c.kde_folds);
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::reject_unknown_keys(o, {"checkpoint", "history"}, "output");
    detail::read_key(o, "checkpoint", c.checkpoint);
    detail::read_key(o, "history", c.history);
  }
  c.validate();
  return c;
}

inline RunConfig parse_run_config(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

/// Complete, normalised document; parsing it back yields the same config.
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["data"] = c.data ? nlohmann::json(*c.data) : nlohmann::json(nullptr);
  j["labeled"] = c.labeled;
  j["generator"] = c.generator ? to_json(*c.generator) : nlohmann::json(nullptr);
  if (c.domain_low) j["domain"] = {{"low", *c.domain_low}, {"high", *c.domain_high}};
  j["hidden"] = c.hidden;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["lr_decay"] = {{"factor", c.lr_decay_factor}, {"every", c.lr_decay_every}};
  j["n_data"] = c.n_data;
  j["n_unif"] = c.n_unif;
  j["beta"] = c.beta;
  j["epsilon"] = c.epsilon;
  j["objective_variant"] = std::string(to_string(c.objective_variant));
  j["dropout_p"] = c.dropout_p;
  j["kde"] = {{"grid", c.kde_grid}, {"folds", c.kde_folds}};
  j["output"] = {{"checkpoint", c.checkpoint}, {"history", c.history}};
  return j;
}

} // namespace ddde

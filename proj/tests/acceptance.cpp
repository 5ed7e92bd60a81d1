// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Pass criterion ids (AC1 ... AC10, DVB) as
// arguments to run a subset.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ddde/ddde.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace ddde;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

TrainConfig paper_config(std::uint64_t seed) {
  TrainConfig c; // defaults are the published setup
  c.seed = seed;
  return c;
}

void log_progress(const std::string& tag, const EpochRecord& e, std::size_t epochs) {
  if (e.epoch % 25 == 24 || e.epoch + 1 == epochs)
    std::fprintf(stderr, "  [%s] epoch %zu/%zu objective %.4f ema %.4g\n", tag.c_str(), e.epoch + 1, epochs,
                 e.objective, e.ema);
}

// Isotropic Gaussian run shared by AC1, AC3 and AC4.
struct GaussianRun {
  TrainResult result;
  Dataset data;
  double seconds = 0.0;
};

const GaussianRun& gaussian_run() {
  static std::optional<GaussianRun> run;
  if (!run) {
    run.emplace();
    Rng rng = Rng::stream(1, "data");
    const std::vector<double> mean{0.5, 0.5};
    run->data = gen_gaussian(2048, mean, 0.1, rng);
    const auto cfg = paper_config(1);
    const auto t0 = std::chrono::steady_clock::now();
    run->result = train(run->data, Domain::unit_box(2), cfg,
                        [&](const EpochRecord& e) { log_progress("gaussian", e, cfg.epochs); });
    run->seconds = seconds_since(t0);
  }
  return *run;
}

constexpr double kGaussianKl = 1.7673; // -(ln(2 pi e) + ln 0.01), the entropy gap to the uniform box

Verdict ac1() {
  const auto& run = gaussian_run();
  const double obj = run.result.history.back().objective;
  const bool value_ok = std::abs(obj - 1.77) <= 0.2;
  const bool time_ok = run.seconds < 600.0;
  return {value_ok && time_ok, "final-epoch objective " + fmt("%.4f", obj) + " (target 1.77 +/- 0.2), training " +
                                   fmt("%.0f", run.seconds) + " s (target < 600 s)"};
}

Verdict ac3() {
  const auto& run = gaussian_run();
  const std::vector<double> centre{0.5, 0.5};
  const double v = log_density(run.result.model, centre);
  return {std::abs(v - 2.767) <= 0.3, "log p(0.5, 0.5) = " + fmt("%.4f", v) + " (target 2.767 +/- 0.3)"};
}

Verdict ac4() {
  const auto& model = gaussian_run().result.model;
  const auto grid =
      grid_eval([&](const Matrix& m) { return model.log_density(m); }, Domain::unit_box(2), {200, 200});
  const double z = normalization_integral(grid);
  return {z >= 0.8 && z <= 1.2, "200x200 normalization integral " + fmt("%.4f", z) + " (target [0.8, 1.2])"};
}

Verdict ac2() {
  std::vector<double> ddde_nll, kde_nll_v, gap;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng data_rng = Rng::stream(seed, "data");
    const Dataset train_set = gen_gaussian_mixture(2048, data_rng);
    Rng test_rng = Rng::stream(seed, "test");
    const Dataset test_set = gen_gaussian_mixture(10000, test_rng);

    const auto cfg = paper_config(seed);
    const auto result = train(train_set, Domain::unit_box(2), cfg, [&](const EpochRecord& e) {
      log_progress("mixture seed " + std::to_string(seed), e, cfg.epochs);
    });
    const double d = nll([&](const Matrix& m) { return result.model.log_density(m); }, test_set, Domain::unit_box(2));

    Rng folds = Rng::stream(seed, "folds");
    const auto sel = select_bandwidth_cv(train_set, default_bandwidth_grid(), 5, folds);
    const double k = kde_nll(KdeModel(train_set.points, sel.bandwidth), test_set);

    ddde_nll.push_back(d);
    kde_nll_v.push_back(k);
    gap.push_back(d - k);
    per_seed += " [" + fmt("%.4f", d) + " vs " + fmt("%.4f", k) + " b=" + fmt("%g", sel.bandwidth) + "]";
  }
  const double g = median(gap);
  return {g <= 0.05, "median(DDDE - KDE) test NLL " + fmt("%.4f", g) + " (target <= 0.05); median DDDE " +
                         fmt("%.4f", median(ddde_nll)) + ", median KDE " + fmt("%.4f", median(kde_nll_v)) +
                         "; per seed" + per_seed};
}

Verdict ac5() {
  Rng rng(2024);
  double worst_net = 0.0;
  std::size_t checked = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t in = 1 + rng.below(4);
    std::vector<std::size_t> hidden(rng.below(3) + 1);
    for (auto& h : hidden) h = 1 + rng.below(16);
    MlpNetwork net = oracle::random_network(in, hidden, 1e-20, 0.0, rng);
    const Matrix x = oracle::random_batch(1 + rng.below(6), in, rng);
    std::vector<double> weights(static_cast<std::size_t>(x.rows()));
    for (auto& w : weights) w = rng.uniform(-1.0, 1.0);
    const auto loss = [&] {
      const auto f = net.evaluate(x);
      double s = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) s += weights[i] * std::log(f[i]);
      return s;
    };
    const auto f = net.forward(x, true);
    std::vector<double> up(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) up[i] = weights[i] / f[i];
    const auto grads = net.backward(up);
    net.clear_cache();
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      auto& layer = net.layers()[l];
      for (Eigen::Index i = 0; i < layer.weights().size(); ++i) {
        const double fd = oracle::central_difference(loss, layer.weights().data()[i]);
        worst_net = std::max(worst_net, oracle::relative_error(grads.layers[l].weights.data()[i], fd));
        ++checked;
      }
      for (Eigen::Index i = 0; i < layer.bias().size(); ++i) {
        const double fd = oracle::central_difference(loss, layer.bias()[i]);
        worst_net = std::max(worst_net, oracle::relative_error(grads.layers[l].bias[i], fd));
        ++checked;
      }
    }
  }

  double worst_seed = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> fd(1 + rng.below(8)), fu(1 + rng.below(8));
    for (auto& v : fd) v = rng.uniform(0.2, 5.0);
    for (auto& v : fu) v = rng.uniform(0.2, 5.0);
    const double ema = rng.uniform(0.5, 3.0);
    const auto seed = dv_loss_gradient_seed(fd, fu, ema);
    const auto loss = [&] { return dv_loss(fd, fu, ema).total; };
    for (std::size_t i = 0; i < fd.size(); ++i)
      worst_seed = std::max(worst_seed, oracle::relative_error(seed.data[i], oracle::central_difference(loss, fd[i])));
    for (std::size_t i = 0; i < fu.size(); ++i)
      worst_seed =
          std::max(worst_seed, oracle::relative_error(seed.uniform[i], oracle::central_difference(loss, fu[i])));
  }
  return {worst_net <= 1e-4 && worst_seed <= 1e-8,
          "network max rel. error " + fmt("%.2e", worst_net) + " over " + std::to_string(checked) +
              " parameters (tol 1e-4); seed max rel. error " + fmt("%.2e", worst_seed) + " (tol 1e-8)"};
}

Verdict ac6() {
  Rng rng(606);
  double worst_kde = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t d = 1 + rng.below(3);
    const Matrix samples = oracle::random_batch(2 + rng.below(10), d, rng);
    const double b = rng.uniform(0.3, 2.0);
    const KdeModel model(samples, b);
    const Matrix q = oracle::random_batch(1, d, rng);
    const std::span<const double> x(q.data(), d);
    worst_kde = std::max(worst_kde, oracle::relative_error(kde_log_density(model, x), oracle::kde_naive(samples, b, x), 0.0));
  }
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(19);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(8)) / 4.0;
      l[i] = static_cast<int>(rng.below(2));
    }
    l[0] = 0;
    l[1] = 1;
    rng.shuffle(l.begin(), l.end());
    if (auroc(s, l) != oracle::auroc_pairs(s, l)) ++mismatches;
  }
  return {worst_kde <= 1e-12 && mismatches == 0,
          "KDE max rel. error " + fmt("%.2e", worst_kde) + " on 10 instances (tol 1e-12); AUROC mismatches " +
              std::to_string(mismatches) + "/100"};
}

Verdict ac7() {
  // Constant critic: zero every parameter so the head input is 0 and f = 1 + eps.
  Rng init(7);
  MlpNetwork net(2, {16, 16}, 1e-20, 0.0, init);
  for (auto& l : net.layers()) {
    l.weights().setZero();
    l.bias().setZero();
  }
  Rng u(8);
  const Matrix xd = oracle::random_batch(32, 2, u, 0.0, 1.0);
  const Matrix xu = oracle::random_batch(64, 2, u, 0.0, 1.0);
  const auto fd = net.evaluate(xd);
  const auto fu = net.evaluate(xu);
  const double c = fu.front();
  const double zero = dv_loss(fd, fu, c, ObjectiveVariant::log_ema).total;

  Rng data_rng = Rng::stream(7, "data");
  const auto data = sample_uniform(Domain::unit_box(2), 2048, data_rng);
  const auto cfg = paper_config(7);
  const auto result =
      train(data, Domain::unit_box(2), cfg, [&](const EpochRecord& e) { log_progress("uniform", e, cfg.epochs); });
  const double obj = result.history.back().objective;
  return {std::abs(zero) <= 1e-12 && std::abs(obj) <= 0.1,
          "constant critic objective " + fmt("%.2e", zero) + " (tol 1e-12); uniform-on-uniform final objective " +
              fmt("%.4f", obj) + " (target 0 +/- 0.1)"};
}

constexpr double kMoonsNoise = 0.02;

Verdict ac8() {
  std::vector<double> aurocs;
  bool all = true;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    // Inliers for training and testing come from one normalised draw so they
    // share the affine map into the unit box.
    Rng data_rng = Rng::stream(seed, "data");
    const Dataset moons = gen_two_moons(2048 + 1000, kMoonsNoise, data_rng);
    std::vector<std::size_t> train_idx(2048), test_idx(1000);
    for (std::size_t i = 0; i < 2048; ++i) train_idx[i] = i;
    for (std::size_t i = 0; i < 1000; ++i) test_idx[i] = 2048 + i;
    const Dataset train_set = select_rows(moons, train_idx);
    const Dataset inliers = select_rows(moons, test_idx);
    Rng out_rng = Rng::stream(seed, "outliers");
    const Dataset outliers = sample_uniform(Domain::unit_box(2), 1000, out_rng);

    const auto cfg = paper_config(seed);
    const auto result = train(train_set, Domain::unit_box(2), cfg, [&](const EpochRecord& e) {
      log_progress("moons seed " + std::to_string(seed), e, cfg.epochs);
    });

    Matrix all_points(2000, 2);
    all_points << inliers.points, outliers.points;
    std::vector<int> labels(2000, 0);
    std::fill(labels.begin() + 1000, labels.end(), 1);
    const double a = auroc(anomaly_scores(result.model, all_points), labels);
    aurocs.push_back(a);
    all = all && a > 0.95;
  }
  std::string per;
  for (double a : aurocs) per += " " + fmt("%.4f", a);
  return {all, "AUROC per seed" + per + " (each > 0.95), noise " + fmt("%g", kMoonsNoise)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DDDE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict ac9() {
  const fs::path dir = fs::temp_directory_path() / "ddde_acceptance_ac9";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto p = [&](const char* name) { return (dir / name).string(); };
  write_file_atomic(p("run.json"), R"({"seed": 11, "generator": {"name": "mixture9", "n": 1024},
    "hidden": [64, 64, 64], "epochs": 10, "dropout_p": 0.1,
    "output": {"checkpoint": ")" + p("model.ddde") + R"(", "history": ")" + p("history.csv") + R"("}})");
  const int c1 = run_cli("train --quiet --config " + p("run.json"));
  const std::string ckpt1 = c1 == 0 ? read_file(p("model.ddde")) : "";
  const std::string hist1 = c1 == 0 ? read_file(p("history.csv")) : "";
  const int c2 = run_cli("train --quiet --config " + p("run.json"));
  const std::string ckpt2 = c2 == 0 ? read_file(p("model.ddde")) : "";
  const std::string hist2 = c2 == 0 ? read_file(p("history.csv")) : "";
  const bool ok = c1 == 0 && c2 == 0 && !ckpt1.empty() && ckpt1 == ckpt2 && hist1 == hist2;
  return {ok, "two CLI runs: exit codes " + std::to_string(c1) + "/" + std::to_string(c2) + ", checkpoint " +
                  std::to_string(ckpt1.size()) + " bytes " + (ckpt1 == ckpt2 ? "identical" : "DIFFERENT") +
                  ", history " + (hist1 == hist2 ? "identical" : "DIFFERENT")};
}

Verdict ac10() {
  const Dataset ones = load_idx(std::string(DDDE_TEST_DATA) + "/mnist-1-8-images.idx3-ubyte",
                                std::string(DDDE_TEST_DATA) + "/mnist-1-8-labels.idx1-ubyte", 1);
  const std::size_t n_train = 400;
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < ones.size(); ++i) (i < n_train ? train_idx : test_idx).push_back(i);
  const Dataset train_set = select_rows(ones, train_idx);
  const Dataset test_set = select_rows(ones, test_idx);
  Matrix rotated(test_set.points.rows(), test_set.points.cols());
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const auto r = rotate_image(test_set.row(i), 90.0);
    rotated.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(r.data(), 784);
  }

  const Domain box = Domain::unit_box(784);
  bool all = true;
  std::string per;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto cfg = paper_config(seed);
    cfg.epochs = 50;
    const auto result = train(train_set, box, cfg, [&](const EpochRecord& e) {
      log_progress("mnist seed " + std::to_string(seed), e, cfg.epochs);
    });
    const double upright = mean(result.model.log_density(test_set.points));
    const double turned = mean(result.model.log_density(rotated));
    all = all && upright > turned;
    per += " [" + fmt("%.2f", upright) + " vs " + fmt("%.2f", turned) + "]";
  }
  return {all, std::to_string(n_train) + " training 1's, " + std::to_string(test_set.size()) +
                   " test 1's; mean log-density upright vs rotated 90 deg per seed" + per};
}

Verdict dv_bound_property() {
  // The full-data DV bound of a converged critic stays below the analytic KL.
  std::string per;
  bool all = true;
  Rng u = Rng::stream(0, "uniform-eval");
  const Matrix uniform = sample_uniform(Domain::unit_box(2), 100000, u).points;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double bound = 0.0;
    if (seed == 1) {
      const auto& run = gaussian_run();
      bound = dv_bound(run.result.model, run.data.points, uniform);
    } else {
      Rng rng = Rng::stream(seed, "data");
      const std::vector<double> mean{0.5, 0.5};
      const Dataset data = gen_gaussian(2048, mean, 0.1, rng);
      const auto cfg = paper_config(seed);
      const auto result = train(data, Domain::unit_box(2), cfg, [&](const EpochRecord& e) {
        log_progress("gaussian seed " + std::to_string(seed), e, cfg.epochs);
      });
      bound = dv_bound(result.model, data.points, uniform);
    }
    all = all && bound <= kGaussianKl + 0.1;
    per += " " + fmt("%.4f", bound);
  }
  return {all, "full-data DV bound per seed" + per + " (each <= " + fmt("%.4f", kGaussianKl) + " + 0.1)"};
}

} // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"AC1", ac1}, {"AC3", ac3}, {"AC4", ac4}, {"DVB", dv_bound_property},
      {"AC5", ac5}, {"AC6", ac6}, {"AC7", ac7}, {"AC9", ac9},
      {"AC2", ac2}, {"AC8", ac8}, {"AC10", ac10}};
  std::set<std::string> only(argv + 1, argv + argc);

  std::map<std::string, Verdict> results;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s  %s  (%.0f s)\n", id.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    results[id] = v;
  }
  const bool ok = std::all_of(results.begin(), results.end(), [](const auto& kv) { return kv.second.pass; });
  std::printf("%s: %zu criteria checked\n", ok ? "ALL PASS" : "SOME FAILED", results.size());
  return ok ? 0 : 1;
}

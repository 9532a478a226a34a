#include "crpsreg/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "crpsreg/error.hpp"
#include "crpsreg/experiments.hpp"
#include "crpsreg/regressors.hpp"
#include "crpsreg/scoring.hpp"
#include "crpsreg/textio.hpp"
#include "experiment_config.hpp"
#include "manifest.hpp"

namespace crpsreg::cli {
namespace {

using textio::format_real;
namespace fs = std::filesystem;

constexpr std::uint64_t kBootstrapStream = 0xb007;

struct Global {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<unsigned> threads;

  std::uint64_t seed_or_zero() const { return seed.value_or(0); }
  unsigned thread_count() const {
    if (threads) return *threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
  }
};

fs::path output_dir(const Global& g) {
  fs::path dir(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + g.out);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os || !(os << text)) throw Error("cannot write " + path.string());
}

// score ---------------------------------------------------------------------

struct ScoreOptions {
  std::string forecast_file, obs_file;
  std::optional<double> threshold;
};

CDF parse_forecast(const textio::Row& row) {
  if (row.fields.front() == "gpd") {
    if (row.fields.size() != 3)
      throw Error("line " + std::to_string(row.line) + ": expected gpd,xi,sigma");
    const GPDParams p{textio::parse_real(row.fields[1], row.line),
                      textio::parse_real(row.fields[2], row.line)};
    try {
      validate(p);
      require_finite_mean(p);
    } catch (const Error& e) {
      throw Error("line " + std::to_string(row.line) + ": " + e.what());
    }
    return p;
  }
  std::vector<double> members;
  members.reserve(row.fields.size());
  for (const auto& f : row.fields) members.push_back(textio::parse_real(f, row.line));
  return StepCDF::from_sample(members);
}

int cmd_score(const ScoreOptions& opt, const Global& g, std::ostream& out) {
  RunManifest manifest("score");
  const std::string fc_text = textio::read_file(opt.forecast_file);
  const std::string obs_text = textio::read_file(opt.obs_file);
  manifest.add_input("forecast", fc_text);
  manifest.add_input("observations", obs_text);
  manifest.set_config("forecast_file", opt.forecast_file);
  manifest.set_config("obs_file", opt.obs_file);
  if (opt.threshold) manifest.set_config("threshold", *opt.threshold);
  manifest.set_seed(g.seed_or_zero());
  manifest.set_threads(1);

  std::istringstream fc_in(fc_text), obs_in(obs_text);
  const auto fc_rows = textio::read_rows(fc_in);
  const auto obs_rows = textio::read_rows(obs_in);
  if (fc_rows.size() != obs_rows.size())
    throw Error("row-count mismatch: " + std::to_string(fc_rows.size()) + " forecasts, " +
                std::to_string(obs_rows.size()) + " observations");
  if (fc_rows.empty()) throw Error("no forecast rows");

  const fs::path dir = output_dir(g);
  const std::optional<WeightFn> weight =
      opt.threshold ? std::optional(WeightFn::threshold(*opt.threshold)) : std::nullopt;
  std::vector<double> scores(fc_rows.size()), weighted(weight ? fc_rows.size() : 0);
  std::string table = weight ? "row,crps,wcrps\n" : "row,crps\n";
  for (std::size_t i = 0; i < fc_rows.size(); ++i) {
    if (obs_rows[i].fields.size() != 1)
      throw Error("line " + std::to_string(obs_rows[i].line) + ": expected one observation");
    const double y = textio::parse_real(obs_rows[i].fields[0], obs_rows[i].line);
    const CDF f = parse_forecast(fc_rows[i]);
    scores[i] = crps(f, y);
    table += std::to_string(i + 1) + ',' + format_real(scores[i]);
    if (weight) {
      weighted[i] = wcrps(f, y, *weight);
      table += ',' + format_real(weighted[i]);
    }
    table += '\n';
  }

  const auto mean_se = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = pairwise_sum(v) / n;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
    const double se = v.size() > 1 ? std::sqrt(pairwise_sum(sq) / (n - 1.0) / n) : 0.0;
    return std::pair{mean, se};
  };
  const auto [mean, se] = mean_se(scores);
  std::string summary = "mean," + format_real(mean);
  std::string se_line = "se," + format_real(se);
  if (weight) {
    const auto [wmean, wse] = mean_se(weighted);
    summary += ',' + format_real(wmean);
    se_line += ',' + format_real(wse);
  }
  table += summary + '\n' + se_line + '\n';

  write_text(dir / "scores.csv", table);
  manifest.set_result("rows", fc_rows.size());
  manifest.set_result("mean_crps", mean);
  manifest.write(dir);
  out << summary << '\n' << se_line << '\n';
  return kExitOk;
}

// predict -------------------------------------------------------------------

struct PredictOptions {
  std::string train_file, query_file;
  std::string method = "knn";
  std::optional<std::size_t> k;
  std::optional<double> bandwidth;
  bool autotune = false;
  double class_h = 1.0, class_C = 1.0, class_M = 1.0;
};

int cmd_predict(const PredictOptions& opt, const Global& g, std::ostream& out) {
  RunManifest manifest("predict");
  const std::string train_text = textio::read_file(opt.train_file);
  const std::string query_text = textio::read_file(opt.query_file);
  manifest.add_input("train", train_text);
  manifest.add_input("query", query_text);
  manifest.set_config("train_file", opt.train_file);
  manifest.set_config("query_file", opt.query_file);
  manifest.set_config("method", opt.method);
  if (opt.k) manifest.set_config("k", *opt.k);
  if (opt.bandwidth) manifest.set_config("bandwidth", *opt.bandwidth);
  manifest.set_config("auto", opt.autotune);
  if (opt.autotune) {
    manifest.set_config("class_h", opt.class_h);
    manifest.set_config("class_C", opt.class_C);
    manifest.set_config("class_M", opt.class_M);
  }
  const std::uint64_t seed = g.seed_or_zero();
  manifest.set_seed(seed);
  manifest.set_threads(1);

  const bool knn = opt.method == "knn";
  if (!knn && opt.method != "kernel") throw Error("--method must be knn or kernel");
  const int choices = (opt.k ? 1 : 0) + (opt.bandwidth ? 1 : 0) + (opt.autotune ? 1 : 0);
  if (choices != 1 || (knn && opt.bandwidth) || (!knn && opt.k))
    throw Error(knn ? "knn needs exactly one of --k or --auto"
                    : "kernel needs exactly one of --bandwidth or --auto");

  std::istringstream train_in(train_text), query_in(query_text);
  const auto train_rows = textio::read_rows(train_in);
  if (train_rows.empty()) throw Error("empty training set");
  const std::size_t width = train_rows.front().fields.size();
  if (width < 2) throw Error("line " + std::to_string(train_rows.front().line) +
                             ": training rows need covariates and an outcome");
  const std::size_t d = width - 1;
  std::vector<double> xs, ys;
  for (const auto& row : train_rows) {
    if (row.fields.size() != width)
      throw Error("line " + std::to_string(row.line) + ": expected " + std::to_string(width) + " fields");
    for (std::size_t j = 0; j < d; ++j) xs.push_back(textio::parse_real(row.fields[j], row.line));
    ys.push_back(textio::parse_real(row.fields[d], row.line));
  }
  const TrainingSet data(d, std::move(xs), std::move(ys));

  std::size_t k = opt.k.value_or(0);
  double bandwidth = opt.bandwidth.value_or(0.0);
  if (opt.autotune) {
    const ClassParams cp{opt.class_h, opt.class_C, opt.class_M, d};
    validate(cp);
    if (knn) {
      k = optimal_k(data.size(), cp);
      manifest.set_result("k", k);
    } else {
      bandwidth = optimal_bandwidth(data.size(), cp);
      manifest.set_result("bandwidth", bandwidth);
    }
  }
  if (knn && k > data.size()) throw Error("k exceeds sample size");
  const std::optional<NeighborSearch> search = knn ? std::optional<NeighborSearch>(data) : std::nullopt;

  std::string lines;
  std::size_t index = 0;
  for (const auto& row : textio::read_rows(query_in)) {
    std::vector<double> x;
    for (const auto& f : row.fields) x.push_back(textio::parse_real(f, row.line));
    try {
      require_in_unit_cube(x, d);
    } catch (const Error& e) {
      throw Error("line " + std::to_string(row.line) + ": " + e.what());
    }
    const StepCDF f = knn ? knn_predict(*search, data, x, {k, derive_seed(seed, {index})})
                          : kernel_predict(data, x, {bandwidth});
    for (std::size_t j = 0; j < f.size(); ++j) {
      if (j) lines += ' ';
      lines += format_real(f.support()[j]) + ':' + format_real(f.mass(j));
    }
    lines += '\n';
    ++index;
  }

  const fs::path dir = output_dir(g);
  write_text(dir / "predictions.txt", lines);
  manifest.set_result("queries", index);
  manifest.write(dir);
  out << lines;
  return kExitOk;
}

// experiment ----------------------------------------------------------------

int cmd_experiment(const std::string& config_file, const Global& g, std::ostream& out) {
  RunManifest manifest("experiment");
  const std::string text = textio::read_file(config_file);
  manifest.add_input("config", text);
  ExperimentFile file = parse_experiment_config(text);
  ExperimentConfig& cfg = file.config;
  cfg.master_seed = g.seed ? *g.seed : file.seed.value_or(0);
  cfg.threads = g.thread_count();
  manifest.set_config("config_file", config_file);
  manifest.set_config("settings", file.echo);
  manifest.set_config("model", cfg.model.describe());
  manifest.set_seed(cfg.master_seed);
  manifest.set_threads(cfg.threads);

  const std::vector<RiskEstimate> estimates = run_sweep(cfg);

  std::string results = "n,replication,excess_risk\n";
  std::string summary = "n,mean,se,bound\n";
  nlohmann::json tuning = nlohmann::json::object();
  for (const RiskEstimate& e : estimates) {
    for (std::size_t r = 0; r < e.replications.size(); ++r)
      results += std::to_string(e.n) + ',' + std::to_string(r) + ',' + format_real(e.replications[r]) + '\n';
    summary += std::to_string(e.n) + ',' + format_real(e.mean) + ',' + format_real(e.standard_error) +
               ',' + format_real(e.bound) + '\n';
    tuning[std::to_string(e.n)] = e.tuning;
  }

  const RateFit fit =
      fit_rate(estimates, derive_seed(cfg.master_seed, {kBootstrapStream}), file.bootstrap_draws);
  const double target = target_slope(cfg);
  const bool pass = std::abs(fit.slope - target) <= file.slope_tolerance;
  std::string ratefit = "slope=" + format_real(fit.slope) + '\n';
  if (fit.slope_se) ratefit += "slope_se=" + format_real(*fit.slope_se) + '\n';
  else ratefit += "# slope_se omitted: bootstrap needs at least two replications\n";
  ratefit += "intercept=" + format_real(fit.intercept) + '\n';
  ratefit += "r_squared=" + format_real(fit.r_squared) + '\n';
  ratefit += "target_slope=" + format_real(target) + '\n';
  ratefit += "tolerance=" + format_real(file.slope_tolerance) + '\n';
  ratefit += std::string("verdict=") + (pass ? "PASS" : "FAIL") + '\n';

  const fs::path dir = output_dir(g);
  write_text(dir / "results.csv", results);
  write_text(dir / "summary.csv", summary);
  write_text(dir / "ratefit.txt", ratefit);
  manifest.set_result(to_string(cfg.method) == "knn" ? "k" : "bandwidth", tuning);
  manifest.set_result("slope", fit.slope);
  manifest.set_result("verdict", pass ? "PASS" : "FAIL");
  manifest.write(dir);
  out << summary << ratefit;
  return kExitOk;
}

// bounds --------------------------------------------------------------------

struct BoundsOptions {
  std::size_t n = 0;
  std::size_t dim = 1;
  std::optional<std::size_t> k;
  std::optional<double> bandwidth;
  double class_h = 1.0, class_C = 1.0, class_M = 1.0;
};

int cmd_bounds(const BoundsOptions& opt, const Global& g, std::ostream& out) {
  RunManifest manifest("bounds");
  manifest.set_config("n", opt.n);
  manifest.set_config("dim", opt.dim);
  if (opt.k) manifest.set_config("k", *opt.k);
  if (opt.bandwidth) manifest.set_config("bandwidth", *opt.bandwidth);
  manifest.set_config("class_h", opt.class_h);
  manifest.set_config("class_C", opt.class_C);
  manifest.set_config("class_M", opt.class_M);
  manifest.set_seed(g.seed_or_zero());
  manifest.set_threads(1);

  const ClassParams cp{opt.class_h, opt.class_C, opt.class_M, opt.dim};
  validate(cp);
  if (opt.n < 1) throw Error("--n must be at least 1");
  const int d = static_cast<int>(opt.dim);

  std::vector<std::pair<std::string, double>> rows;
  rows.emplace_back("unit_ball_volume", unit_ball_volume(d));
  if (d >= 2) rows.emplace_back("c_d", knn_constant_cd(d));
  rows.emplace_back("c_tilde_d", kernel_constant(d));
  if (opt.k) rows.emplace_back("upper_bound_knn", upper_bound_knn(opt.n, *opt.k, cp));
  rows.emplace_back("optimal_k_real", optimal_k_real(opt.n, cp));
  rows.emplace_back("optimal_k", static_cast<double>(optimal_k(opt.n, cp)));
  rows.emplace_back("knn_rate_exponent", knn_rate_exponent(cp));
  rows.emplace_back("knn_rate_constant", knn_rate_constant(cp));
  if (opt.bandwidth) rows.emplace_back("upper_bound_kernel", upper_bound_kernel(opt.n, *opt.bandwidth, cp));
  rows.emplace_back("optimal_bandwidth", optimal_bandwidth(opt.n, cp));
  rows.emplace_back("kernel_bound_argmin", kernel_bound_argmin(opt.n, cp));
  rows.emplace_back("kernel_rate_exponent", minimax_rate_exponent(cp));
  rows.emplace_back("kernel_rate_constant", kernel_rate_constant(opt.n, cp));

  std::string table = "name,value\n";
  for (const auto& [name, v] : rows) {
    table += name + ',' + format_real(v) + '\n';
    manifest.set_result(name, v);
  }
  const fs::path dir = output_dir(g);
  write_text(dir / "bounds.csv", table);
  manifest.write(dir);
  out << table;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"CRPS scoring and nonparametric distributional regression"};
  app.name("crpsreg");
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--seed", g.seed, "Master seed (u64)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for experiment")->check(CLI::PositiveNumber);
  app.set_version_flag("--version", CRPSREG_VERSION);

  ScoreOptions score;
  auto* score_cmd = app.add_subcommand("score", "CRPS of forecasts against observations");
  score_cmd->add_option("forecast_file", score.forecast_file)->required();
  score_cmd->add_option("obs_file", score.obs_file)->required();
  score_cmd->add_option("--threshold", score.threshold, "Also report threshold-weighted CRPS");

  PredictOptions predict;
  auto* predict_cmd = app.add_subcommand("predict", "Conditional CDF estimates at query points");
  predict_cmd->add_option("train_file", predict.train_file)->required();
  predict_cmd->add_option("query_file", predict.query_file)->required();
  predict_cmd->add_option("--method", predict.method)->check(CLI::IsMember({"knn", "kernel"}));
  predict_cmd->add_option("--k", predict.k)->check(CLI::PositiveNumber);
  predict_cmd->add_option("--bandwidth", predict.bandwidth)->check(CLI::PositiveNumber);
  predict_cmd->add_flag("--auto", predict.autotune, "Class-optimal k or bandwidth");
  predict_cmd->add_option("--class-h", predict.class_h);
  predict_cmd->add_option("--class-C", predict.class_C);
  predict_cmd->add_option("--class-M", predict.class_M);

  std::string config_file;
  auto* experiment_cmd = app.add_subcommand("experiment", "Monte Carlo excess-risk sweep");
  experiment_cmd->add_option("config_file", config_file)->required();

  BoundsOptions bounds;
  auto* bounds_cmd = app.add_subcommand("bounds", "Risk bounds and tuning constants");
  bounds_cmd->add_option("--n", bounds.n)->required();
  bounds_cmd->add_option("--dim", bounds.dim)->capture_default_str();
  bounds_cmd->add_option("--k", bounds.k);
  bounds_cmd->add_option("--bandwidth", bounds.bandwidth);
  bounds_cmd->add_option("--class-h", bounds.class_h)->capture_default_str();
  bounds_cmd->add_option("--class-C", bounds.class_C)->capture_default_str();
  bounds_cmd->add_option("--class-M", bounds.class_M)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*score_cmd) return cmd_score(score, g, out);
    if (*predict_cmd) return cmd_predict(predict, g, out);
    if (*experiment_cmd) return cmd_experiment(config_file, g, out);
    return cmd_bounds(bounds, g, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace crpsreg::cli

// locpoly: local polynomial estimation of vector-valued functions and their
// derivatives, robust median-of-splits aggregation, and convergence studies.
//
// Exit codes: 0 success, 2 usage/validation, 3 data error,
//             4 numerical degeneracy, 5 aggregation failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "locpoly/locpoly.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace locpoly;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitAggregation = 5;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::OperatorOrderTooHigh:
    case ErrorCode::SpecInvalid: return kExitUsage;
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
    case ErrorCode::TooFewSamples: return kExitData;
    case ErrorCode::ZeroScale:
    case ErrorCode::InsufficientSamples:
    case ErrorCode::RankDeficient:
    case ErrorCode::TooFewPoints:
    case ErrorCode::NoData: return kExitNumerical;
    case ErrorCode::NoMajorityBall: return kExitAggregation;
  }
  return kExitUsage;
}

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorCode::SpecInvalid, message); }

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    invalid("'" + path + "' is not valid JSON: " + e.what());
  }
}

template <typename T>
T json_get(const json& j, const char* key, const T& fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(std::string("config key '") + key + "' has the wrong type");
  }
}

void write_json(const json& doc, const std::string& output) {
  const std::string text = doc.dump(2) + "\n";
  if (output.empty() || output == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(output, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + output + "' for writing");
  out << text;
}

std::vector<double> json_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

DifferentialOperator operator_from_json(const json& spec, int d) {
  if (spec.is_string()) {
    const auto text = spec.get<std::string>();
    if (!text.empty() && text.front() == '[') return operator_from_json(json::parse(text), d);
    return parse_operator(text, d);
  }
  if (!spec.is_array() || spec.empty()) invalid("operator must be a name or a non-empty list of {alpha, coeff}");
  std::vector<OperatorTerm> terms;
  for (const auto& t : spec) {
    if (!t.contains("alpha")) invalid("operator term is missing 'alpha'");
    auto alpha = t.at("alpha").get<std::vector<int>>();
    if (static_cast<int>(alpha.size()) != d)
      invalid("operator alpha has " + std::to_string(alpha.size()) + " entries but the data has d = " + std::to_string(d));
    terms.push_back({MultiIndex(std::move(alpha)), json_get<double>(t, "coeff", 1.0)});
  }
  return DifferentialOperator(std::move(terms));
}

std::string describe_operator(const DifferentialOperator& op) {
  if (op.terms().size() == 1 && op.terms()[0].coefficient == 1.0) return operator_name(op.terms()[0].alpha);
  json terms = json::array();
  for (const auto& t : op.terms()) terms.push_back({{"alpha", t.alpha.exponents()}, {"coeff", t.coefficient}});
  return terms.dump();
}

std::vector<double> parse_center(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_double(item, "--center"));
  return out;
}

// ---------------------------------------------------------------------------
// fit / robust

struct FitOptions {
  std::string dataset;
  std::string config;
  std::string op = "identity";
  int k = 2;
  double bandwidth_constant = 1.0;
  double rtol = -1.0;
  double min_condition_warn = 1e10;
  std::string center;
  std::string output;
  // robust only
  double failure_prob = 0.1;
  double eps0 = 0.4;
  double radius = 0.0;
  std::uint64_t seed = 0;
};

void add_fit_options(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("dataset", o.dataset, "CSV dataset with header x1..xd,y1..yD")->required()->check(CLI::ExistingFile);
  cmd->add_option("--config", o.config, "JSON config; explicit flags override its values")->check(CLI::ExistingFile);
  cmd->add_option("--operator", o.op, "identity, d<j>, d<j>d<l>..., or a JSON list of {alpha, coeff}");
  cmd->add_option("--k", o.k, "smoothness k (fit degree k-1)")->check(CLI::Range(1, 32));
  cmd->add_option("--bandwidth-constant,-b", o.bandwidth_constant, "b in eps_n = b n^(-1/(2k+d))")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--rtol", o.rtol, "relative singular-value cutoff for rank detection")->check(CLI::NonNegativeNumber);
  cmd->add_option("--min-condition-warn", o.min_condition_warn, "flag fits above this condition number")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--center", o.center, "comma-separated target point; x is translated by -center");
  cmd->add_option("--output,-o", o.output, "write the JSON report here instead of stdout");
}

void add_robust_options(CLI::App* cmd, FitOptions& o) {
  const auto open_unit = CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0.0;
        try {
          v = std::stod(s);
        } catch (...) {
          return "must be a number";
        }
        return v > 0.0 && v < 1.0 ? "" : "must lie strictly between 0 and 1";
      },
      "(0,1)");
  const auto open_half = CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0.0;
        try {
          v = std::stod(s);
        } catch (...) {
          return "must be a number";
        }
        return v > 0.0 && v < 0.5 ? "" : "must lie strictly between 0 and 0.5";
      },
      "(0,0.5)");
  cmd->add_option("--failure-prob", o.failure_prob, "target failure probability eps")->check(open_unit);
  cmd->add_option("--eps0", o.eps0, "per-split failure probability eps0")->check(open_half);
  cmd->add_option("--radius", o.radius, "fixed ball radius (default: adaptive radius)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "seed for the random split");
}

/// Fills options not given on the command line from the JSON config.
void merge_config(CLI::App* cmd, FitOptions& o, bool robust) {
  if (o.config.empty()) return;
  const json cfg = load_json(o.config);
  auto unset = [&](const char* flag) { return cmd->count(flag) == 0; };
  if (unset("--operator") && cfg.contains("operator"))
    o.op = cfg.at("operator").is_string() ? cfg.at("operator").get<std::string>() : cfg.at("operator").dump();
  if (unset("--k")) o.k = json_get<int>(cfg, "k", o.k);
  if (unset("--bandwidth-constant")) o.bandwidth_constant = json_get<double>(cfg, "bandwidth_constant", o.bandwidth_constant);
  if (unset("--rtol")) o.rtol = json_get<double>(cfg, "rtol", o.rtol);
  if (unset("--min-condition-warn")) o.min_condition_warn = json_get<double>(cfg, "min_condition_warn", o.min_condition_warn);
  if (unset("--center") && cfg.contains("center")) {
    std::string joined;
    for (double c : cfg.at("center").get<std::vector<double>>()) joined += (joined.empty() ? "" : ",") + format_double(c);
    o.center = joined;
  }
  if (robust) {
    if (unset("--failure-prob")) o.failure_prob = json_get<double>(cfg, "failure_prob", o.failure_prob);
    if (unset("--eps0")) o.eps0 = json_get<double>(cfg, "eps0", o.eps0);
    if (unset("--radius")) o.radius = json_get<double>(cfg, "radius", o.radius);
    if (unset("--seed")) o.seed = json_get<std::uint64_t>(cfg, "seed", o.seed);
  }
  // Config values get the same range checks as flags.
  if (o.k < 1) invalid("k must be >= 1 (got " + std::to_string(o.k) + ")");
  if (!(o.bandwidth_constant > 0.0)) invalid("bandwidth_constant must be > 0");
  if (robust && !(o.failure_prob > 0.0 && o.failure_prob < 1.0)) invalid("failure_prob must lie in (0, 1)");
  if (robust && !(o.eps0 > 0.0 && o.eps0 < 0.5)) invalid("eps0 must lie in (0, 0.5)");
  if (robust && o.radius < 0.0) invalid("radius must be > 0");
}

struct Prepared {
  Dataset data;
  DifferentialOperator op;
  EstimatorConfig config;
};

Prepared prepare(const FitOptions& o) {
  Dataset data = read_dataset_csv(o.dataset);
  if (!o.center.empty()) {
    const auto c = parse_center(o.center);
    if (static_cast<Eigen::Index>(c.size()) != data.d())
      invalid("--center has " + std::to_string(c.size()) + " coordinates, data has d = " + std::to_string(data.d()));
    data = data.translated(Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())));
  }
  DifferentialOperator op;
  try {
    op = operator_from_json(json(o.op), static_cast<int>(data.d()));
  } catch (const json::exception& e) {
    invalid(std::string("cannot parse --operator: ") + e.what());
  }
  EstimatorConfig config;
  config.smoothness = o.k;
  config.bandwidth_constant = o.bandwidth_constant;
  config.min_condition_warn = o.min_condition_warn;
  if (o.rtol >= 0.0) config.rank_rtol = o.rtol;
  config.validate();
  check_operator_fits(op, config, data.d());
  return {std::move(data), std::move(op), config};
}

json base_report(const char* command, const Prepared& p, const FitOptions& o) {
  return json{{"schema", 1},
              {"command", command},
              {"status", "ok"},
              {"operator", describe_operator(p.op)},
              {"k", o.k},
              {"bandwidth_constant", o.bandwidth_constant},
              {"n", p.data.n()},
              {"d", p.data.d()},
              {"D", p.data.D()}};
}

int cmd_fit(const FitOptions& o) {
  const Prepared p = prepare(o);
  const double eps = bandwidth(p.data.n(), o.k, static_cast<int>(p.data.d()), o.bandwidth_constant);
  const auto r = estimate(p.data, p.op, p.config, eps);
  json report = base_report("fit", p, o);
  report["value"] = json_vector(r.value);
  report["N_n"] = r.neighborhood.count();
  report["delta_n"] = r.neighborhood.delta;
  report["epsilon_n"] = eps;
  report["condition_number"] = r.condition_number;
  report["rank_ok"] = r.rank_ok;
  write_json(report, o.output);
  return kExitOk;
}

int cmd_robust(const FitOptions& o) {
  const Prepared p = prepare(o);
  AggregationConfig agg;
  agg.target_failure = o.failure_prob;
  agg.epsilon_zero = o.eps0;
  if (o.radius > 0.0) {
    agg.mode = RadiusMode::Fixed;
    agg.radius = o.radius;
  }
  const auto r = estimate_robust(p.data, p.op, p.config, agg, o.seed);
  json report = base_report("robust", p, o);
  report["value"] = json_vector(r.result.value);
  report["nu"] = r.splits;
  report["failure_prob"] = o.failure_prob;
  report["eps0"] = o.eps0;
  report["mode"] = r.mode == RadiusMode::Fixed ? "fixed" : "adaptive";
  report["chosen_split"] = r.choice.index;
  report["ball_radius"] = r.choice.radius;
  report["covered"] = r.choice.covered;
  report["N_n"] = r.result.neighborhood.count();
  report["delta_n"] = r.result.neighborhood.delta;
  report["epsilon_n"] = r.result.neighborhood.epsilon;
  report["condition_number"] = r.result.condition_number;
  report["rank_ok"] = r.result.rank_ok;
  json splits = json::array();
  for (const auto& s : r.per_split.diagnostics)
    splits.push_back({{"N_n", s.neighborhood.count()},
                      {"delta_n", s.neighborhood.delta},
                      {"epsilon_n", s.neighborhood.epsilon},
                      {"condition_number", s.condition_number},
                      {"rank_ok", s.rank_ok}});
  report["splits"] = std::move(splits);
  write_json(report, o.output);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// generate

NoiseModel noise_from_json(const json& j) {
  NoiseModel noise;
  if (j.is_null()) return noise;
  try {
    noise.kind = parse_noise_kind(json_get<std::string>(j, "kind", "sphere"));
  } catch (const Error& e) {
    invalid(e.what());
  }
  noise.sigma = json_get<double>(j, "sigma", 0.0);
  if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma)) invalid("noise sigma must be finite and >= 0");
  return noise;
}

struct GenerateOptions {
  std::string spec;
  std::string output;
  std::string truth;
};

int cmd_generate(const GenerateOptions& o) {
  const json spec = load_json(o.spec);
  ExperimentFunctionSpec fs_spec;
  fs_spec.d = json_get<int>(spec, "d", 1);
  fs_spec.D = json_get<int>(spec, "D", 1);
  fs_spec.degree = json_get<int>(spec, "degree", 2);
  fs_spec.coefficient_bound = json_get<double>(spec, "coefficient_bound", 1.0);
  const auto seed = json_get<std::uint64_t>(spec, "seed", 0);
  fs_spec.seed = derive_seed(seed, {0xF0});
  const auto n = json_get<long long>(spec, "n", 1000);
  const double half_width = json_get<double>(spec, "half_width", 1.0);
  const NoiseModel noise = noise_from_json(spec.value("noise", json()));
  if (fs_spec.d < 1 || fs_spec.D < 1) invalid("d and D must be >= 1");
  if (fs_spec.degree < 0) invalid("degree must be >= 0");
  if (n < 1) invalid("n must be >= 1");
  if (!(half_width > 0.0)) invalid("half_width must be > 0");
  if (!(fs_spec.coefficient_bound >= 0.0)) invalid("coefficient_bound must be >= 0");

  PolynomialFunction poly = gen_random_polynomial(fs_spec);
  if (spec.contains("coefficients")) {
    // Explicit coefficients: one list per output coordinate, basis in graded order.
    const auto rows = json_get<std::vector<std::vector<double>>>(spec, "coefficients", {});
    if (static_cast<int>(rows.size()) != fs_spec.D) invalid("coefficients must hold one list per output coordinate");
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j].size() != poly.basis.size())
        invalid("each coefficient list needs " + std::to_string(poly.basis.size()) + " entries");
      for (std::size_t a = 0; a < rows[j].size(); ++a)
        poly.coefficients(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) = rows[j][a];
    }
  }
  const VectorFunction f = poly.as_function();
  const Dataset data = make_dataset(f, n, noise, half_width, derive_seed(seed, {0xDA}));

  const fs::path out_path(o.output);
  fs::path truth_path = o.truth.empty() ? fs::path(out_path).replace_extension(".truth.json") : fs::path(o.truth);
  write_dataset_csv(out_path, data);

  json truth = json::object();
  json basis = json::array();
  for (const auto& alpha : poly.basis) {
    basis.push_back(alpha.exponents());
    truth[operator_name(alpha)] = json_vector(f.truth(DifferentialOperator::partial(alpha)));
  }
  json coefficients = json::array();
  for (Eigen::Index j = 0; j < poly.coefficients.cols(); ++j) coefficients.push_back(json_vector(poly.coefficients.col(j)));
  json sidecar{{"schema", 1},
               {"d", fs_spec.d},
               {"D", fs_spec.D},
               {"degree", fs_spec.degree},
               {"n", n},
               {"seed", seed},
               {"noise", {{"kind", noise_kind_name(noise.kind)}, {"sigma", noise.sigma}}},
               {"half_width", half_width},
               {"basis", basis},
               {"coefficients", coefficients},
               {"truth", truth}};
  write_json(sidecar, truth_path.string());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// convergence

struct ConvergenceOptions {
  std::string spec;
  std::string out_dir;
  unsigned threads = 0;
  bool fix_function = false;
  bool median = false;
};

struct ParsedExperiment {
  ExperimentSpec spec;
  SvgOptions svg;
};

ParsedExperiment experiment_from_json(const json& j) {
  ParsedExperiment out;
  auto& s = out.spec;
  s.d = json_get<int>(j, "d", 1);
  s.k = json_get<int>(j, "k", 3);
  if (s.d < 1) invalid("d must be >= 1");
  try {
    s.op = operator_from_json(j.value("operator", json("identity")), s.d);
  } catch (const Error& e) {
    invalid(e.what());
  }
  s.D_list = json_get<std::vector<int>>(j, "D_list", {1});
  s.n_list = json_get<std::vector<long long>>(j, "n_list", {100});
  s.trials = json_get<int>(j, "trials", 1);
  s.noise = noise_from_json(j.value("noise", json()));
  s.bandwidth_constant = json_get<double>(j, "bandwidth_constant", 1.0);
  s.seed = json_get<std::uint64_t>(j, "seed", 0);
  s.half_width = json_get<double>(j, "half_width", 1.0);
  s.coefficient_bound = json_get<double>(j, "coefficient_bound", 1.0);
  if (j.contains("function_degree") && !j.at("function_degree").is_null())
    s.function_degree = json_get<int>(j, "function_degree", s.k - 1);
  s.fix_function = json_get<bool>(j, "fix_function", false);
  const auto agg = json_get<std::string>(j, "aggregation", "mean");
  if (agg == "mean") s.aggregation = ErrorAggregation::Mean;
  else if (agg == "median") s.aggregation = ErrorAggregation::Median;
  else invalid("aggregation must be 'mean' or 'median'");
  if (j.contains("robust") && !j.at("robust").is_null()) {
    const auto& r = j.at("robust");
    AggregationConfig a;
    a.target_failure = json_get<double>(r, "failure_prob", a.target_failure);
    a.epsilon_zero = json_get<double>(r, "eps0", a.epsilon_zero);
    const double radius = json_get<double>(r, "radius", 0.0);
    if (radius > 0.0) {
      a.mode = RadiusMode::Fixed;
      a.radius = radius;
    }
    s.robust = a;
  }
  if (j.contains("svg")) {
    out.svg.width = json_get<int>(j.at("svg"), "width", out.svg.width);
    out.svg.height = json_get<int>(j.at("svg"), "height", out.svg.height);
    if (out.svg.width < 200 || out.svg.height < 150) invalid("svg width/height must be at least 200x150");
  }
  s.validate();
  return out;
}

json rate_report(const ExperimentSpec& spec, const ResultTable& table) {
  json report{{"schema", 1}, {"r_expected", spec.expected_rate()}, {"k", spec.k}, {"m", spec.m()}, {"d", spec.d}};
  int failures = 0;
  json untrusted = json::array();
  for (const auto& h : grid_health(table.raw)) {
    failures += h.failures;
    if (h.untrusted()) untrusted.push_back({{"D", h.D}, {"n", h.n}, {"failure_rate", h.failure_rate()}});
  }
  report["failed_trials"] = failures;
  report["untrusted"] = untrusted;
  try {
    const RateFit fit = fit_rate(table, spec.expected_rate());
    report["status"] = "ok";
    report["slope"] = fit.slope;
    report["intercept"] = fit.intercept;
    report["constant"] = fit.constant();
    report["deviation"] = fit.deviation();
    json per_D = json::array();
    for (auto [D, slope] : fit.per_D) per_D.push_back({{"D", D}, {"slope", std::isfinite(slope) ? json(slope) : json()}});
    report["per_D"] = per_D;
    json excluded = json::array();
    for (const auto& e : fit.excluded) excluded.push_back({{"D", e.D}, {"n", e.n}, {"reason", e.reason}});
    report["excluded"] = excluded;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TooFewPoints) throw;
    report["status"] = "too_few_points";
    report["slope"] = nullptr;
  }
  return report;
}

int cmd_convergence(const ConvergenceOptions& o) {
  ParsedExperiment parsed = experiment_from_json(load_json(o.spec));
  if (o.fix_function) parsed.spec.fix_function = true;
  if (o.median) parsed.spec.aggregation = ErrorAggregation::Median;

  const fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create '" + dir.string() + "': " + ec.message());
  const std::vector<fs::path> outputs{dir / "raw.csv", dir / "aggregate.csv", dir / "convergence.svg", dir / "rate.json"};
  try {
    const ResultTable table = run_convergence(parsed.spec, o.threads);
    emit_csv(table, outputs[0], outputs[1]);
    const json rate = rate_report(parsed.spec, table);
    std::optional<RateFit> fit;
    if (rate.at("status") == "ok") fit = fit_rate(table, parsed.spec.expected_rate());
    emit_svg(table, fit, outputs[2], parsed.svg);
    write_json(rate, outputs[3].string());
    std::cerr << "wrote " << outputs[0].string() << ", " << outputs[1].string() << ", " << outputs[2].string() << ", "
              << outputs[3].string() << "\n";
  } catch (...) {
    for (const auto& p : outputs) fs::remove(p, ec);
    throw;
  }
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local polynomial estimation of vector-valued functions and their derivatives"};
  app.require_subcommand(1);

  FitOptions fit_opts;
  auto* fit = app.add_subcommand("fit", "estimate L[f](0) from a CSV dataset");
  add_fit_options(fit, fit_opts);

  FitOptions robust_opts;
  robust_opts.k = 2;
  auto* robust = app.add_subcommand("robust", "median-of-splits estimate of L[f](0)");
  add_fit_options(robust, robust_opts);
  add_robust_options(robust, robust_opts);

  ConvergenceOptions conv_opts;
  auto* conv = app.add_subcommand("convergence", "Monte-Carlo convergence study from a JSON spec");
  conv->add_option("spec", conv_opts.spec, "experiment spec JSON")->required()->check(CLI::ExistingFile);
  conv->add_option("out_dir", conv_opts.out_dir, "output directory")->required();
  conv->add_option("--threads", conv_opts.threads, "worker threads (default LOCPOLY_THREADS or all cores)")
      ->check(CLI::Range(1u, 1024u));
  conv->add_flag("--fix-function", conv_opts.fix_function, "hold the target function fixed across trials");
  conv->add_flag("--median", conv_opts.median, "aggregate errors by median instead of mean");

  GenerateOptions gen_opts;
  auto* gen = app.add_subcommand("generate", "synthesise a dataset and its ground-truth sidecar");
  gen->add_option("spec", gen_opts.spec, "dataset spec JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("output", gen_opts.output, "CSV output path")->required();
  gen->add_option("--truth", gen_opts.truth, "sidecar path (default: <output>.truth.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*fit) {
      merge_config(fit, fit_opts, false);
      return cmd_fit(fit_opts);
    }
    if (*robust) {
      merge_config(robust, robust_opts, true);
      return cmd_robust(robust_opts);
    }
    if (*conv) return cmd_convergence(conv_opts);
    if (*gen) return cmd_generate(gen_opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

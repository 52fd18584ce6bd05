#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "locpoly/error.hpp"
#include "locpoly/operator.hpp"
#include "locpoly/random.hpp"
#include "locpoly/regression.hpp"
#include "locpoly/robust.hpp"
#include "locpoly/synthetic.hpp"

namespace locpoly {

enum class TrialStatus { Ok, Insufficient, RankDeficient };

inline std::string_view status_name(TrialStatus s) {
  switch (s) {
    case TrialStatus::Ok: return "ok";
    case TrialStatus::Insufficient: return "insufficient";
    case TrialStatus::RankDeficient: return "rank_deficient";
  }
  return "unknown";
}

inline TrialStatus parse_status(std::string_view s) {
  if (s == "ok") return TrialStatus::Ok;
  if (s == "insufficient") return TrialStatus::Insufficient;
  if (s == "rank_deficient") return TrialStatus::RankDeficient;
  throw Error(ErrorCode::ParseError, "unknown trial status '" + std::string(s) + "'");
}

enum class ErrorAggregation { Mean, Median };

/// Monte-Carlo convergence study: for every (D, n, trial) draw a random
/// polynomial target and a noisy dataset, estimate L[f](0) and record the error.
struct ExperimentSpec {
  int d = 1;
  int k = 3;
  DifferentialOperator op = DifferentialOperator::identity(1);
  std::vector<int> D_list{1};
  std::vector<long long> n_list{100};
  int trials = 1;
  NoiseModel noise;
  double bandwidth_constant = 1.0;
  std::uint64_t seed = 0;
  std::optional<AggregationConfig> robust;
  /// Degree of the random target polynomial; k - 1 when unset.
  std::optional<int> function_degree;
  double coefficient_bound = 1.0;
  double half_width = 1.0;
  /// Draw one target per D instead of one per trial.
  bool fix_function = false;
  ErrorAggregation aggregation = ErrorAggregation::Mean;

  int m() const noexcept { return op.order(); }
  int target_degree() const noexcept { return function_degree.value_or(k - 1); }
  double expected_rate() const noexcept { return static_cast<double>(k - m()) / static_cast<double>(2 * k + d); }

  EstimatorConfig estimator() const {
    EstimatorConfig c;
    c.smoothness = k;
    c.bandwidth_constant = bandwidth_constant;
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::SpecInvalid, msg); };
    if (d < 1) fail("d must be >= 1");
    if (k < 1) fail("k must be >= 1");
    if (op.dimension() != d) fail("operator dimension must equal d");
    if (m() >= k) fail("operator order m must be < k");
    if (D_list.empty()) fail("D_list must not be empty");
    for (int D : D_list)
      if (D < 1) fail("every D must be >= 1");
    if (n_list.empty()) fail("n_list must not be empty");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      if (n_list[i] < 1) fail("every n must be >= 1");
      if (i && n_list[i] <= n_list[i - 1]) fail("n_list must be strictly increasing");
    }
    if (trials < 1) fail("trials must be >= 1");
    if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma)) fail("noise sigma must be finite and >= 0");
    if (!(bandwidth_constant > 0.0)) fail("bandwidth constant must be > 0");
    if (!(half_width > 0.0)) fail("half width must be > 0");
    if (target_degree() < 0) fail("function degree must be >= 0");
    if (!(coefficient_bound >= 0.0)) fail("coefficient bound must be >= 0");
    if (robust) {
      try {
        robust->validate();
      } catch (const Error& e) {
        fail(e.what());
      }
    }
  }
};

struct TrialRow {
  int D = 1;
  long long n = 0;
  int trial = 0;
  double error = std::numeric_limits<double>::quiet_NaN();
  long long N_n = 0;
  double delta_n = 0.0;
  TrialStatus status = TrialStatus::Ok;
};

struct AggregateRow {
  int D = 1;
  long long n = 0;
  double mean_error = 0.0;
  double var_error = 0.0;
  int trials_ok = 0;
};

struct ResultTable {
  std::vector<TrialRow> raw;
  std::vector<AggregateRow> aggregates;
};

/// Grid points in first-appearance order, with their ok errors.
namespace detail {
struct GridPoint {
  int D;
  long long n;
  std::vector<double> errors;
  int total = 0;
};

inline std::vector<GridPoint> group_rows(const std::vector<TrialRow>& rows) {
  std::vector<GridPoint> points;
  std::map<std::pair<int, long long>, std::size_t> where;
  for (const auto& r : rows) {
    auto [it, inserted] = where.try_emplace({r.D, r.n}, points.size());
    if (inserted) points.push_back({r.D, r.n, {}, 0});
    auto& p = points[it->second];
    ++p.total;
    if (r.status == TrialStatus::Ok) p.errors.push_back(r.error);
  }
  return points;
}
} // namespace detail

/// Mean (or median) and unbiased sample variance of the ok errors at each grid
/// point. Points without a single successful trial are omitted.
inline std::vector<AggregateRow> aggregate_rows(const std::vector<TrialRow>& rows,
                                                ErrorAggregation how = ErrorAggregation::Mean) {
  std::vector<AggregateRow> out;
  for (auto& p : detail::group_rows(rows)) {
    if (p.errors.empty()) continue;
    const auto count = static_cast<double>(p.errors.size());
    double mean = 0.0;
    for (double e : p.errors) mean += e;
    mean /= count;
    double var = 0.0;
    if (p.errors.size() > 1) {
      for (double e : p.errors) var += (e - mean) * (e - mean);
      var /= count - 1.0;
    }
    double centre = mean;
    if (how == ErrorAggregation::Median) {
      auto sorted = p.errors;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t h = sorted.size() / 2;
      centre = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    }
    out.push_back({p.D, p.n, centre, var, static_cast<int>(p.errors.size())});
  }
  return out;
}

struct GridHealth {
  int D;
  long long n;
  int failures;
  int total;
  double failure_rate() const noexcept { return total ? static_cast<double>(failures) / total : 0.0; }
  /// More than 20% failed trials.
  bool untrusted() const noexcept { return failure_rate() > 0.2; }
};

inline std::vector<GridHealth> grid_health(const std::vector<TrialRow>& rows) {
  std::vector<GridHealth> out;
  for (const auto& p : detail::group_rows(rows))
    out.push_back({p.D, p.n, p.total - static_cast<int>(p.errors.size()), p.total});
  return out;
}

/// Worker count: `requested` when non-zero, else LOCPOLY_THREADS, else the
/// hardware concurrency.
inline unsigned resolve_threads(unsigned requested = 0) {
  if (requested) return requested;
  if (const char* env = std::getenv("LOCPOLY_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline TrialRow run_trial(const ExperimentSpec& spec, int D, long long n, int trial) {
  TrialRow row;
  row.D = D;
  row.n = n;
  row.trial = trial;

  const std::uint64_t function_seed =
      spec.fix_function ? derive_seed(spec.seed, {0xF0, static_cast<std::uint64_t>(D)})
                        : derive_seed(spec.seed, {0xF1, static_cast<std::uint64_t>(D), static_cast<std::uint64_t>(n),
                                                  static_cast<std::uint64_t>(trial)});
  const std::uint64_t data_seed = derive_seed(
      spec.seed, {static_cast<std::uint64_t>(D), static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial)});

  ExperimentFunctionSpec fspec{spec.d, D, spec.target_degree(), spec.coefficient_bound, function_seed};
  const VectorFunction f = gen_random_polynomial(fspec).as_function();
  const Eigen::VectorXd truth = f.truth(spec.op);
  const EstimatorConfig config = spec.estimator();

  auto record_failure = [&](const Error& e) {
    row.error = std::numeric_limits<double>::quiet_NaN();
    row.status = e.code() == ErrorCode::RankDeficient || e.code() == ErrorCode::ZeroScale ? TrialStatus::RankDeficient
                                                                                           : TrialStatus::Insufficient;
  };

  if (spec.robust) {
    const Dataset data = make_dataset(f, n, spec.noise, spec.half_width, data_seed);
    try {
      const auto r = estimate_robust(data, spec.op, config, *spec.robust, derive_seed(data_seed, {0x5B}));
      row.error = (r.result.value - truth).norm();
      row.N_n = static_cast<long long>(r.result.neighborhood.count());
      row.delta_n = r.result.neighborhood.delta;
    } catch (const Error& e) {
      record_failure(e);
    }
    return row;
  }

  const double epsilon = bandwidth(n, spec.k, spec.d, spec.bandwidth_constant);
  const auto local = make_local_dataset(f, n, spec.noise, spec.half_width, epsilon, data_seed);
  if (!local) {
    row.status = TrialStatus::Insufficient;
    return row;
  }
  const Neighborhood nb = select_neighborhood(*local, epsilon);
  row.N_n = static_cast<long long>(nb.count());
  row.delta_n = nb.delta;
  try {
    const auto r = estimate(*local, spec.op, config, epsilon);
    row.error = (r.value - truth).norm();
  } catch (const Error& e) {
    record_failure(e);
  }
  return row;
}

/// Runs every (D, n, trial) job, possibly on several threads. Seeds are fixed
/// per job and results are stored by job position, so the table is identical
/// for any thread count.
inline ResultTable run_convergence(const ExperimentSpec& spec, unsigned threads = 0) {
  spec.validate();
  struct Job {
    int D;
    long long n;
    int trial;
  };
  std::vector<Job> jobs;
  for (int D : spec.D_list)
    for (long long n : spec.n_list)
      for (int t = 0; t < spec.trials; ++t) jobs.push_back({D, n, t});

  ResultTable table;
  table.raw.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      table.raw[i] = run_trial(spec, jobs[i].D, jobs[i].n, jobs[i].trial);
  };
  const unsigned count = std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(jobs.size()));
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < count; ++i) pool.emplace_back(worker);
  }
  table.aggregates = aggregate_rows(table.raw, spec.aggregation);
  return table;
}

struct ExcludedPoint {
  int D;
  long long n;
  std::string reason;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_expected = 0.0;
  /// Slope per D, NaN when that D has fewer than three usable points.
  std::vector<std::pair<int, double>> per_D;
  std::vector<ExcludedPoint> excluded;

  double deviation() const noexcept { return slope + r_expected; }
  /// Fitted error prefactor exp(intercept).
  double constant() const noexcept { return std::exp(intercept); }
};

namespace detail {
struct LineFit {
  double slope;
  double intercept;
};

inline LineFit least_squares_line(const std::vector<std::pair<double, double>>& pts) {
  double mx = 0.0, my = 0.0;
  for (auto [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0.0, sxx = 0.0;
  for (auto [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
  return {slope, my - slope * mx};
}
} // namespace detail

/// Ordinary least squares of ln(mean error) on ln(n), pooled over all D and per D.
/// The smallest n of a curve is dropped when more than 10% of its trials failed.
inline RateFit fit_rate(const ResultTable& table, double r_expected) {
  RateFit fit;
  fit.r_expected = r_expected;

  std::map<std::pair<int, long long>, double> failure_rate;
  for (const auto& h : grid_health(table.raw)) failure_rate[{h.D, h.n}] = h.failure_rate();
  std::map<int, long long> smallest_n;
  for (const auto& a : table.aggregates) {
    auto [it, inserted] = smallest_n.try_emplace(a.D, a.n);
    if (!inserted) it->second = std::min(it->second, a.n);
  }

  std::vector<std::pair<double, double>> pooled;
  std::vector<long long> distinct_n;
  std::map<int, std::vector<std::pair<double, double>>> by_D;
  std::vector<int> D_order;
  for (const auto& a : table.aggregates) {
    if (std::find(D_order.begin(), D_order.end(), a.D) == D_order.end()) D_order.push_back(a.D);
    auto fr = failure_rate.find({a.D, a.n});
    if (a.n == smallest_n[a.D] && fr != failure_rate.end() && fr->second > 0.1) {
      fit.excluded.push_back({a.D, a.n, "failure rate above 10% at the smallest n"});
      continue;
    }
    if (!(a.mean_error > 0.0) || !std::isfinite(a.mean_error)) {
      fit.excluded.push_back({a.D, a.n, "non-positive or non-finite mean error"});
      continue;
    }
    const std::pair<double, double> pt{std::log(static_cast<double>(a.n)), std::log(a.mean_error)};
    pooled.push_back(pt);
    by_D[a.D].push_back(pt);
    if (std::find(distinct_n.begin(), distinct_n.end(), a.n) == distinct_n.end()) distinct_n.push_back(a.n);
  }
  if (distinct_n.size() < 3)
    throw Error(ErrorCode::TooFewPoints, "rate fit needs at least 3 distinct n values, have " +
                                             std::to_string(distinct_n.size()));

  const auto line = detail::least_squares_line(pooled);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  for (int D : D_order) {
    const auto& pts = by_D[D];
    fit.per_D.emplace_back(D, pts.size() >= 3 ? detail::least_squares_line(pts).slope
                                              : std::numeric_limits<double>::quiet_NaN());
  }
  return fit;
}

} // namespace locpoly

#include "envdeg/tuning.hpp"

#include "envdeg/error.hpp"
#include "envdeg/parallel.hpp"
#include "envdeg/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

namespace envdeg {

std::vector<int> assign_folds(std::size_t n_units, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "cross-validation needs at least two folds");
  if (static_cast<std::size_t>(folds) > n_units) {
    throw Error(ErrorCode::InsufficientData, "more folds than training units");
  }
  std::vector<std::size_t> order(n_units);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = substream(seed, 0xf01d5ULL);
  for (std::size_t i = n_units; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<int> fold(n_units);
  for (std::size_t pos = 0; pos < n_units; ++pos) fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  return fold;
}

namespace {

struct Candidate {
  int q;
  int K;
  ShrinkageParams shrink;
};

int label_count(const std::vector<DegradationSignal>& signals) {
  int K = 0;
  for (const auto& s : signals) {
    if (!s.env_label) throw Error(ErrorCode::InvalidArgument, "classification needs env labels on every unit");
    K = std::max(K, *s.env_label);
  }
  return K;
}

// Mean prediction error of one candidate on every fold; +inf for a clustering
// fit that loses a cluster.
std::vector<double> score_candidate(const std::vector<DegradationSignal>& signals,
                                    const std::vector<double>& lifetimes, const std::vector<int>& fold_of,
                                    const TuningGrid& grid, Scenario scenario, const Candidate& c,
                                    std::uint64_t seed) {
  const BasisSpec basis = make_basis(c.q, grid.domain_end);
  std::vector<double> scores(static_cast<std::size_t>(grid.folds));
  parallel_for(scores.size(), [&](std::size_t f) {
    std::vector<DegradationSignal> train, test;
    std::vector<double> test_life;
    for (std::size_t i = 0; i < signals.size(); ++i) {
      if (fold_of[i] == static_cast<int>(f)) {
        test.push_back(signals[i]);
        test_life.push_back(lifetimes[i]);
      } else {
        train.push_back(signals[i]);
      }
    }
    if (scenario == Scenario::classification) {
      std::vector<int> seen(static_cast<std::size_t>(c.K), 0);
      for (const auto& s : train) seen[static_cast<std::size_t>(*s.env_label - 1)] = 1;
      if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw Error(ErrorCode::InsufficientData, "fold " + std::to_string(f) + " leaves a labelled cluster empty");
      }
    }
    FitOptions opts = grid.fit_options;
    opts.init_seed = mix64(seed ^ (0x100 + f));
    ModelParams params;
    try {
      params = fit(train, c.K, basis, c.shrink, scenario, opts).params;
    } catch (const Error& e) {
      if (scenario == Scenario::clustering &&
          (e.code() == ErrorCode::EmptyCluster || e.code() == ErrorCode::SingularCovariance)) {
        scores[f] = std::numeric_limits<double>::infinity();
        return;
      }
      throw;
    }
    EvaluationOptions eval;
    eval.threshold = grid.threshold;
    eval.percentiles = grid.eval_percentiles;
    eval.n_b = grid.n_b;
    eval.seed = mix64(seed ^ (0x200 + f));
    eval.crossing_grid_size = grid.crossing_grid_size;
    eval.mode = grid.error_mode;
    const auto table = evaluate_cohort(params, test, test_life, eval);
    scores[f] = table.per_unit_errors.mean();
  });
  return scores;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void check_grid(const TuningGrid& grid) {
  if (grid.q_candidates.empty() || grid.k_candidates.empty() || grid.lambda_candidates.empty() ||
      grid.zeta_candidates.empty() || grid.eval_percentiles.empty()) {
    throw Error(ErrorCode::InvalidArgument, "every candidate list must be nonempty");
  }
  for (int q : grid.q_candidates) {
    if (q < BasisSpec::order) throw Error(ErrorCode::InvalidDimension, "q candidates must be >= 4");
  }
  for (int k : grid.k_candidates) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "K candidates must be >= 1");
  }
  for (double v : grid.lambda_candidates) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, "lambda candidates must lie in [0, 1]");
  }
  for (double v : grid.zeta_candidates) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, "zeta candidates must lie in [0, 1]");
  }
  if (!(grid.threshold > 0.0) || !(grid.domain_end > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tuning needs a positive threshold and domain end");
  }
}

}  // namespace

TuningResult cross_validate(const std::vector<DegradationSignal>& signals, const std::vector<double>& lifetimes,
                            const TuningGrid& grid, Scenario scenario, std::uint64_t seed) {
  check_grid(grid);
  if (signals.size() != lifetimes.size()) throw Error(ErrorCode::LengthMismatch, "one lifetime per unit required");
  const auto fold_of = assign_folds(signals.size(), grid.folds, seed);

  std::vector<int> ks = grid.k_candidates;
  if (scenario == Scenario::classification) ks = {label_count(signals)};
  std::vector<int> qs = grid.q_candidates;
  std::sort(qs.begin(), qs.end());
  qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  TuningResult result;
  auto record = [&](const Candidate& c, const std::vector<double>& scores, int step) {
    for (std::size_t f = 0; f < scores.size(); ++f) {
      result.cv_table.push_back({c.q, c.K, c.shrink.lambda, c.shrink.zeta, static_cast<int>(f), scores[f], step});
    }
    const double m = mean_of(scores);
    result.cv_table.push_back({c.q, c.K, c.shrink.lambda, c.shrink.zeta, -1, m, step});
    return m;
  };

  // Step 1: (q, K), visited in ascending order so strict improvement keeps the
  // smaller q, then the smaller K, on ties.
  double best = std::numeric_limits<double>::infinity();
  bool have = false;
  for (int q : qs) {
    for (int K : ks) {
      const Candidate c{q, K, grid.default_shrink};
      const double m = record(c, score_candidate(signals, lifetimes, fold_of, grid, scenario, c, seed), 1);
      if (!have || m < best) {
        best = m;
        result.q = q;
        result.K = K;
        have = true;
      }
    }
  }

  // Step 2: (lambda, zeta) at the chosen (q, K); ties prefer larger zeta, then larger lambda.
  std::vector<double> zetas = grid.zeta_candidates, lambdas = grid.lambda_candidates;
  std::sort(zetas.begin(), zetas.end(), std::greater<>());
  zetas.erase(std::unique(zetas.begin(), zetas.end()), zetas.end());
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  have = false;
  best = std::numeric_limits<double>::infinity();
  for (double zeta : zetas) {
    for (double lambda : lambdas) {
      const Candidate c{result.q, result.K, {lambda, zeta}};
      const double m = record(c, score_candidate(signals, lifetimes, fold_of, grid, scenario, c, seed), 2);
      if (!have || m < best) {
        best = m;
        result.lambda = lambda;
        result.zeta = zeta;
        have = true;
      }
    }
  }
  return result;
}

void write_cv_table_csv(const std::vector<CvCell>& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "q,K,lambda,zeta,fold,mean_error\n";
  char buf[64];
  for (const auto& c : table) {
    out << c.q << ',' << c.K << ',';
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,", c.lambda, c.zeta);
    out << buf << (c.fold < 0 ? std::string("all") : std::to_string(c.fold)) << ',';
    std::snprintf(buf, sizeof buf, "%.10g", c.mean_error);
    out << buf << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace envdeg

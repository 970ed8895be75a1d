#include "cli.hpp"

#include "envdeg/model_io.hpp"
#include "envdeg/prediction.hpp"
#include "envdeg/random.hpp"
#include "envdeg/tuning.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace envdeg::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Command command) noexcept {
  switch (command) {
    case Command::simulate: return "simulate";
    case Command::fit: return "fit";
    case Command::predict: return "predict";
    case Command::evaluate: return "evaluate";
    case Command::tune: return "tune";
  }
  return "unknown";
}

json to_json(const RunConfig& c) {
  json doc;
  doc["command"] = to_string(c.command);
  doc["input"] = c.input.string();
  doc["output"] = c.output.string();
  doc["model"] = c.model.string();
  doc["truth"] = c.truth.string();
  doc["scenario"] = to_string(c.scenario);
  doc["K"] = c.K;
  doc["q"] = c.q;
  doc["lambda"] = c.shrink.lambda;
  doc["zeta"] = c.shrink.zeta;
  doc["n_b"] = c.n_b;
  doc["seed"] = c.seed;
  doc["threshold"] = c.threshold ? json(*c.threshold) : json(nullptr);
  doc["domain_end"] = c.domain_end ? json(*c.domain_end) : json(nullptr);
  doc["mode"] = c.mode == SamplingMode::complete ? "complete" : "sparse";
  doc["error"] = to_string(c.error);
  doc["percentiles"] = c.percentiles;
  doc["n"] = c.n_units;
  if (c.command == Command::tune) {
    doc["q_list"] = c.q_list;
    doc["k_list"] = c.k_list;
    doc["lambda_list"] = c.lambda_list;
    doc["zeta_list"] = c.zeta_list;
    doc["folds"] = c.folds;
  }
  return doc;
}

int exit_code(ErrorCode code) noexcept { return 10 + static_cast<int>(code); }

fs::path meta_path(const fs::path& artifact) {
  fs::path p = artifact;
  p += ".meta.json";
  return p;
}

fs::path sibling(const fs::path& artifact, const std::string& suffix) {
  return artifact.parent_path() / (artifact.stem().string() + suffix);
}

namespace {

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(ErrorCode::InvalidConfig, std::string("--") + what + " is required");
  if (!fs::is_regular_file(p)) throw Error(ErrorCode::IoError, std::string(what) + " file not found: " + p.string());
}

void require_output(const fs::path& p) {
  if (p.empty()) throw Error(ErrorCode::InvalidConfig, "--output is required");
  const fs::path dir = p.parent_path();
  if (!dir.empty() && !fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "output directory does not exist: " + dir.string());
  }
}

void require_threshold(const RunConfig& c) {
  if (!c.threshold) throw Error(ErrorCode::InvalidConfig, "--threshold is required for " + std::string(to_string(c.command)));
}

void require_percentiles(const std::vector<double>& ps) {
  if (ps.empty()) throw Error(ErrorCode::InvalidConfig, "--percentiles is empty");
  for (double p : ps) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidConfig, "percentiles must lie in (0,1)");
  }
}

void write_meta(const RunConfig& c, const fs::path& artifact, json extra = json::object()) {
  json doc;
  doc["run_config"] = to_json(c);
  doc["seed"] = c.seed;
  for (auto& [key, value] : extra.items()) doc[key] = value;
  write_json_file(doc, meta_path(artifact));
}

// Explicit flag first, then the domain recorded beside the input, then the
// latest observation time.
double resolve_domain(const RunConfig& c, const std::vector<DegradationSignal>& signals, std::ostream& log) {
  if (c.domain_end) return *c.domain_end;
  const fs::path meta = meta_path(c.input);
  if (fs::is_regular_file(meta)) {
    const json doc = read_json_file(meta);
    const auto it = doc.find("run_config");
    if (it != doc.end() && it->contains("domain_end") && (*it)["domain_end"].is_number()) {
      return (*it)["domain_end"].get<double>();
    }
  }
  double m = 0.0;
  for (const auto& s : signals) {
    if (!s.times.empty()) m = std::max(m, s.times.back());
  }
  log << "note: --domain-end not given; using latest observation time " << m << "\n";
  return m;
}

std::vector<DegradationSignal> load_signals(const RunConfig& c) {
  auto signals = read_signals_csv(c.input, c.threshold);
  if (signals.empty()) throw Error(ErrorCode::InsufficientData, "no signals in " + c.input.string());
  return signals;
}

std::uint64_t unit_seed(std::uint64_t seed, std::size_t index) { return mix64(seed ^ mix64(index)); }

void run_simulate(const RunConfig& c, std::ostream& log) {
  SimConfig sim;
  sim.seed = c.seed;
  sim.mode = c.mode;
  sim.threshold = c.threshold.value_or(sim.threshold);
  sim.domain_end = c.domain_end.value_or(sim.domain_end);
  const Cohort cohort = simulate_cohort(sim, c.n_units);
  const fs::path truth = c.truth.empty() ? sibling(c.output, "_truth.csv") : c.truth;
  write_signals_csv(cohort.signals, c.output);
  write_truth_csv(truth_records(cohort), truth);
  RunConfig recorded = c;
  recorded.threshold = sim.threshold;
  recorded.domain_end = sim.domain_end;
  recorded.truth = truth;
  write_meta(recorded, c.output);
  write_meta(recorded, truth);
  log << "simulated " << cohort.signals.size() << " units -> " << c.output.string() << ", " << truth.string() << "\n";
}

void run_fit(const RunConfig& c, std::ostream& log) {
  auto signals = load_signals(c);
  std::optional<std::vector<TruthRecord>> truth;
  if (!c.truth.empty()) truth = read_truth_csv(c.truth);
  if (c.scenario == Scenario::classification && truth) {
    // labels missing from the signal file may come from the truth file
    std::map<std::string, std::optional<int>> label_of;
    for (const auto& t : *truth) label_of[t.unit_id] = t.env_label;
    for (auto& s : signals) {
      if (!s.env_label) {
        const auto it = label_of.find(s.unit_id);
        if (it != label_of.end()) s.env_label = it->second;
      }
    }
  }
  const double M = resolve_domain(c, signals, log);
  const BasisSpec basis = make_basis(c.q, M);
  FitOptions options;
  options.init_seed = c.seed;
  const FitReport report = fit(signals, c.K, basis, c.shrink, c.scenario, options);

  RunConfig recorded = c;
  recorded.domain_end = M;
  write_model(report.params, c.output, to_json(recorded));
  write_meta(recorded, c.output);

  json rep;
  rep["run_config"] = to_json(recorded);
  rep["seed"] = c.seed;
  rep["scenario"] = to_string(report.scenario);
  rep["K"] = c.K;
  rep["loglik_trace"] = report.loglik_trace;
  rep["loglik"] = report.loglik_trace.empty() ? json(nullptr) : json(report.loglik_trace.back());
  rep["iterations"] = report.iterations;
  rep["converged"] = report.converged;
  json assign = json::array();
  for (std::size_t l = 0; l < signals.size(); ++l) {
    assign.push_back({{"unit_id", signals[l].unit_id}, {"cluster", report.hard_assignments[l] + 1}});
  }
  rep["assignments"] = std::move(assign);
  rep["rand_index"] = nullptr;
  if (truth) {
    std::map<std::string, int> label_of;
    for (const auto& t : *truth) {
      if (t.env_label) label_of[t.unit_id] = *t.env_label;
    }
    std::vector<int> fitted, actual;
    for (std::size_t l = 0; l < signals.size(); ++l) {
      const auto it = label_of.find(signals[l].unit_id);
      if (it == label_of.end()) continue;
      fitted.push_back(report.hard_assignments[l]);
      actual.push_back(it->second);
    }
    if (fitted.size() >= 2) {
      const double r = rand_index(fitted, actual);
      rep["rand_index"] = r;
      log << "rand index vs truth: " << r << "\n";
    }
  }
  const fs::path report_path = sibling(c.output, ".report.json");
  write_json_file(rep, report_path);
  log << "fitted K=" << c.K << " q=" << c.q << " loglik=" << rep["loglik"].dump() << " -> " << c.output.string() << "\n";
}

void run_predict(const RunConfig& c, std::ostream& log) {
  const ModelParams params = read_model(c.model);
  const auto signals = load_signals(c);
  PredictionOptions opts;
  opts.threshold = *c.threshold;
  opts.n_b = c.n_b;
  json preds = json::array();
  for (std::size_t i = 0; i < signals.size(); ++i) {
    opts.seed = unit_seed(c.seed, i);
    json p = to_json(predict_unit(params, signals[i], opts));
    p["seed"] = opts.seed;
    preds.push_back(std::move(p));
  }
  json doc;
  doc["run_config"] = to_json(c);
  doc["seed"] = c.seed;
  doc["predictions"] = std::move(preds);
  write_json_file(doc, c.output);
  write_meta(c, c.output);
  log << "predicted " << signals.size() << " units -> " << c.output.string() << "\n";
}

void run_evaluate(const RunConfig& c, std::ostream& log) {
  const ModelParams params = read_model(c.model);
  const auto signals = load_signals(c);
  const auto lifetimes = align_lifetimes(signals, read_truth_csv(c.truth));
  EvaluationOptions opts;
  opts.threshold = *c.threshold;
  opts.percentiles = c.percentiles;
  opts.n_b = c.n_b;
  opts.seed = c.seed;
  opts.mode = c.error;
  opts.method_tag = c.model.stem().string();
  const auto table = evaluate_cohort(params, signals, lifetimes, opts);
  write_error_tables_csv({table}, c.output);
  const fs::path units = sibling(c.output, "_units.csv");
  write_unit_errors_csv({table}, units);
  write_meta(c, c.output, {{"n_all_censored", table.n_all_censored}});
  write_meta(c, units);
  log << "evaluated " << signals.size() << " units (" << table.n_all_censored << " all-censored cells) -> "
      << c.output.string() << "\n";
}

void run_tune(const RunConfig& c, std::ostream& log) {
  const auto signals = load_signals(c);
  const auto lifetimes = align_lifetimes(signals, read_truth_csv(c.truth));
  TuningGrid grid;
  grid.q_candidates = c.q_list;
  grid.k_candidates = c.k_list;
  grid.lambda_candidates = c.lambda_list;
  grid.zeta_candidates = c.zeta_list;
  grid.folds = c.folds;
  grid.eval_percentiles = c.percentiles;
  grid.threshold = *c.threshold;
  grid.domain_end = resolve_domain(c, signals, log);
  grid.n_b = c.n_b;
  grid.error_mode = c.error;
  const TuningResult r = cross_validate(signals, lifetimes, grid, c.scenario, c.seed);
  write_cv_table_csv(r.cv_table, c.output);
  RunConfig recorded = c;
  recorded.domain_end = grid.domain_end;
  json selected;
  selected["run_config"] = to_json(recorded);
  selected["seed"] = c.seed;
  selected["q"] = r.q;
  selected["K"] = r.K;
  selected["lambda"] = r.lambda;
  selected["zeta"] = r.zeta;
  write_json_file(selected, sibling(c.output, "_selected.json"));
  write_meta(recorded, c.output);
  log << "selected q=" << r.q << " K=" << r.K << " lambda=" << r.lambda << " zeta=" << r.zeta << "\n";
}

}  // namespace

void validate(const RunConfig& c) {
  require_output(c.output);
  if (c.n_b < 1) throw Error(ErrorCode::InvalidConfig, "--nb must be positive");
  if (c.threshold && !std::isfinite(*c.threshold)) throw Error(ErrorCode::InvalidConfig, "--threshold must be finite");
  if (c.domain_end && !(*c.domain_end > 0.0)) throw Error(ErrorCode::InvalidDomain, "--domain-end must be positive");
  switch (c.command) {
    case Command::simulate:
      if (c.n_units < 1) throw Error(ErrorCode::InvalidConfig, "--n must be positive");
      break;
    case Command::fit:
      require_file(c.input, "input");
      if (!c.truth.empty()) require_file(c.truth, "truth");
      break;
    case Command::predict:
      require_threshold(c);
      require_file(c.input, "input");
      require_file(c.model, "model");
      break;
    case Command::evaluate:
      require_threshold(c);
      require_percentiles(c.percentiles);
      require_file(c.input, "input");
      require_file(c.model, "model");
      require_file(c.truth, "truth");
      break;
    case Command::tune:
      require_threshold(c);
      require_percentiles(c.percentiles);
      require_file(c.input, "input");
      require_file(c.truth, "truth");
      if (c.folds < 2) throw Error(ErrorCode::InvalidConfig, "--folds must be at least 2");
      if (c.q_list.empty() || c.lambda_list.empty() || c.zeta_list.empty() ||
          (c.scenario == Scenario::clustering && c.k_list.empty())) {
        throw Error(ErrorCode::InvalidConfig, "candidate lists must be non-empty");
      }
      break;
  }
}

int run(const RunConfig& c, std::ostream& log) {
  try {
    validate(c);
    switch (c.command) {
      case Command::simulate: run_simulate(c, log); break;
      case Command::fit: run_fit(c, log); break;
      case Command::predict: run_predict(c, log); break;
      case Command::evaluate: run_evaluate(c, log); break;
      case Command::tune: run_tune(c, log); break;
    }
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return exit_unexpected;
  }
  return 0;
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Residual-life prediction from degradation signals under latent environments"};
  app.require_subcommand(1);
  RunConfig c;
  std::string scenario = "clustering", mode = "complete", error = "relative";
  double threshold = 0.0, domain_end = 0.0;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--output", c.output, "Output artifact path")->required();
    sub->add_option("--seed", c.seed, "Random seed");
  };
  const auto shrink = [&](CLI::App* sub) {
    sub->add_option("--lambda", c.shrink.lambda, "Pooling weight")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--zeta", c.shrink.zeta, "Identity weight")->check(CLI::Range(0.0, 1.0));
  };
  const auto scen = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario)->check(CLI::IsMember({"classification", "clustering"}));
  };
  const auto errs = [&](CLI::App* sub) {
    sub->add_option("--error", error)->check(CLI::IsMember({"relative", "absolute"}));
    sub->add_option("--percentiles", c.percentiles, "Comma list of lifetime fractions")->delimiter(',');
  };

  auto* sim = app.add_subcommand("simulate", "Generate a simulated cohort");
  common(sim);
  sim->add_option("--n", c.n_units, "Number of units");
  sim->add_option("--mode", mode)->check(CLI::IsMember({"complete", "sparse"}));
  sim->add_option("--threshold", threshold, "Failure threshold (default 1000)");
  sim->add_option("--domain-end", domain_end, "Time horizon (default 20)");
  sim->add_option("--truth", c.truth, "Truth CSV path (default <output stem>_truth.csv)");

  auto* fit_cmd = app.add_subcommand("fit", "Fit the mixture model");
  common(fit_cmd);
  scen(fit_cmd);
  shrink(fit_cmd);
  fit_cmd->add_option("--input", c.input, "Signals CSV")->required();
  fit_cmd->add_option("--k", c.K, "Number of clusters");
  fit_cmd->add_option("--q", c.q, "Number of basis functions");
  fit_cmd->add_option("--truth", c.truth, "Truth CSV (enables the Rand index)");
  fit_cmd->add_option("--threshold", threshold, "Failure threshold");
  fit_cmd->add_option("--domain-end", domain_end, "Basis domain end");

  auto* pred = app.add_subcommand("predict", "Residual-life distribution for partial signals");
  common(pred);
  pred->add_option("--input", c.input, "Partial signals CSV")->required();
  pred->add_option("--model", c.model, "Model JSON")->required();
  pred->add_option("--threshold", threshold, "Failure threshold")->required();
  pred->add_option("--nb", c.n_b, "Bootstrap draws");

  auto* eval = app.add_subcommand("evaluate", "Percentile prediction-error table");
  common(eval);
  errs(eval);
  eval->add_option("--input", c.input, "Full test signals CSV")->required();
  eval->add_option("--model", c.model, "Model JSON")->required();
  eval->add_option("--truth", c.truth, "Truth CSV with lifetimes")->required();
  eval->add_option("--threshold", threshold, "Failure threshold")->required();
  eval->add_option("--nb", c.n_b, "Bootstrap draws");

  auto* tune = app.add_subcommand("tune", "Two-step cross-validation");
  common(tune);
  scen(tune);
  errs(tune);
  tune->add_option("--input", c.input, "Signals CSV")->required();
  tune->add_option("--truth", c.truth, "Truth CSV with lifetimes")->required();
  tune->add_option("--threshold", threshold, "Failure threshold")->required();
  tune->add_option("--domain-end", domain_end, "Basis domain end");
  tune->add_option("--nb", c.n_b, "Bootstrap draws per prediction");
  tune->add_option("--q-list", c.q_list)->delimiter(',');
  tune->add_option("--k-list", c.k_list)->delimiter(',');
  tune->add_option("--lambda-list", c.lambda_list)->delimiter(',');
  tune->add_option("--zeta-list", c.zeta_list)->delimiter(',');
  tune->add_option("--folds", c.folds);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e, out, err);
    return status == 0 ? 0 : exit_usage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  if (name == "simulate") c.command = Command::simulate;
  else if (name == "fit") c.command = Command::fit;
  else if (name == "predict") c.command = Command::predict;
  else if (name == "evaluate") c.command = Command::evaluate;
  else c.command = Command::tune;
  if (chosen->get_option_no_throw("--threshold") && chosen->count("--threshold") > 0) c.threshold = threshold;
  if (chosen->get_option_no_throw("--domain-end") && chosen->count("--domain-end") > 0) c.domain_end = domain_end;
  c.scenario = parse_scenario(scenario);
  c.mode = mode == "sparse" ? SamplingMode::sparse : SamplingMode::complete;
  c.error = parse_error_mode(error);
  return run(c, err);
}

}  // namespace envdeg::cli

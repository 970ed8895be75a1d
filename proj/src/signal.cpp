#include "envdeg/signal.hpp"

#include "envdeg/basis.hpp"
#include "envdeg/error.hpp"
#include "envdeg/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <cctype>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace envdeg {

void validate_signal(const DegradationSignal& signal, bool allow_empty) {
  if (signal.times.size() != signal.values.size()) {
    throw Error(ErrorCode::InvalidArgument, "unit " + signal.unit_id + ": times/values length mismatch");
  }
  if (!allow_empty && signal.times.empty()) {
    throw Error(ErrorCode::InvalidArgument, "unit " + signal.unit_id + " has no observations");
  }
  for (std::size_t i = 1; i < signal.times.size(); ++i) {
    if (!(signal.times[i] > signal.times[i - 1])) {
      throw Error(ErrorCode::NonMonotoneTime, "unit " + signal.unit_id + ": times not strictly increasing");
    }
  }
}

DegradationSignal truncate_at(const DegradationSignal& signal, double horizon) {
  DegradationSignal out;
  out.unit_id = signal.unit_id;
  out.env_label = signal.env_label;
  const auto keep = static_cast<std::size_t>(
      std::upper_bound(signal.times.begin(), signal.times.end(), horizon) - signal.times.begin());
  out.times.assign(signal.times.begin(), signal.times.begin() + static_cast<std::ptrdiff_t>(keep));
  out.values.assign(signal.values.begin(), signal.values.begin() + static_cast<std::ptrdiff_t>(keep));
  out.truncated = signal.truncated && keep == signal.times.size();
  return out;
}

double max_abs_amplitude(const std::vector<DegradationSignal>& signals) {
  double m = 0.0;
  for (const auto& s : signals) {
    for (double v : s.values) m = std::max(m, std::abs(v));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Simulation

Eigen::VectorXd SimConfig::default_cluster2_mean() {
  Eigen::VectorXd mu(5);
  mu << 0.0, 500.0, 1500.0, 2500.0, 3000.0;
  return mu;
}

Eigen::MatrixXd SimConfig::default_cluster2_precision() {
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(5, 5);
  for (int i = 0; i < 5; ++i) {
    omega(i, i) = 2.0;
    if (i + 1 < 5) {
      omega(i, i + 1) = -1.0;
      omega(i + 1, i) = -1.0;
    }
  }
  omega(4, 4) = 1.0;
  return omega;
}

std::vector<double> SimConfig::grid() const {
  std::vector<double> g(static_cast<std::size_t>(grid_points));
  for (int i = 0; i < grid_points; ++i) {
    g[static_cast<std::size_t>(i)] = domain_end * static_cast<double>(i) / static_cast<double>(grid_points - 1);
  }
  return g;
}

double cluster1_mean(double t) { return 4.0 * t * t * std::exp(t / 25.0); }

namespace {

void check_config(const SimConfig& cfg) {
  if (!(cfg.threshold > 0.0)) throw Error(ErrorCode::InvalidConfig, "threshold must be positive");
  if (cfg.grid_points < 2 || !(cfg.domain_end > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "grid needs >= 2 points on a positive domain");
  }
  if (cfg.sparse_count < 1 || cfg.sparse_count > cfg.grid_points) {
    throw Error(ErrorCode::InvalidConfig, "sparse_count must lie in [1, grid_points]");
  }
  const double p1 = cfg.cluster_probs[0], p2 = cfg.cluster_probs[1];
  if (!(p1 >= 0.0 && p2 >= 0.0) || std::abs(p1 + p2 - 1.0) > 1e-12) {
    throw Error(ErrorCode::InvalidConfig, "cluster probabilities must be nonnegative and sum to 1");
  }
  if (cfg.noise_sd[0] < 0.0 || cfg.noise_sd[1] < 0.0 || cfg.beta_sd < 0.0 || !(cfg.precision_scale > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "standard deviations must be nonnegative");
  }
  const auto q = cfg.cluster2_q;
  if (cfg.cluster2_mean.size() != q || cfg.cluster2_precision.rows() != q || cfg.cluster2_precision.cols() != q) {
    throw Error(ErrorCode::InvalidConfig, "cluster-2 mean/precision dimensions disagree with q");
  }
  if (!cfg.cluster2_precision.isApprox(cfg.cluster2_precision.transpose())) {
    throw Error(ErrorCode::InvalidConfig, "cluster-2 precision must be symmetric");
  }
}

std::string unit_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "unit%04d", index + 1);
  return buf;
}

}  // namespace

Cohort simulate_cohort(const SimConfig& cfg, int n_units) {
  if (n_units < 1) throw Error(ErrorCode::InvalidArgument, "n_units must be >= 1");
  check_config(cfg);

  Eigen::LLT<Eigen::MatrixXd> precision_llt(cfg.cluster2_precision);
  if (precision_llt.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidConfig, "cluster-2 precision matrix is not positive definite");
  }
  const Eigen::MatrixXd cov2 =
      cfg.precision_scale * precision_llt.solve(Eigen::MatrixXd::Identity(cfg.cluster2_q, cfg.cluster2_q));
  const Eigen::MatrixXd cov2_factor = Eigen::LLT<Eigen::MatrixXd>(cov2).matrixL();

  const std::vector<double> grid = cfg.grid();
  const BasisSpec basis2 = make_basis(cfg.cluster2_q, cfg.domain_end);
  const Eigen::MatrixXd b2 = design_matrix(basis2, grid);
  const auto n_grid = grid.size();

  Cohort cohort;
  cohort.signals.resize(static_cast<std::size_t>(n_units));
  cohort.lifetimes.resize(static_cast<std::size_t>(n_units));

  constexpr int max_attempts = 1000;
  for (int l = 0; l < n_units; ++l) {
    // Draw order within a unit: environment, coefficients, noise, sparse indices.
    auto rng = substream(cfg.seed, static_cast<std::uint64_t>(l));
    std::vector<double> path(n_grid);
    std::size_t crossing = n_grid;
    int env = 1;
    for (int attempt = 0; attempt < max_attempts && crossing == n_grid; ++attempt) {
      env = uniform01(rng) < cfg.cluster_probs[0] ? 1 : 2;
      if (env == 1) {
        const double beta = cfg.beta_sd * standard_normal(rng);
        for (std::size_t i = 0; i < n_grid; ++i) {
          const double t = grid[i];
          path[i] = cluster1_mean(t) + beta * t * t;
        }
      } else {
        Eigen::VectorXd z(cfg.cluster2_q);
        for (int j = 0; j < cfg.cluster2_q; ++j) z[j] = standard_normal(rng);
        const Eigen::VectorXd gamma = cfg.cluster2_mean + cov2_factor * z;
        const Eigen::VectorXd curve = b2 * gamma;
        for (std::size_t i = 0; i < n_grid; ++i) path[i] = curve[static_cast<Eigen::Index>(i)];
      }
      const double sd = cfg.noise_sd[static_cast<std::size_t>(env - 1)];
      for (std::size_t i = 0; i < n_grid; ++i) path[i] += sd * standard_normal(rng);

      crossing = n_grid;
      for (std::size_t i = 0; i < n_grid; ++i) {
        if (path[i] >= cfg.threshold) {
          crossing = i;
          break;
        }
      }
    }
    if (crossing == n_grid) {
      throw Error(ErrorCode::InvalidConfig, "simulated units never reach the threshold on the grid");
    }

    std::vector<std::size_t> kept;
    if (cfg.mode == SamplingMode::complete) {
      kept.resize(crossing + 1);
      std::iota(kept.begin(), kept.end(), std::size_t{0});
    } else {
      // Sampled indices are redrawn when none precede the crossing so every
      // unit keeps at least one observation.
      std::vector<std::size_t> pool(n_grid);
      while (kept.empty()) {
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (int k = 0; k < cfg.sparse_count; ++k) {
          std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), n_grid - 1);
          std::swap(pool[static_cast<std::size_t>(k)], pool[pick(rng)]);
        }
        std::vector<std::size_t> chosen(pool.begin(), pool.begin() + cfg.sparse_count);
        std::sort(chosen.begin(), chosen.end());
        for (std::size_t idx : chosen) {
          if (idx <= crossing) kept.push_back(idx);
        }
      }
    }

    DegradationSignal& s = cohort.signals[static_cast<std::size_t>(l)];
    s.unit_id = unit_name(l);
    s.env_label = env;
    s.truncated = true;
    s.times.reserve(kept.size());
    s.values.reserve(kept.size());
    for (std::size_t idx : kept) {
      s.times.push_back(grid[idx]);
      s.values.push_back(path[idx]);
    }
    cohort.lifetimes[static_cast<std::size_t>(l)] = grid[crossing];
  }
  return cohort;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_double(const std::string& text, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad number '" + text + "'");
  }
}

std::optional<int> parse_label(const std::string& text, std::size_t line_no) {
  if (text.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size() || v < 1) throw std::invalid_argument("label");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_no) + ": env label must be a positive integer, got '" + text + "'");
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool read_header(std::istream& in, const std::vector<std::string>& expected, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "line 1: missing header in " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto fields = split_csv_line(line);
  for (auto& f : fields) f = trim(f);
  if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
  if (fields != expected) {
    throw Error(ErrorCode::ParseError, "line 1: unexpected header in " + path.string());
  }
  return true;
}

}  // namespace

std::vector<DegradationSignal> read_signals_csv(const std::filesystem::path& path, std::optional<double> threshold) {
  auto in = open_input(path);
  read_header(in, {"unit_id", "time", "value", "env"}, path);

  struct Row {
    double time, value;
  };
  struct Unit {
    std::vector<Row> rows;
    std::optional<int> label;
    bool label_seen = false;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Unit> units;

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() == 3) fields.emplace_back();
    if (fields.size() != 4) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 4 fields");
    }
    for (auto& f : fields) f = trim(f);
    if (fields[0].empty()) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty unit_id");
    const double t = parse_double(fields[1], line_no);
    const double v = parse_double(fields[2], line_no);
    const auto label = parse_label(fields[3], line_no);

    auto [it, inserted] = units.try_emplace(fields[0]);
    if (inserted) order.push_back(fields[0]);
    Unit& u = it->second;
    if (!u.label_seen) {
      u.label = label;
      u.label_seen = true;
    } else if (u.label != label) {
      throw Error(ErrorCode::InconsistentLabel,
                  "line " + std::to_string(line_no) + ": unit " + fields[0] + " has conflicting env labels");
    }
    u.rows.push_back({t, v});
  }

  std::vector<DegradationSignal> signals;
  signals.reserve(order.size());
  for (const auto& id : order) {
    Unit& u = units[id];
    std::stable_sort(u.rows.begin(), u.rows.end(), [](const Row& a, const Row& b) { return a.time < b.time; });
    DegradationSignal s;
    s.unit_id = id;
    s.env_label = u.label;
    for (std::size_t i = 0; i < u.rows.size(); ++i) {
      if (i > 0 && !(u.rows[i].time > u.rows[i - 1].time)) {
        throw Error(ErrorCode::NonMonotoneTime, "unit " + id + " has duplicated time " + format_double(u.rows[i].time));
      }
      s.times.push_back(u.rows[i].time);
      s.values.push_back(u.rows[i].value);
    }
    s.truncated = threshold.has_value() && s.values.back() >= *threshold;
    signals.push_back(std::move(s));
  }
  return signals;
}

void write_signals_csv(const std::vector<DegradationSignal>& signals, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "unit_id,time,value,env\n";
  for (const auto& s : signals) {
    validate_signal(s, true);
    const std::string env = s.env_label ? std::to_string(*s.env_label) : std::string();
    for (std::size_t i = 0; i < s.size(); ++i) {
      out << s.unit_id << ',' << format_double(s.times[i]) << ',' << format_double(s.values[i]) << ',' << env << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<TruthRecord> read_truth_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  read_header(in, {"unit_id", "lifetime", "env"}, path);
  std::vector<TruthRecord> out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() == 2) fields.emplace_back();
    if (fields.size() != 3) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 3 fields");
    for (auto& f : fields) f = trim(f);
    out.push_back({fields[0], parse_double(fields[1], line_no), parse_label(fields[2], line_no)});
  }
  return out;
}

void write_truth_csv(const std::vector<TruthRecord>& truth, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "unit_id,lifetime,env\n";
  for (const auto& r : truth) {
    out << r.unit_id << ',' << format_double(r.lifetime) << ',' << (r.env_label ? std::to_string(*r.env_label) : "")
        << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<TruthRecord> truth_records(const Cohort& cohort) {
  std::vector<TruthRecord> out;
  out.reserve(cohort.signals.size());
  for (std::size_t i = 0; i < cohort.signals.size(); ++i) {
    out.push_back({cohort.signals[i].unit_id, cohort.lifetimes[i], cohort.signals[i].env_label});
  }
  return out;
}

std::vector<double> align_lifetimes(const std::vector<DegradationSignal>& signals,
                                    const std::vector<TruthRecord>& truth) {
  std::unordered_map<std::string, double> by_id;
  for (const auto& r : truth) by_id[r.unit_id] = r.lifetime;
  std::vector<double> out;
  out.reserve(signals.size());
  for (const auto& s : signals) {
    const auto it = by_id.find(s.unit_id);
    if (it == by_id.end()) throw Error(ErrorCode::InvalidTruth, "no lifetime recorded for unit " + s.unit_id);
    out.push_back(it->second);
  }
  return out;
}

}  // namespace envdeg

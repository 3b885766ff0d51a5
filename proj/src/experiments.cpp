#include "sisda/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace sisda {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kSelective: return "selective";
    case Method::kOverConditioning: return "oc";
    case Method::kNaive: return "naive";
    case Method::kBonferroni: return "bonferroni";
    case Method::kDataSplitting: return "ds";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (Method m : all_methods())
    if (to_string(m) == s) return m;
  throw ConfigError("unknown method '" + std::string(s) +
                    "' (expected selective, oc, naive, bonferroni or ds)");
}

std::vector<Method> all_methods() {
  return {Method::kSelective, Method::kOverConditioning, Method::kNaive, Method::kBonferroni,
          Method::kDataSplitting};
}

void SimConfig::validate() const {
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (n_s < 1 || n_t < 1 || p < 1) throw ConfigError("n_s, n_t and p must be positive");
  if (criterion == CriterionKind::kFixed && (K < 1 || K > p))
    throw ConfigError("fixed-K selection needs 1 <= K <= p");
  if (!(z_mult > 0.0)) throw ConfigError("z-mult must be positive");
  if (methods.empty()) throw ConfigError("at least one method is required");
}

std::pair<DomainData, DomainData> generate_synthetic(const SimConfig& config,
                                                     std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](int n, double beta) {
    DomainData d{Matrix(n, config.p), Vector(n)};
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < config.p; ++k) d.X(i, k) = normal(rng);
    for (int i = 0; i < n; ++i) d.y[i] = beta * d.X.row(i).sum() + normal(rng);
    return d;
  };
  DomainData source = draw(config.n_s, config.beta_s);
  DomainData target = draw(config.n_t, config.beta_t);
  return {std::move(source), std::move(target)};
}

std::mt19937_64 trial_rng(std::uint64_t seed, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  return std::mt19937_64(seq);
}

RateEstimate wilson(int successes, int n, double z) {
  RateEstimate r;
  r.rejections = successes;
  r.trials = n;
  if (n == 0) {
    r.ci_hi = 1.0;
    return r;
  }
  const double ph = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (ph + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / denom;
  r.rate = ph;
  r.ci_lo = std::min(ph, std::max(0.0, centre - half));
  r.ci_hi = std::max(ph, std::min(1.0, centre + half));
  return r;
}

KsResult ks_uniform(std::vector<double> sample) {
  KsResult res;
  const auto n = sample.size();
  if (n == 0) return res;
  std::sort(sample.begin(), sample.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = std::clamp(sample[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
  }
  res.statistic = d;
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 1e-3) return res;
  double q = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  res.p_value = std::clamp(q, 0.0, 1.0);
  return res;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return x[i] < x[j]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("spearman: need two equal-length samples of size >= 2");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

TrialBatch run_trials(const SimConfig& config) {
  config.validate();
  TrialBatch batch;
  const InferenceConfig icfg{config.selection(), config.z_mult, {}, 1};
  const bool want_ds = std::find(config.methods.begin(), config.methods.end(),
                                 Method::kDataSplitting) != config.methods.end();

  for (int t = 0; t < config.trials; ++t) {
    auto rng = trial_rng(config.seed, t);
    const auto [source, target] = generate_synthetic(config, rng);
    const Eigen::Index n = source.n() + target.n();
    const Covariance sigma = Covariance::identity(n);
    const SeqfsDaProblem problem =
        SeqfsDaProblem::make(source.X, target.X, sigma, config.selection());
    const StackedResponse stacked = StackedResponse::make(source, target, sigma);
    const PipelineOutcome observed = run_pipeline(problem, stacked.y);
    const FeatureSet& M = observed.trace.final;
    if (M.empty()) {
      ++batch.skipped;
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, M.size() - 1);
    const std::size_t slot = pick(rng);
    const std::uint64_t ds_seed = rng();

    const SelectiveResult res = infer_feature(problem, stacked, observed, M[slot], icfg);
    if (res.error) {
      ++batch.skipped;
      continue;
    }
    if (!res.region.contains(res.z_obs))
      throw std::logic_error("harness: observed statistic outside its region");

    TrialRecord rec;
    rec.trial = t;
    rec.feature = res.feature;
    rec.z_obs = res.z_obs;
    rec.subproblems = res.subproblem_count;
    rec.forced_steps = res.forced_steps;
    rec.max_tiling_error = res.max_tiling_error;
    rec.seconds = res.wall_time.count();

    std::optional<DataSplitOutcome> ds;
    if (want_ds) {
      try {
        ds = p_data_splitting(source, target, sigma, config.selection(), ds_seed);
      } catch (const std::exception&) {
        ds.reset();
      }
    }
    for (Method m : config.methods) {
      switch (m) {
        case Method::kSelective: rec.p_values.emplace_back(res.p_selective); break;
        case Method::kOverConditioning: rec.p_values.emplace_back(res.p_oc); break;
        case Method::kNaive: rec.p_values.emplace_back(res.p_naive); break;
        case Method::kBonferroni: rec.p_values.emplace_back(res.p_bonferroni); break;
        case Method::kDataSplitting: {
          std::optional<double> pv;
          if (ds && !ds->selected.empty()) {
            // Same draw position, applied to the split's own selection.
            pv = ds->p_values[slot % ds->selected.size()];
          }
          rec.p_values.push_back(pv);
          break;
        }
      }
    }
    batch.records.push_back(std::move(rec));
  }
  return batch;
}

namespace {

StudyBlock summarize(const SimConfig& config, TrialBatch batch, bool uniformity,
                     bool advantage) {
  StudyBlock block;
  block.beta_t = config.beta_t;
  block.n_s = config.n_s;
  block.skipped = batch.skipped;
  const auto& recs = batch.records;

  std::vector<double> seconds;
  long long subproblems = 0;
  for (const auto& r : recs) {
    subproblems += r.subproblems;
    block.forced_steps += r.forced_steps;
    block.max_tiling_error = std::max(block.max_tiling_error, r.max_tiling_error);
    seconds.push_back(r.seconds);
  }
  if (!recs.empty()) {
    block.mean_subproblems = static_cast<double>(subproblems) / recs.size();
    block.mean_seconds = std::accumulate(seconds.begin(), seconds.end(), 0.0) / recs.size();
    block.median_seconds = median(seconds);
  }

  auto rejects = [&](const TrialRecord& r, std::size_t k) {
    return r.p_values[k] && *r.p_values[k] <= config.alpha;
  };
  std::size_t sel_index = config.methods.size();
  for (std::size_t k = 0; k < config.methods.size(); ++k) {
    int hits = 0, n = 0;
    for (const auto& r : recs) {
      if (!r.p_values[k]) continue;
      ++n;
      hits += rejects(r, k);
    }
    block.rates.push_back({config.methods[k], wilson(hits, n)});
    if (config.methods[k] == Method::kSelective) sel_index = k;
  }

  if (sel_index < config.methods.size()) {
    if (uniformity) {
      std::vector<double> ps;
      for (const auto& r : recs) ps.push_back(*r.p_values[sel_index]);
      block.selective_uniformity = ks_uniform(std::move(ps));
    }
    if (advantage) {
      for (std::size_t k = 0; k < config.methods.size(); ++k) {
        if (k == sel_index) continue;
        std::vector<double> diff;
        for (const auto& r : recs) {
          if (!r.p_values[k]) continue;
          diff.push_back(static_cast<double>(rejects(r, sel_index)) -
                         static_cast<double>(rejects(r, k)));
        }
        PairedDifference pd{config.methods[k]};
        if (diff.size() >= 2) {
          const double n = static_cast<double>(diff.size());
          const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
          double ss = 0.0;
          for (double d : diff) ss += (d - mean) * (d - mean);
          pd.difference = mean;
          pd.standard_error = std::sqrt(ss / (n - 1.0) / n);
        }
        block.selective_advantage.push_back(pd);
      }
    }
  }
  if (config.include_records) block.records = std::move(batch.records);
  return block;
}

}  // namespace

SimReport run_fpr_study(const SimConfig& config) {
  SimConfig cfg = config;
  cfg.beta_t = 0.0;
  SimReport report{"fpr", cfg, {}, std::nullopt};
  report.blocks.push_back(summarize(cfg, run_trials(cfg), true, false));
  return report;
}

SimReport run_tpr_study(const SimConfig& config) {
  if (config.beta_levels.empty()) throw ConfigError("TPR study needs at least one beta level");
  for (double b : config.beta_levels)
    if (b == 0.0) throw ConfigError("TPR is undefined at beta_t = 0; use simulate-fpr");
  SimReport report{"tpr", config, {}, std::nullopt};
  for (double b : config.beta_levels) {
    SimConfig cfg = config;
    cfg.beta_t = b;
    report.blocks.push_back(summarize(cfg, run_trials(cfg), false, true));
  }
  return report;
}

SimReport run_timing_study(const SimConfig& config) {
  if (config.ns_grid.size() < 2) throw ConfigError("timing study needs at least two n_s values");
  SimReport report{"time", config, {}, std::nullopt};
  std::vector<double> ns, counts;
  for (int n_s : config.ns_grid) {
    SimConfig cfg = config;
    cfg.n_s = n_s;
    cfg.methods = {Method::kSelective};
    report.blocks.push_back(summarize(cfg, run_trials(cfg), false, false));
    ns.push_back(n_s);
    counts.push_back(report.blocks.back().mean_subproblems);
  }
  report.subproblem_spearman = spearman(ns, counts);
  return report;
}

namespace {

nlohmann::ordered_json rate_json(const RateEstimate& r) {
  return {{"rejections", r.rejections}, {"trials", r.trials}, {"rate", r.rate},
          {"ci95", {r.ci_lo, r.ci_hi}}};
}

}  // namespace

nlohmann::ordered_json to_json(const SimReport& report) {
  using nlohmann::ordered_json;
  const SimConfig& c = report.config;
  ordered_json methods = ordered_json::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  ordered_json cfg = {{"n_s", c.n_s},
                      {"n_t", c.n_t},
                      {"p", c.p},
                      {"k", c.criterion == CriterionKind::kFixed ? ordered_json(c.K)
                                                                 : ordered_json(nullptr)},
                      {"beta_s", c.beta_s},
                      {"trials", c.trials},
                      {"alpha", c.alpha},
                      {"seed", c.seed},
                      {"direction", to_string(c.direction)},
                      {"criterion", to_string(c.criterion)},
                      {"z_mult", c.z_mult},
                      {"methods", methods}};
  if (report.study == "fpr") cfg["beta_t"] = 0.0;
  if (report.study == "tpr") cfg["beta_levels"] = c.beta_levels;
  if (report.study == "time") cfg["ns_grid"] = c.ns_grid;

  ordered_json blocks = ordered_json::array();
  for (const auto& b : report.blocks) {
    ordered_json jb = {{"n_s", b.n_s}, {"beta_t", b.beta_t}};
    ordered_json rates = ordered_json::object();
    for (const auto& r : b.rates) rates[std::string(to_string(r.method))] = rate_json(r.estimate);
    jb["rates"] = rates;
    if (b.selective_uniformity)
      jb["ks_uniform"] = {{"statistic", b.selective_uniformity->statistic},
                          {"p_value", b.selective_uniformity->p_value}};
    if (!b.selective_advantage.empty()) {
      ordered_json adv = ordered_json::object();
      for (const auto& d : b.selective_advantage)
        adv[std::string(to_string(d.versus))] = {{"difference", d.difference},
                                                 {"standard_error", d.standard_error}};
      jb["selective_advantage"] = adv;
    }
    jb["mean_subproblems"] = b.mean_subproblems;
    jb["forced_steps"] = b.forced_steps;
    jb["max_tiling_error"] = b.max_tiling_error;
    jb["skipped_trials"] = b.skipped;
    if (c.include_timing) {
      jb["mean_seconds_per_p"] = b.mean_seconds;
      jb["median_seconds_per_p"] = b.median_seconds;
    }
    if (c.include_records) {
      ordered_json recs = ordered_json::array();
      for (const auto& r : b.records) {
        ordered_json ps = ordered_json::object();
        for (std::size_t k = 0; k < c.methods.size() && k < r.p_values.size(); ++k)
          ps[std::string(to_string(c.methods[k]))] =
              r.p_values[k] ? ordered_json(*r.p_values[k]) : ordered_json(nullptr);
        ordered_json jr = {{"trial", r.trial},       {"feature", r.feature},
                           {"z_obs", r.z_obs},       {"p", ps},
                           {"subproblems", r.subproblems}};
        if (c.include_timing) jr["seconds"] = r.seconds;
        recs.push_back(jr);
      }
      jb["records"] = recs;
    }
    blocks.push_back(jb);
  }
  ordered_json out = {{"study", report.study}, {"config", cfg}, {"blocks", blocks}};
  if (report.subproblem_spearman) out["subproblem_spearman"] = *report.subproblem_spearman;
  return out;
}

std::string to_table(const SimReport& report) {
  std::ostringstream os;
  os << std::setprecision(4) << std::fixed;
  os << "study " << report.study << "  direction " << to_string(report.config.direction)
     << "  criterion " << to_string(report.config.criterion) << "  trials "
     << report.config.trials << "  alpha " << report.config.alpha << "\n";
  os << std::left << std::setw(8) << "n_s" << std::setw(8) << "beta_t" << std::setw(12)
     << "method" << std::right << std::setw(8) << "rate" << std::setw(10) << "ci_lo"
     << std::setw(10) << "ci_hi" << std::setw(8) << "n" << std::setw(12) << "subprobs";
  if (report.config.include_timing) os << std::setw(12) << "sec/p";
  os << "\n";
  for (const auto& b : report.blocks) {
    for (const auto& r : b.rates) {
      os << std::left << std::setw(8) << b.n_s << std::setw(8) << std::setprecision(2)
         << b.beta_t << std::setw(12) << to_string(r.method) << std::right
         << std::setprecision(4) << std::setw(8) << r.estimate.rate << std::setw(10)
         << r.estimate.ci_lo << std::setw(10) << r.estimate.ci_hi << std::setw(8)
         << r.estimate.trials << std::setw(12) << std::setprecision(1) << b.mean_subproblems;
      if (report.config.include_timing)
        os << std::setw(12) << std::setprecision(5) << b.mean_seconds;
      os << std::setprecision(4) << "\n";
    }
    if (b.selective_uniformity)
      os << "  ks(selective) D=" << b.selective_uniformity->statistic
         << " p=" << b.selective_uniformity->p_value << "\n";
  }
  if (report.subproblem_spearman)
    os << "spearman(n_s, subproblems) = " << *report.subproblem_spearman << "\n";
  return os.str();
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char ch : line) {
      if (ch == '"') {
        quoted = !quoted;
      } else if (ch == ',' && !quoted) {
        cells.push_back(cell);
        cell.clear();
      } else if (ch != '\r') {
        cell += ch;
      }
    }
    cells.push_back(cell);
    for (auto& c : cells) {
      const auto b = c.find_first_not_of(" \t");
      const auto e = c.find_last_not_of(" \t");
      c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
    }
    return cells;
  };
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("'" + path + "' is empty");
  table.header = split(line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (cells.size() != table.header.size())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(table.header.size()) + " fields, got " +
                        std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

std::vector<int> subsample_indices(int n, int k, std::uint64_t seed) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (k == 0 || k == n) return idx;
  if (k < 0 || k > n)
    throw ConfigError("cannot subsample " + std::to_string(k) + " of " + std::to_string(n) +
                      " rows");
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

double parse_cell(const std::string& cell, const std::string& column, std::size_t row) {
  double v = 0.0;
  std::size_t used = 0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size() || !std::isfinite(v))
    throw ConfigError("non-numeric value '" + cell + "' in column '" + column + "', row " +
                      std::to_string(row + 1));
  return v;
}

struct Layout {
  int response = -1;
  std::vector<int> features;
  std::vector<std::string> names;
};

Layout layout(const std::vector<std::string>& header, const std::string& response,
              const std::string& skip) {
  Layout l;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (header[c] == response) {
      l.response = c;
    } else if (header[c] != skip) {
      l.features.push_back(c);
      l.names.push_back(header[c]);
    }
  }
  if (l.response < 0) throw ConfigError("missing response column '" + response + "'");
  if (l.features.empty()) throw ConfigError("no feature columns besides the response");
  return l;
}

DomainData to_domain(const CsvTable& t, const Layout& l, const std::vector<std::size_t>& rows) {
  DomainData d{Matrix(rows.size(), l.features.size()), Vector(rows.size())};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& cells = t.rows[rows[i]];
    for (std::size_t k = 0; k < l.features.size(); ++k)
      d.X(i, k) = parse_cell(cells[l.features[k]], l.names[k], rows[i]);
    d.y[i] = parse_cell(cells[l.response], t.header[l.response], rows[i]);
  }
  return d;
}

DomainData take_rows(const DomainData& d, const std::vector<int>& rows) {
  DomainData out{Matrix(rows.size(), d.p()), Vector(rows.size())};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(i) = d.X.row(rows[i]);
    out.y[i] = d.y[rows[i]];
  }
  return out;
}

IngestResult finish(DomainData source, DomainData target, std::vector<std::string> names,
                    const IngestConfig& config) {
  if (source.n() < 2 || target.n() < 1)
    throw ConfigError("need at least two source rows and one target row");
  source = take_rows(source, subsample_indices(static_cast<int>(source.n()), config.n_s,
                                               config.seed));
  target = take_rows(target, subsample_indices(static_cast<int>(target.n()), config.n_t,
                                               config.seed + 1));
  const Eigen::RowVectorXd mean = source.X.colwise().mean();
  const Matrix centred = source.X.rowwise() - mean;
  const Eigen::RowVectorXd sd =
      (centred.colwise().squaredNorm() / static_cast<double>(source.n() - 1)).cwiseSqrt();
  for (Eigen::Index k = 0; k < sd.size(); ++k)
    if (!(sd[k] > 0.0)) throw ConfigError("constant column '" + names[k] + "' in source data");
  source.X = centred.array().rowwise() / sd.array();
  target.X = (target.X.rowwise() - mean).array().rowwise() / sd.array();
  if (config.center_response) {
    const double my = source.y.mean();
    source.y.array() -= my;
    target.y.array() -= my;
  }
  return {std::move(source), std::move(target), std::move(names)};
}

std::vector<std::size_t> all_rows(const CsvTable& t) {
  std::vector<std::size_t> r(t.rows.size());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

}  // namespace

IngestResult ingest_csv(const std::string& source_path, const std::string& target_path,
                        const IngestConfig& config) {
  const CsvTable s = read_csv(source_path);
  const CsvTable t = read_csv(target_path);
  const Layout ls = layout(s.header, config.response, "");
  const Layout lt = layout(t.header, config.response, "");
  // Target columns are matched to source columns by name.
  Layout aligned = lt;
  aligned.features.clear();
  for (const auto& name : ls.names) {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw ConfigError("target file lacks column '" + name + "'");
    aligned.features.push_back(static_cast<int>(it - t.header.begin()));
  }
  aligned.names = ls.names;
  return finish(to_domain(s, ls, all_rows(s)), to_domain(t, aligned, all_rows(t)), ls.names,
                config);
}

IngestResult ingest_csv(const std::string& path, const std::string& domain_column,
                        const std::string& source_label, const std::string& target_label,
                        const IngestConfig& config) {
  const CsvTable t = read_csv(path);
  const auto dc = std::find(t.header.begin(), t.header.end(), domain_column);
  if (dc == t.header.end()) throw ConfigError("missing domain column '" + domain_column + "'");
  const auto dcol = static_cast<std::size_t>(dc - t.header.begin());
  const Layout l = layout(t.header, config.response, domain_column);
  std::vector<std::size_t> src, tgt;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r][dcol] == source_label) src.push_back(r);
    else if (t.rows[r][dcol] == target_label) tgt.push_back(r);
  }
  if (src.empty()) throw ConfigError("no rows with domain label '" + source_label + "'");
  if (tgt.empty()) throw ConfigError("no rows with domain label '" + target_label + "'");
  return finish(to_domain(t, l, src), to_domain(t, l, tgt), l.names, config);
}

}  // namespace sisda

#include "sisda/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sisda/experiments.hpp"

namespace sisda::cli {

using nlohmann::ordered_json;

double round_significant(double v, int digits) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return std::strtod(buf, nullptr);
}

namespace {

struct Options {
  // data
  std::string source, target, data, domain_column = "domain", source_label = "source",
                                    target_label = "target", response = "y";
  bool center_response = false;
  int ns = 0, nt = 0, p = 5;
  // selection and inference
  std::string direction = "forward", criterion = "fixed";
  int k = -1;
  double alpha = 0.05;
  std::string sigma = "identity";
  double z_mult = 20.0;
  std::uint64_t seed = 42;
  std::string methods;
  std::string output = "json";
  int threads = 1;
  // simulation
  int trials = 500;
  double beta_s = 2.0;
  std::string beta_levels = "1,2,3,4";
  std::string ns_grid = "50,100,150,200";
  bool timing = false;
  bool records = false;
};

CriterionKind parse_criterion_or_throw(const std::string& s) {
  try {
    return parse_criterion(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof())
      throw ConfigError(std::string("bad value '") + item + "' in " + what);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string(what) + " is empty");
  return out;
}

std::vector<Method> parse_methods(const std::string& text) {
  if (text.empty()) return all_methods();
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (std::find(out.begin(), out.end(), parse_method(item)) == out.end())
      out.push_back(parse_method(item));
  return out;
}

SelectionSpec selection_from(const Options& o) {
  SelectionSpec s;
  try {
    s.direction = parse_direction(o.direction);
    s.criterion = parse_criterion(o.criterion);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (s.criterion == CriterionKind::kFixed) {
    if (o.k < 1) throw ConfigError("--criterion fixed requires --k");
    s.k = o.k;
  } else if (o.k >= 0) {
    throw ConfigError("--k conflicts with --criterion " + o.criterion +
                      " (the criterion chooses the model size)");
  }
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw ConfigError("--alpha must lie in (0, 1)");
  if (!(o.z_mult > 0.0)) throw ConfigError("--z-mult must be positive");
  if (o.threads < 1) throw ConfigError("--threads must be at least 1");
  return s;
}

Matrix read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open covariance file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    std::vector<double> row;
    double v;
    while (is >> v) row.push_back(v);
    if (!is.eof()) throw ConfigError("non-numeric entry in covariance file '" + path + "'");
    if (!row.empty()) rows.push_back(std::move(row));
  }
  const auto n = rows.size();
  Matrix m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != n) throw ConfigError("covariance file '" + path + "' is not square");
    for (std::size_t c = 0; c < n; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

SigmaSpec sigma_from(const std::string& text) {
  SigmaSpec s;
  if (text == "identity") return s;
  if (text == "estimate") {
    s.kind = SigmaSpec::Kind::kEstimate;
    return s;
  }
  if (text.rfind("scalar:", 0) == 0) {
    s.kind = SigmaSpec::Kind::kScalar;
    try {
      std::size_t used = 0;
      s.variance = std::stod(text.substr(7), &used);
      if (used != text.size() - 7) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("bad --sigma value '" + text + "'");
    }
    if (!(s.variance > 0.0)) throw ConfigError("--sigma scalar variance must be positive");
    return s;
  }
  if (text.rfind("file:", 0) == 0) {
    s.kind = SigmaSpec::Kind::kMatrix;
    s.matrix = read_matrix(text.substr(5));
    return s;
  }
  throw ConfigError("--sigma must be identity, scalar:<v>, file:<path> or estimate");
}

ordered_json p_json(double v) {
  if (std::isnan(v)) return nullptr;
  return round_significant(v, 6);
}

ordered_json endpoint_json(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round_significant(v, 9);
}

int analyze(const Options& o, std::ostream& out) {
  const SelectionSpec selection = selection_from(o);
  const std::vector<Method> methods = parse_methods(o.methods);
  if (o.output != "json" && o.output != "table")
    throw ConfigError("--output must be json or table");

  IngestConfig ic{o.response, o.ns, o.nt, o.seed, o.center_response};
  IngestResult data;
  if (!o.data.empty()) {
    if (!o.source.empty() || !o.target.empty())
      throw ConfigError("use either --data or --source/--target, not both");
    data = ingest_csv(o.data, o.domain_column, o.source_label, o.target_label, ic);
  } else {
    if (o.source.empty() || o.target.empty())
      throw ConfigError("analyze needs --source and --target (or --data)");
    data = ingest_csv(o.source, o.target, ic);
  }
  if (selection.criterion == CriterionKind::kFixed && selection.k > data.source.p())
    throw ConfigError("--k exceeds the number of features");

  const ResolvedSigma sigma = [&] {
    try {
      return resolve_sigma(sigma_from(o.sigma), data.source, data.target);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();

  InferenceConfig cfg{selection, o.z_mult, {}, o.threads};
  const AnalysisResult result =
      run_si_seqfs_da(data.source, data.target, sigma.covariance, cfg);

  std::optional<DataSplitOutcome> ds;
  if (std::find(methods.begin(), methods.end(), Method::kDataSplitting) != methods.end())
    ds = p_data_splitting(data.source, data.target, sigma.covariance, selection, o.seed);
  auto wants = [&](Method m) {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
  };

  ordered_json records = ordered_json::array();
  for (const auto& f : result.features) {
    ordered_json region = ordered_json::array();
    for (const auto& iv : f.region) region.push_back({endpoint_json(iv.lo), endpoint_json(iv.hi)});
    ordered_json p_ds = nullptr;
    if (ds) {
      const auto it = std::find(ds->selected.begin(), ds->selected.end(), f.feature);
      if (it != ds->selected.end()) {
        const auto& pv = ds->p_values[it - ds->selected.begin()];
        if (pv) p_ds = p_json(*pv);
      }
    }
    auto gated = [&](Method m, double v) { return wants(m) ? p_json(v) : ordered_json(nullptr); };
    ordered_json rec = {{"feature", f.feature},
                        {"name", data.feature_names[f.feature]},
                        {"beta_hat", round_significant(f.z_obs, 9)},
                        {"p_selective", gated(Method::kSelective, f.p_selective)},
                        {"p_naive", gated(Method::kNaive, f.p_naive)},
                        {"p_bonferroni", gated(Method::kBonferroni, f.p_bonferroni)},
                        {"p_oc", gated(Method::kOverConditioning, f.p_oc)},
                        {"p_ds", p_ds},
                        {"region", region},
                        {"approximate", sigma.approximate},
                        {"error", f.error ? ordered_json(*f.error) : ordered_json(nullptr)}};
    records.push_back(rec);
  }

  if (o.output == "json") {
    out << records.dump(2) << "\n";
  } else {
    out << std::left << std::setw(10) << "feature" << std::setw(16) << "name" << std::right
        << std::setw(14) << "beta_hat" << std::setw(13) << "p_selective" << std::setw(13)
        << "p_oc" << std::setw(13) << "p_naive" << std::setw(13) << "p_bonferroni"
        << std::setw(13) << "p_ds" << "  region\n";
    auto cell = [](const ordered_json& j) {
      std::ostringstream s;
      if (j.is_null()) s << "-";
      else s << std::setprecision(6) << j.get<double>();
      return s.str();
    };
    for (const auto& r : records) {
      out << std::left << std::setw(10) << r["feature"].get<int>() << std::setw(16)
          << r["name"].get<std::string>() << std::right << std::setw(14)
          << std::setprecision(6) << r["beta_hat"].get<double>() << std::setw(13)
          << cell(r["p_selective"]) << std::setw(13) << cell(r["p_oc"]) << std::setw(13)
          << cell(r["p_naive"]) << std::setw(13) << cell(r["p_bonferroni"]) << std::setw(13)
          << cell(r["p_ds"]) << "  ";
      for (const auto& iv : r["region"])
        out << "[" << std::setprecision(9) << iv[0].get<double>() << ", "
            << iv[1].get<double>() << "]";
      if (!r["error"].is_null()) out << "  error: " << r["error"].get<std::string>();
      out << "\n";
    }
    if (sigma.approximate) out << "note: sigma estimated from the data; p-values are approximate\n";
  }
  return kOk;
}

SimConfig sim_config(const Options& o) {
  SimConfig c;
  const SelectionSpec s = [&] {
    Options tmp = o;
    // Simulations default to K = 3 for fixed selection.
    if (parse_criterion_or_throw(o.criterion) == CriterionKind::kFixed && tmp.k < 0) tmp.k = 3;
    return selection_from(tmp);
  }();
  c.direction = s.direction;
  c.criterion = s.criterion;
  c.K = s.criterion == CriterionKind::kFixed ? s.k : 0;
  c.n_s = o.ns > 0 ? o.ns : 50;
  c.n_t = o.nt > 0 ? o.nt : 10;
  c.p = o.p;
  c.trials = o.trials;
  c.alpha = o.alpha;
  c.seed = o.seed;
  c.beta_s = o.beta_s;
  c.z_mult = o.z_mult;
  c.methods = parse_methods(o.methods);
  c.beta_levels = parse_list<double>(o.beta_levels, "--beta-levels");
  c.ns_grid = parse_list<int>(o.ns_grid, "--ns-grid");
  c.include_timing = o.timing;
  c.include_records = o.records;
  if (o.output != "json" && o.output != "table")
    throw ConfigError("--output must be json or table");
  c.validate();
  return c;
}

void emit(const SimReport& r, const std::string& output, std::ostream& out) {
  if (output == "json") out << to_json(r).dump(2) << "\n";
  else out << to_table(r);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{
      "Selective p-values for stepwise selection after optimal-transport domain adaptation",
      "sisda"};
  app.require_subcommand(1);
  Options o;

  auto add_selection = [&](CLI::App* sub) {
    sub->add_option("--direction", o.direction, "forward or backward")
        ->check(CLI::IsMember({"forward", "backward"}));
    sub->add_option("--criterion", o.criterion, "fixed, aic, bic or adjr2")
        ->check(CLI::IsMember({"fixed", "aic", "bic", "adjr2"}));
    sub->add_option("--k", o.k, "model size for fixed selection");
    sub->add_option("--alpha", o.alpha, "significance level");
    sub->add_option("--z-mult", o.z_mult, "scan half-width in units of the test sd");
    sub->add_option("--seed", o.seed, "random seed (SISDA_SEED overrides)");
    sub->add_option("--methods", o.methods, "comma list of selective,oc,naive,bonferroni,ds");
    sub->add_option("--output", o.output, "json or table");
  };

  CLI::App* analyze_cmd = app.add_subcommand("analyze", "test the features selected on a dataset");
  add_selection(analyze_cmd);
  analyze_cmd->add_option("--source", o.source, "source-domain CSV");
  analyze_cmd->add_option("--target", o.target, "target-domain CSV");
  analyze_cmd->add_option("--data", o.data, "single CSV with a domain column");
  analyze_cmd->add_option("--domain-column", o.domain_column,
                          "column naming the domain of each row (with --data)");
  analyze_cmd->add_option("--source-label", o.source_label, "domain value of source rows");
  analyze_cmd->add_option("--target-label", o.target_label, "domain value of target rows");
  analyze_cmd->add_option("--response", o.response, "response column name");
  analyze_cmd->add_flag("--center-response", o.center_response,
                        "subtract the source mean from both responses");
  analyze_cmd->add_option("--ns", o.ns, "subsample the source to this many rows");
  analyze_cmd->add_option("--nt", o.nt, "subsample the target to this many rows");
  analyze_cmd->add_option("--sigma", o.sigma, "identity, scalar:<v>, file:<path> or estimate");
  analyze_cmd->add_option("--threads", o.threads, "features tested concurrently");

  std::vector<CLI::App*> sims;
  const std::pair<const char*, const char*> studies[] = {
      {"simulate-fpr", "false positive rates on null synthetic data"},
      {"simulate-tpr", "true positive rates over target coefficient levels"},
      {"simulate-time", "runtime and sub-problem counts over source sizes"}};
  for (const auto& [name, description] : studies) {
    CLI::App* sub = app.add_subcommand(name, description);
    add_selection(sub);
    sub->add_option("--ns", o.ns, "source size");
    sub->add_option("--nt", o.nt, "target size");
    sub->add_option("--p", o.p, "number of features");
    sub->add_option("--trials", o.trials, "trials per setting");
    sub->add_option("--beta-s", o.beta_s, "source coefficient");
    sub->add_option("--beta-levels", o.beta_levels, "target coefficients (simulate-tpr)");
    sub->add_option("--ns-grid", o.ns_grid, "source sizes (simulate-time)");
    sub->add_flag("--timing", o.timing, "include wall-clock fields");
    sub->add_flag("--records", o.records, "include per-trial records");
    sims.push_back(sub);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (const char* env = std::getenv("SISDA_SEED")) {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (end == env || *end != '\0') throw ConfigError("SISDA_SEED must be an unsigned integer");
      o.seed = v;
    }
    if (analyze_cmd->parsed()) return analyze(o, out);
    SimConfig cfg = sim_config(o);
    // Wall time is the point of the timing study.
    if (sims[2]->parsed()) cfg.include_timing = true;
    if (sims[0]->parsed()) emit(run_fpr_study(cfg), o.output, out);
    else if (sims[1]->parsed()) emit(run_tpr_study(cfg), o.output, out);
    else emit(run_timing_study(cfg), o.output, out);
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace sisda::cli

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sisda/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = sisda::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("sisda_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

// y depends on x0 and x2 in both domains.
void write_domain(const std::string& path, int n, double shift, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::ofstream f(path);
  f << "x0,x1,x2,x3,y\n";
  f.precision(17);
  for (int i = 0; i < n; ++i) {
    double x[4];
    for (double& v : x) v = g(rng) + shift;
    f << x[0] << "," << x[1] << "," << x[2] << "," << x[3] << ","
      << 2.0 * x[0] - 1.5 * x[2] + g(rng) << "\n";
  }
}

json load(const std::string& path) {
  std::ifstream f(path);
  return json::parse(f);
}

bool type_matches(const json& v, const std::string& t) {
  if (t == "null") return v.is_null();
  if (t == "boolean") return v.is_boolean();
  if (t == "integer") return v.is_number_integer();
  if (t == "number") return v.is_number();
  if (t == "string") return v.is_string();
  if (t == "array") return v.is_array();
  if (t == "object") return v.is_object();
  return false;
}

// Validates the keywords the shipped schemas use; returns the first
// violation as a JSON-pointer-ish path, or an empty string.
std::string validate(const json& v, const json& s, const std::string& at = "$") {
  if (s.contains("type")) {
    bool ok = false;
    if (s["type"].is_array()) {
      for (const auto& t : s["type"]) ok = ok || type_matches(v, t.get<std::string>());
    } else {
      ok = type_matches(v, s["type"].get<std::string>());
    }
    if (!ok) return at + ": type";
  }
  if (s.contains("enum") &&
      std::find(s["enum"].begin(), s["enum"].end(), v) == s["enum"].end())
    return at + ": enum";
  if (v.is_number()) {
    if (s.contains("minimum") && v.get<double>() < s["minimum"].get<double>()) return at + ": min";
    if (s.contains("maximum") && v.get<double>() > s["maximum"].get<double>()) return at + ": max";
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
      return at + ": minItems";
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>())
      return at + ": maxItems";
    if (s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i) {
        auto r = validate(v[i], s["items"], at + "[" + std::to_string(i) + "]");
        if (!r.empty()) return r;
      }
  }
  if (v.is_object()) {
    if (s.contains("required"))
      for (const auto& k : s["required"])
        if (!v.contains(k.get<std::string>())) return at + "." + k.get<std::string>() + ": missing";
    for (const auto& [key, val] : v.items()) {
      const std::string here = at + "." + key;
      if (s.contains("properties") && s["properties"].contains(key)) {
        auto r = validate(val, s["properties"][key], here);
        if (!r.empty()) return r;
      } else if (s.contains("additionalProperties")) {
        const auto& ap = s["additionalProperties"];
        if (ap.is_boolean()) {
          if (!ap.get<bool>()) return here + ": unexpected";
        } else {
          auto r = validate(val, ap, here);
          if (!r.empty()) return r;
        }
      }
    }
  }
  return {};
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) { setenv(name, value, 1); }
  ~ScopedEnv() { unsetenv(name_); }

 private:
  const char* name_;
};

}  // namespace

TEST_CASE("round_significant") {
  CHECK(sisda::cli::round_significant(0.123456789, 6) == 0.123457);
  CHECK(sisda::cli::round_significant(123456.789, 6) == 123457.0);
  CHECK(sisda::cli::round_significant(-2.5e-9, 2) == doctest::Approx(-2.5e-9));
  CHECK(sisda::cli::round_significant(0.0, 6) == 0.0);
}

TEST_CASE("analyze emits schema-valid, reproducible records") {
  TempDir dir;
  write_domain(dir.file("s.csv"), 40, 0.3, 1);
  write_domain(dir.file("t.csv"), 12, -0.2, 2);
  const std::vector<std::string> args{"analyze",     "--source",    dir.file("s.csv"),
                                      "--target",    dir.file("t.csv"),
                                      "--direction", "forward",     "--criterion",
                                      "fixed",       "--k",         "2"};
  const Outcome a = run(args);
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const Outcome b = run(args);
  CHECK(a.out == b.out);

  const json records = json::parse(a.out);
  REQUIRE(records.size() == 2);
  CHECK(validate(records, load(SISDA_DOCS_DIR "/analyze.schema.json")) == "");
  std::vector<int> features;
  for (const auto& r : records) {
    features.push_back(r["feature"].get<int>());
    CHECK(r["error"].is_null());
    CHECK(r["approximate"] == false);
    const double z = r["beta_hat"].get<double>();
    bool inside = false;
    for (const auto& iv : r["region"])
      inside = inside || (iv[0].get<double>() <= z && z <= iv[1].get<double>());
    CHECK(inside);
    // Six significant digits.
    const double p = r["p_naive"].get<double>();
    if (p > 0) CHECK(sisda::cli::round_significant(p, 6) == p);
  }
  std::sort(features.begin(), features.end());
  CHECK(features == std::vector<int>{0, 2});
  CHECK(records[0]["name"].get<std::string>().front() == 'x');
}

TEST_CASE("analyze variants: methods subset, table, estimated sigma, single file") {
  TempDir dir;
  write_domain(dir.file("s.csv"), 30, 0.0, 3);
  write_domain(dir.file("t.csv"), 10, 0.0, 4);
  const Outcome sub = run({"analyze", "--source", dir.file("s.csv"), "--target",
                           dir.file("t.csv"), "--criterion", "bic", "--methods",
                           "selective,naive"});
  REQUIRE_MESSAGE(sub.code == 0, sub.err);
  for (const auto& r : json::parse(sub.out)) {
    CHECK(r["p_oc"].is_null());
    CHECK(r["p_ds"].is_null());
    CHECK(r["p_bonferroni"].is_null());
    CHECK(r["p_selective"].is_number());
  }

  const Outcome table = run({"analyze", "--source", dir.file("s.csv"), "--target",
                             dir.file("t.csv"), "--k", "2", "--output", "table", "--sigma",
                             "estimate"});
  REQUIRE_MESSAGE(table.code == 0, table.err);
  CHECK(table.out.find("p_selective") != std::string::npos);
  CHECK(table.out.find("approximate") != std::string::npos);

  std::ofstream combined(dir.file("all.csv"));
  combined << "dom,a,b,y\n";
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int i = 0; i < 36; ++i) {
    const double a = g(rng), b = g(rng);
    combined << (i % 4 ? "s" : "t") << "," << a << "," << b << "," << 3 * a + g(rng) << "\n";
  }
  combined.close();
  const Outcome single = run({"analyze", "--data", dir.file("all.csv"), "--domain-column",
                              "dom", "--source-label", "s", "--target-label", "t", "--k", "1"});
  REQUIRE_MESSAGE(single.code == 0, single.err);
  const json r = json::parse(single.out);
  REQUIRE(r.size() == 1);
  CHECK(r[0]["name"] == "a");
}

TEST_CASE("configuration errors exit with code 2") {
  TempDir dir;
  write_domain(dir.file("s.csv"), 20, 0.0, 5);
  write_domain(dir.file("t.csv"), 8, 0.0, 6);
  const Outcome conflict = run({"analyze", "--source", dir.file("s.csv"), "--target",
                                dir.file("t.csv"), "--criterion", "aic", "--k", "3"});
  CHECK(conflict.code == 2);
  CHECK(conflict.err.find("aic") != std::string::npos);
  CHECK(conflict.err.find("--k") != std::string::npos);
  CHECK(conflict.out.empty());

  CHECK(run({"analyze", "--source", dir.file("s.csv"), "--target", dir.file("t.csv"),
             "--k", "2", "--bogus"})
            .code == 2);
  const Outcome missing = run({"analyze", "--source", dir.file("none.csv"), "--target",
                               dir.file("t.csv"), "--k", "2"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("none.csv") != std::string::npos);
  CHECK(run({"analyze", "--source", dir.file("s.csv"), "--target", dir.file("t.csv")}).code ==
        2);
  CHECK(run({"analyze", "--source", dir.file("s.csv"), "--target", dir.file("t.csv"), "--k",
             "2", "--alpha", "1.5"})
            .code == 2);
  CHECK(run({"simulate-tpr", "--beta-levels", "0", "--trials", "1"}).code == 2);
  CHECK(run({}).code == 2);
}

TEST_CASE("simulate-fpr emits a schema-valid report and honours SISDA_SEED") {
  const std::vector<std::string> args{"simulate-fpr", "--ns", "20", "--nt", "6", "--p", "4",
                                      "--k", "2", "--trials", "6", "--seed", "42"};
  const Outcome a = run(args);
  REQUIRE_MESSAGE(a.code == 0, a.err);
  CHECK(run(args).out == a.out);
  const json report = json::parse(a.out);
  const json schema = load(SISDA_DOCS_DIR "/sim_report.schema.json");
  CHECK(validate(report, schema) == "");
  CHECK(report["study"] == "fpr");
  CHECK(report["config"]["seed"] == 42);
  CHECK(report["blocks"][0]["rates"]["selective"]["trials"].get<int>() +
            report["blocks"][0]["skipped_trials"].get<int>() ==
        6);

  {
    ScopedEnv env("SISDA_SEED", "7");
    const Outcome seeded = run(args);
    REQUIRE(seeded.code == 0);
    CHECK(json::parse(seeded.out)["config"]["seed"] == 7);
    std::vector<std::string> explicit_seed = args;
    explicit_seed.back() = "7";
    CHECK(run(explicit_seed).out == seeded.out);
  }
  {
    ScopedEnv env("SISDA_SEED", "seven");
    CHECK(run(args).code == 2);
  }

  // The invalid report is caught by the validator.
  json broken = report;
  broken["blocks"][0]["rates"]["selective"]["rate"] = 1.5;
  CHECK(validate(broken, schema) != "");
}

TEST_CASE("simulate-tpr and simulate-time reports are schema-valid") {
  const json schema = load(SISDA_DOCS_DIR "/sim_report.schema.json");
  const Outcome tpr = run({"simulate-tpr", "--ns", "20", "--nt", "6", "--p", "4", "--k", "2",
                           "--trials", "4", "--beta-levels", "1,3", "--records"});
  REQUIRE_MESSAGE(tpr.code == 0, tpr.err);
  const json t = json::parse(tpr.out);
  CHECK(validate(t, schema) == "");
  CHECK(t["blocks"].size() == 2);
  CHECK(t["blocks"][0].contains("selective_advantage"));
  CHECK(t["blocks"][0].contains("records"));

  const Outcome time = run({"simulate-time", "--ns-grid", "20,30", "--nt", "6", "--p", "4",
                            "--k", "2", "--trials", "2", "--criterion", "fixed"});
  REQUIRE_MESSAGE(time.code == 0, time.err);
  const json m = json::parse(time.out);
  CHECK(validate(m, schema) == "");
  CHECK(m["blocks"][0].contains("mean_seconds_per_p"));
  CHECK(m.contains("subproblem_spearman"));

  const Outcome table = run({"simulate-fpr", "--ns", "20", "--nt", "6", "--p", "4", "--k",
                             "2", "--trials", "3", "--output", "table"});
  REQUIRE(table.code == 0);
  CHECK(table.out.find("selective") != std::string::npos);
}

TEST_CASE("simulate-fpr with the documented default-scale arguments") {
  const Outcome r = run({"simulate-fpr", "--ns", "50", "--nt", "10", "--p", "5", "--k", "3",
                         "--trials", "120", "--seed", "42"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json report = json::parse(r.out);
  CHECK(validate(report, load(SISDA_DOCS_DIR "/sim_report.schema.json")) == "");
  CHECK(report["blocks"][0]["forced_steps"] == 0);
  CHECK(report["blocks"][0]["max_tiling_error"].get<double>() < 1e-8);
}

#pragma once

// Synthetic studies (false/true positive rates, timing) and CSV ingestion.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sisda/inference.hpp"

namespace sisda {

enum class Method { kSelective, kOverConditioning, kNaive, kBonferroni, kDataSplitting };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);
std::vector<Method> all_methods();

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SimConfig {
  int n_s = 50;
  int n_t = 10;
  int p = 5;
  int K = 3;
  double beta_s = 2.0;
  double beta_t = 0.0;
  int trials = 500;
  double alpha = 0.05;
  std::uint64_t seed = 42;
  std::vector<Method> methods = all_methods();
  Direction direction = Direction::kForward;
  CriterionKind criterion = CriterionKind::kFixed;
  double z_mult = 20.0;
  /// TPR study levels; timing-study source sizes.
  std::vector<double> beta_levels{1.0, 2.0, 3.0, 4.0};
  std::vector<int> ns_grid{50, 100, 150, 200};
  /// Wall-clock fields make a report non-reproducible, so they are opt-in.
  bool include_timing = false;
  bool include_records = false;

  SelectionSpec selection() const { return {direction, criterion, K}; }
  void validate() const;
};

/// Y = X beta + eps with X ~ N(0, I_p), eps ~ N(0, 1), beta constant.
std::pair<DomainData, DomainData> generate_synthetic(const SimConfig& config,
                                                     std::mt19937_64& rng);

/// Independent stream for one trial.
std::mt19937_64 trial_rng(std::uint64_t seed, int trial);

struct RateEstimate {
  int rejections = 0;
  int trials = 0;
  double rate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Wilson score interval; z = 1.96 for 95%.
RateEstimate wilson(int successes, int n, double z = 1.96);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1).
KsResult ks_uniform(std::vector<double> sample);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// One tested feature of one trial.
struct TrialRecord {
  int trial = 0;
  int feature = -1;
  double z_obs = 0.0;
  /// Indexed like SimConfig::methods; nullopt when the method had no test.
  std::vector<std::optional<double>> p_values;
  int subproblems = 0;
  int forced_steps = 0;
  double max_tiling_error = 0.0;
  double seconds = 0.0;
};

struct TrialBatch {
  std::vector<TrialRecord> records;
  int skipped = 0;
};

/// Runs `trials` independent trials of the configured pipeline at the given
/// (n_s, beta_t), testing one uniformly drawn selected feature per trial.
TrialBatch run_trials(const SimConfig& config);

struct MethodRate {
  Method method;
  RateEstimate estimate;
};

struct PairedDifference {
  Method versus;
  double difference = 0.0;
  double standard_error = 0.0;
};

struct StudyBlock {
  double beta_t = 0.0;
  int n_s = 0;
  std::vector<MethodRate> rates;
  std::optional<KsResult> selective_uniformity;
  /// TPR blocks: selective minus each baseline, paired over trials.
  std::vector<PairedDifference> selective_advantage;
  double mean_subproblems = 0.0;
  int forced_steps = 0;
  double max_tiling_error = 0.0;
  int skipped = 0;
  double mean_seconds = 0.0;
  double median_seconds = 0.0;
  std::vector<TrialRecord> records;
};

struct SimReport {
  std::string study;  // "fpr", "tpr" or "time"
  SimConfig config;
  std::vector<StudyBlock> blocks;
  /// Timing study: Spearman between n_s and mean sub-problem count.
  std::optional<double> subproblem_spearman;
};

SimReport run_fpr_study(const SimConfig& config);
SimReport run_tpr_study(const SimConfig& config);
SimReport run_timing_study(const SimConfig& config);

nlohmann::ordered_json to_json(const SimReport& report);
std::string to_table(const SimReport& report);

struct IngestConfig {
  std::string response = "y";
  /// 0 keeps every row.
  int n_s = 0;
  int n_t = 0;
  std::uint64_t seed = 0;
  bool center_response = false;
};

struct IngestResult {
  DomainData source;
  DomainData target;
  std::vector<std::string> feature_names;
};

/// Parses a headered CSV into column names and string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& path);

IngestResult ingest_csv(const std::string& source_path, const std::string& target_path,
                        const IngestConfig& config);
IngestResult ingest_csv(const std::string& path, const std::string& domain_column,
                        const std::string& source_label, const std::string& target_label,
                        const IngestConfig& config);

/// Seeded choice of `k` of `n` indices, sorted; all indices when k is 0 or n.
std::vector<int> subsample_indices(int n, int k, std::uint64_t seed);

}  // namespace sisda

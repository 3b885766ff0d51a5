#pragma once

// Selective inference for features chosen by sequential selection after
// optimal-transport domain adaptation: test directions, the line scan that
// tiles the test-statistic axis into sub-problems, truncated-normal p-values
// and the baseline p-values.

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sisda/numkernel.hpp"
#include "sisda/ot.hpp"
#include "sisda/seqfs.hpp"

namespace sisda {

/// Stacked (y^s; y^t) with its block-diagonal covariance.
struct StackedResponse {
  Vector y;
  Covariance sigma;
  int n_s = 0;
  int n_t = 0;

  static StackedResponse make(const DomainData& source, const DomainData& target,
                              Covariance sigma);
};

/// eta, and the line a + b z through the observed data along eta.
struct TestDirection {
  int feature = -1;
  Vector eta;
  Vector a;
  Vector b;
  double z_obs = 0.0;
  double variance = 0.0;
};

/// eta_j = (0; X_M (X_M^T X_M)^{-1} e_j), b = Sigma eta / (eta^T Sigma eta),
/// a = (I - b eta^T) y. `j` is a feature index contained in `M`.
TestDirection build_direction(int j, const FeatureSet& M, const Matrix& Xt_target,
                              const StackedResponse& stacked);

/// Everything the pipeline needs that does not depend on the response.
struct SeqfsDaProblem {
  Matrix Xs;
  Matrix Xt;
  Matrix X;  // (Xs; Xt)
  TransportCost cost;
  Covariance sigma;
  SelectionSpec selection;

  static SeqfsDaProblem make(const Matrix& Xs, const Matrix& Xt, Covariance sigma,
                             SelectionSpec selection);
  int n_s() const { return static_cast<int>(Xs.rows()); }
  int n_t() const { return static_cast<int>(Xt.rows()); }
};

struct PipelineOutcome {
  TransportSolution transport;
  SelectionTrace trace;
};

/// OT-based adaptation followed by sequential selection on the stacked
/// transformed data.
PipelineOutcome run_pipeline(const SeqfsDaProblem& problem, const Vector& stacked_y,
                             const std::vector<int>* warm_basis = nullptr);

struct ScanConfig {
  /// Minimum advance; also the probe offset past each breakpoint.
  double step_floor = 1e-9;
  std::size_t max_subproblems = 2'000'000;
};

/// One tile of the scan: constant transport basis and selection path.
struct Subproblem {
  std::vector<int> basis;
  SelectionTrace trace;
  Interval interval;
};

struct ScanResult {
  std::vector<Subproblem> subproblems;
  int forced_steps = 0;
  int transport_bases = 0;
  /// Largest gap or overlap between consecutive tiles.
  double max_tiling_error = 0.0;
};

ScanResult divide_and_conquer(const SeqfsDaProblem& problem, const Vector& a,
                              const Vector& b, double z_min, double z_max,
                              const ScanConfig& config = {});

/// Union of the tiles whose selected set equals `observed` (set equality).
IntervalSet assemble_region(std::span<const Subproblem> subproblems,
                            const FeatureSet& observed);

/// P(|Z| >= |z_obs| | Z in region) for Z ~ N(0, variance).
double truncated_p(double z_obs, double variance, const IntervalSet& region);

double p_naive(double z_obs, double variance);

/// p! / (p - K)!.
double bonferroni_factor(int p, int K);
double p_bonferroni(double z_obs, double variance, int p, int K);

double p_over_conditioning(double z_obs, double variance, const Interval& subproblem);

struct InferenceConfig {
  SelectionSpec selection;
  double z_mult = 20.0;
  ScanConfig scan;
  int threads = 1;
};

struct SelectiveResult {
  int feature = -1;
  double z_obs = 0.0;  // also beta_hat
  double variance = 0.0;
  IntervalSet region;
  Interval oc_interval;
  double z_min = 0.0;
  double z_max = 0.0;
  double p_selective = 0.0;
  double p_naive = 0.0;
  double p_bonferroni = 0.0;
  double p_oc = 0.0;
  int subproblem_count = 0;
  int forced_steps = 0;
  double max_tiling_error = 0.0;
  std::chrono::duration<double> wall_time{};
  std::optional<std::string> error;
};

/// Full inference for one feature of the observed model.
SelectiveResult infer_feature(const SeqfsDaProblem& problem, const StackedResponse& stacked,
                              const PipelineOutcome& observed, int feature,
                              const InferenceConfig& config);

/// Runs adaptation + selection on the observed data and tests every
/// selected feature. A failing feature is reported with `error` set.
struct AnalysisResult {
  PipelineOutcome observed;
  std::vector<SelectiveResult> features;
};

AnalysisResult run_si_seqfs_da(const DomainData& source, const DomainData& target,
                               const Covariance& sigma, const InferenceConfig& config);

/// Noise-model choices for the stacked response.
struct SigmaSpec {
  enum class Kind { kIdentity, kScalar, kMatrix, kEstimate };
  Kind kind = Kind::kIdentity;
  double variance = 1.0;
  Matrix matrix;
};

struct ResolvedSigma {
  Covariance covariance;
  /// True when the variance was estimated from the same data.
  bool approximate = false;
};

ResolvedSigma resolve_sigma(const SigmaSpec& spec, const DomainData& source,
                            const DomainData& target);

/// Covariance restricted to the listed stacked indices.
Covariance restrict_covariance(const Covariance& sigma, const std::vector<int>& indices);

struct DataSplitOutcome {
  FeatureSet selected;
  /// Naive p-values on the held-out target half; nullopt when that half
  /// cannot support the fit.
  std::vector<std::optional<double>> p_values;
};

/// Half of each domain (seeded shuffle) drives adaptation and selection; the
/// other target half gives naive p-values for the selected features.
DataSplitOutcome p_data_splitting(const DomainData& source, const DomainData& target,
                                  const Covariance& sigma, const SelectionSpec& selection,
                                  std::uint64_t seed);

}  // namespace sisda

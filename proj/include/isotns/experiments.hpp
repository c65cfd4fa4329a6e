#ifndef ISOTNS_EXPERIMENTS_HPP
#define ISOTNS_EXPERIMENTS_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "isotns/gradient.hpp"

namespace isotns {

struct FitDomainError : std::runtime_error {
  explicit FitDomainError(const std::string& m) : std::runtime_error(m) {}
};

/// Monte Carlo scan configuration. Every field maps to one config-file key
/// and one CLI flag of the same name.
struct ExperimentConfig {
  AnsatzSpec spec;
  std::int64_t width = 0;  // interaction width; 0 picks the family default
  std::int64_t n_samples = 1000;
  std::uint64_t seed = 1;
  std::vector<std::int64_t> positions;  // empty = all sites/layers
  std::int64_t fit_lo = 2;
  std::int64_t fit_hi = -1;  // -1 = default window upper end
  std::int64_t workers = 1;
  std::string out_csv;
  std::string out_json;

  std::int64_t interaction_width() const;
  std::vector<std::int64_t> probe_positions() const;
  void validate() const;
  std::string canonical_text() const;  // key=value lines, sorted
  std::uint64_t config_hash() const;
};

/// Per-position Monte Carlo statistics of (1/N) Tr(g^dag g).
struct VarianceRecord {
  std::string family;
  std::int64_t chi = 0, d = 0, size = 0;
  std::int64_t position = 0;  // site j (mps) or layer tau (hierarchical)
  bool homogeneous = false;
  std::int64_t trotter = 0;
  std::int64_t n_samples = 0;
  double mean = 0.0;
  double stderr_mean = 0.0;  // sample stddev / sqrt(n)
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

std::vector<VarianceRecord> run_mps_scan(const ExperimentConfig& cfg);
std::vector<VarianceRecord> run_layer_scan(const ExperimentConfig& cfg);

/// Weighted log-linear fit of mean variance vs layer index; factor = exp(slope).
struct DecayFit {
  double factor = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // 95% CI on the factor
  double r2 = 0.0;
  std::int64_t window_lo = 0, window_hi = 0;
  std::int64_t n_points = 0;
};

DecayFit fit_decay(const std::vector<VarianceRecord>& records, std::int64_t lo, std::int64_t hi);

struct ChiScanRow {
  std::int64_t chi = 0;
  DecayFit fit;
  double tau1_mean = 0.0, tau1_stderr = 0.0;
};

std::vector<ChiScanRow> run_chi_scan(const ExperimentConfig& base,
                                     const std::vector<std::int64_t>& chis);

// ---- emission ----

std::string records_to_csv(const std::vector<VarianceRecord>& records);
std::vector<VarianceRecord> records_from_csv(const std::string& text);
void emit_records(const std::vector<VarianceRecord>& records, const std::string& format,
                  const std::string& path);
/// Run manifest: config (all keys), config hash, code version, wall time.
std::string manifest_json(const ExperimentConfig& cfg, double wall_seconds,
                          std::int64_t n_records);

/// Mean and standard error of a per-sample value vector (Welford pass).
std::pair<double, double> mean_stderr(const std::vector<double>& values);

/// Deterministic parallel map: values[k] = fn(k) evaluated on `workers`
/// threads; the result is independent of the worker count.
std::vector<double> parallel_samples(std::int64_t count, std::int64_t workers,
                                     const std::function<double(std::int64_t)>& fn);

/// Per-sample values for one position across a whole scan, exposed for the
/// statistical tests.
std::vector<std::vector<double>> scan_sample_values(const ExperimentConfig& cfg);

const char* code_version();

}  // namespace isotns

#endif

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gfetld/baselines.hpp"
#include "gfetld/models.hpp"
#include "gfetld/sampler.hpp"

namespace gfetld {

// Fully resolved experiment configuration. Built from per-experiment defaults
// plus flat `key = value` entries (config file and/or command-line overrides).
struct ExperimentConfig {
    std::string experiment;  // gaussian-location | uniform-location | lorenz96

    SamplerConfig sampler;

    // "median" (observed data), "median-sim" (probe simulations at the prior
    // mean, for single-row data), or a numeric literal for an explicit gamma.
    std::string bandwidth = "median";
    int probe_count = 64;

    int data_size = 1;  // N observations (rows)
    Eigen::VectorXd theta_true;
    double outlier_mean = 10.0;
    double outlier_sd = 1.0;
    std::vector<double> epsilons{0.0};  // contamination level(s)
    bool sweeping = false;              // emit sweep.csv over epsilons
    int repetitions = 1;                // L

    std::uint64_t data_seed = 0;  // separate data-stream base when set
    bool has_data_seed = false;

    Eigen::VectorXd prior_mean;
    Eigen::VectorXd prior_var;

    bool baselines = true;    // conjugate (gaussian) / grid (uniform) reference
    double half_width = 1.0;  // uniform likelihood half-width
    GridSpec grid;
    double floor_likelihood = 1e-12;

    Lorenz96Config lorenz;

    std::string output_dir;

    std::string model_name() const;
    std::unique_ptr<GenerativeModel> make_experiment_model() const;
    void validate() const;
};

// One `key = value` pair with a location string for diagnostics.
struct ConfigEntry {
    std::string key;
    std::string value;
    std::string where;
};

// Defaults for a named experiment; throws ConfigError on unknown names.
ExperimentConfig default_config(const std::string& experiment);

// Parses flat `key = value` lines ('#' comments, blank lines allowed).
// `source` names the file in diagnostics.
std::vector<ConfigEntry> parse_config_text(const std::string& text,
                                           const std::string& source);
std::vector<ConfigEntry> parse_config_file(const std::string& path);

// Parses one command-line `key=value` token.
ConfigEntry parse_override(const std::string& token, int position);

// Applies a single entry to an already-defaulted config; ConfigError carries
// the entry's location. The `experiment` key itself is handled by resolve.
void apply_entry(ExperimentConfig& cfg, const ConfigEntry& entry);

// Finds the `experiment` key, loads its defaults, applies the remaining
// entries in order, validates.
ExperimentConfig resolve_config(const std::vector<ConfigEntry>& entries);

// Ordered key=value echo of a resolved config; feeding the lines back
// through resolve_config reproduces the run exactly.
std::vector<std::pair<std::string, std::string>> resolved_config(
    const ExperimentConfig& cfg);

// 17-significant-digit decimal form, round-trip safe.
std::string format_real(double v);

// Per-(sweep value, repetition) derived seeds. Data and contamination streams
// hang off the data-seed base (the master seed unless data_seed overrides it);
// chain and probe streams always hang off the master seed.
struct RunSeeds {
    std::uint64_t data = 0;
    std::uint64_t contaminate = 0;
    std::uint64_t chain = 0;
    std::uint64_t probe = 0;
};
RunSeeds derive_run_seeds(const ExperimentConfig& cfg, int sweep_index, int rep);

// Fresh observations for one run at the given contamination level.
SampleBatch generate_data(const ExperimentConfig& cfg, const GenerativeModel& model,
                          double epsilon, const RunSeeds& seeds);

// Resolves the kernel bandwidth for one run per cfg.bandwidth policy.
double resolve_bandwidth(const ExperimentConfig& cfg, const GenerativeModel& model,
                         const SampleBatch& data, const RunSeeds& seeds);

struct BaselineRecord {
    bool present = false;
    std::string method;      // "conjugate" | "grid"
    double estimate = 0.0;   // point estimate scored against theta_true
    double variance = 0.0;   // conjugate posterior variance
    double grid_mean = 0.0;  // raw grid mean before degenerate completion
    bool degenerate = false;
};

struct RunRecord {
    double epsilon = 0.0;
    int rep = 0;
    std::uint64_t data_seed = 0;
    std::uint64_t chain_seed = 0;
    double bandwidth = 0.0;
    Eigen::VectorXd posterior_mean;
    bool failed = false;
    std::string error;
    BaselineRecord baseline;
    double data_seconds = 0.0;
    double chain_seconds = 0.0;
    double baseline_seconds = 0.0;
};

struct SweepRow {
    double epsilon = 0.0;
    std::string method;
    double posterior_mean = 0.0;  // averaged over repetitions
    double rmse = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<std::pair<std::string, std::string>> config_echo;
    std::vector<std::string> param_names;
    std::vector<RunRecord> runs;
    Eigen::MatrixXd final_ensemble;  // last non-failed run's particles
    bool has_final_ensemble = false;
    Eigen::VectorXd rmse_per_param;  // over all non-failed runs
    std::vector<SweepRow> sweep;
    int successful_runs = 0;
    bool all_failed = false;
};

// Runs L repetitions per contamination level; a diverged chain marks only its
// own run as failed and the remaining runs continue.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// report.json contents; wall-clock quantities live only under "timing".
std::string report_to_json(const ExperimentReport& report);

// Writes ensemble_final.csv, rmse.csv, sweep.csv (when sweeping),
// report.json and timing.csv into `directory` (created if needed).
// I/O failures raise IoError naming the path.
void emit_outputs(const ExperimentReport& report, const std::string& directory);

}  // namespace gfetld

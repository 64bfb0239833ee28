#include "gfetld/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace gfetld {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const ConfigEntry& e, const char* wanted) {
    throw ConfigError(e.where + ": expected " + wanted + " for '" + e.key +
                      "', got '" + e.value + "'");
}

double parse_real(const ConfigEntry& e) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(e.value, &pos);
        if (pos != e.value.size() || !std::isfinite(v)) bad_value(e, "a real number");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(e, "a real number");
    }
}

int parse_int(const ConfigEntry& e) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(e.value, &pos);
        if (pos != e.value.size() || v < std::numeric_limits<int>::min() ||
            v > std::numeric_limits<int>::max())
            bad_value(e, "an integer");
        return static_cast<int>(v);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(e, "an integer");
    }
}

std::uint64_t parse_u64(const ConfigEntry& e) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(e.value, &pos);
        if (pos != e.value.size() || (!e.value.empty() && e.value[0] == '-'))
            bad_value(e, "an unsigned integer");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(e, "an unsigned integer");
    }
}

bool parse_bool(const ConfigEntry& e) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    bad_value(e, "true/false");
}

std::vector<double> parse_real_list(const ConfigEntry& e) {
    std::vector<double> out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        ConfigEntry part{e.key, trim(item), e.where};
        if (part.value.empty()) bad_value(e, "a comma-separated list of reals");
        out.push_back(parse_real(part));
    }
    if (out.empty()) bad_value(e, "a comma-separated list of reals");
    return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                             static_cast<Eigen::Index>(v.size()));
}

std::string join_reals(const Eigen::VectorXd& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += format_real(v[i]);
    }
    return s;
}

std::string join_reals(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += format_real(v[i]);
    }
    return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string ExperimentConfig::model_name() const {
    if (experiment == "gaussian-location") return "gaussian_location";
    if (experiment == "uniform-location") return "uniform_location";
    if (experiment == "lorenz96") return "lorenz96_stochastic";
    throw ConfigError("unknown experiment '" + experiment + "'");
}

std::unique_ptr<GenerativeModel> ExperimentConfig::make_experiment_model() const {
    return make_model(model_name(), lorenz);
}

void ExperimentConfig::validate() const {
    model_name();  // throws on unknown experiment
    try {
        sampler.validate();
        if (experiment == "lorenz96") lorenz.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (data_size < 1) throw ConfigError("data_size must be >= 1");
    if (epsilons.empty()) throw ConfigError("contamination sweep list is empty");
    for (double eps : epsilons)
        if (!(eps >= 0.0 && eps <= 1.0))
            throw ConfigError("epsilon must lie in [0, 1], got " +
                              format_real(eps));
    if (experiment == "lorenz96" &&
        (sweeping || epsilons.size() != 1 || epsilons[0] != 0.0))
        throw ConfigError("contamination is not defined for lorenz96");
    if (!(outlier_sd > 0.0)) throw ConfigError("outlier_sd must be > 0");
    if (bandwidth != "median" && bandwidth != "median-sim") {
        ConfigEntry probe{"bandwidth", bandwidth, "config"};
        if (!(parse_real(probe) > 0.0))
            throw ConfigError("explicit bandwidth must be > 0");
    }
    if (bandwidth == "median-sim" && probe_count < 2)
        throw ConfigError("median-sim bandwidth needs probe_count >= 2");

    const Eigen::Index d =
        experiment == "lorenz96" ? 4 : static_cast<Eigen::Index>(1);
    if (theta_true.size() != d)
        throw ConfigError("theta_true must have " + std::to_string(d) +
                          " component(s)");
    if (prior_mean.size() != d || prior_var.size() != d)
        throw ConfigError("prior_mean/prior_var must have " + std::to_string(d) +
                          " component(s)");
    if (!(prior_var.array() > 0.0).all())
        throw ConfigError("prior_var components must be > 0");
    if (!(half_width > 0.0)) throw ConfigError("half_width must be > 0");
    if (grid.points < 2 || !(grid.hi > grid.lo))
        throw ConfigError("grid must be ascending with >= 2 points");
    if (!(floor_likelihood > 0.0))
        throw ConfigError("floor_likelihood must be > 0");
}

ExperimentConfig default_config(const std::string& experiment) {
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    if (experiment == "gaussian-location") {
        cfg.sampler.particle_count = 10;
        cfg.sampler.sims_per_particle = 20;
        cfg.sampler.step_size = 1e-3;
        cfg.sampler.beta = 200.0;
        cfg.sampler.n_steps = 4000;
        // The median heuristic on a contaminated mixture tracks the
        // cluster gap, washing out the clean mode; a fixed data-scale
        // bandwidth keeps the loss landscape stable across epsilon.
        cfg.bandwidth = "3.3";
        cfg.data_size = 150;
        cfg.theta_true = Eigen::VectorXd::Zero(1);
        cfg.epsilons = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7};
        cfg.sweeping = true;
        cfg.repetitions = 10;
        cfg.prior_mean = Eigen::VectorXd::Constant(1, 2.0);
        cfg.prior_var = Eigen::VectorXd::Ones(1);
    } else if (experiment == "uniform-location") {
        cfg.sampler.particle_count = 10;
        cfg.sampler.sims_per_particle = 20;
        cfg.sampler.step_size = 1e-3;
        cfg.sampler.beta = 200.0;
        cfg.sampler.n_steps = 4000;
        cfg.bandwidth = "median";
        cfg.data_size = 100;
        cfg.theta_true = Eigen::VectorXd::Ones(1);
        cfg.epsilons = {0.0, 0.1, 0.2, 0.3, 0.4};
        cfg.sweeping = true;
        cfg.repetitions = 10;
        cfg.prior_mean = Eigen::VectorXd::Constant(1, 2.0);
        cfg.prior_var = Eigen::VectorXd::Ones(1);
    } else if (experiment == "lorenz96") {
        cfg.sampler.particle_count = 200;
        // 16 simulations per particle: with fewer (e.g. 10) the seed-pair
        // average in the drift is noisy enough to displace the stationary
        // point of the weakly identified AR coefficient.
        cfg.sampler.sims_per_particle = 16;
        cfg.sampler.step_size = 1e-3;
        // The MMD^2 wells in the AR parameters are only O(1e-3) deep at this
        // bandwidth, so a large beta is needed for the generalized posterior
        // to concentrate inside useful tolerances.
        cfg.sampler.beta = 2000.0;
        cfg.sampler.n_steps = 3200;
        cfg.bandwidth = "median-sim";
        // A single observed trajectory leaves phi and sigma_e essentially
        // unidentified (chaotic decorrelation dominates the kernel distances);
        // a batch of i.i.d. trajectories restores a well-placed MMD minimum
        // in all four parameters.
        cfg.data_size = 128;
        cfg.theta_true = Eigen::VectorXd(4);
        cfg.theta_true << 2.0, 0.8, 0.9, 1.7;
        cfg.epsilons = {0.0};
        cfg.sweeping = false;
        cfg.repetitions = 3;
        cfg.prior_mean = Eigen::VectorXd(4);
        cfg.prior_mean << 1.0, 0.0, 0.0, 1.0;
        cfg.prior_var = Eigen::VectorXd(4);
        cfg.prior_var << 2.0, 1.0, 2.0, 1.0;
        cfg.baselines = false;
    } else {
        throw ConfigError("unknown experiment '" + experiment + "'");
    }
    return cfg;
}

std::vector<ConfigEntry> parse_config_text(const std::string& text,
                                           const std::string& source) {
    std::vector<ConfigEntry> entries;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        const std::string where = source + ":" + std::to_string(lineno);
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected 'key = value', got '" + line +
                              "'");
        ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where};
        if (e.key.empty())
            throw ConfigError(where + ": empty key in '" + line + "'");
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<ConfigEntry> parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

ConfigEntry parse_override(const std::string& token, int position) {
    const std::string where = "override " + std::to_string(position);
    const std::size_t eq = token.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError(where + ": expected key=value, got '" + token + "'");
    return ConfigEntry{trim(token.substr(0, eq)), trim(token.substr(eq + 1)),
                       where + " ('" + token + "')"};
}

void apply_entry(ExperimentConfig& cfg, const ConfigEntry& e) {
    if (e.key == "experiment") {
        if (e.value != cfg.experiment)
            throw ConfigError(e.where + ": experiment already set to '" +
                              cfg.experiment + "'");
        return;
    }
    if (e.key == "particles") {
        cfg.sampler.particle_count = parse_int(e);
    } else if (e.key == "sims_per_particle") {
        cfg.sampler.sims_per_particle = parse_int(e);
    } else if (e.key == "step_size") {
        cfg.sampler.step_size = parse_real(e);
    } else if (e.key == "beta") {
        cfg.sampler.beta = parse_real(e);
    } else if (e.key == "n_steps") {
        cfg.sampler.n_steps = parse_int(e);
    } else if (e.key == "seed") {
        cfg.sampler.seed = parse_u64(e);
    } else if (e.key == "latent_policy") {
        if (e.value == "resample")
            cfg.sampler.latent_policy = LatentPolicy::resample_each_step;
        else if (e.value == "frozen")
            cfg.sampler.latent_policy = LatentPolicy::frozen;
        else
            bad_value(e, "resample/frozen");
    } else if (e.key == "jitter") {
        cfg.sampler.jitter = parse_real(e);
    } else if (e.key == "burn_in") {
        cfg.sampler.burn_in = parse_int(e);
    } else if (e.key == "noise_root") {
        if (e.value == "generalized")
            cfg.sampler.noise_root = NoiseRoot::generalized;
        else if (e.value == "symmetric")
            cfg.sampler.noise_root = NoiseRoot::symmetric;
        else
            bad_value(e, "generalized/symmetric");
    } else if (e.key == "algorithm") {
        if (e.value == "gradient-free")
            cfg.sampler.algorithm = Algorithm::gradient_free;
        else if (e.value == "gradient")
            cfg.sampler.algorithm = Algorithm::gradient;
        else
            bad_value(e, "gradient-free/gradient");
    } else if (e.key == "thin") {
        cfg.sampler.thin = parse_int(e);
    } else if (e.key == "diag_interval") {
        cfg.sampler.diag_interval = parse_int(e);
    } else if (e.key == "average_trajectory") {
        cfg.sampler.average_trajectory = parse_bool(e);
    } else if (e.key == "bandwidth") {
        cfg.bandwidth = e.value;
    } else if (e.key == "probe_count") {
        cfg.probe_count = parse_int(e);
    } else if (e.key == "data_size") {
        cfg.data_size = parse_int(e);
    } else if (e.key == "theta_true") {
        cfg.theta_true = to_vector(parse_real_list(e));
    } else if (e.key == "outlier_mean") {
        cfg.outlier_mean = parse_real(e);
    } else if (e.key == "outlier_sd") {
        cfg.outlier_sd = parse_real(e);
    } else if (e.key == "epsilon") {
        cfg.epsilons = {parse_real(e)};
        cfg.sweeping = false;
    } else if (e.key == "epsilon_sweep") {
        cfg.epsilons = parse_real_list(e);
        cfg.sweeping = true;
    } else if (e.key == "repetitions") {
        cfg.repetitions = parse_int(e);
    } else if (e.key == "data_seed") {
        cfg.data_seed = parse_u64(e);
        cfg.has_data_seed = true;
    } else if (e.key == "prior_mean") {
        cfg.prior_mean = to_vector(parse_real_list(e));
    } else if (e.key == "prior_var") {
        cfg.prior_var = to_vector(parse_real_list(e));
    } else if (e.key == "baselines") {
        cfg.baselines = parse_bool(e);
    } else if (e.key == "half_width") {
        cfg.half_width = parse_real(e);
    } else if (e.key == "grid_lo") {
        cfg.grid.lo = parse_real(e);
    } else if (e.key == "grid_hi") {
        cfg.grid.hi = parse_real(e);
    } else if (e.key == "grid_points") {
        cfg.grid.points = parse_int(e);
    } else if (e.key == "floor_likelihood") {
        cfg.floor_likelihood = parse_real(e);
    } else if (e.key == "lorenz_K") {
        cfg.lorenz.K = parse_int(e);
    } else if (e.key == "lorenz_F") {
        cfg.lorenz.F = parse_real(e);
    } else if (e.key == "lorenz_dt") {
        cfg.lorenz.dt = parse_real(e);
    } else if (e.key == "lorenz_T") {
        cfg.lorenz.T = parse_real(e);
    } else if (e.key == "lorenz_spinup") {
        cfg.lorenz.spinup_steps = parse_int(e);
    } else if (e.key == "shared_residual") {
        cfg.lorenz.shared_residual = parse_bool(e);
    } else if (e.key == "state_clip") {
        cfg.lorenz.state_clip = parse_real(e);
    } else if (e.key == "output_dir") {
        cfg.output_dir = e.value;
    } else {
        throw ConfigError(e.where + ": unknown key '" + e.key + "'");
    }
}

ExperimentConfig resolve_config(const std::vector<ConfigEntry>& entries) {
    const ConfigEntry* exp_entry = nullptr;
    for (const auto& e : entries)
        if (e.key == "experiment") {
            exp_entry = &e;
            break;
        }
    if (exp_entry == nullptr)
        throw ConfigError("missing 'experiment' key (gaussian-location, "
                          "uniform-location or lorenz96)");
    ExperimentConfig cfg;
    try {
        cfg = default_config(exp_entry->value);
    } catch (const ConfigError&) {
        throw ConfigError(exp_entry->where + ": unknown experiment '" +
                          exp_entry->value + "'");
    }
    for (const auto& e : entries) apply_entry(cfg, e);
    cfg.validate();
    return cfg;
}

std::vector<std::pair<std::string, std::string>> resolved_config(
    const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> kv;
    auto put = [&kv](const char* k, std::string v) {
        kv.emplace_back(k, std::move(v));
    };
    put("experiment", cfg.experiment);
    put("seed", std::to_string(cfg.sampler.seed));
    put("repetitions", std::to_string(cfg.repetitions));
    put("data_size", std::to_string(cfg.data_size));
    put("theta_true", join_reals(cfg.theta_true));
    if (cfg.sweeping)
        put("epsilon_sweep", join_reals(cfg.epsilons));
    else
        put("epsilon", format_real(cfg.epsilons.at(0)));
    put("outlier_mean", format_real(cfg.outlier_mean));
    put("outlier_sd", format_real(cfg.outlier_sd));
    if (cfg.has_data_seed) put("data_seed", std::to_string(cfg.data_seed));
    put("prior_mean", join_reals(cfg.prior_mean));
    put("prior_var", join_reals(cfg.prior_var));
    put("particles", std::to_string(cfg.sampler.particle_count));
    put("sims_per_particle", std::to_string(cfg.sampler.sims_per_particle));
    put("step_size", format_real(cfg.sampler.step_size));
    put("beta", format_real(cfg.sampler.beta));
    put("n_steps", std::to_string(cfg.sampler.n_steps));
    put("latent_policy",
        cfg.sampler.latent_policy == LatentPolicy::frozen ? "frozen" : "resample");
    put("jitter", format_real(cfg.sampler.jitter));
    put("burn_in", std::to_string(cfg.sampler.burn_in));
    put("noise_root", cfg.sampler.noise_root == NoiseRoot::symmetric
                          ? "symmetric"
                          : "generalized");
    put("algorithm", cfg.sampler.algorithm == Algorithm::gradient
                         ? "gradient"
                         : "gradient-free");
    put("thin", std::to_string(cfg.sampler.thin));
    put("diag_interval", std::to_string(cfg.sampler.diag_interval));
    put("average_trajectory", cfg.sampler.average_trajectory ? "true" : "false");
    put("bandwidth", cfg.bandwidth);
    put("probe_count", std::to_string(cfg.probe_count));
    put("baselines", cfg.baselines ? "true" : "false");
    put("half_width", format_real(cfg.half_width));
    put("grid_lo", format_real(cfg.grid.lo));
    put("grid_hi", format_real(cfg.grid.hi));
    put("grid_points", std::to_string(cfg.grid.points));
    put("floor_likelihood", format_real(cfg.floor_likelihood));
    put("lorenz_K", std::to_string(cfg.lorenz.K));
    put("lorenz_F", format_real(cfg.lorenz.F));
    put("lorenz_dt", format_real(cfg.lorenz.dt));
    put("lorenz_T", format_real(cfg.lorenz.T));
    put("lorenz_spinup", std::to_string(cfg.lorenz.spinup_steps));
    put("shared_residual", cfg.lorenz.shared_residual ? "true" : "false");
    put("state_clip", format_real(cfg.lorenz.state_clip));
    if (!cfg.output_dir.empty()) put("output_dir", cfg.output_dir);
    return kv;
}

RunSeeds derive_run_seeds(const ExperimentConfig& cfg, int sweep_index, int rep) {
    const std::uint64_t master = cfg.sampler.seed;
    const std::uint64_t data_base = cfg.has_data_seed ? cfg.data_seed : master;
    const auto i = static_cast<std::uint64_t>(sweep_index);
    const auto r = static_cast<std::uint64_t>(rep);
    RunSeeds s;
    s.data = derive_seed(data_base, Role::data, i, r);
    s.contaminate = derive_seed(data_base, Role::contaminate, i, r);
    s.chain = derive_seed(master, Role::chain, i, r);
    s.probe = derive_seed(master, Role::probe, i, r);
    return s;
}

SampleBatch generate_data(const ExperimentConfig& cfg,
                          const GenerativeModel& model, double epsilon,
                          const RunSeeds& seeds) {
    RngStream rng(seeds.data);
    const Eigen::MatrixXd latents = draw_latents(model, cfg.data_size, rng);
    SampleBatch clean = simulate_batch(model, cfg.theta_true, latents);
    if (epsilon <= 0.0) return clean;
    RngStream crng(seeds.contaminate);
    return contaminate(clean,
                       ContaminationSpec{epsilon, cfg.outlier_mean, cfg.outlier_sd},
                       crng);
}

double resolve_bandwidth(const ExperimentConfig& cfg,
                         const GenerativeModel& model, const SampleBatch& data,
                         const RunSeeds& seeds) {
    if (cfg.bandwidth == "median")
        return median_heuristic_bandwidth(data).bandwidth;
    if (cfg.bandwidth == "median-sim") {
        // Single-row data has no pairwise distances; pool probe simulations
        // drawn at the prior mean with the observations instead.
        RngStream rng(seeds.probe);
        const Eigen::MatrixXd latents = draw_latents(model, cfg.probe_count, rng);
        const SampleBatch probes = simulate_batch(model, cfg.prior_mean, latents);
        SampleBatch pooled(data.rows() + probes.rows(), data.cols());
        pooled << data, probes;
        return median_heuristic_bandwidth(pooled).bandwidth;
    }
    return std::stod(cfg.bandwidth);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto model = cfg.make_experiment_model();
    const GaussianPrior prior(cfg.prior_mean, cfg.prior_var);

    ExperimentReport report;
    report.config = cfg;
    report.config_echo = resolved_config(cfg);
    report.param_names = model->param_names();

    const Eigen::Index D = model->param_dim();
    std::vector<Eigen::VectorXd> all_means;
    for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
        const double eps = cfg.epsilons[i];
        for (int r = 0; r < cfg.repetitions; ++r) {
            const RunSeeds seeds = derive_run_seeds(cfg, static_cast<int>(i), r);
            RunRecord rec;
            rec.epsilon = eps;
            rec.rep = r;
            rec.data_seed = seeds.data;
            rec.chain_seed = seeds.chain;
            rec.posterior_mean =
                Eigen::VectorXd::Constant(D, std::numeric_limits<double>::quiet_NaN());

            auto t0 = std::chrono::steady_clock::now();
            SampleBatch data;
            try {
                data = generate_data(cfg, *model, eps, seeds);
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.error = std::string("data generation: ") + e.what();
                report.runs.push_back(std::move(rec));
                continue;
            }
            rec.data_seconds = seconds_since(t0);

            t0 = std::chrono::steady_clock::now();
            try {
                rec.bandwidth = resolve_bandwidth(cfg, *model, data, seeds);
                SamplerConfig sc = cfg.sampler;
                sc.seed = seeds.chain;
                const ChainResult chain =
                    run_chain(*model, data, prior, make_kernel(rec.bandwidth), sc);
                rec.posterior_mean = chain.posterior_mean;
                report.final_ensemble = chain.final_particles;
                report.has_final_ensemble = true;
                all_means.push_back(chain.posterior_mean);
                ++report.successful_runs;
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.error = e.what();
            }
            rec.chain_seconds = seconds_since(t0);

            if (cfg.baselines && cfg.experiment != "lorenz96") {
                t0 = std::chrono::steady_clock::now();
                try {
                    BaselineRecord& b = rec.baseline;
                    if (cfg.experiment == "gaussian-location") {
                        const PosteriorMoments pm = conjugate_gaussian_posterior(
                            cfg.prior_mean[0], cfg.prior_var[0], data);
                        b.method = "conjugate";
                        b.estimate = pm.mean;
                        b.variance = pm.variance;
                        b.present = true;
                    } else {
                        const GridPosterior gp = grid_posterior_uniform(
                            data, prior, cfg.half_width, cfg.grid,
                            cfg.floor_likelihood);
                        b.method = "grid";
                        b.grid_mean = gp.mean();
                        b.degenerate = gp.degenerate;
                        // Once no grid point is compatible with every datum the
                        // floored posterior is uninformative; report the formal
                        // support-interval midpoint instead, which extends the
                        // proper-case posterior mean and inherits its outlier
                        // sensitivity.
                        b.estimate = gp.degenerate ? support_interval_midpoint(data)
                                                   : b.grid_mean;
                        b.present = true;
                    }
                } catch (const std::exception& e) {
                    rec.baseline.present = false;
                    if (!rec.failed) {
                        rec.error = std::string("baseline: ") + e.what();
                    }
                }
                rec.baseline_seconds = seconds_since(t0);
            }
            report.runs.push_back(std::move(rec));
        }
    }

    report.all_failed = report.successful_runs == 0;
    if (!all_means.empty())
        report.rmse_per_param = rmse(all_means, cfg.theta_true);
    else
        report.rmse_per_param = Eigen::VectorXd::Constant(
            D, std::numeric_limits<double>::quiet_NaN());

    if (cfg.sweeping) {
        for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
            const double eps = cfg.epsilons[i];
            std::vector<Eigen::VectorXd> gf, base;
            std::string base_method;
            for (const auto& rec : report.runs) {
                if (rec.epsilon != eps) continue;
                if (!rec.failed) gf.push_back(rec.posterior_mean);
                if (rec.baseline.present) {
                    base.push_back(Eigen::VectorXd::Constant(1, rec.baseline.estimate));
                    base_method = rec.baseline.method;
                }
            }
            SweepRow row;
            row.epsilon = eps;
            row.method = "gf-etld";
            if (!gf.empty()) {
                double avg = 0.0;
                for (const auto& v : gf) avg += v[0];
                row.posterior_mean = avg / static_cast<double>(gf.size());
                row.rmse = rmse(gf, cfg.theta_true)[0];
            } else {
                row.posterior_mean = std::numeric_limits<double>::quiet_NaN();
                row.rmse = std::numeric_limits<double>::quiet_NaN();
            }
            report.sweep.push_back(row);
            if (!base.empty()) {
                SweepRow brow;
                brow.epsilon = eps;
                brow.method = base_method;
                double avg = 0.0;
                for (const auto& v : base) avg += v[0];
                brow.posterior_mean = avg / static_cast<double>(base.size());
                brow.rmse = rmse(base, cfg.theta_true)[0];
                report.sweep.push_back(brow);
            }
        }
    }
    return report;
}

std::string report_to_json(const ExperimentReport& report) {
    ordered_json j;
    j["experiment"] = report.config.experiment;
    ordered_json jc = ordered_json::object();
    for (const auto& [k, v] : report.config_echo) jc[k] = v;
    j["config"] = std::move(jc);
    j["param_names"] = report.param_names;

    ordered_json jruns = ordered_json::array();
    double chain_total = 0.0, data_total = 0.0, base_total = 0.0;
    ordered_json per_run_seconds = ordered_json::array();
    for (const auto& rec : report.runs) {
        ordered_json jr;
        jr["epsilon"] = rec.epsilon;
        jr["rep"] = rec.rep;
        jr["data_seed"] = rec.data_seed;
        jr["chain_seed"] = rec.chain_seed;
        jr["bandwidth"] = rec.bandwidth;
        std::vector<double> mean(rec.posterior_mean.data(),
                                 rec.posterior_mean.data() +
                                     rec.posterior_mean.size());
        jr["posterior_mean"] = mean;
        jr["failed"] = rec.failed;
        jr["error"] = rec.error;
        if (rec.baseline.present) {
            ordered_json jb;
            jb["method"] = rec.baseline.method;
            jb["estimate"] = rec.baseline.estimate;
            if (rec.baseline.method == "conjugate") {
                jb["variance"] = rec.baseline.variance;
            } else {
                jb["grid_mean"] = rec.baseline.grid_mean;
                jb["degenerate"] = rec.baseline.degenerate;
            }
            jr["baseline"] = std::move(jb);
        } else {
            jr["baseline"] = nullptr;
        }
        jruns.push_back(std::move(jr));
        chain_total += rec.chain_seconds;
        data_total += rec.data_seconds;
        base_total += rec.baseline_seconds;
        per_run_seconds.push_back(rec.chain_seconds);
    }
    j["runs"] = std::move(jruns);

    ordered_json jr = ordered_json::object();
    for (std::size_t p = 0; p < report.param_names.size(); ++p)
        jr[report.param_names[p]] = report.rmse_per_param[static_cast<Eigen::Index>(p)];
    j["rmse"] = std::move(jr);

    if (report.config.sweeping) {
        ordered_json js = ordered_json::array();
        for (const auto& row : report.sweep) {
            ordered_json jrow;
            jrow["epsilon"] = row.epsilon;
            jrow["method"] = row.method;
            jrow["posterior_mean"] = row.posterior_mean;
            jrow["rmse"] = row.rmse;
            js.push_back(std::move(jrow));
        }
        j["sweep"] = std::move(js);
    }
    j["successful_runs"] = report.successful_runs;
    j["all_failed"] = report.all_failed;

    const double samples = static_cast<double>(report.successful_runs) *
                           report.config.sampler.particle_count;
    ordered_json jt;
    jt["data_seconds_total"] = data_total;
    jt["chain_seconds_total"] = chain_total;
    jt["baseline_seconds_total"] = base_total;
    jt["chain_seconds_per_sample"] =
        samples > 0.0 ? chain_total / samples
                      : std::numeric_limits<double>::quiet_NaN();
    jt["per_run_chain_seconds"] = std::move(per_run_seconds);
    j["timing"] = std::move(jt);
    return j.dump(2);
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void emit_outputs(const ExperimentReport& report, const std::string& directory) {
    namespace fs = std::filesystem;
    const fs::path dir(directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + directory +
                      "': " + ec.message());

    const std::size_t D = report.param_names.size();
    std::string ens;
    for (std::size_t d = 0; d < D; ++d) {
        if (d) ens += ',';
        ens += "theta_" + std::to_string(d + 1);
    }
    ens += '\n';
    if (report.has_final_ensemble) {
        for (Eigen::Index m = 0; m < report.final_ensemble.rows(); ++m) {
            for (Eigen::Index d = 0; d < report.final_ensemble.cols(); ++d) {
                if (d) ens += ',';
                ens += format_real(report.final_ensemble(m, d));
            }
            ens += '\n';
        }
    }
    write_file(dir / "ensemble_final.csv", ens);

    std::string rm = "param,rmse\n";
    for (std::size_t p = 0; p < D; ++p)
        rm += report.param_names[p] + ',' +
              format_real(report.rmse_per_param[static_cast<Eigen::Index>(p)]) +
              '\n';
    write_file(dir / "rmse.csv", rm);

    if (report.config.sweeping) {
        std::string sw = "epsilon,method,posterior_mean,rmse\n";
        for (const auto& row : report.sweep)
            sw += format_real(row.epsilon) + ',' + row.method + ',' +
                  format_real(row.posterior_mean) + ',' + format_real(row.rmse) +
                  '\n';
        write_file(dir / "sweep.csv", sw);
    }

    write_file(dir / "report.json", report_to_json(report) + "\n");

    double chain_total = 0.0, data_total = 0.0, base_total = 0.0;
    std::string base_method;
    for (const auto& rec : report.runs) {
        chain_total += rec.chain_seconds;
        data_total += rec.data_seconds;
        base_total += rec.baseline_seconds;
        if (rec.baseline.present) base_method = rec.baseline.method;
    }
    const double nruns = static_cast<double>(report.runs.size());
    const double samples = static_cast<double>(report.successful_runs) *
                           report.config.sampler.particle_count;
    std::string tm = "method,seconds_total,seconds_per_sample\n";
    tm += "gf-etld," + format_real(chain_total) + ',' +
          format_real(samples > 0.0
                          ? chain_total / samples
                          : std::numeric_limits<double>::quiet_NaN()) +
          '\n';
    tm += "data-generation," + format_real(data_total) + ',' +
          format_real(nruns > 0.0 ? data_total / nruns
                                  : std::numeric_limits<double>::quiet_NaN()) +
          '\n';
    if (!base_method.empty())
        tm += base_method + ',' + format_real(base_total) + ',' +
              format_real(nruns > 0.0
                              ? base_total / nruns
                              : std::numeric_limits<double>::quiet_NaN()) +
              '\n';
    write_file(dir / "timing.csv", tm);
}

}  // namespace gfetld

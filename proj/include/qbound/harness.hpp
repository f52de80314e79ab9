#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qbound/envs.hpp"
#include "qbound/learn.hpp"
#include "qbound/mdp.hpp"

namespace qbound {

/// Mean over states of KL(pi(.|s) || pi_f(.|s)). Throws std::domain_error when
/// pi places mass where pi_f has none (a greedy pi_f makes the divergence
/// infinite; we refuse rather than return infinity).
double kl_policy_divergence(const Policy& pi, const Policy& pi_f);

/// One aggregated sweep point. kl fields are absent for beta = infinity rows
/// (greedy policies have no finite divergence). For single-evaluation sweeps
/// the std fields spread over states; for multi-trial sweeps, over trials.
struct MetricRow {
    double sweep_value = 0.0;
    std::optional<double> mean_kl;
    std::optional<double> kl_std;
    double mean_gap = 0.0;
    double gap_std = 0.0;
    std::string beta_label; // "1", "5", ..., or "inf"
    int trials = 1;
};

/// CSV: RFC-4180, one header row, floats printed with 17 significant digits.
/// Columns: sweep_value,beta,mean_kl,kl_std,mean_gap,gap_std,trials
/// (kl cells empty when absent).
void write_metric_csv(const std::string& path, const std::vector<MetricRow>& rows);

std::string format_double(double v); // %.17g, used by all CSV output

/// Environment-noise sweep: two primitive grids composed with min (AND), solved
/// at each (slip, beta) pair; beta = nullopt routes to the standard solvers.
/// Reports the mean concave gap f(Q) - Qtilde and, for finite beta, the KL
/// between the composite Boltzmann policy and the zero-shot policy.
struct StochasticitySweepConfig {
    GridSpec task_a, task_b;
    std::string transfer_expr = "min(x1,x2)";
    std::vector<double> slips;
    std::vector<std::optional<double>> betas;
    double tol = 1e-10;
    std::string out_csv; // empty = no file
};
std::vector<MetricRow> run_stochasticity_sweep(const StochasticitySweepConfig& cfg);

/// Reward-sparsity sweep on random sparse grids: per density, `trials` seeded
/// pairs of tasks composed with the 0.5/0.5 convex combination, solved soft at
/// one beta; gap/KL statistics spread over trials. Sub-seeds derive from
/// (seed, size, density, trial).
struct SparsitySweepConfig {
    std::vector<int> sizes{6, 10};
    std::vector<int> densities;   // empty = 1 .. size*size-1 per size
    int trials = 1000;
    double beta = 5.0;
    double gamma = 0.99;
    std::vector<double> weights{0.5, 0.5};
    double tol = 1e-10;
    std::uint64_t seed = 0;
    std::string out_csv;
};
/// Rows are emitted per (size, density); sweep_value is the density and the
/// beta label carries "size=N b=B".
std::vector<MetricRow> run_sparsity_sweep(const SparsitySweepConfig& cfg);

/// Aggregated learning curves: per eval step, trial-mean return with a normal
/// 95% interval (1.96 * std / sqrt(n)) and trial-mean bound violation.
struct LearnCurveRow {
    long step = 0;
    double return_mean = 0.0;
    double return_ci_low = 0.0;
    double return_ci_high = 0.0;
    double bv = 0.0;
};
std::vector<LearnCurveRow> aggregate_learn_traces(const std::vector<LearnTrace>& traces);

/// Columns: step,eval_return_mean,eval_return_ci_low,eval_return_ci_high,bv.
/// Single traces write ci = mean (the harness fills real intervals on
/// aggregation).
void write_learn_csv(const std::string& path, const std::vector<LearnCurveRow>& rows);
std::vector<LearnCurveRow> trace_to_rows(const LearnTrace& trace);

/// First eval step from which BV stays exactly 0 through the end of the trace;
/// absent when that never happens.
std::optional<long> steps_to_zero_bv(const LearnTrace& trace);

struct ClipArmSummary {
    std::string arm;
    double median_steps_to_zero_bv = 0.0; // trace-end sentinel counts as steps+eval_every
    double mean_final_return = 0.0;
    int trials = 0;
};

/// Clipping comparison on a two-primitive OR task: per arm, `trials` seeded
/// learners (trial seeds shared across arms so matched comparisons are exact),
/// exact lower bound max(Q_a, Q_b) from standard solves. Writes per-trial and
/// per-arm CSVs plus a summary CSV under out_dir when set.
struct ClipExperimentConfig {
    GridSpec task_a, task_b;
    std::string transfer_expr = "max(x1,x2)";
    std::vector<ClipMode> arms{ClipMode::None, ClipMode::Hard, ClipMode::Soft, ClipMode::Test,
                               ClipMode::SoftHard};
    int trials = 50;
    LearnHyper hyper;
    double soft_weight = 1.0;
    double tol = 1e-10;
    std::uint64_t seed = 0;
    std::string out_dir; // empty = no files
};
struct ClipExperimentResult {
    std::vector<ClipArmSummary> summaries;
    // traces[arm][trial], ordered like cfg.arms
    std::vector<std::vector<LearnTrace>> traces;
};
ClipExperimentResult run_clip_experiment(const ClipExperimentConfig& cfg);

std::string to_string(ClipMode m);
ClipMode clip_mode_from_string(const std::string& s);

/// Command-line entry: subcommands solve, check-fn, bound, learn,
/// sweep-stochasticity, sweep-sparsity, clip-experiment. Returns the process
/// exit code: 0 success, 1 config/usage errors, 2 numerical failures.
int cli_dispatch(int argc, const char* const* argv);

} // namespace qbound

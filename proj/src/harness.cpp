#include "qbound/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"

#include "qbound/bounds.hpp"
#include "qbound/conditions.hpp"
#include "qbound/rng.hpp"
#include "qbound/solve.hpp"
#include "qbound/transfer.hpp"

namespace qbound {

namespace {

std::vector<double> kl_per_state(const Policy& pi, const Policy& pi_f) {
    if (pi.n_states != pi_f.n_states || pi.n_actions != pi_f.n_actions)
        throw std::invalid_argument("kl_policy_divergence: shape mismatch");
    std::vector<double> out(static_cast<std::size_t>(pi.n_states), 0.0);
    for (int s = 0; s < pi.n_states; ++s) {
        double acc = 0.0;
        for (int a = 0; a < pi.n_actions; ++a) {
            double p = pi.at(s, a);
            if (p <= 0.0) continue;
            double q = pi_f.at(s, a);
            if (q <= 0.0)
                throw std::domain_error("kl_policy_divergence: reference policy has a zero where "
                                        "pi has mass; divergence is infinite");
            acc += p * std::log(p / q);
        }
        out[static_cast<std::size_t>(s)] = acc;
    }
    return out;
}

// Sample standard deviation (n-1); zero for fewer than two values.
std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

double mean_of(const std::vector<double>& xs) {
    return xs.empty() ? 0.0
                      : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double median_of(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Gap oriented by the side the function certifies: concave side reports
// f(Q) - Qtilde, convex side the reverse, so a valid bound reads nonnegative.
double gap_sign(const TransferFn& f, Regime regime) {
    switch (f.classification(regime)) {
    case Classification::ConcaveConditions:
    case Classification::Both: return 1.0;
    case Classification::ConvexConditions: return -1.0;
    default:
        throw std::invalid_argument("sweep: function is not classified for this regime");
    }
}

std::vector<double> gap_entries(const QTable& fq, const QTable& qt, double sign) {
    std::vector<double> out(fq.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sign * (fq.values[i] - qt.values[i]);
    return out;
}

} // namespace

double kl_policy_divergence(const Policy& pi, const Policy& pi_f) {
    return mean_of(kl_per_state(pi, pi_f));
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_metric_csv(const std::string& path, const std::vector<MetricRow>& rows) {
    std::ofstream out = open_csv(path);
    out << "sweep_value,beta,mean_kl,kl_std,mean_gap,gap_std,trials\n";
    for (const auto& r : rows) {
        out << format_double(r.sweep_value) << ',' << csv_field(r.beta_label) << ','
            << (r.mean_kl ? format_double(*r.mean_kl) : "") << ','
            << (r.kl_std ? format_double(*r.kl_std) : "") << ',' << format_double(r.mean_gap)
            << ',' << format_double(r.gap_std) << ',' << r.trials << '\n';
    }
}

std::vector<MetricRow> run_stochasticity_sweep(const StochasticitySweepConfig& cfg) {
    if (cfg.slips.empty()) throw std::invalid_argument("stochasticity sweep: no slip values");
    if (cfg.betas.empty()) throw std::invalid_argument("stochasticity sweep: no beta values");
    TransferFn f = parse_transfer(cfg.transfer_expr);
    if (f.arity() != 2) throw std::invalid_argument("stochasticity sweep: need a two-task function");

    std::vector<MetricRow> rows;
    for (double slip : cfg.slips) {
        GridSpec spec_a = cfg.task_a, spec_b = cfg.task_b;
        spec_a.params.slip = slip;
        spec_b.params.slip = slip;
        TabularMdp prim_a = grid_to_mdp(spec_a);
        TabularMdp prim_b = grid_to_mdp(spec_b);
        TabularMdp composite = compose_grids(f, {spec_a, spec_b});

        for (const auto& beta : cfg.betas) {
            MetricRow row;
            row.sweep_value = slip;
            row.trials = 1;
            if (!beta) {
                row.beta_label = "inf";
                QTable qa = solve_standard(prim_a, cfg.tol).q;
                QTable qb = solve_standard(prim_b, cfg.tol).q;
                QTable qt = solve_standard(composite, cfg.tol).q;
                QTable fq = apply_transfer(f, {qa, qb});
                auto [gm, gs] = mean_std(gap_entries(fq, qt, gap_sign(f, Regime::Standard)));
                row.mean_gap = gm;
                row.gap_std = gs;
            } else {
                row.beta_label = format_double(*beta);
                SoftConfig sc = SoftConfig::uniform(*beta, composite.n_states, composite.n_actions);
                QTable qa = solve_soft(prim_a, sc, cfg.tol).q;
                QTable qb = solve_soft(prim_b, sc, cfg.tol).q;
                QTable qt = solve_soft(composite, sc, cfg.tol).q;
                QTable fq = apply_transfer(f, {qa, qb});
                auto [gm, gs] =
                    mean_std(gap_entries(fq, qt, gap_sign(f, Regime::EntropyRegularized)));
                row.mean_gap = gm;
                row.gap_std = gs;
                auto kl = kl_per_state(boltzmann_policy(qt, sc), boltzmann_policy(fq, sc));
                auto [km, ks] = mean_std(kl);
                row.mean_kl = km;
                row.kl_std = ks;
            }
            rows.push_back(std::move(row));
        }
    }
    if (!cfg.out_csv.empty()) write_metric_csv(cfg.out_csv, rows);
    return rows;
}

std::vector<MetricRow> run_sparsity_sweep(const SparsitySweepConfig& cfg) {
    if (cfg.trials < 1) throw std::invalid_argument("sparsity sweep: trials must be positive");
    TransferFn f = TransferFn::convex_combo(cfg.weights);
    if (f.arity() != 2) throw std::invalid_argument("sparsity sweep: need exactly two weights");
    const double sign = gap_sign(f, Regime::EntropyRegularized);

    std::vector<MetricRow> rows;
    for (int size : cfg.sizes) {
        std::vector<int> densities = cfg.densities;
        if (densities.empty())
            for (int d = 1; d < size * size; ++d) densities.push_back(d);
        for (int density : densities) {
            if (density <= 0 || density >= size * size)
                throw std::invalid_argument("sparsity sweep: density out of range for size");
            std::vector<double> gaps, kls;
            gaps.reserve(static_cast<std::size_t>(cfg.trials));
            kls.reserve(static_cast<std::size_t>(cfg.trials));
            for (int trial = 0; trial < cfg.trials; ++trial) {
                std::uint64_t s0 =
                    derive_seed(cfg.seed, static_cast<std::uint64_t>(size),
                                static_cast<std::uint64_t>(density), static_cast<std::uint64_t>(trial));
                GridSpec a = random_sparse_grid(size, density, 0.0, 1.0, derive_seed(s0, 0), cfg.gamma);
                GridSpec b = random_sparse_grid(size, density, 0.0, 1.0, derive_seed(s0, 1), cfg.gamma);
                TabularMdp prim_a = grid_to_mdp(a);
                TabularMdp prim_b = grid_to_mdp(b);
                TabularMdp composite = compose_grids(f, {a, b});
                SoftConfig sc = SoftConfig::uniform(cfg.beta, composite.n_states, composite.n_actions);
                QTable qa = solve_soft(prim_a, sc, cfg.tol).q;
                QTable qb = solve_soft(prim_b, sc, cfg.tol).q;
                QTable qt = solve_soft(composite, sc, cfg.tol).q;
                QTable fq = apply_transfer(f, {qa, qb});
                gaps.push_back(mean_of(gap_entries(fq, qt, sign)));
                kls.push_back(kl_policy_divergence(boltzmann_policy(qt, sc), boltzmann_policy(fq, sc)));
            }
            MetricRow row;
            row.sweep_value = density;
            row.trials = cfg.trials;
            row.beta_label = "size=" + std::to_string(size) + " b=" + format_double(cfg.beta);
            auto [gm, gs] = mean_std(gaps);
            row.mean_gap = gm;
            row.gap_std = gs;
            auto [km, ks] = mean_std(kls);
            row.mean_kl = km;
            row.kl_std = ks;
            rows.push_back(std::move(row));
        }
    }
    if (!cfg.out_csv.empty()) write_metric_csv(cfg.out_csv, rows);
    return rows;
}

std::vector<LearnCurveRow> aggregate_learn_traces(const std::vector<LearnTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("aggregate_learn_traces: no traces");
    const std::size_t n_points = traces[0].evals.size();
    for (const auto& t : traces) {
        if (t.evals.size() != n_points)
            throw std::invalid_argument("aggregate_learn_traces: eval grids differ");
        for (std::size_t i = 0; i < n_points; ++i)
            if (t.evals[i].step != traces[0].evals[i].step)
                throw std::invalid_argument("aggregate_learn_traces: eval grids differ");
    }

    std::vector<LearnCurveRow> rows(n_points);
    const double n = static_cast<double>(traces.size());
    for (std::size_t i = 0; i < n_points; ++i) {
        std::vector<double> returns, bvs;
        returns.reserve(traces.size());
        bvs.reserve(traces.size());
        for (const auto& t : traces) {
            returns.push_back(t.evals[i].return_mean);
            bvs.push_back(t.evals[i].bv);
        }
        auto [mean, sd] = mean_std(returns);
        double half = 1.96 * sd / std::sqrt(n);
        rows[i].step = traces[0].evals[i].step;
        rows[i].return_mean = mean;
        rows[i].return_ci_low = mean - half;
        rows[i].return_ci_high = mean + half;
        rows[i].bv = mean_of(bvs);
    }
    return rows;
}

void write_learn_csv(const std::string& path, const std::vector<LearnCurveRow>& rows) {
    std::ofstream out = open_csv(path);
    out << "step,eval_return_mean,eval_return_ci_low,eval_return_ci_high,bv\n";
    for (const auto& r : rows) {
        out << r.step << ',' << format_double(r.return_mean) << ','
            << format_double(r.return_ci_low) << ',' << format_double(r.return_ci_high) << ','
            << format_double(r.bv) << '\n';
    }
}

std::vector<LearnCurveRow> trace_to_rows(const LearnTrace& trace) {
    std::vector<LearnCurveRow> rows(trace.evals.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].step = trace.evals[i].step;
        rows[i].return_mean = trace.evals[i].return_mean;
        rows[i].return_ci_low = trace.evals[i].return_mean;
        rows[i].return_ci_high = trace.evals[i].return_mean;
        rows[i].bv = trace.evals[i].bv;
    }
    return rows;
}

std::optional<long> steps_to_zero_bv(const LearnTrace& trace) {
    std::optional<long> first;
    for (const auto& pt : trace.evals) {
        if (pt.bv == 0.0) {
            if (!first) first = pt.step;
        } else {
            first.reset();
        }
    }
    return first;
}

std::string to_string(ClipMode m) {
    switch (m) {
    case ClipMode::None: return "none";
    case ClipMode::Hard: return "hard";
    case ClipMode::Soft: return "soft";
    case ClipMode::Test: return "test";
    case ClipMode::SoftHard: return "soft_hard";
    }
    return "none";
}

ClipMode clip_mode_from_string(const std::string& s) {
    if (s == "none") return ClipMode::None;
    if (s == "hard") return ClipMode::Hard;
    if (s == "soft") return ClipMode::Soft;
    if (s == "test") return ClipMode::Test;
    if (s == "soft_hard") return ClipMode::SoftHard;
    throw std::invalid_argument("unknown clip mode '" + s + "'");
}

ClipExperimentResult run_clip_experiment(const ClipExperimentConfig& cfg) {
    if (cfg.trials < 1) throw std::invalid_argument("clip experiment: trials must be positive");
    if (cfg.arms.empty()) throw std::invalid_argument("clip experiment: no arms");
    TransferFn f = parse_transfer(cfg.transfer_expr);
    if (f.arity() != 2) throw std::invalid_argument("clip experiment: need a two-task function");

    TabularMdp prim_a = grid_to_mdp(cfg.task_a);
    TabularMdp prim_b = grid_to_mdp(cfg.task_b);
    TabularMdp composite = compose_grids(f, {cfg.task_a, cfg.task_b});

    BoundTables bounds;
    {
        QTable qa = solve_standard(prim_a, cfg.tol).q;
        QTable qb = solve_standard(prim_b, cfg.tol).q;
        bounds.lower = apply_transfer(f, {qa, qb});
    }

    ClipExperimentResult result;
    result.traces.resize(cfg.arms.size());
    for (std::size_t arm_i = 0; arm_i < cfg.arms.size(); ++arm_i) {
        ClipSpec spec;
        spec.mode = cfg.arms[arm_i];
        spec.side = BoundSide::Lower;
        spec.soft_weight = cfg.soft_weight;
        result.traces[arm_i].reserve(static_cast<std::size_t>(cfg.trials));
        for (int trial = 0; trial < cfg.trials; ++trial) {
            // Same trial seed for every arm: matched training streams.
            std::uint64_t seed_t = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
            result.traces[arm_i].push_back(q_learning(composite, spec, bounds, cfg.hyper, seed_t));
        }

        ClipArmSummary summary;
        summary.arm = to_string(cfg.arms[arm_i]);
        summary.trials = cfg.trials;
        std::vector<double> steps_bv, finals;
        for (const auto& trace : result.traces[arm_i]) {
            auto s = steps_to_zero_bv(trace);
            steps_bv.push_back(s ? static_cast<double>(*s)
                                 : static_cast<double>(cfg.hyper.steps + cfg.hyper.eval_every));
            finals.push_back(trace.evals.back().return_mean);
        }
        summary.median_steps_to_zero_bv = median_of(steps_bv);
        summary.mean_final_return = mean_of(finals);
        result.summaries.push_back(std::move(summary));
    }

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        for (std::size_t arm_i = 0; arm_i < cfg.arms.size(); ++arm_i) {
            std::string name = to_string(cfg.arms[arm_i]);
            write_learn_csv(cfg.out_dir + "/curve_" + name + ".csv",
                            aggregate_learn_traces(result.traces[arm_i]));
        }
        {
            std::ofstream out = open_csv(cfg.out_dir + "/trials.csv");
            out << "arm,trial,seed,steps_to_zero_bv,final_return,final_bv\n";
            for (std::size_t arm_i = 0; arm_i < cfg.arms.size(); ++arm_i) {
                for (int trial = 0; trial < cfg.trials; ++trial) {
                    const auto& trace = result.traces[arm_i][static_cast<std::size_t>(trial)];
                    auto s = steps_to_zero_bv(trace);
                    out << csv_field(to_string(cfg.arms[arm_i])) << ',' << trial << ','
                        << trace.seed << ',' << (s ? std::to_string(*s) : "") << ','
                        << format_double(trace.evals.back().return_mean) << ','
                        << format_double(trace.evals.back().bv) << '\n';
                }
            }
        }
        {
            std::ofstream out = open_csv(cfg.out_dir + "/summary.csv");
            out << "arm,median_steps_to_zero_bv,mean_final_return,trials\n";
            for (const auto& s : result.summaries) {
                out << csv_field(s.arm) << ',' << format_double(s.median_steps_to_zero_bv) << ','
                    << format_double(s.mean_final_return) << ',' << s.trials << '\n';
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct GridCliOpts {
    double slip = 0.0;
    double step_reward = -1.0;
    double diamond_reward = -0.5;
    double penalty_reward = 0.0;
    bool penalty_set = false;
    double gamma = 0.99;

    GridParams params() const {
        GridParams p;
        p.slip = slip;
        p.step_reward = step_reward;
        p.diamond_reward = diamond_reward;
        if (penalty_set) p.penalty_reward = penalty_reward;
        p.gamma = gamma;
        return p;
    }
};

void add_grid_options(CLI::App* cmd, GridCliOpts& g) {
    cmd->add_option("--slip", g.slip, "action slip probability");
    cmd->add_option("--step-reward", g.step_reward, "reward for arriving at a plain cell");
    cmd->add_option("--diamond-reward", g.diamond_reward, "reward for arriving at a D cell");
    cmd->add_option("--penalty-reward", g.penalty_reward,
                    "reward for arriving at an X cell (required when the grid has one)")
        ->each([&g](const std::string&) { g.penalty_set = true; });
    cmd->add_option("--gamma", g.gamma, "discount factor");
}

TabularMdp mdp_from_json(const nlohmann::json& j) {
    TabularMdp m;
    m.n_states = j.at("n_states").get<int>();
    m.n_actions = j.at("n_actions").get<int>();
    m.gamma = j.at("gamma").get<double>();
    m.transition = j.at("transition").get<std::vector<double>>();
    m.reward = j.at("reward").get<std::vector<double>>();
    if (j.contains("terminal")) {
        for (const auto& t : j.at("terminal"))
            m.terminal.push_back(t.get<int>() ? 1 : 0);
    } else {
        m.terminal.assign(static_cast<std::size_t>(m.n_states), 0);
    }
    if (j.contains("initial_dist")) {
        m.initial_dist = j.at("initial_dist").get<std::vector<double>>();
    } else {
        m.initial_dist.assign(static_cast<std::size_t>(m.n_states),
                              1.0 / static_cast<double>(m.n_states));
    }
    m.validate();
    return m;
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::optional<double> parse_beta_label(const std::string& s) {
    if (s == "inf" || s == "INF" || s == "Inf") return std::nullopt;
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("bad beta value '" + s + "'");
    return v;
}

struct CliState {
    // solve
    std::string solve_mdp, solve_grid, solve_out;
    double solve_beta = 0.0;
    bool solve_beta_set = false;
    double solve_tol = 1e-10;
    GridCliOpts solve_gridopts;

    // check-fn
    std::string check_fn_expr, check_regime = "standard";
    double check_beta = 1.0;
    double check_lo = -10.0, check_hi = 0.0;
    int check_samples = 64, check_random = 10000, check_pseudo_actions = 4;
    std::uint64_t check_seed = 0;
    double check_gamma = 0.99, check_tol = 1e-9;
    bool check_deterministic = false;

    // bound
    std::vector<std::string> bound_grids;
    std::string bound_fn, bound_regime = "standard", bound_out;
    double bound_beta = 1.0;
    double bound_tol = 1e-10;
    GridCliOpts bound_gridopts;

    // learn
    std::vector<std::string> learn_grids;
    std::string learn_fn = "max(x1,x2)", learn_mode = "none", learn_out;
    double learn_tol = 1e-10, learn_soft_weight = 1.0;
    std::uint64_t learn_seed = 0;
    LearnHyper learn_hyper;
    GridCliOpts learn_gridopts;

    // sweep-stochasticity
    std::string sto_task_a, sto_task_b, sto_fn = "min(x1,x2)", sto_out;
    double sto_slip_min = 0.0, sto_slip_max = 0.8, sto_slip_step = 0.05;
    std::vector<std::string> sto_betas{"1", "3", "5", "inf"};
    double sto_tol = 1e-10;
    GridCliOpts sto_gridopts;

    // sweep-sparsity
    std::vector<int> spa_sizes{6, 10};
    std::vector<int> spa_densities;
    int spa_trials = 1000;
    double spa_beta = 5.0, spa_gamma = 0.99, spa_tol = 1e-10;
    std::uint64_t spa_seed = 0;
    std::string spa_out;

    // clip-experiment
    std::string clip_task_a, clip_task_b, clip_fn = "max(x1,x2)", clip_out_dir;
    int clip_trials = 50;
    double clip_soft_weight = 1.0, clip_tol = 1e-10;
    std::uint64_t clip_seed = 0;
    LearnHyper clip_hyper;
    GridCliOpts clip_gridopts;
};

void add_hyper_options(CLI::App* cmd, LearnHyper& h) {
    cmd->add_option("--steps", h.steps, "training steps");
    cmd->add_option("--alpha", h.alpha, "learning rate");
    cmd->add_option("--eps-initial", h.eps_initial, "initial exploration rate");
    cmd->add_option("--eps-final", h.eps_final, "final exploration rate");
    cmd->add_option("--explore-fraction", h.explore_fraction,
                    "fraction of steps over which epsilon anneals");
    cmd->add_option("--eval-every", h.eval_every, "steps between evaluation points");
    cmd->add_option("--eval-episodes", h.eval_episodes, "greedy episodes per evaluation");
    cmd->add_option("--episode-cap", h.episode_cap, "step cap per episode");
    cmd->add_option("--q-init", h.q_init, "initial table value");
}

int run_solve(const CliState& st) {
    TabularMdp mdp;
    if (!st.solve_mdp.empty()) {
        mdp = mdp_from_json(load_json(st.solve_mdp));
    } else if (!st.solve_grid.empty()) {
        mdp = grid_to_mdp(load_grid_spec(st.solve_grid, st.solve_gridopts.params()));
    } else {
        throw std::invalid_argument("solve: pass --mdp or --grid");
    }

    Solution sol;
    if (st.solve_beta_set) {
        SoftConfig sc = SoftConfig::uniform(st.solve_beta, mdp.n_states, mdp.n_actions);
        sol = solve_soft(mdp, sc, st.solve_tol);
    } else {
        sol = solve_standard(mdp, st.solve_tol);
    }

    double v0 = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
        auto row = sol.q.row(s);
        v0 += mdp.initial_dist[static_cast<std::size_t>(s)] *
              *std::max_element(row.begin(), row.end());
    }
    std::printf("states %d actions %d iterations %ld residual %s start_value %s\n", mdp.n_states,
                mdp.n_actions, sol.iterations, format_double(sol.residual).c_str(),
                format_double(v0).c_str());

    if (!st.solve_out.empty()) {
        nlohmann::json j;
        j["n_states"] = mdp.n_states;
        j["n_actions"] = mdp.n_actions;
        j["q"] = sol.q.values;
        j["iterations"] = sol.iterations;
        j["residual"] = sol.residual;
        write_text(st.solve_out, j.dump(2));
    }
    return 0;
}

int run_check_fn(const CliState& st) {
    TransferFn f = parse_transfer(st.check_fn_expr);
    DomainBox box = DomainBox::symmetric(f.arity(), st.check_lo, st.check_hi);
    box.samples_per_axis = st.check_samples;
    box.random_samples = st.check_random;
    box.rng_seed = st.check_seed;
    box.gamma = st.check_gamma;
    box.pseudo_actions = st.check_pseudo_actions;
    box.deterministic_dynamics = st.check_deterministic;
    box.tolerance = st.check_tol;

    Regime regime = st.check_regime == "soft" ? Regime::EntropyRegularized : Regime::Standard;
    SoftConfig sc;
    sc.beta = st.check_beta;
    const SoftConfig* cfg = regime == Regime::EntropyRegularized ? &sc : nullptr;
    ConditionReport report = check_conditions(f, box, regime, cfg);
    std::printf("%s", to_string(report).c_str());
    return 0;
}

// Shared by bound/learn: load grids with one parameter set, compose with f.
struct ComposedTask {
    std::vector<GridSpec> specs;
    std::vector<TabularMdp> prims;
    TabularMdp composite;
};

ComposedTask compose_from_cli(const std::vector<std::string>& paths, const TransferFn& f,
                              const GridParams& params) {
    if (paths.empty()) throw std::invalid_argument("need at least one --grids path");
    ComposedTask out;
    for (const auto& p : paths) out.specs.push_back(load_grid_spec(p, params));
    for (const auto& s : out.specs) out.prims.push_back(grid_to_mdp(s));
    out.composite = compose_grids(f, out.specs);
    return out;
}

int run_bound(const CliState& st) {
    TransferFn f = parse_transfer(st.bound_fn);
    ComposedTask task = compose_from_cli(st.bound_grids, f, st.bound_gridopts.params());

    Regime regime = st.bound_regime == "soft" ? Regime::EntropyRegularized : Regime::Standard;
    BoundOptions opts;
    opts.tol = st.bound_tol;

    std::vector<QTable> qs;
    SoftConfig sc;
    const SoftConfig* cfg = nullptr;
    if (regime == Regime::EntropyRegularized) {
        sc = SoftConfig::uniform(st.bound_beta, task.composite.n_states, task.composite.n_actions);
        cfg = &sc;
        for (const auto& prim : task.prims) qs.push_back(solve_soft(prim, sc, opts.tol).q);
    } else {
        for (const auto& prim : task.prims) qs.push_back(solve_standard(prim, opts.tol).q);
    }

    BoundReport report = make_bound_report(task.composite, f, qs, regime, cfg, opts);
    std::printf("classification %s gap_mean %s gap_max %s crude_c %s\n",
                to_string(report.classification).c_str(), format_double(report.gap_mean).c_str(),
                format_double(report.gap_max).c_str(), format_double(report.crude_c).c_str());
    for (const auto& n : report.notes) std::printf("note: %s\n", n.c_str());
    if (!st.bound_out.empty()) write_text(st.bound_out, bound_report_json(report));
    return 0;
}

int run_learn(const CliState& st) {
    TransferFn f = parse_transfer(st.learn_fn);
    ComposedTask task = compose_from_cli(st.learn_grids, f, st.learn_gridopts.params());

    ClipSpec spec;
    spec.mode = clip_mode_from_string(st.learn_mode);
    spec.side = BoundSide::Lower;
    spec.soft_weight = st.learn_soft_weight;

    BoundTables bounds;
    if (spec.mode != ClipMode::None) {
        std::vector<QTable> qs;
        for (const auto& prim : task.prims) qs.push_back(solve_standard(prim, st.learn_tol).q);
        bounds.lower = apply_transfer(f, qs);
    }

    LearnTrace trace = q_learning(task.composite, spec, bounds, st.learn_hyper, st.learn_seed);
    auto zero_at = steps_to_zero_bv(trace);
    std::printf("final_return %s final_bv %s steps_to_zero_bv %s\n",
                format_double(trace.evals.back().return_mean).c_str(),
                format_double(trace.evals.back().bv).c_str(),
                zero_at ? std::to_string(*zero_at).c_str() : "never");
    if (!st.learn_out.empty()) write_learn_csv(st.learn_out, trace_to_rows(trace));
    return 0;
}

int run_sweep_stochasticity(const CliState& st) {
    StochasticitySweepConfig cfg;
    cfg.task_a = load_grid_spec(st.sto_task_a, st.sto_gridopts.params());
    cfg.task_b = load_grid_spec(st.sto_task_b, st.sto_gridopts.params());
    cfg.transfer_expr = st.sto_fn;
    if (!(st.sto_slip_step > 0.0)) throw std::invalid_argument("sweep: slip step must be positive");
    for (double s = st.sto_slip_min; s <= st.sto_slip_max + 1e-9; s += st.sto_slip_step)
        cfg.slips.push_back(s);
    for (const auto& b : st.sto_betas) cfg.betas.push_back(parse_beta_label(b));
    cfg.tol = st.sto_tol;
    cfg.out_csv = st.sto_out;

    auto rows = run_stochasticity_sweep(cfg);
    for (const auto& r : rows)
        std::printf("slip %s beta %s gap %s kl %s\n", format_double(r.sweep_value).c_str(),
                    r.beta_label.c_str(), format_double(r.mean_gap).c_str(),
                    r.mean_kl ? format_double(*r.mean_kl).c_str() : "-");
    return 0;
}

int run_sweep_sparsity(const CliState& st) {
    SparsitySweepConfig cfg;
    cfg.sizes = st.spa_sizes;
    cfg.densities = st.spa_densities;
    cfg.trials = st.spa_trials;
    cfg.beta = st.spa_beta;
    cfg.gamma = st.spa_gamma;
    cfg.tol = st.spa_tol;
    cfg.seed = st.spa_seed;
    cfg.out_csv = st.spa_out;

    auto rows = run_sparsity_sweep(cfg);
    for (const auto& r : rows)
        std::printf("%s density %s gap %s kl %s\n", r.beta_label.c_str(),
                    format_double(r.sweep_value).c_str(), format_double(r.mean_gap).c_str(),
                    r.mean_kl ? format_double(*r.mean_kl).c_str() : "-");
    return 0;
}

int run_clip_cli(const CliState& st) {
    ClipExperimentConfig cfg;
    cfg.task_a = load_grid_spec(st.clip_task_a, st.clip_gridopts.params());
    cfg.task_b = load_grid_spec(st.clip_task_b, st.clip_gridopts.params());
    cfg.transfer_expr = st.clip_fn;
    cfg.trials = st.clip_trials;
    cfg.hyper = st.clip_hyper;
    cfg.soft_weight = st.clip_soft_weight;
    cfg.tol = st.clip_tol;
    cfg.seed = st.clip_seed;
    cfg.out_dir = st.clip_out_dir;

    ClipExperimentResult result = run_clip_experiment(cfg);
    for (const auto& s : result.summaries)
        std::printf("%-10s median_steps_to_zero_bv %s mean_final_return %s\n", s.arm.c_str(),
                    format_double(s.median_steps_to_zero_bv).c_str(),
                    format_double(s.mean_final_return).c_str());
    return 0;
}

// Config files are flat JSON objects keyed by long option names; arrays feed
// vector options one element per entry. Keys apply to whichever subcommand was
// invoked, and explicit command-line flags win over the file.
class JsonConfig : public CLI::Config {
  public:
    explicit JsonConfig(const CLI::App* root) : root_(root) {}

    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json j;
        try {
            input >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConfigError("config root must be a JSON object");
        std::vector<std::string> parents;
        auto used = root_->get_subcommands();
        if (!used.empty()) parents.push_back(used.front()->get_name());
        std::vector<CLI::ConfigItem> items;
        for (auto it = j.begin(); it != j.end(); ++it) {
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = it.key();
            if (it.value().is_array()) {
                for (const auto& e : it.value()) item.inputs.push_back(scalar_text(e));
            } else {
                item.inputs.push_back(scalar_text(it.value()));
            }
            items.push_back(std::move(item));
        }
        return items;
    }

  private:
    static std::string scalar_text(const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ConfigError("config values must be scalars or arrays of scalars");
    }

    const CLI::App* root_;
};

} // namespace

int cli_dispatch(int argc, const char* const* argv) {
    CLI::App app{"compositional value bounds toolkit"};
    app.require_subcommand(1);
    // Lets --config appear after the subcommand name.
    app.fallthrough();
    CliState st;

    auto* solve = app.add_subcommand("solve", "solve one task to its optimal action values");
    solve->add_option("--mdp", st.solve_mdp, "task as a JSON file");
    solve->add_option("--grid", st.solve_grid, "task as a grid layout file");
    add_grid_options(solve, st.solve_gridopts);
    solve->add_option("--beta", st.solve_beta, "inverse temperature (soft solve)")
        ->each([&st](const std::string&) { st.solve_beta_set = true; });
    solve->add_option("--tol", st.solve_tol, "fixed-point tolerance");
    solve->add_option("--out", st.solve_out, "write the table as JSON");

    auto* check = app.add_subcommand("check-fn", "certify a function against the condition sets");
    check->add_option("--fn,--expr", st.check_fn_expr, "function expression")->required();
    check->add_option("--regime", st.check_regime, "standard or soft")
        ->check(CLI::IsMember({"standard", "soft"}));
    check->add_option("--beta", st.check_beta, "inverse temperature for the soft exchange test");
    check->add_option("--lo", st.check_lo, "box lower edge (all axes)");
    check->add_option("--hi", st.check_hi, "box upper edge (all axes)");
    check->add_option("--samples", st.check_samples, "grid samples per axis");
    check->add_option("--random", st.check_random, "random samples");
    check->add_option("--seed", st.check_seed, "sampling seed");
    check->add_option("--gamma", st.check_gamma, "discount used by the scaling test");
    check->add_option("--pseudo-actions", st.check_pseudo_actions, "row width for exchange tests");
    check->add_flag("--deterministic", st.check_deterministic,
                    "exclude convexity/concavity from the decision");
    check->add_option("--tol", st.check_tol, "violation tolerance");

    auto* bound = app.add_subcommand("bound", "build the two-sided certificate for a composition");
    bound->add_option("--grids", st.bound_grids, "primitive grid files")->required()->expected(-1);
    bound->add_option("--fn", st.bound_fn, "composition function")->required();
    bound->add_option("--regime", st.bound_regime, "standard or soft")
        ->check(CLI::IsMember({"standard", "soft"}));
    bound->add_option("--beta", st.bound_beta, "inverse temperature (soft regime)");
    add_grid_options(bound, st.bound_gridopts);
    bound->add_option("--tol", st.bound_tol, "fixed-point tolerance");
    bound->add_option("--out", st.bound_out, "write the full report as JSON");

    auto* learn = app.add_subcommand("learn", "tabular Q-learning on a composed grid task");
    learn->add_option("--grids", st.learn_grids, "primitive grid files")->required()->expected(-1);
    learn->add_option("--fn", st.learn_fn, "composition function");
    learn->add_option("--mode", st.learn_mode, "none, hard, soft, test or soft_hard");
    learn->add_option("--soft-weight", st.learn_soft_weight, "soft penalty weight");
    add_grid_options(learn, st.learn_gridopts);
    add_hyper_options(learn, st.learn_hyper);
    learn->add_option("--seed", st.learn_seed, "trial seed");
    learn->add_option("--tol", st.learn_tol, "tolerance for the bound solves");
    learn->add_option("--out", st.learn_out, "write the learning curve CSV");

    auto* sto = app.add_subcommand("sweep-stochasticity", "gap/KL against action noise");
    sto->add_option("--task-a", st.sto_task_a, "first grid file")->required();
    sto->add_option("--task-b", st.sto_task_b, "second grid file")->required();
    sto->add_option("--fn", st.sto_fn, "composition function");
    sto->add_option("--slip-min", st.sto_slip_min, "first slip value");
    sto->add_option("--slip-max", st.sto_slip_max, "last slip value");
    sto->add_option("--slip-step", st.sto_slip_step, "slip increment");
    sto->add_option("--betas", st.sto_betas, "beta values, 'inf' for the standard regime")
        ->delimiter(',');
    add_grid_options(sto, st.sto_gridopts);
    sto->add_option("--tol", st.sto_tol, "fixed-point tolerance");
    sto->add_option("--out", st.sto_out, "output CSV path");

    auto* spa = app.add_subcommand("sweep-sparsity", "gap/KL against reward density");
    spa->add_option("--sizes", st.spa_sizes, "grid sizes")->delimiter(',');
    spa->add_option("--densities", st.spa_densities, "reward counts (default: all)")->delimiter(',');
    spa->add_option("--trials", st.spa_trials, "task pairs per density");
    spa->add_option("--beta", st.spa_beta, "inverse temperature");
    spa->add_option("--gamma", st.spa_gamma, "discount factor");
    spa->add_option("--seed", st.spa_seed, "master seed");
    spa->add_option("--tol", st.spa_tol, "fixed-point tolerance");
    spa->add_option("--out", st.spa_out, "output CSV path");

    auto* clip = app.add_subcommand("clip-experiment", "compare bound-clipping learner arms");
    clip->add_option("--task-a", st.clip_task_a, "first grid file")->required();
    clip->add_option("--task-b", st.clip_task_b, "second grid file")->required();
    clip->add_option("--fn", st.clip_fn, "composition function");
    clip->add_option("--trials", st.clip_trials, "trials per arm");
    clip->add_option("--soft-weight", st.clip_soft_weight, "soft penalty weight");
    add_grid_options(clip, st.clip_gridopts);
    add_hyper_options(clip, st.clip_hyper);
    clip->add_option("--seed", st.clip_seed, "master seed");
    clip->add_option("--tol", st.clip_tol, "tolerance for the bound solves");
    clip->add_option("--out-dir", st.clip_out_dir, "directory for the result CSVs");

    app.config_formatter(std::make_shared<JsonConfig>(&app));
    app.set_config("--config", "", "JSON config file, keys are the long option names");
    app.allow_config_extras(CLI::config_extras_mode::error);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(solve)) return run_solve(st);
        if (app.got_subcommand(check)) return run_check_fn(st);
        if (app.got_subcommand(bound)) return run_bound(st);
        if (app.got_subcommand(learn)) return run_learn(st);
        if (app.got_subcommand(sto)) return run_sweep_stochasticity(st);
        if (app.got_subcommand(spa)) return run_sweep_sparsity(st);
        if (app.got_subcommand(clip)) return run_clip_cli(st);
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    }
    return 0;
}

} // namespace qbound

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qbound/mdp.hpp"
#include "qbound/transfer.hpp"

namespace qbound {

/// Gridworld parameters. penalty_reward has no default on purpose: grids with
/// an 'X' cell refuse to build until the caller picks one.
struct GridParams {
    double slip = 0.0;
    double step_reward = -1.0;
    double diamond_reward = -0.5;
    std::optional<double> penalty_reward;
    double gamma = 0.99;
};

/// Parsed grid: rows over the alphabet {., #, S, X, D} plus optional per-cell
/// arrival-reward overrides (used by the sparse random grids, where reward
/// values vary per cell).
struct GridSpec {
    std::vector<std::string> rows;
    GridParams params;
    std::map<std::pair<int, int>, double> reward_overrides;

    int height() const { return static_cast<int>(rows.size()); }
    int width() const { return rows.empty() ? 0 : static_cast<int>(rows[0].size()); }
};

/// Validates the text (rectangular, known characters, exactly one 'S') and
/// pairs it with params. Throws std::invalid_argument otherwise.
GridSpec parse_grid_spec(const std::string& text, const GridParams& params);

/// Builds the MDP. States are the non-wall cells in row-major order; when the
/// grid has any 'X' cell an absorbing zero-reward sink is appended as the last
/// state. Actions are {up, down, left, right}; the intended direction receives
/// 1 - slip + slip/4 mass and each other direction slip/4; moves into walls or
/// off the border keep the position. r(s,a) is the dynamics-weighted
/// expectation of the arrival cell's reward (D -> diamond, X -> penalty,
/// otherwise step; overrides win). 'X' states and the sink are terminal, so
/// episodes end on entering an 'X' cell; the stored 'X' rows still point at
/// the sink with reward 0 -- the penalty was paid on arrival.
TabularMdp grid_to_mdp(const GridSpec& spec);

TabularMdp parse_grid(const std::string& text, const GridParams& params);

/// Loads the grid rows from a text file (reward parameters still come from
/// params). Throws std::invalid_argument when the file cannot be read.
GridSpec load_grid_spec(const std::string& path, const GridParams& params);

/// Composite task over primitives that share layout, slip and gamma and differ
/// only in reward placement: the transition tensor is checked identical and
/// the reward table is f applied cellwise to the primitive reward tables.
TabularMdp compose_grids(const TransferFn& f, const std::vector<GridSpec>& specs);

/// Empty size x size grid, slip 0, step reward 0, with n_rewards distinct
/// cells given arrival rewards drawn uniformly from (reward_lo, reward_hi).
/// Requires 0 < n_rewards < size*size. Start cell is (0,0); reward cells may
/// include it.
GridSpec random_sparse_grid(int size, int n_rewards, double reward_lo, double reward_hi,
                            std::uint64_t seed, double gamma = 0.99);

/// Dense random MDP: transition rows are normalized positive uniforms, rewards
/// uniform in [reward_lo, reward_hi], no terminal states, uniform start.
TabularMdp random_mdp(int n_states, int n_actions, double reward_lo, double reward_hi,
                      double gamma, std::uint64_t seed);

/// Family of tasks sharing one random dynamics: element i differs only in its
/// reward table (each drawn independently from the same range).
std::vector<TabularMdp> random_mdp_family(int n_states, int n_actions, double reward_lo,
                                          double reward_hi, double gamma, int n_tasks,
                                          std::uint64_t seed);

} // namespace qbound

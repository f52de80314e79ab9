#include "qbound/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qbound/rng.hpp"

namespace qbound {

namespace {

constexpr int kActions = 4;
// up, down, left, right
constexpr int kDRow[kActions] = {-1, 1, 0, 0};
constexpr int kDCol[kActions] = {0, 0, -1, 1};

bool is_wall(const GridSpec& spec, int r, int c) {
    if (r < 0 || r >= spec.height() || c < 0 || c >= spec.width()) return true;
    return spec.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == '#';
}

char cell(const GridSpec& spec, int r, int c) {
    return spec.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
}

double arrival_reward(const GridSpec& spec, int r, int c) {
    if (auto it = spec.reward_overrides.find({r, c}); it != spec.reward_overrides.end())
        return it->second;
    switch (cell(spec, r, c)) {
    case 'D': return spec.params.diamond_reward;
    case 'X': return *spec.params.penalty_reward;
    default: return spec.params.step_reward;
    }
}

} // namespace

GridSpec parse_grid_spec(const std::string& text, const GridParams& params) {
    GridSpec spec;
    spec.params = params;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        spec.rows.push_back(line);
    }
    if (spec.rows.empty()) throw std::invalid_argument("grid: no rows");

    int starts = 0;
    bool any_x = false;
    for (const auto& row : spec.rows) {
        if (static_cast<int>(row.size()) != spec.width())
            throw std::invalid_argument("grid: rows have unequal width");
        for (char c : row) {
            switch (c) {
            case '.': case '#': case 'D': break;
            case 'S': ++starts; break;
            case 'X': any_x = true; break;
            default:
                throw std::invalid_argument(std::string("grid: unknown cell '") + c + "'");
            }
        }
    }
    if (starts != 1) throw std::invalid_argument("grid: need exactly one start cell");
    if (any_x && !params.penalty_reward)
        throw std::invalid_argument("grid: has penalty cells but no penalty_reward configured");
    if (!(params.slip >= 0.0) || !(params.slip <= 1.0))
        throw std::invalid_argument("grid: slip must lie in [0,1]");
    if (!(params.gamma > 0.0) || !(params.gamma < 1.0))
        throw std::invalid_argument("grid: gamma must lie in (0,1)");
    for (const auto& [rc, v] : spec.reward_overrides) {
        (void)v;
        if (is_wall(spec, rc.first, rc.second))
            throw std::invalid_argument("grid: reward override on a wall cell");
    }
    return spec;
}

TabularMdp grid_to_mdp(const GridSpec& spec) {
    const int h = spec.height(), w = spec.width();
    if (h == 0 || w == 0) throw std::invalid_argument("grid: empty");

    // Cell -> state index, row-major over non-wall cells.
    std::vector<int> state_of(static_cast<std::size_t>(h) * w, -1);
    std::vector<std::pair<int, int>> cell_of;
    bool any_x = false;
    int start_state = -1;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            char ch = cell(spec, r, c);
            if (ch == '#') continue;
            state_of[static_cast<std::size_t>(r) * w + c] = static_cast<int>(cell_of.size());
            if (ch == 'S') start_state = static_cast<int>(cell_of.size());
            if (ch == 'X') any_x = true;
            cell_of.emplace_back(r, c);
        }
    }
    if (any_x && !spec.params.penalty_reward)
        throw std::invalid_argument("grid: has penalty cells but no penalty_reward configured");

    const int n = static_cast<int>(cell_of.size()) + (any_x ? 1 : 0);
    const int sink = any_x ? n - 1 : -1;
    TabularMdp mdp = TabularMdp::empty(n, kActions, spec.params.gamma);
    mdp.terminal.assign(static_cast<std::size_t>(n), 0);
    mdp.initial_dist.assign(static_cast<std::size_t>(n), 0.0);
    if (start_state < 0) throw std::invalid_argument("grid: need exactly one start cell");
    mdp.initial_dist[static_cast<std::size_t>(start_state)] = 1.0;

    const double slip = spec.params.slip;
    for (std::size_t si = 0; si < cell_of.size(); ++si) {
        auto [r, c] = cell_of[si];
        int s = static_cast<int>(si);
        if (cell(spec, r, c) == 'X') {
            // Penalty already charged on arrival; the episode is over. Terminal
            // masking zeroes the continuation, the stored row still points at
            // the sink so the tensor stays stochastic.
            mdp.terminal[si] = 1;
            for (int a = 0; a < kActions; ++a) {
                mdp.p(s, a, sink) = 1.0;
                mdp.r(s, a) = 0.0;
            }
            continue;
        }
        for (int a = 0; a < kActions; ++a) {
            for (int dir = 0; dir < kActions; ++dir) {
                double mass = slip / kActions + (dir == a ? 1.0 - slip : 0.0);
                if (mass == 0.0) continue;
                int nr = r + kDRow[dir], nc = c + kDCol[dir];
                if (is_wall(spec, nr, nc)) {
                    nr = r;
                    nc = c;
                }
                int s2 = state_of[static_cast<std::size_t>(nr) * w + nc];
                mdp.p(s, a, s2) += mass;
                mdp.r(s, a) += mass * arrival_reward(spec, nr, nc);
            }
        }
    }
    if (any_x) {
        mdp.terminal[static_cast<std::size_t>(sink)] = 1;
        for (int a = 0; a < kActions; ++a) mdp.p(sink, a, sink) = 1.0;
    }
    mdp.validate();
    return mdp;
}

TabularMdp parse_grid(const std::string& text, const GridParams& params) {
    return grid_to_mdp(parse_grid_spec(text, params));
}

GridSpec load_grid_spec(const std::string& path, const GridParams& params) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("grid: cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_grid_spec(buf.str(), params);
}

TabularMdp compose_grids(const TransferFn& f, const std::vector<GridSpec>& specs) {
    if (specs.empty()) throw std::invalid_argument("compose_grids: no tasks");
    if (static_cast<int>(specs.size()) != f.arity())
        throw std::invalid_argument("compose_grids: task count does not match function arity");

    std::vector<TabularMdp> prims;
    prims.reserve(specs.size());
    for (const auto& s : specs) prims.push_back(grid_to_mdp(s));
    for (std::size_t k = 1; k < prims.size(); ++k) {
        if (prims[k].n_states != prims[0].n_states || prims[k].gamma != prims[0].gamma ||
            prims[k].transition != prims[0].transition || prims[k].terminal != prims[0].terminal)
            throw std::invalid_argument("compose_grids: tasks do not share layout, slip and gamma");
    }

    std::vector<std::vector<double>> rewards;
    rewards.reserve(prims.size());
    for (auto& p : prims) rewards.push_back(p.reward);
    TabularMdp out = prims[0];
    out.reward = transform_reward(f, rewards);
    out.validate();
    return out;
}

GridSpec random_sparse_grid(int size, int n_rewards, double reward_lo, double reward_hi,
                            std::uint64_t seed, double gamma) {
    if (size < 2) throw std::invalid_argument("random_sparse_grid: size must be at least 2");
    if (n_rewards <= 0 || n_rewards >= size * size)
        throw std::invalid_argument("random_sparse_grid: n_rewards must lie in (0, size^2)");
    if (!(reward_lo < reward_hi))
        throw std::invalid_argument("random_sparse_grid: reward_lo must be below reward_hi");

    GridSpec spec;
    spec.params.slip = 0.0;
    spec.params.step_reward = 0.0;
    spec.params.gamma = gamma;
    spec.rows.assign(static_cast<std::size_t>(size), std::string(static_cast<std::size_t>(size), '.'));
    spec.rows[0][0] = 'S';

    Rng rng(seed);
    std::vector<int> cells(static_cast<std::size_t>(size) * size);
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
    // Partial Fisher-Yates gives n distinct cells.
    for (int i = 0; i < n_rewards; ++i) {
        int j = i + rng.uniform_int(static_cast<int>(cells.size()) - i);
        std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(j)]);
        int r = cells[static_cast<std::size_t>(i)] / size, c = cells[static_cast<std::size_t>(i)] % size;
        spec.reward_overrides[{r, c}] = rng.uniform(reward_lo, reward_hi);
    }
    return spec;
}

TabularMdp random_mdp(int n_states, int n_actions, double reward_lo, double reward_hi,
                      double gamma, std::uint64_t seed) {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("random_mdp: empty shape");
    if (!(reward_lo <= reward_hi)) throw std::invalid_argument("random_mdp: bad reward range");
    TabularMdp mdp = TabularMdp::empty(n_states, n_actions, gamma);
    Rng rng(seed);
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            double total = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                // 1 - U keeps every entry strictly positive.
                double u = 1.0 - rng.uniform01();
                mdp.p(s, a, s2) = u;
                total += u;
            }
            for (int s2 = 0; s2 < n_states; ++s2) mdp.p(s, a, s2) /= total;
            mdp.r(s, a) = rng.uniform(reward_lo, reward_hi);
        }
    }
    mdp.initial_dist.assign(static_cast<std::size_t>(n_states), 1.0 / n_states);
    mdp.validate();
    return mdp;
}

std::vector<TabularMdp> random_mdp_family(int n_states, int n_actions, double reward_lo,
                                          double reward_hi, double gamma, int n_tasks,
                                          std::uint64_t seed) {
    if (n_tasks < 1) throw std::invalid_argument("random_mdp_family: need at least one task");
    TabularMdp base = random_mdp(n_states, n_actions, reward_lo, reward_hi, gamma, seed);
    std::vector<TabularMdp> out(static_cast<std::size_t>(n_tasks), base);
    for (int k = 0; k < n_tasks; ++k) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        for (double& r : out[static_cast<std::size_t>(k)].reward)
            r = rng.uniform(reward_lo, reward_hi);
    }
    return out;
}

} // namespace qbound

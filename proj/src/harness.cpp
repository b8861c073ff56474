#include "relaysim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>
#include <utility>

#include "relaysim/baselines.hpp"
#include "relaysim/env.hpp"

namespace relaysim {

namespace {

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

MetricsRow episode_row(const std::string& strategy, const ExperimentConfig& cfg, uint64_t seed,
                       int episode, const EpisodeResult& res, const ConstraintReport& report) {
    MetricsRow row;
    row.strategy = strategy;
    row.grid = cfg.env.width;
    row.users = cfg.env.users;
    row.seed = seed;
    row.episode = episode;
    row.success = res.success;
    row.agents = res.agents_used;
    row.steps = res.steps;
    row.mean_delay = res.mean_delay;
    row.mean_bottleneck = res.mean_bottleneck;
    row.min_bottleneck = res.min_bottleneck;
    row.violations = report.violation_counts();
    row.config_hash = config_hash(cfg);
    return row;
}

// Flow statistics of a static deployment, recomputed from its final world.
MetricsRow deployment_row(const std::string& strategy, const ExperimentConfig& cfg, uint64_t seed,
                          int agent_count, bool success, const StaticEval& ev) {
    MetricsRow row;
    row.strategy = strategy;
    row.grid = cfg.env.width;
    row.users = cfg.env.users;
    row.seed = seed;
    row.success = success;
    row.agents = agent_count;
    row.violations = ev.report.violation_counts();
    row.config_hash = config_hash(cfg);
    int served = 0;
    for (const UserState& u : ev.world.users) {
        if (!u.connected) continue;
        const FlowStats fs = flow_stats(ev.world, ev.graph, u, cfg);
        row.mean_delay += fs.delay;
        row.mean_bottleneck += fs.bottleneck;
        row.min_bottleneck = served == 0 ? fs.bottleneck : std::min(row.min_bottleneck, fs.bottleneck);
        ++served;
    }
    if (served > 0) {
        row.mean_delay /= served;
        row.mean_bottleneck /= served;
    }
    return row;
}

// Front member reported in metrics: fewest agents, then the strongest
// bottleneck, then the smallest worst-case delay.
const Deployment& representative(const std::vector<Deployment>& front) {
    const Deployment* best = &front.front();
    for (const Deployment& d : front) {
        const auto key = std::tuple(d.agent_count(), -d.min_bottleneck, d.max_delay);
        const auto cur = std::tuple(best->agent_count(), -best->min_bottleneck, best->max_delay);
        if (key < cur) best = &d;
    }
    return *best;
}

std::vector<MetricsRow> greedy_ga_rows(const ExperimentConfig& cfg, uint64_t seed) {
    const World w0 = new_world(cfg.env, episode_world_seed(seed, 0));
    const Deployment init = greedy_init(w0, cfg);
    Rng ga_rng = Rng::stream(seed, "ga");
    const std::vector<Deployment> front = ga_optimize({init}, w0, cfg, ga_rng);
    const Deployment& pick = front.empty() ? init : representative(front);
    const StaticEval ev = evaluate_deployment(pick.positions, w0, cfg);
    return {deployment_row("greedy_ga", cfg, seed, pick.agent_count(), ev.feasible, ev)};
}

std::vector<MetricsRow> max_coverage_rows(const ExperimentConfig& cfg, uint64_t seed) {
    const Deployment d = greedy_max_coverage(cfg);
    const World w0 = new_world(cfg.env, episode_world_seed(seed, 0));
    const StaticEval ev = evaluate_deployment(d.positions, w0, cfg);
    return {deployment_row("max_coverage", cfg, seed, d.agent_count(), d.feasible && ev.feasible,
                           ev)};
}

std::vector<MetricsRow> random_rows(const ExperimentConfig& cfg, uint64_t seed, int episodes) {
    std::vector<MetricsRow> rows;
    for (int e = 0; e < episodes; ++e) {
        ConstraintReport report;
        const EpisodeResult res = random_centralized(cfg, seed, e, &report);
        rows.push_back(episode_row("random_centralized", cfg, seed, e, res, report));
    }
    return rows;
}

}  // namespace

std::string MetricsRow::scenario() const {
    return strategy + "-g" + std::to_string(grid) + "-u" + std::to_string(users);
}

void write_metrics_header(std::ostream& os) {
    os << "# relaysim-metrics v1\n"
       << "scenario,strategy,grid,users,seed,episode,success,agents,steps,mean_delay,"
          "mean_bottleneck,min_bottleneck,c1,c2,c3,c4,c5,c6,c7,config_hash,note\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& row) {
    os << row.scenario() << ',' << row.strategy << ',' << row.grid << ',' << row.users << ','
       << row.seed << ',' << row.episode << ',' << (row.success ? 1 : 0) << ',' << row.agents
       << ',' << row.steps << ',' << format_double(row.mean_delay) << ','
       << format_double(row.mean_bottleneck) << ',' << format_double(row.min_bottleneck);
    for (int v : row.violations) os << ',' << v;
    os << ',' << row.config_hash << ',' << sanitize(row.note) << '\n';
}

MetricsRow parse_metrics_row(const std::string& line) {
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 21) throw std::invalid_argument("metrics row: expected 21 fields");
    MetricsRow row;
    row.strategy = f[1];
    row.grid = std::stoi(f[2]);
    row.users = std::stoi(f[3]);
    row.seed = std::stoull(f[4]);
    row.episode = std::stoi(f[5]);
    row.success = f[6] == "1";
    row.agents = std::stoi(f[7]);
    row.steps = std::stoi(f[8]);
    row.mean_delay = std::stod(f[9]);
    row.mean_bottleneck = std::stod(f[10]);
    row.min_bottleneck = std::stod(f[11]);
    for (int i = 0; i < 7; ++i) row.violations[static_cast<size_t>(i)] = std::stoi(f[12 + i]);
    row.config_hash = std::stoull(f[19]);
    row.note = f[20];
    return row;
}

std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows) {
    std::map<std::tuple<std::string, int, int>, std::vector<const MetricsRow*>> groups;
    for (const MetricsRow& r : rows) {
        if (!r.note.empty()) continue;  // flagged cells carry no measurements
        groups[{r.strategy, r.grid, r.users}].push_back(&r);
    }
    std::vector<SummaryRow> out;
    for (const auto& [key, members] : groups) {
        SummaryRow s;
        s.strategy = std::get<0>(key);
        s.grid = std::get<1>(key);
        s.users = std::get<2>(key);
        s.rows = static_cast<int>(members.size());
        std::vector<double> agents, steps, delay, bottleneck, objective;
        int successes = 0;
        for (const MetricsRow* r : members) {
            successes += r->success ? 1 : 0;
            agents.push_back(r->agents);
            steps.push_back(r->steps);
            if (r->mean_delay > 0.0) {
                delay.push_back(r->mean_delay);
                bottleneck.push_back(r->mean_bottleneck);
                objective.push_back(r->min_bottleneck);
            }
        }
        s.served_rows = static_cast<int>(delay.size());
        s.success_rate = static_cast<double>(successes) / static_cast<double>(members.size());
        s.agents_mean = mean_of(agents);
        s.agents_std = std_of(agents);
        s.steps_mean = mean_of(steps);
        s.steps_std = std_of(steps);
        s.delay_mean = mean_of(delay);
        s.delay_std = std_of(delay);
        s.bottleneck_mean = mean_of(bottleneck);
        s.bottleneck_std = std_of(bottleneck);
        s.objective_mean = mean_of(objective);
        s.objective_std = std_of(objective);
        out.push_back(std::move(s));
    }
    return out;
}

void write_summary_header(std::ostream& os) {
    os << "# relaysim-summary v1\n"
       << "scenario,strategy,grid,users,rows,served_rows,success_rate,agents_mean,agents_std,"
          "steps_mean,steps_std,delay_mean,delay_std,bottleneck_mean,bottleneck_std,"
          "objective_mean,objective_std\n";
}

void write_summary_row(std::ostream& os, const SummaryRow& s) {
    os << s.strategy << "-g" << s.grid << "-u" << s.users << ',' << s.strategy << ',' << s.grid
       << ',' << s.users << ',' << s.rows << ',' << s.served_rows << ','
       << format_double(s.success_rate) << ',' << format_double(s.agents_mean) << ','
       << format_double(s.agents_std) << ',' << format_double(s.steps_mean) << ','
       << format_double(s.steps_std) << ',' << format_double(s.delay_mean) << ','
       << format_double(s.delay_std) << ',' << format_double(s.bottleneck_mean) << ','
       << format_double(s.bottleneck_std) << ',' << format_double(s.objective_mean) << ','
       << format_double(s.objective_std) << '\n';
}

std::vector<MetricsRow> eval_policy_rows(const Learner& policy, const ExperimentConfig& cfg,
                                         const std::string& strategy, uint64_t seed, int episodes,
                                         const std::string& trace_dir, int trace_episodes) {
    if (net_dims(cfg).obs_dim != policy.dims().obs_dim)
        throw std::runtime_error("policy was trained with a different observation layout");
    std::vector<MetricsRow> rows;
    for (int e = 0; e < episodes; ++e) {
        Sim sim(cfg, episode_world_seed(seed, e), episode_dispatch_stream(seed, e));
        const Policy greedy = [&policy](const Sim& s) {
            Rng none(0);
            return policy.act(take_snapshot(s), 0.0, none);
        };
        EpisodeResult res;
        if (!trace_dir.empty() && e < trace_episodes) {
            std::ofstream tf(trace_dir + "/trace_ep" + std::to_string(e) + ".txt",
                             std::ios::binary);
            if (!tf) throw std::runtime_error("cannot write trace file in " + trace_dir);
            TraceWriter writer(tf);
            writer.begin_episode(cfg, seed, e, sim);
            res = run_episode(sim, greedy, &writer);
        } else {
            res = run_episode(sim, greedy);
        }
        rows.push_back(
            episode_row(strategy, cfg, seed, e, res, check_constraints(sim.world, sim.graph, cfg)));
    }
    return rows;
}

namespace {

struct SweepCell {
    std::string strategy;
    int grid = 0;
    int users = 0;
    uint64_t seed = 0;
};

ExperimentConfig cell_config(const ExperimentConfig& base, const SweepCell& cell) {
    ExperimentConfig cfg = base;
    cfg.env.width = cell.grid;
    cfg.env.height = cell.grid;
    cfg.env.users = cell.users;
    cfg.env.max_users = std::max(cfg.env.max_users, cell.users);
    return cfg;
}

}  // namespace

int run_suite(const ExperimentConfig& cfg, std::ostream& rows_csv, std::ostream& summary_csv) {
    for (const std::string& s : cfg.sweep.strategies)
        if (s != "a3" && s != "greedy_ga" && s != "max_coverage" && s != "random_centralized")
            throw ConfigError("unknown sweep strategy: " + s);

    std::vector<int> grids = cfg.sweep.grids;
    if (grids.empty()) grids.push_back(cfg.env.width);

    std::vector<SweepCell> cells;
    for (const std::string& strategy : cfg.sweep.strategies)
        for (int g : grids)
            for (int u : cfg.sweep.users)
                for (uint64_t seed : cfg.seeds) cells.push_back({strategy, g, u, seed});

    // Policies are trained up front, once per (grid, seed); every user-count
    // cell of that pair evaluates the same checkpoint.
    const bool wants_a3 =
        std::find(cfg.sweep.strategies.begin(), cfg.sweep.strategies.end(), "a3") !=
        cfg.sweep.strategies.end();
    std::map<std::pair<int, uint64_t>, std::shared_ptr<Learner>> policies;
    if (wants_a3) {
        for (int g : grids) {
            for (uint64_t seed : cfg.seeds) {
                ExperimentConfig tcfg = cfg;
                tcfg.env.width = g;
                tcfg.env.height = g;
                tcfg.learn.episodes = cfg.sweep.train_episodes;
                auto learner = std::make_shared<Learner>(tcfg, seed);
                if (!cfg.checkpoint.empty())
                    learner->load(cfg.checkpoint);
                else
                    learner->train(seed, nullptr);
                policies[{g, seed}] = std::move(learner);
            }
        }
    }

    std::vector<std::vector<MetricsRow>> results(cells.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= cells.size()) break;
            const SweepCell& cell = cells[i];
            const ExperimentConfig ccfg = cell_config(cfg, cell);
            try {
                if (cell.strategy == "a3") {
                    const Learner& policy = *policies.at({cell.grid, cell.seed});
                    results[i] = eval_policy_rows(policy, ccfg, "a3", cell.seed,
                                                  cfg.eval_episodes);
                } else if (cell.strategy == "greedy_ga") {
                    results[i] = greedy_ga_rows(ccfg, cell.seed);
                } else if (cell.strategy == "max_coverage") {
                    results[i] = max_coverage_rows(ccfg, cell.seed);
                } else {
                    results[i] = random_rows(ccfg, cell.seed, cfg.eval_episodes);
                }
            } catch (const std::exception& e) {
                MetricsRow row;
                row.strategy = cell.strategy;
                row.grid = cell.grid;
                row.users = cell.users;
                row.seed = cell.seed;
                row.config_hash = config_hash(ccfg);
                row.note = sanitize(e.what());
                results[i] = {row};
            }
        }
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned n_workers =
        static_cast<unsigned>(std::min<size_t>(hw, std::max<size_t>(1, cells.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_workers; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();

    std::vector<MetricsRow> rows;
    int flagged = 0;
    for (const auto& cell_rows : results)
        for (const MetricsRow& r : cell_rows) {
            flagged += r.note.empty() ? 0 : 1;
            rows.push_back(r);
        }

    write_metrics_header(rows_csv);
    for (const MetricsRow& r : rows) write_metrics_row(rows_csv, r);
    write_summary_header(summary_csv);
    for (const SummaryRow& s : summarize(rows)) write_summary_row(summary_csv, s);
    return flagged;
}

int run_train(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    Learner learner(cfg, cfg.seed);
    std::ofstream log(cfg.out_dir + "/train_log.csv", std::ios::binary);
    if (!log) throw std::runtime_error("cannot write train log in " + cfg.out_dir);
    const std::vector<TrainRow> rows = learner.train(cfg.seed, &log);
    learner.save(cfg.out_dir + "/checkpoint.bin");

    int wins = 0;
    const size_t tail = std::min<size_t>(100, rows.size());
    for (size_t i = rows.size() - tail; i < rows.size(); ++i) wins += rows[i].success ? 1 : 0;
    std::cout << "trained " << rows.size() << " episodes, checkpoint in " << cfg.out_dir
              << ", last-" << tail << " success " << wins << "/" << tail << "\n";
    return 0;
}

int run_eval(const ExperimentConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("eval needs a checkpoint path");
    std::filesystem::create_directories(cfg.out_dir);
    Learner learner(cfg, cfg.seed);
    learner.load(cfg.checkpoint);
    const std::vector<MetricsRow> rows = eval_policy_rows(
        learner, cfg, "a3", cfg.seed, cfg.eval_episodes, cfg.out_dir, cfg.trace_episodes);

    std::ofstream mf(cfg.out_dir + "/metrics.csv", std::ios::binary);
    if (!mf) throw std::runtime_error("cannot write metrics in " + cfg.out_dir);
    write_metrics_header(mf);
    for (const MetricsRow& r : rows) write_metrics_row(mf, r);

    const std::vector<SummaryRow> sum = summarize(rows);
    for (const SummaryRow& s : sum)
        std::cout << s.strategy << " g" << s.grid << " u" << s.users << ": success "
                  << format_double(s.success_rate) << ", agents " << format_double(s.agents_mean)
                  << ", delay " << format_double(s.delay_mean) << "\n";
    return 0;
}

int run_baseline(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    std::vector<MetricsRow> rows;
    if (name == "max_coverage") {
        const Deployment d = greedy_max_coverage(cfg);
        std::ofstream df(cfg.out_dir + "/max_coverage_deployment.csv", std::ios::binary);
        if (!df) throw std::runtime_error("cannot write deployment in " + cfg.out_dir);
        df << "# relaysim-deployment v1\nx,y\n";
        for (GridPos p : d.positions) df << p.x << ',' << p.y << '\n';
        rows = max_coverage_rows(cfg, cfg.seed);
    } else if (name == "greedy_ga") {
        const World w0 = new_world(cfg.env, episode_world_seed(cfg.seed, 0));
        const Deployment init = greedy_init(w0, cfg);
        Rng ga_rng = Rng::stream(cfg.seed, "ga");
        const std::vector<Deployment> front = ga_optimize({init}, w0, cfg, ga_rng);
        std::ofstream ff(cfg.out_dir + "/greedy_ga_front.csv", std::ios::binary);
        if (!ff) throw std::runtime_error("cannot write front in " + cfg.out_dir);
        ff << "# relaysim-front v1\nagents,max_delay,min_bottleneck,positions\n";
        for (const Deployment& d : front) {
            ff << d.agent_count() << ',' << format_double(d.max_delay) << ','
               << format_double(d.min_bottleneck) << ',';
            for (size_t i = 0; i < d.positions.size(); ++i)
                ff << (i ? "|" : "") << d.positions[i].x << ':' << d.positions[i].y;
            ff << '\n';
        }
        rows = greedy_ga_rows(cfg, cfg.seed);
    } else if (name == "random_centralized") {
        rows = random_rows(cfg, cfg.seed, cfg.eval_episodes);
    } else {
        throw ConfigError("unknown baseline: " + name);
    }

    std::ofstream mf(cfg.out_dir + "/metrics.csv", std::ios::binary);
    if (!mf) throw std::runtime_error("cannot write metrics in " + cfg.out_dir);
    write_metrics_header(mf);
    for (const MetricsRow& r : rows) write_metrics_row(mf, r);
    for (const SummaryRow& s : summarize(rows))
        std::cout << s.strategy << " g" << s.grid << " u" << s.users << ": success "
                  << format_double(s.success_rate) << ", agents " << format_double(s.agents_mean)
                  << "\n";
    return 0;
}

}  // namespace relaysim

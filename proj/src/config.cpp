#include "relaysim/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "relaysim/rng.hpp"

namespace relaysim {

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw ConfigError("unformattable double");
    return std::string(buf, end);
}

namespace {

std::string fmt_double(double v) { return format_double(v); }

double parse_double(const std::string& s) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ConfigError("bad number: '" + s + "'");
    return v;
}

template <typename I>
I parse_int(const std::string& s) {
    I v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ConfigError("bad integer: '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("bad bool: '" + s + "'");
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    return out;
}

struct Field {
    std::string key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

using FieldList = std::vector<Field>;

void add_double(FieldList& fs, std::string key, double* (*sel)(ExperimentConfig&)) {
    fs.push_back({std::move(key),
                  [sel](const ExperimentConfig& c) {
                      return fmt_double(*sel(const_cast<ExperimentConfig&>(c)));
                  },
                  [sel](ExperimentConfig& c, const std::string& v) { *sel(c) = parse_double(v); }});
}

void add_int(FieldList& fs, std::string key, int* (*sel)(ExperimentConfig&)) {
    fs.push_back({std::move(key),
                  [sel](const ExperimentConfig& c) {
                      return std::to_string(*sel(const_cast<ExperimentConfig&>(c)));
                  },
                  [sel](ExperimentConfig& c, const std::string& v) { *sel(c) = parse_int<int>(v); }});
}

void add_bool(FieldList& fs, std::string key, bool* (*sel)(ExperimentConfig&)) {
    fs.push_back({std::move(key),
                  [sel](const ExperimentConfig& c) {
                      return *sel(const_cast<ExperimentConfig&>(c)) ? "true" : "false";
                  },
                  [sel](ExperimentConfig& c, const std::string& v) { *sel(c) = parse_bool(v); }});
}

void add_string(FieldList& fs, std::string key, std::string* (*sel)(ExperimentConfig&)) {
    fs.push_back({std::move(key),
                  [sel](const ExperimentConfig& c) { return *sel(const_cast<ExperimentConfig&>(c)); },
                  [sel](ExperimentConfig& c, const std::string& v) { *sel(c) = v; }});
}

void add_u64(FieldList& fs, std::string key, uint64_t* (*sel)(ExperimentConfig&)) {
    fs.push_back({std::move(key),
                  [sel](const ExperimentConfig& c) {
                      return std::to_string(*sel(const_cast<ExperimentConfig&>(c)));
                  },
                  [sel](ExperimentConfig& c, const std::string& v) { *sel(c) = parse_int<uint64_t>(v); }});
}

template <typename T, typename Parse>
void add_list(FieldList& fs, std::string key, std::vector<T>* (*sel)(ExperimentConfig&), Parse parse_one) {
    fs.push_back({std::move(key),
                  [sel](const ExperimentConfig& c) {
                      const auto& vec = *sel(const_cast<ExperimentConfig&>(c));
                      std::string out;
                      for (size_t i = 0; i < vec.size(); ++i) {
                          if (i) out += ',';
                          if constexpr (std::is_same_v<T, std::string>)
                              out += vec[i];
                          else
                              out += std::to_string(vec[i]);
                      }
                      return out;
                  },
                  [sel, parse_one](ExperimentConfig& c, const std::string& v) {
                      auto& vec = *sel(c);
                      vec.clear();
                      if (v.empty()) return;
                      for (const auto& tok : split_commas(v)) vec.push_back(parse_one(tok));
                  }});
}

#define DBL(name, expr) \
    add_double(fs, name, +[](ExperimentConfig& c) -> double* { return &(c.expr); })
#define INT(name, expr) \
    add_int(fs, name, +[](ExperimentConfig& c) -> int* { return &(c.expr); })
#define BOOL(name, expr) \
    add_bool(fs, name, +[](ExperimentConfig& c) -> bool* { return &(c.expr); })
#define STR(name, expr) \
    add_string(fs, name, +[](ExperimentConfig& c) -> std::string* { return &(c.expr); })
#define U64(name, expr) \
    add_u64(fs, name, +[](ExperimentConfig& c) -> uint64_t* { return &(c.expr); })

FieldList build_fields() {
    FieldList fs;
    STR("mode", mode);
    U64("seed", seed);
    add_list<uint64_t>(fs, "seeds", +[](ExperimentConfig& c) { return &c.seeds; },
                       [](const std::string& s) { return parse_int<uint64_t>(s); });
    STR("out_dir", out_dir);
    STR("checkpoint", checkpoint);
    INT("trace_episodes", trace_episodes);
    INT("eval_episodes", eval_episodes);

    INT("env.width", env.width);
    INT("env.height", env.height);
    INT("env.users", env.users);
    INT("env.max_users", env.max_users);
    INT("env.sense_radius", env.sense_radius);
    INT("env.comm_radius", env.comm_radius);
    DBL("env.load_cap", env.load_cap);
    DBL("env.workload_min", env.workload_min);
    DBL("env.workload_max", env.workload_max);
    DBL("env.capacity_req_min", env.capacity_req_min);
    DBL("env.capacity_req_max", env.capacity_req_max);
    DBL("env.delay_cap_min", env.delay_cap_min);
    DBL("env.delay_cap_max", env.delay_cap_max);

    DBL("chan.tx_power", chan.tx_power);
    DBL("chan.gain_tx", chan.gain_tx);
    DBL("chan.gain_rx", chan.gain_rx);
    DBL("chan.wavelength", chan.wavelength);
    DBL("chan.noise_power", chan.noise_power);
    DBL("chan.bandwidth", chan.bandwidth);
    DBL("chan.prop_speed", chan.prop_speed);
    DBL("chan.cell_size", chan.cell_size);
    BOOL("chan.use_propagation_delay", chan.use_propagation_delay);

    DBL("route.w_delay", route.w_delay);
    DBL("route.w_capacity", route.w_capacity);
    DBL("route.w_load", route.w_load);

    DBL("dispatch.eta_min", dispatch.eta_min);
    DBL("dispatch.delta_max", dispatch.delta_max);
    DBL("dispatch.theta_load", dispatch.theta_load);
    INT("dispatch.max_agents", dispatch.max_agents);
    INT("dispatch.per_agent_cap", dispatch.per_agent_cap);
    DBL("dispatch.softmax_temp", dispatch.softmax_temp);
    DBL("dispatch.lambda_load", dispatch.lambda_load);
    DBL("dispatch.lambda_explore", dispatch.lambda_explore);
    DBL("dispatch.lambda_depth", dispatch.lambda_depth);
    INT("dispatch.productivity_window", dispatch.productivity_window);

    DBL("reward.w1", reward.w1);
    DBL("reward.w2", reward.w2);
    DBL("reward.w3", reward.w3);
    DBL("reward.w4", reward.w4);
    DBL("reward.w5", reward.w5);
    DBL("reward.g1", reward.g1);
    DBL("reward.g2", reward.g2);
    DBL("reward.g3", reward.g3);
    DBL("reward.g4", reward.g4);
    DBL("reward.g5", reward.g5);
    DBL("reward.lambda_local", reward.lambda_local);
    DBL("reward.lambda_global", reward.lambda_global);
    DBL("reward.density_base", reward.density_base);
    DBL("reward.stagnation_penalty", reward.stagnation_penalty);
    BOOL("reward.stagnation_enabled", reward.stagnation_enabled);
    DBL("reward.pen_out_of_bounds", reward.pen_out_of_bounds);
    DBL("reward.pen_conflict", reward.pen_conflict);
    DBL("reward.pen_parent_explorer", reward.pen_parent_explorer);
    DBL("reward.pen_parent_relay", reward.pen_parent_relay);
    DBL("reward.pen_child_loss", reward.pen_child_loss);
    DBL("reward.pen_structural", reward.pen_structural);

    DBL("learn.gamma", learn.gamma);
    DBL("learn.lr_actor", learn.lr_actor);
    DBL("learn.lr_critic", learn.lr_critic);
    INT("learn.batch", learn.batch);
    INT("learn.buffer_capacity", learn.buffer_capacity);
    DBL("learn.eps0", learn.eps0);
    DBL("learn.eps_min", learn.eps_min);
    DBL("learn.eps_decay", learn.eps_decay);
    INT("learn.target_update_period", learn.target_update_period);
    INT("learn.episodes", learn.episodes);
    INT("learn.update_period", learn.update_period);
    BOOL("learn.shared_actor", learn.shared_actor);

    INT("net.enc_dim", net.enc_dim);
    INT("net.gat_dim", net.gat_dim);
    INT("net.value_hidden", net.value_hidden);

    INT("ga.population", ga.population);
    INT("ga.generations", ga.generations);
    DBL("ga.p_add", ga.p_add);
    DBL("ga.p_remove", ga.p_remove);
    DBL("ga.p_relocate", ga.p_relocate);
    DBL("ga.p_crossover", ga.p_crossover);

    INT("limits.max_steps", limits.max_steps);
    INT("limits.stall_window", limits.stall_window);
    DBL("limits.rho_min", limits.rho_min);

    INT("baseline.static_max_agents", baseline.static_max_agents);
    INT("baseline.random_budget", baseline.random_budget);

    add_list<int>(fs, "sweep.users", +[](ExperimentConfig& c) { return &c.sweep.users; },
                  [](const std::string& s) { return parse_int<int>(s); });
    add_list<int>(fs, "sweep.grids", +[](ExperimentConfig& c) { return &c.sweep.grids; },
                  [](const std::string& s) { return parse_int<int>(s); });
    add_list<std::string>(fs, "sweep.strategies",
                          +[](ExperimentConfig& c) { return &c.sweep.strategies; },
                          [](const std::string& s) { return s; });
    INT("sweep.train_episodes", sweep.train_episodes);

    std::sort(fs.begin(), fs.end(), [](const Field& a, const Field& b) { return a.key < b.key; });
    return fs;
}

#undef DBL
#undef INT
#undef BOOL
#undef STR
#undef U64

const FieldList& fields() {
    static const FieldList fs = build_fields();
    return fs;
}

const Field* find_field(const std::string& key) {
    const auto& fs = fields();
    auto it = std::lower_bound(fs.begin(), fs.end(), key,
                               [](const Field& f, const std::string& k) { return f.key < k; });
    if (it == fs.end() || it->key != key) return nullptr;
    return &*it;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// "env.grid = 6x6" writes width and height at once; never serialized.
bool set_special(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key != "env.grid") return false;
    auto x = value.find('x');
    if (x == std::string::npos) throw ConfigError("env.grid expects WxH, got '" + value + "'");
    cfg.env.width = parse_int<int>(value.substr(0, x));
    cfg.env.height = parse_int<int>(value.substr(x + 1));
    return true;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(cfg);
        out += '\n';
    }
    return out;
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        try {
            if (set_special(cfg, key, value)) continue;
            const Field* f = find_field(key);
            if (!f) throw ConfigError("unknown key '" + key + "'");
            f->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& key_eq_value) {
    auto eq = key_eq_value.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + key_eq_value);
    std::string key = trim(key_eq_value.substr(0, eq));
    std::string value = trim(key_eq_value.substr(eq + 1));
    if (set_special(cfg, key, value)) return;
    const Field* f = find_field(key);
    if (!f) throw ConfigError("unknown config key '" + key + "'");
    f->set(cfg, value);
}

uint64_t config_hash(const ExperimentConfig& cfg) {
    return fnv1a(serialize_config(cfg));
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
    return serialize_config(*this) == serialize_config(other);
}

void validate_config(const ExperimentConfig& cfg) {
    auto require = [](bool ok, const char* msg) {
        if (!ok) throw ConfigError(msg);
    };
    require(cfg.env.width >= 2 && cfg.env.height >= 2, "grid must be at least 2x2");
    require(cfg.env.users >= 1 && cfg.env.users <= cfg.env.max_users,
            "env.users must be in [1, env.max_users]");
    require(cfg.env.sense_radius >= 1, "env.sense_radius must be positive");
    require(cfg.env.comm_radius >= 1, "env.comm_radius must be positive");
    require(cfg.env.load_cap > 0, "env.load_cap must be positive");
    require(cfg.env.workload_min <= cfg.env.workload_max, "workload range inverted");
    require(cfg.env.capacity_req_min <= cfg.env.capacity_req_max, "capacity range inverted");
    require(cfg.env.delay_cap_min <= cfg.env.delay_cap_max, "delay range inverted");
    require(cfg.chan.bandwidth > 0, "chan.bandwidth must be positive");
    require(cfg.chan.noise_power > 0, "chan.noise_power must be positive");
    require(cfg.chan.cell_size > 0, "chan.cell_size must be positive");
    require(cfg.dispatch.max_agents >= 1, "dispatch.max_agents must be positive");
    require(cfg.dispatch.softmax_temp > 0, "dispatch.softmax_temp must be positive");
    require(cfg.learn.gamma > 0 && cfg.learn.gamma < 1, "learn.gamma must be in (0,1)");
    require(cfg.learn.batch >= 1, "learn.batch must be positive");
    require(cfg.learn.buffer_capacity >= cfg.learn.batch, "buffer smaller than batch");
    require(cfg.learn.eps_decay > 0 && cfg.learn.eps_decay <= 1, "eps decay must be in (0,1]");
    require(cfg.ga.population >= 2, "ga.population must be at least 2");
    require(cfg.limits.rho_min > 0 && cfg.limits.rho_min <= 1, "limits.rho_min must be in (0,1]");
    for (const auto& s : cfg.sweep.strategies)
        require(s == "a3" || s == "greedy_ga" || s == "max_coverage" || s == "random_centralized",
                "unknown sweep strategy");
}

}  // namespace relaysim

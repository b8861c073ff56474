#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "relaysim/channel.hpp"
#include "relaysim/config.hpp"
#include "relaysim/grid.hpp"
#include "relaysim/rng.hpp"

using namespace relaysim;

namespace {

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

}  // namespace

TEST_CASE("link budget closed-form values") {
    const ChannelParams p;
    // frozen: P*Gt*Gr*lambda^2 / ((4pi)^2 * N * d^2) at 1 m and 3 m
    const double s1 = snr(p, {0, 0}, {0, 1});
    CHECK(rel_err(s1, 98946.46840072048) < 1e-9);
    const double s3 = snr(p, {0, 0}, {0, 3});
    CHECK(rel_err(s3, 10994.052044524498) < 1e-9);
    CHECK(rel_err(s1 / s3, 9.0) < 1e-12);

    // frozen: B * log2(1 + snr) at 1 m
    const double c1 = capacity(p, s1);
    CHECK(rel_err(c1, 165943751.75529173) < 1e-9);

    LinkState link = make_link(p, {0, 0}, {0, 1});
    CHECK(rel_err(link.capacity, c1) < 1e-12);
    CHECK(link.distance == 1.0);
    CHECK(link.load == 0.0);

    // frozen: 10 workload units over the fresh 1 m link
    CHECK(rel_err(hop_delay(p, link, 10.0), 6.026138311460174e-08) < 1e-9);

    ChannelParams with_prop = p;
    with_prop.use_propagation_delay = true;
    const double extra = hop_delay(with_prop, link, 10.0) - hop_delay(p, link, 10.0);
    CHECK(rel_err(extra, 3.3333333333333334e-09) < 1e-9);
}

TEST_CASE("link budget edge behavior") {
    const ChannelParams p;
    CHECK_THROWS_AS(snr(p, {2, 2}, {2, 2}), std::domain_error);
    CHECK_THROWS_AS(capacity(p, -0.5), std::domain_error);

    LinkState link = make_link(p, {0, 0}, {1, 0});
    link.load = link.capacity;
    CHECK_THROWS_AS(hop_delay(p, link, 1.0), std::domain_error);
    CHECK_THROWS_AS(hop_delay(p, make_link(p, {0, 0}, {1, 0}), -1.0), std::domain_error);

    // co-located endpoints take the one-cell distance floor
    const LinkState same = make_link(p, {4, 4}, {4, 4});
    const LinkState unit = make_link(p, {4, 4}, {4, 5});
    CHECK(same.distance == unit.distance);
    CHECK(same.capacity == unit.capacity);

    // longer links are strictly worse
    double prev = snr(p, {0, 0}, {0, 1});
    for (int d = 2; d <= 10; ++d) {
        const double cur = snr(p, {0, 0}, {0, d});
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK(capacity(p, 10.0) < capacity(p, 20.0));
    CHECK(capacity(p, 0.0) == 0.0);
}

TEST_CASE("hop delay scales with payload and load") {
    const ChannelParams p;
    LinkState link = make_link(p, {0, 0}, {0, 2});
    const double d1 = hop_delay(p, link, 5.0);
    CHECK(rel_err(hop_delay(p, link, 10.0), 2.0 * d1) < 1e-12);
    LinkState loaded = link;
    loaded.load = link.capacity / 2.0;
    CHECK(rel_err(hop_delay(p, loaded, 5.0), 2.0 * d1) < 1e-12);
    CHECK(hop_delay(p, link, 0.0) == 0.0);
}

TEST_CASE("config serialization round-trips") {
    const ExperimentConfig defaults;
    CHECK(parse_config(serialize_config(defaults)) == defaults);

    ExperimentConfig c;
    c.mode = "sweep";
    c.seed = 123456789012345ULL;
    c.seeds = {7, 8, 9};
    c.out_dir = "out/alt";
    c.checkpoint = "ck.bin";
    c.trace_episodes = 3;
    c.eval_episodes = 11;
    c.env.width = 14;
    c.env.height = 6;
    c.env.users = 4;
    c.env.sense_radius = 2;
    c.chan.noise_power = 2.5e-10;
    c.chan.use_propagation_delay = true;
    c.route.w_load = 1.0 / 3.0;
    c.dispatch.softmax_temp = 0.25;
    c.reward.g4 = 0.125;
    c.learn.eps_decay = 0.9875;
    c.learn.shared_actor = false;
    c.net.gat_dim = 16;
    c.ga.p_relocate = 0.375;
    c.limits.max_steps = 77;
    c.baseline.random_budget = 5;
    c.sweep.users = {2, 5};
    c.sweep.grids = {6, 10};
    c.sweep.strategies = {"a3", "max_coverage"};
    CHECK(parse_config(serialize_config(c)) == c);
    CHECK(config_hash(c) != config_hash(defaults));
    CHECK(config_hash(c) == config_hash(parse_config(serialize_config(c))));
}

TEST_CASE("overrides touch exactly one key") {
    ExperimentConfig base;
    ExperimentConfig c = base;
    apply_override(c, "reward.g3=0.75");
    CHECK(c.reward.g3 == 0.75);

    std::set<std::string> before, after;
    std::istringstream sb(serialize_config(base)), sa(serialize_config(c));
    std::string line;
    while (std::getline(sb, line)) before.insert(line);
    while (std::getline(sa, line)) after.insert(line);
    int changed = 0;
    for (const std::string& l : after) changed += before.count(l) ? 0 : 1;
    CHECK(changed == 1);

    apply_override(c, "env.grid=6x6");
    CHECK(c.env.width == 6);
    CHECK(c.env.height == 6);

    apply_override(c, "seeds=4,5,6");
    CHECK(c.seeds == std::vector<uint64_t>{4, 5, 6});

    CHECK_THROWS_AS(apply_override(c, "nonsense.key=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "env.width=tall"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "env.width"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "env.grid=6by6"), ConfigError);
}

TEST_CASE("config validation rejects broken setups") {
    ExperimentConfig c;
    CHECK_NOTHROW(validate_config(c));
    c.env.width = 1;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
    c = ExperimentConfig{};
    c.learn.gamma = 1.5;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
    c = ExperimentConfig{};
    c.env.users = c.env.max_users + 1;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
    c = ExperimentConfig{};
    c.learn.buffer_capacity = c.learn.batch - 1;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
}

TEST_CASE("shipped default config equals built-in defaults") {
    const std::string path = std::string(RELAYSIM_SOURCE_DIR) + "/configs/default.cfg";
    std::ifstream probe(path);
    REQUIRE(probe.good());
    const ExperimentConfig from_file = load_config_file(path);
    CHECK(from_file == ExperimentConfig{});
}

TEST_CASE("double formatting is lossless") {
    for (double v : {0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 2.5e-10, 9223372036854775807.0,
                     6.026138311460174e-08, 1e308, -123.456}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("seeded streams are stable and label-separated") {
    Rng a = Rng::stream(42, "env/episode/0");
    Rng b = Rng::stream(42, "env/episode/0");
    Rng c = Rng::stream(42, "env/episode/1");
    Rng d = Rng::stream(43, "env/episode/0");
    bool same_ab = true, same_ac = true, same_ad = true;
    for (int i = 0; i < 64; ++i) {
        const uint64_t va = a.next_u64();
        same_ab = same_ab && va == b.next_u64();
        same_ac = same_ac && va == c.next_u64();
        same_ad = same_ad && va == d.next_u64();
    }
    CHECK(same_ab);
    CHECK_FALSE(same_ac);
    CHECK_FALSE(same_ad);

    Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        const uint64_t x = r.below(13);
        CHECK(x < 13);
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const int k = r.uniform_int(-3, 3);
        CHECK(k >= -3);
        CHECK(k <= 3);
    }
}

TEST_CASE("diamond enumeration covers the exact ball") {
    for (int r = 0; r <= 4; ++r) {
        const auto cells = manhattan_diamond({5, 5}, r);
        CHECK(static_cast<int>(cells.size()) == 2 * r * r + 2 * r + 1);
        std::set<std::pair<int, int>> uniq;
        for (GridPos c : cells) {
            CHECK(manhattan(c, {5, 5}) <= r);
            uniq.insert({c.x, c.y});
        }
        CHECK(uniq.size() == cells.size());
    }
}

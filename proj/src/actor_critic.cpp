#include "relaysim/actor_critic.hpp"

#include <algorithm>
#include <stdexcept>

namespace relaysim {

NetDims net_dims(const ExperimentConfig& cfg) {
    const int r = cfg.env.sense_radius;
    const int patch = 2 * r * r + 2 * r + 1;
    NetDims d;
    d.obs_dim = 4 * patch + kOwnFeatureDim;
    d.node_dim = kNodeStaticDim + kMoveCount + kRequestDim;
    d.enc = cfg.net.enc_dim;
    d.gat = cfg.net.gat_dim;
    d.value_hidden = cfg.net.value_hidden;
    return d;
}

Eigen::RowVectorXd encode_observation(const Observation& obs, const ExperimentConfig& cfg) {
    const NetDims dims = net_dims(cfg);
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(dims.obs_dim);
    int k = 0;
    for (const CellView& c : obs.cells) {
        x(k++) = c.in_bounds ? 1.0 : 0.0;
        x(k++) = c.explored ? 1.0 : 0.0;
        x(k++) = c.has_agent ? 1.0 : 0.0;
        x(k++) = c.has_user ? 1.0 : 0.0;
    }
    if (k != dims.obs_dim - kOwnFeatureDim)
        throw std::invalid_argument("observation patch size does not match the sense radius");
    int agent_neighbors = 0;
    bool bs_link = false;
    for (const NeighborInfo& n : obs.neighbors) {
        if (n.id == kBsId)
            bs_link = true;
        else
            ++agent_neighbors;
    }
    const double cap = std::max(1, cfg.dispatch.per_agent_cap);
    x(k++) = static_cast<double>(obs.pos.x) / cfg.env.width;
    x(k++) = static_cast<double>(obs.pos.y) / cfg.env.height;
    x(k++) = obs.role == Role::Explorer ? 1.0 : 0.0;
    x(k++) = obs.role == Role::Relay ? 1.0 : 0.0;
    x(k++) = obs.load / cfg.env.load_cap;
    x(k++) = static_cast<double>(obs.depth) / cfg.dispatch.max_agents;
    x(k++) = static_cast<double>(obs.requests_left) / cap;
    x(k++) = static_cast<double>(agent_neighbors) / cfg.dispatch.max_agents;
    x(k++) = bs_link ? 1.0 : 0.0;
    x(k++) = 1.0;
    return x;
}

Eigen::RowVectorXd node_static_features(const AgentState& agent, const ExperimentConfig& cfg) {
    Eigen::RowVectorXd x(kNodeStaticDim);
    x(0) = static_cast<double>(agent.pos.x) / cfg.env.width;
    x(1) = static_cast<double>(agent.pos.y) / cfg.env.height;
    x(2) = agent.role == Role::Explorer ? 1.0 : 0.0;
    x(3) = agent.role == Role::Relay ? 1.0 : 0.0;
    x(4) = agent.load / cfg.env.load_cap;
    x(5) = static_cast<double>(agent.depth) / cfg.dispatch.max_agents;
    return x;
}

Eigen::RowVectorXd action_one_hot(const Action& a) {
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(kMoveCount + kRequestDim);
    x(static_cast<int>(a.move)) = 1.0;
    x(kMoveCount + (a.request ? 1 : 0)) = 1.0;
    return x;
}

std::vector<std::vector<int>> agent_adjacency(const CommGraph& graph) {
    std::vector<std::vector<int>> adj(graph.agent_count);
    for (const auto& [a, b] : graph.edges) {
        if (a == kBsId || b == kBsId) continue;
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    return adj;
}

void ActorNet::init(const NetDims& dims, uint64_t seed) {
    Rng rng = Rng::stream(seed, "init/actor");
    const int cat = dims.gat + dims.enc;
    params = ParamSet{};
    params.add("enc/w", dims.obs_dim, dims.enc, dims.obs_dim, rng);
    params.add("enc/b", 1, dims.enc, dims.obs_dim, rng);
    params.add("gat/w", dims.enc, dims.gat, dims.enc, rng);
    params.add("gat/a_src", dims.gat, 1, dims.gat, rng);
    params.add("gat/a_dst", dims.gat, 1, dims.gat, rng);
    params.add("move/w", cat, kMoveCount, cat, rng);
    params.add("move/b", 1, kMoveCount, cat, rng);
    params.add("req/w", cat, kRequestDim, cat, rng);
    params.add("req/b", 1, kRequestDim, cat, rng);
}

ActorHeads ActorNet::forward(Tape& tape, TapeBinding& bind, Var obs,
                             const std::vector<std::vector<int>>& adjacency) const {
    const Var enc = tape.relu(tape.add_rowvec(tape.matmul(obs, bind["enc/w"]), bind["enc/b"]));
    const Var g = graph_attention(tape, bind, "gat", enc, adjacency);
    ActorHeads heads;
    heads.move_logits = tape.add_rowvec(tape.matmul(g, bind["move/w"]), bind["move/b"]);
    heads.request_logits = tape.add_rowvec(tape.matmul(g, bind["req/w"]), bind["req/b"]);
    return heads;
}

void CriticNet::init(const NetDims& dims, uint64_t seed) {
    Rng rng = Rng::stream(seed, "init/critic");
    const int cat = dims.gat + dims.enc;
    params = ParamSet{};
    params.add("enc/w", dims.node_dim, dims.enc, dims.node_dim, rng);
    params.add("enc/b", 1, dims.enc, dims.node_dim, rng);
    params.add("gat/w", dims.enc, dims.gat, dims.enc, rng);
    params.add("gat/a_src", dims.gat, 1, dims.gat, rng);
    params.add("gat/a_dst", dims.gat, 1, dims.gat, rng);
    params.add("node/w", cat, dims.value_hidden, cat, rng);
    params.add("node/b", 1, dims.value_hidden, cat, rng);
    params.add("out/w", dims.value_hidden, 1, dims.value_hidden, rng);
    params.add("out/b", 1, 1, dims.value_hidden, rng);
}

Var CriticNet::forward(Tape& tape, TapeBinding& bind, Var node_features,
                       const std::vector<std::vector<int>>& adjacency,
                       const std::vector<int>& graph_ids, int n_graphs) const {
    ++forward_calls;
    const Var enc = tape.relu(
        tape.add_rowvec(tape.matmul(node_features, bind["enc/w"]), bind["enc/b"]));
    const Var g = graph_attention(tape, bind, "gat", enc, adjacency);
    const Var node = tape.relu(tape.add_rowvec(tape.matmul(g, bind["node/w"]), bind["node/b"]));
    const Var pooled = tape.segment_mean(node, graph_ids, n_graphs);
    return tape.add_rowvec(tape.matmul(pooled, bind["out/w"]), bind["out/b"]);
}

Action select_action(const Eigen::RowVectorXd& move_logits,
                     const Eigen::RowVectorXd& request_logits, double epsilon, Rng& rng) {
    if (move_logits.size() != kMoveCount || request_logits.size() != kRequestDim)
        throw std::invalid_argument("select_action: head widths are wrong");
    Action a;
    int best = 0;
    move_logits.maxCoeff(&best);
    a.move = static_cast<Move>(best);
    a.request = request_logits(1) > request_logits(0);
    if (epsilon > 0.0 && rng.bernoulli(epsilon))
        a.move = static_cast<Move>(rng.uniform_int(0, kMoveCount - 1));
    if (epsilon > 0.0 && rng.bernoulli(epsilon)) a.request = !a.request;
    return a;
}

}  // namespace relaysim

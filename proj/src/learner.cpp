#include "relaysim/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace relaysim {

void ReplayBuffer::push(Transition t) {
    if (storage_.size() < capacity_) {
        storage_.push_back(std::move(t));
        return;
    }
    storage_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(size_t batch, Rng& rng) const {
    if (batch > storage_.size())
        throw std::runtime_error("replay buffer holds fewer transitions than one batch");
    std::vector<size_t> idx(storage_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (size_t j = 0; j < batch; ++j) {
        const size_t pick = j + static_cast<size_t>(rng.below(idx.size() - j));
        std::swap(idx[j], idx[pick]);
        out.push_back(&storage_[idx[j]]);
    }
    return out;
}

Snapshot take_snapshot(const Sim& sim) {
    const int n = static_cast<int>(sim.world.agents.size());
    Snapshot snap;
    snap.adjacency = agent_adjacency(sim.graph);
    for (const auto& [a, b] : sim.graph.edges)
        if (a != kBsId && b != kBsId) snap.edges.emplace_back(a, b);
    const NetDims dims = net_dims(sim.cfg);
    snap.obs = Matrix(n, dims.obs_dim);
    snap.node_static = Matrix(n, kNodeStaticDim);
    for (int id = 0; id < n; ++id) {
        const Observation o = sense(sim.world, sim.graph, id, sim.cfg);
        snap.obs.row(id) = encode_observation(o, sim.cfg);
        snap.node_static.row(id) = node_static_features(sim.world.agents[id], sim.cfg);
    }
    return snap;
}

namespace {

// Disjoint union of per-transition graphs, one shared node numbering.
struct UnionBatch {
    Matrix obs;
    Matrix node_static;
    std::vector<std::vector<int>> adjacency;
    std::vector<int> graph_ids;
    std::vector<int> offsets;
    int total = 0;
};

UnionBatch build_union(const std::vector<const Transition*>& batch, bool next_side) {
    UnionBatch u;
    for (const Transition* t : batch) {
        u.offsets.push_back(u.total);
        u.total += next_side ? t->agents_after : t->agents_before;
    }
    const Matrix& first = next_side ? batch.front()->next_obs : batch.front()->obs;
    u.obs = Matrix(u.total, first.cols());
    u.node_static = Matrix(u.total, kNodeStaticDim);
    u.adjacency.resize(static_cast<size_t>(u.total));
    u.graph_ids.resize(static_cast<size_t>(u.total));
    for (size_t k = 0; k < batch.size(); ++k) {
        const Transition& t = *batch[k];
        const Matrix& obs = next_side ? t.next_obs : t.obs;
        const Matrix& st = next_side ? t.next_static : t.node_static;
        const auto& edges = next_side ? t.next_edges : t.edges;
        const int off = u.offsets[k];
        u.obs.middleRows(off, obs.rows()) = obs;
        u.node_static.middleRows(off, st.rows()) = st;
        for (Eigen::Index r = 0; r < obs.rows(); ++r)
            u.graph_ids[static_cast<size_t>(off + r)] = static_cast<int>(k);
        for (const auto& [a, b] : edges) {
            u.adjacency[static_cast<size_t>(off + a)].push_back(off + b);
            u.adjacency[static_cast<size_t>(off + b)].push_back(off + a);
        }
    }
    return u;
}

Matrix one_hot_rows(const std::vector<Action>& actions) {
    Matrix m(static_cast<Eigen::Index>(actions.size()), kMoveCount + kRequestDim);
    for (size_t r = 0; r < actions.size(); ++r) m.row(static_cast<Eigen::Index>(r)) =
        action_one_hot(actions[r]);
    return m;
}

Action greedy_from_rows(const Eigen::RowVectorXd& move_row,
                        const Eigen::RowVectorXd& req_row) {
    Action a;
    Eigen::Index best = 0;
    move_row.maxCoeff(&best);
    a.move = static_cast<Move>(best);
    a.request = req_row(1) > req_row(0);
    return a;
}

}  // namespace

Learner::Learner(const ExperimentConfig& cfg, uint64_t init_seed)
    : cfg_(cfg),
      dims_(net_dims(cfg)),
      init_seed_(init_seed),
      buffer_(static_cast<size_t>(cfg.learn.buffer_capacity)) {
    const int sets = cfg_.learn.shared_actor ? 1 : cfg_.dispatch.max_agents;
    actors_.resize(static_cast<size_t>(sets));
    actor_targets_.resize(static_cast<size_t>(sets));
    for (int i = 0; i < sets; ++i) {
        actors_[i].init(dims_, derive_seed(init_seed_, "actor/" + std::to_string(i)));
        actor_targets_[i].init(dims_, derive_seed(init_seed_, "actor/" + std::to_string(i)));
    }
    critic_.init(dims_, derive_seed(init_seed_, "critic"));
    critic_target_.init(dims_, derive_seed(init_seed_, "critic"));
}

ActorNet& Learner::actor(int agent_id) {
    return actors_[cfg_.learn.shared_actor
                       ? 0
                       : static_cast<size_t>(
                             std::min(agent_id, static_cast<int>(actors_.size()) - 1))];
}

const ActorNet& Learner::actor(int agent_id) const {
    return const_cast<Learner*>(this)->actor(agent_id);
}

double Learner::epsilon_at(uint64_t env_step) const {
    return std::max(cfg_.learn.eps_min,
                    cfg_.learn.eps0 * std::pow(cfg_.learn.eps_decay,
                                               static_cast<double>(env_step)));
}

std::vector<Action> Learner::act(const Snapshot& snap, double epsilon, Rng& rng) const {
    const int n = static_cast<int>(snap.obs.rows());
    std::vector<Action> actions(static_cast<size_t>(n));
    if (cfg_.learn.shared_actor) {
        Tape tape;
        TapeBinding bind(tape, const_cast<ParamSet&>(actors_[0].params), false);
        const ActorHeads heads =
            actors_[0].forward(tape, bind, tape.constant(snap.obs), snap.adjacency);
        const Matrix& mv = tape.value(heads.move_logits);
        const Matrix& rq = tape.value(heads.request_logits);
        for (int i = 0; i < n; ++i)
            actions[i] = select_action(mv.row(i), rq.row(i), epsilon, rng);
        return actions;
    }
    for (int i = 0; i < n; ++i) {
        const ActorNet& net = actor(i);
        Tape tape;
        TapeBinding bind(tape, const_cast<ParamSet&>(net.params), false);
        const ActorHeads heads =
            net.forward(tape, bind, tape.constant(snap.obs), snap.adjacency);
        actions[i] = select_action(tape.value(heads.move_logits).row(i),
                                   tape.value(heads.request_logits).row(i), epsilon, rng);
    }
    return actions;
}

Eigen::VectorXd Learner::td_targets(const std::vector<const Transition*>& batch) const {
    const UnionBatch u = build_union(batch, true);
    std::vector<Action> target_actions(static_cast<size_t>(u.total));
    Tape tape;
    if (cfg_.learn.shared_actor) {
        TapeBinding bind(tape, const_cast<ParamSet&>(actor_targets_[0].params), false);
        const ActorHeads heads =
            actor_targets_[0].forward(tape, bind, tape.constant(u.obs), u.adjacency);
        const Matrix& mv = tape.value(heads.move_logits);
        const Matrix& rq = tape.value(heads.request_logits);
        for (int r = 0; r < u.total; ++r)
            target_actions[r] = greedy_from_rows(mv.row(r), rq.row(r));
    } else {
        for (size_t k = 0; k < batch.size(); ++k) {
            const Transition& t = *batch[k];
            std::vector<std::vector<int>> adj(static_cast<size_t>(t.agents_after));
            for (const auto& [a, b] : t.next_edges) {
                adj[a].push_back(b);
                adj[b].push_back(a);
            }
            for (int i = 0; i < t.agents_after; ++i) {
                const ActorNet& net = actor_targets_[static_cast<size_t>(std::min(
                    i, static_cast<int>(actor_targets_.size()) - 1))];
                Tape local;
                TapeBinding bind(local, const_cast<ParamSet&>(net.params), false);
                const ActorHeads heads =
                    net.forward(local, bind, local.constant(t.next_obs), adj);
                target_actions[static_cast<size_t>(u.offsets[k] + i)] =
                    greedy_from_rows(local.value(heads.move_logits).row(i),
                                     local.value(heads.request_logits).row(i));
            }
        }
    }
    Matrix feats(u.total, dims_.node_dim);
    feats << u.node_static, one_hot_rows(target_actions);
    TapeBinding cb(tape, const_cast<ParamSet&>(critic_target_.params), false);
    const Var q = critic_target_.forward(tape, cb, tape.constant(feats), u.adjacency,
                                         u.graph_ids, static_cast<int>(batch.size()));
    const Matrix& qv = tape.value(q);
    Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
    for (size_t k = 0; k < batch.size(); ++k) {
        const Transition& t = *batch[k];
        y(static_cast<Eigen::Index>(k)) =
            t.reward + (t.terminal ? 0.0 : cfg_.learn.gamma * qv(static_cast<Eigen::Index>(k), 0));
    }
    return y;
}

double Learner::critic_update(const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw std::runtime_error("critic update needs a non-empty batch");
    const Eigen::VectorXd y = td_targets(batch);
    const UnionBatch u = build_union(batch, false);
    std::vector<Action> taken;
    for (const Transition* t : batch)
        taken.insert(taken.end(), t->actions.begin(), t->actions.end());
    Matrix feats(u.total, dims_.node_dim);
    feats << u.node_static, one_hot_rows(taken);

    Tape tape;
    TapeBinding cb(tape, critic_.params, true);
    const Var q = critic_.forward(tape, cb, tape.constant(feats), u.adjacency, u.graph_ids,
                                  static_cast<int>(batch.size()));
    const Var diff = tape.sub(q, tape.constant(y));
    const Var loss = tape.mean_all(tape.square(diff));
    const double loss_value = tape.value(loss)(0, 0);
    tape.backward(loss);
    cb.collect();
    sgd_step(critic_.params, cfg_.learn.lr_critic);
    ++critic_steps_;
    if (cfg_.learn.target_update_period > 0 &&
        critic_steps_ % static_cast<uint64_t>(cfg_.learn.target_update_period) == 0)
        sync_targets();
    return loss_value;
}

double Learner::actor_update(const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw std::runtime_error("actor update needs a non-empty batch");
    const UnionBatch u = build_union(batch, false);
    std::vector<Action> taken;
    for (const Transition* t : batch)
        taken.insert(taken.end(), t->actions.begin(), t->actions.end());

    if (cfg_.learn.shared_actor) {
        Tape tape;
        TapeBinding ab(tape, actors_[0].params, true);
        const ActorHeads heads =
            actors_[0].forward(tape, ab, tape.constant(u.obs), u.adjacency);
        // relaxed one-hots keep the critic input differentiable in the
        // policy parameters; execution stays hard argmax
        const Var move_p = tape.softmax_rows(heads.move_logits);
        const Var req_p = tape.softmax_rows(heads.request_logits);
        const Var feats = tape.concat_cols(tape.constant(u.node_static),
                                           tape.concat_cols(move_p, req_p));
        TapeBinding cb(tape, critic_.params, false);
        const Var q = critic_.forward(tape, cb, feats, u.adjacency, u.graph_ids,
                                      static_cast<int>(batch.size()));
        const Var objective = tape.mean_all(q);
        const double value = tape.value(objective)(0, 0);
        tape.backward(tape.scale(objective, -1.0));
        ab.collect();
        sgd_step(actors_[0].params, cfg_.learn.lr_actor);
        return value;
    }

    // Per-agent parameter sets: each actor ascends Q with only its own
    // action replaced; the rest stay as recorded.
    double mean_objective = 0.0;
    int updated = 0;
    const Matrix recorded = one_hot_rows(taken);
    for (int agent = 0; agent < static_cast<int>(actors_.size()); ++agent) {
        bool present = false;
        for (const Transition* t : batch) present = present || t->agents_before > agent;
        if (!present) continue;
        Tape tape;
        TapeBinding ab(tape, actors_[agent].params, true);
        const ActorHeads heads =
            actors_[agent].forward(tape, ab, tape.constant(u.obs), u.adjacency);
        // only this agent's rows carry the relaxed outputs; everyone else
        // keeps the recorded batch actions
        const Var move_p = tape.softmax_rows(heads.move_logits);
        const Var req_p = tape.softmax_rows(heads.request_logits);
        Matrix mask = Matrix::Zero(u.total, 1);
        for (size_t k = 0; k < batch.size(); ++k) {
            if (batch[k]->agents_before <= agent) continue;
            mask(u.offsets[k] + agent, 0) = 1.0;
        }
        const Var mask_v = tape.constant(mask);
        const Matrix keep_move = (recorded.leftCols(kMoveCount).array().colwise() *
                                  (1.0 - mask.col(0).array()))
                                     .matrix();
        const Matrix keep_req = (recorded.rightCols(kRequestDim).array().colwise() *
                                 (1.0 - mask.col(0).array()))
                                    .matrix();
        const Var move_mixed =
            tape.add(tape.scale_rows(move_p, mask_v), tape.constant(keep_move));
        const Var req_mixed =
            tape.add(tape.scale_rows(req_p, mask_v), tape.constant(keep_req));
        const Var feats = tape.concat_cols(tape.constant(u.node_static),
                                           tape.concat_cols(move_mixed, req_mixed));
        TapeBinding cb(tape, critic_.params, false);
        const Var q = critic_.forward(tape, cb, feats, u.adjacency, u.graph_ids,
                                      static_cast<int>(batch.size()));
        const Var objective = tape.mean_all(q);
        mean_objective += tape.value(objective)(0, 0);
        ++updated;
        tape.backward(tape.scale(objective, -1.0));
        ab.collect();
        sgd_step(actors_[agent].params, cfg_.learn.lr_actor);
    }
    return updated > 0 ? mean_objective / updated : 0.0;
}

void Learner::sync_targets() {
    for (size_t i = 0; i < actors_.size(); ++i)
        hard_update(actor_targets_[i].params, actors_[i].params);
    hard_update(critic_target_.params, critic_.params);
}

std::vector<TrainRow> Learner::train(uint64_t root_seed, std::ostream* log_csv) {
    validate_config(cfg_);
    std::vector<TrainRow> rows;
    Rng sample_rng = Rng::stream(root_seed, "learn/sample");
    if (log_csv) write_train_header(*log_csv);
    for (int e = 0; e < cfg_.learn.episodes; ++e) {
        Sim sim(cfg_, episode_world_seed(root_seed, e),
                episode_dispatch_stream(root_seed, e));
        Rng explore = episode_exploration_stream(root_seed, e);
        Snapshot snap = take_snapshot(sim);
        double episode_reward = 0.0;
        double loss_sum = 0.0;
        int updates = 0;
        int steps = 0;
        while (sim.status() == TerminationStatus::Running) {
            const double eps = epsilon_at(env_steps_);
            const std::vector<Action> actions = act(snap, eps, explore);
            sim.step(actions);
            Snapshot next = take_snapshot(sim);
            Transition tr;
            tr.agents_before = static_cast<int>(snap.obs.rows());
            tr.obs = std::move(snap.obs);
            tr.node_static = std::move(snap.node_static);
            tr.edges = std::move(snap.edges);
            tr.actions = actions;
            tr.reward = sim.last.global;
            tr.shaped = sim.last.shaped;
            tr.next_obs = next.obs;
            tr.next_static = next.node_static;
            tr.next_edges = next.edges;
            // the mission is continuing: episode ends are time limits, not
            // absorbing states, so values bootstrap through every boundary
            tr.terminal = false;
            tr.agents_after = static_cast<int>(tr.next_obs.rows());
            buffer_.push(std::move(tr));
            if (buffer_.size() >= static_cast<size_t>(cfg_.learn.batch) &&
                env_steps_ % static_cast<uint64_t>(std::max(1, cfg_.learn.update_period)) ==
                    0) {
                const auto batch = buffer_.sample(static_cast<size_t>(cfg_.learn.batch),
                                                  sample_rng);
                loss_sum += critic_update(batch);
                actor_update(batch);
                ++updates;
            }
            episode_reward += sim.last.global;
            snap = std::move(next);
            ++env_steps_;
            ++steps;
        }
        TrainRow row;
        row.episode = e;
        row.steps = steps;
        row.reward = episode_reward;
        row.success = sim.status() == TerminationStatus::Success;
        row.agents = static_cast<int>(sim.world.agents.size());
        row.epsilon = epsilon_at(env_steps_);
        row.critic_loss = updates > 0 ? loss_sum / updates : 0.0;
        rows.push_back(row);
        if (log_csv) write_train_row(*log_csv, row);
    }
    return rows;
}

EvalSummary Learner::evaluate(uint64_t root_seed, int episodes) const {
    EvalSummary s;
    s.episodes = episodes;
    Rng unused = Rng::stream(root_seed, "eval/unused");
    int service_episodes = 0;
    for (int e = 0; e < episodes; ++e) {
        Sim sim(cfg_, episode_world_seed(root_seed, e),
                episode_dispatch_stream(root_seed, e));
        const Policy policy = [this](const Sim& state) {
            Rng none(0);
            return act(take_snapshot(state), 0.0, none);
        };
        const EpisodeResult r = run_episode(sim, policy);
        s.success_rate += r.success ? 1.0 : 0.0;
        s.mean_agents += r.agents_used;
        s.mean_steps += r.steps;
        s.mean_connected += r.connected_users;
        if (r.connected_users > 0) {
            s.mean_delay += r.mean_delay;
            s.mean_bottleneck += r.mean_bottleneck;
            ++service_episodes;
        }
    }
    (void)unused;
    if (episodes > 0) {
        s.success_rate /= episodes;
        s.mean_agents /= episodes;
        s.mean_steps /= episodes;
        s.mean_connected /= episodes;
    }
    if (service_episodes > 0) {
        s.mean_delay /= service_episodes;
        s.mean_bottleneck /= service_episodes;
    }
    return s;
}

void Learner::save(const std::string& path) const {
    CheckpointHeader h;
    h.obs_dim = static_cast<uint32_t>(dims_.obs_dim);
    h.node_dim = static_cast<uint32_t>(dims_.node_dim);
    h.hidden = static_cast<uint32_t>(dims_.enc);
    h.move_dim = kMoveCount;
    h.request_dim = kRequestDim;
    h.actor_sets = static_cast<uint32_t>(actors_.size());
    h.seed = init_seed_;
    h.step_count = critic_steps_;
    std::vector<std::pair<std::string, const ParamSet*>> sections;
    for (size_t i = 0; i < actors_.size(); ++i) {
        sections.emplace_back("actor" + std::to_string(i), &actors_[i].params);
        sections.emplace_back("tactor" + std::to_string(i), &actor_targets_[i].params);
    }
    sections.emplace_back("critic", &critic_.params);
    sections.emplace_back("tcritic", &critic_target_.params);
    save_checkpoint(path, h, sections);
}

void Learner::load(const std::string& path) {
    LoadedCheckpoint ck = load_checkpoint(path);
    if (ck.header.obs_dim != static_cast<uint32_t>(dims_.obs_dim) ||
        ck.header.node_dim != static_cast<uint32_t>(dims_.node_dim) ||
        ck.header.hidden != static_cast<uint32_t>(dims_.enc) ||
        ck.header.move_dim != kMoveCount || ck.header.request_dim != kRequestDim)
        throw std::runtime_error("checkpoint was built for different network dimensions");
    if (ck.header.actor_sets != actors_.size())
        throw std::runtime_error("checkpoint actor-set count does not match the config");
    auto restore = [&](const std::string& section, ParamSet& into) {
        auto it = ck.sections.find(section);
        if (it == ck.sections.end())
            throw std::runtime_error("checkpoint lacks section " + section);
        if (it->second.size() != into.size())
            throw std::runtime_error("checkpoint section " + section + " has wrong shape");
        for (auto& [name, p] : into.entries()) {
            const Param& src = it->second.at(name);
            if (src.value.rows() != p.value.rows() || src.value.cols() != p.value.cols())
                throw std::runtime_error("checkpoint parameter " + name + " has wrong shape");
            p.value = src.value;
            p.grad.setZero();
        }
    };
    for (size_t i = 0; i < actors_.size(); ++i) {
        restore("actor" + std::to_string(i), actors_[i].params);
        if (ck.sections.count("tactor" + std::to_string(i)))
            restore("tactor" + std::to_string(i), actor_targets_[i].params);
        else
            hard_update(actor_targets_[i].params, actors_[i].params);
    }
    restore("critic", critic_.params);
    if (ck.sections.count("tcritic"))
        restore("tcritic", critic_target_.params);
    else
        hard_update(critic_target_.params, critic_.params);
    critic_steps_ = ck.header.step_count;
    init_seed_ = ck.header.seed;
}

void write_train_header(std::ostream& os) {
    os << "episode,steps,reward,success,agents,epsilon,critic_loss\n";
}

void write_train_row(std::ostream& os, const TrainRow& row) {
    os << row.episode << ',' << row.steps << ',' << format_double(row.reward) << ','
       << (row.success ? 1 : 0) << ',' << row.agents << ',' << format_double(row.epsilon)
       << ',' << format_double(row.critic_loss) << '\n';
}

}  // namespace relaysim

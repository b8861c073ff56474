#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "relaysim/rng.hpp"
#include "relaysim/tensor.hpp"

namespace relaysim {

struct Param {
    Matrix value;
    Matrix grad;  // accumulator, same shape as value
};

// Named parameters with deterministic iteration order (sorted by name).
// Insertion order is fixed by the network builders, so two sets built from
// the same seed are bitwise identical.
class ParamSet {
  public:
    // Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], drawn row-major.
    Matrix& add(const std::string& name, int rows, int cols, int fan_in, Rng& rng);
    Matrix& add_zeros(const std::string& name, int rows, int cols);

    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) > 0; }
    size_t size() const { return params_.size(); }

    std::map<std::string, Param>& entries() { return params_; }
    const std::map<std::string, Param>& entries() const { return params_; }

    void zero_grads();

  private:
    std::map<std::string, Param> params_;
};

// value -= lr * grad for every parameter, then clears the accumulators.
void sgd_step(ParamSet& params, double lr);

// target.value = online.value (hard copy); shapes must already match.
void hard_update(ParamSet& target, const ParamSet& online);

// target = (1 - tau) * target + tau * online.
void polyak_update(ParamSet& target, const ParamSet& online, double tau);

// Registers parameters of one ParamSet on a tape, one Var per name, and
// moves the tape gradients back into the set's accumulators afterwards.
class TapeBinding {
  public:
    TapeBinding(Tape& tape, ParamSet& params, bool trainable)
        : tape_(&tape), params_(&params), trainable_(trainable) {}

    Var operator[](const std::string& name);

    // grad accumulator += tape gradient, for every bound parameter.
    void collect();

  private:
    Tape* tape_;
    ParamSet* params_;
    bool trainable_;
    std::map<std::string, Var> bound_;
};

// One graph over one feature matrix; node_mask rows are the active ones.
// graph_ids splits a disjoint union of graphs for per-graph pooling.
struct GraphBatch {
    Matrix node_features;
    std::vector<std::vector<int>> adjacency;  // symmetric neighbor lists
    std::vector<bool> node_mask;              // empty means all active
    std::vector<int> graph_ids;               // empty means a single graph
    int n_graphs = 1;
};

void check_graph(const GraphBatch& batch);

// Single-head attention over each node's neighborhood plus itself: scores
// from a shared linear transform, softmax per destination node, weighted sum
// of transformed neighbor features, concatenated with the node's own input
// features. Output width = transform width + input width.
// Parameters: <prefix>/w, <prefix>/a_src, <prefix>/a_dst.
Var graph_attention(Tape& tape, TapeBinding& bind, const std::string& prefix, Var x,
                    const std::vector<std::vector<int>>& adjacency);

// Mean over active rows; errors when no row is active.
Var mean_pool(Tape& tape, Var embeddings, const std::vector<bool>& mask);

// Checkpoint document: header + named parameter sections, 64-bit floats.
struct CheckpointHeader {
    uint32_t obs_dim = 0;
    uint32_t node_dim = 0;
    uint32_t hidden = 0;
    uint32_t move_dim = 0;
    uint32_t request_dim = 0;
    uint32_t actor_sets = 1;
    uint64_t seed = 0;
    uint64_t step_count = 0;
};

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const std::vector<std::pair<std::string, const ParamSet*>>& sections);

struct LoadedCheckpoint {
    CheckpointHeader header;
    std::map<std::string, ParamSet> sections;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace relaysim

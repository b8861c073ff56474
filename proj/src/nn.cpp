#include "relaysim/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace relaysim {

Matrix& ParamSet::add(const std::string& name, int rows, int cols, int fan_in, Rng& rng) {
    if (params_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    if (fan_in <= 0) throw std::invalid_argument("fan_in must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    Param p;
    p.value = std::move(m);
    p.grad = Matrix::Zero(rows, cols);
    return params_.emplace(name, std::move(p)).first->second.value;
}

Matrix& ParamSet::add_zeros(const std::string& name, int rows, int cols) {
    if (params_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    Param p;
    p.value = Matrix::Zero(rows, cols);
    p.grad = Matrix::Zero(rows, cols);
    return params_.emplace(name, std::move(p)).first->second.value;
}

Param& ParamSet::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
    return it->second;
}

const Param& ParamSet::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
    return it->second;
}

void ParamSet::zero_grads() {
    for (auto& [name, p] : params_) p.grad.setZero();
}

void sgd_step(ParamSet& params, double lr) {
    for (auto& [name, p] : params.entries()) {
        p.value -= lr * p.grad;
        p.grad.setZero();
    }
}

void hard_update(ParamSet& target, const ParamSet& online) {
    if (target.size() != online.size())
        throw std::invalid_argument("hard_update: parameter sets differ");
    for (auto& [name, p] : target.entries()) {
        if (!online.has(name))
            throw std::invalid_argument("hard_update: parameter sets differ");
        p.value = online.at(name).value;
    }
}

void polyak_update(ParamSet& target, const ParamSet& online, double tau) {
    if (target.size() != online.size())
        throw std::invalid_argument("polyak_update: parameter sets differ");
    for (auto& [name, p] : target.entries()) {
        if (!online.has(name))
            throw std::invalid_argument("polyak_update: parameter sets differ");
        p.value = (1.0 - tau) * p.value + tau * online.at(name).value;
    }
}

Var TapeBinding::operator[](const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    const Var v = tape_->input(params_->at(name).value, trainable_);
    bound_.emplace(name, v);
    return v;
}

void TapeBinding::collect() {
    if (!trainable_) return;
    for (const auto& [name, var] : bound_) {
        const Matrix& g = tape_->grad(var);
        if (g.size() > 0) params_->at(name).grad += g;
    }
}

void check_graph(const GraphBatch& batch) {
    const int n = static_cast<int>(batch.node_features.rows());
    if (static_cast<int>(batch.adjacency.size()) != n)
        throw std::invalid_argument("graph: one adjacency list per node required");
    if (!batch.node_mask.empty() && static_cast<int>(batch.node_mask.size()) != n)
        throw std::invalid_argument("graph: mask size differs from node count");
    if (!batch.graph_ids.empty() && static_cast<int>(batch.graph_ids.size()) != n)
        throw std::invalid_argument("graph: one graph id per node required");
    for (int i = 0; i < n; ++i) {
        for (int j : batch.adjacency[i]) {
            if (j < 0 || j >= n) throw std::invalid_argument("graph: neighbor out of range");
            const auto& back = batch.adjacency[j];
            if (std::find(back.begin(), back.end(), i) == back.end())
                throw std::invalid_argument("graph: adjacency not symmetric");
        }
    }
}

Var graph_attention(Tape& tape, TapeBinding& bind, const std::string& prefix, Var x,
                    const std::vector<std::vector<int>>& adjacency) {
    const int n = static_cast<int>(tape.value(x).rows());
    if (static_cast<int>(adjacency.size()) != n)
        throw std::invalid_argument("graph_attention: one adjacency list per node required");
    std::vector<int> src, dst;
    for (int i = 0; i < n; ++i) {
        src.push_back(i);  // self participates in its own neighborhood
        dst.push_back(i);
        for (int j : adjacency[i]) {
            src.push_back(j);
            dst.push_back(i);
        }
    }
    const Var h = tape.matmul(x, bind[prefix + "/w"]);
    const Var hs = tape.gather_rows(h, src);
    const Var hd = tape.gather_rows(h, dst);
    const Var scores = tape.leaky_relu(
        tape.add(tape.matmul(hs, bind[prefix + "/a_src"]),
                 tape.matmul(hd, bind[prefix + "/a_dst"])),
        0.2);
    const Var alpha = tape.segment_softmax(scores, dst, n);
    const Var mixed = tape.scatter_sum_rows(tape.scale_rows(hs, alpha), dst, n);
    return tape.concat_cols(mixed, x);
}

Var mean_pool(Tape& tape, Var embeddings, const std::vector<bool>& mask) {
    const int n = static_cast<int>(tape.value(embeddings).rows());
    std::vector<int> active;
    if (mask.empty()) {
        for (int i = 0; i < n; ++i) active.push_back(i);
    } else {
        if (static_cast<int>(mask.size()) != n)
            throw std::invalid_argument("mean_pool: mask size differs from row count");
        for (int i = 0; i < n; ++i)
            if (mask[i]) active.push_back(i);
    }
    if (active.empty()) throw std::invalid_argument("mean_pool: no active rows");
    const Var rows = tape.gather_rows(embeddings, active);
    return tape.segment_mean(rows, std::vector<int>(active.size(), 0), 1);
}

namespace {

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint truncated");
    return v;
}

constexpr char kMagic[8] = {'R', 'S', 'N', 'N', '0', '0', '0', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const std::vector<std::pair<std::string, const ParamSet*>>& sections) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    write_raw(os, header.obs_dim);
    write_raw(os, header.node_dim);
    write_raw(os, header.hidden);
    write_raw(os, header.move_dim);
    write_raw(os, header.request_dim);
    write_raw(os, header.actor_sets);
    write_raw(os, header.seed);
    write_raw(os, header.step_count);
    uint32_t total = 0;
    for (const auto& [section, ps] : sections) total += static_cast<uint32_t>(ps->size());
    write_raw(os, total);
    for (const auto& [section, ps] : sections) {
        for (const auto& [name, p] : ps->entries()) {
            const std::string full = section + "/" + name;
            write_raw(os, static_cast<uint32_t>(full.size()));
            os.write(full.data(), static_cast<std::streamsize>(full.size()));
            write_raw(os, static_cast<uint32_t>(p.value.rows()));
            write_raw(os, static_cast<uint32_t>(p.value.cols()));
            for (Eigen::Index r = 0; r < p.value.rows(); ++r)
                for (Eigen::Index c = 0; c < p.value.cols(); ++c) write_raw(os, p.value(r, c));
        }
    }
    if (!os) throw std::runtime_error("write to " + path + " failed");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error(path + " is not a parameter checkpoint");
    LoadedCheckpoint out;
    out.header.obs_dim = read_raw<uint32_t>(is);
    out.header.node_dim = read_raw<uint32_t>(is);
    out.header.hidden = read_raw<uint32_t>(is);
    out.header.move_dim = read_raw<uint32_t>(is);
    out.header.request_dim = read_raw<uint32_t>(is);
    out.header.actor_sets = read_raw<uint32_t>(is);
    out.header.seed = read_raw<uint64_t>(is);
    out.header.step_count = read_raw<uint64_t>(is);
    const uint32_t total = read_raw<uint32_t>(is);
    for (uint32_t i = 0; i < total; ++i) {
        const uint32_t name_len = read_raw<uint32_t>(is);
        if (name_len > 4096) throw std::runtime_error("checkpoint parameter name too long");
        std::string full(name_len, '\0');
        is.read(full.data(), name_len);
        if (!is) throw std::runtime_error("checkpoint truncated");
        const auto slash = full.find('/');
        if (slash == std::string::npos)
            throw std::runtime_error("checkpoint parameter lacks a section prefix");
        const std::string section = full.substr(0, slash);
        const std::string name = full.substr(slash + 1);
        const uint32_t rows = read_raw<uint32_t>(is);
        const uint32_t cols = read_raw<uint32_t>(is);
        if (rows > 1u << 20 || cols > 1u << 20)
            throw std::runtime_error("checkpoint dimensions implausible");
        Matrix& m = out.sections[section].add_zeros(name, static_cast<int>(rows),
                                                    static_cast<int>(cols));
        for (uint32_t r = 0; r < rows; ++r)
            for (uint32_t c = 0; c < cols; ++c) m(r, c) = read_raw<double>(is);
    }
    return out;
}

}  // namespace relaysim

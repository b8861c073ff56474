#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace relaysim {

using Matrix = Eigen::MatrixXd;

// Handle to one node of a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode gradient tape over dense 64-bit matrices. Ops append nodes;
// backward() replays them newest-first, accumulating into per-node grads.
// Every op checks its output for NaN/Inf and throws on the first one.
class Tape {
  public:
    Var input(Matrix value, bool requires_grad = true);
    Var constant(Matrix value) { return input(std::move(value), false); }

    const Matrix& value(Var v) const { return node(v).value; }
    // Populated by backward(); zero matrix for untouched nodes.
    const Matrix& grad(Var v) const { return node(v).grad; }

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scale(Var a, double c);
    Var square(Var a);
    Var relu(Var a);
    Var leaky_relu(Var a, double slope);

    // Adds the 1 x m row vector b to every row of a.
    Var add_rowvec(Var a, Var b);

    Var sum_all(Var a);   // 1 x 1
    Var mean_all(Var a);  // 1 x 1

    Var concat_cols(Var a, Var b);
    Var gather_rows(Var a, std::vector<int> idx);
    // out[dst[r]] += a[r]; result has `rows` rows.
    Var scatter_sum_rows(Var a, std::vector<int> dst, int rows);

    // Softmax of the n x 1 score column within each segment id.
    Var segment_softmax(Var scores, std::vector<int> seg, int n_segs);
    // Row mean per segment; every segment must own at least one row.
    Var segment_mean(Var a, std::vector<int> seg, int n_segs);
    Var softmax_rows(Var a);
    // Scales row r of a by w(r, 0).
    Var scale_rows(Var a, Var w);

    // Value is `hard`; the gradient passes through to `soft` unchanged.
    Var straight_through(Var soft, Matrix hard);

    // Seeds d(loss)/d(loss) = 1 and pulls gradients back through every op.
    void backward(Var loss);

    int size() const { return static_cast<int>(nodes_.size()); }

  private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        std::function<void(Tape&)> pull;
    };
    std::vector<Node> nodes_;

    Node& node(Var v);
    const Node& node(Var v) const;
    bool rg(Var v) const { return node(v).requires_grad; }
    Var push(Matrix value, bool requires_grad, std::function<void(Tape&)> pull);
};

}  // namespace relaysim

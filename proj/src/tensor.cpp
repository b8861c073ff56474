#include "relaysim/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace relaysim {

namespace {

void check_finite(const Matrix& m, const char* op) {
    if (!m.allFinite())
        throw std::runtime_error(std::string(op) + " produced a non-finite value");
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
}

}  // namespace

Tape::Node& Tape::node(Var v) {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw std::out_of_range("tape variable is not attached to this tape");
    return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw std::out_of_range("tape variable is not attached to this tape");
    return nodes_[v.id];
}

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&)> pull) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.pull = requires_grad ? std::move(pull) : nullptr;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Matrix value, bool requires_grad) {
    check_finite(value, "input");
    return push(std::move(value), requires_grad, nullptr);
}

Var Tape::matmul(Var a, Var b) {
    if (value(a).cols() != value(b).rows())
        throw std::invalid_argument("matmul: inner dims differ");
    Matrix out = value(a) * value(b);
    check_finite(out, "matmul");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a) || rg(b), [a, b, self](Tape& t) {
        const Matrix& g = t.nodes_[self.id].grad;
        if (t.rg(a)) t.nodes_[a.id].grad.noalias() += g * t.nodes_[b.id].value.transpose();
        if (t.rg(b)) t.nodes_[b.id].grad.noalias() += t.nodes_[a.id].value.transpose() * g;
    });
}

Var Tape::add(Var a, Var b) {
    check_same_shape(value(a), value(b), "add");
    Matrix out = value(a) + value(b);
    check_finite(out, "add");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a) || rg(b), [a, b, self](Tape& t) {
        const Matrix& g = t.nodes_[self.id].grad;
        if (t.rg(a)) t.nodes_[a.id].grad += g;
        if (t.rg(b)) t.nodes_[b.id].grad += g;
    });
}

Var Tape::sub(Var a, Var b) {
    check_same_shape(value(a), value(b), "sub");
    Matrix out = value(a) - value(b);
    check_finite(out, "sub");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a) || rg(b), [a, b, self](Tape& t) {
        const Matrix& g = t.nodes_[self.id].grad;
        if (t.rg(a)) t.nodes_[a.id].grad += g;
        if (t.rg(b)) t.nodes_[b.id].grad -= g;
    });
}

Var Tape::hadamard(Var a, Var b) {
    check_same_shape(value(a), value(b), "hadamard");
    Matrix out = value(a).cwiseProduct(value(b));
    check_finite(out, "hadamard");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a) || rg(b), [a, b, self](Tape& t) {
        const Matrix& g = t.nodes_[self.id].grad;
        if (t.rg(a)) t.nodes_[a.id].grad += g.cwiseProduct(t.nodes_[b.id].value);
        if (t.rg(b)) t.nodes_[b.id].grad += g.cwiseProduct(t.nodes_[a.id].value);
    });
}

Var Tape::scale(Var a, double c) {
    Matrix out = value(a) * c;
    check_finite(out, "scale");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a), [a, c, self](Tape& t) {
        if (t.rg(a)) t.nodes_[a.id].grad += t.nodes_[self.id].grad * c;
    });
}

Var Tape::square(Var a) {
    Matrix out = value(a).array().square();
    check_finite(out, "square");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (t.rg(a))
            t.nodes_[a.id].grad.array() +=
                2.0 * t.nodes_[self.id].grad.array() * t.nodes_[a.id].value.array();
    });
}

Var Tape::relu(Var a) {
    Matrix out = value(a).cwiseMax(0.0);
    check_finite(out, "relu");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        t.nodes_[a.id].grad.array() +=
            t.nodes_[self.id].grad.array() *
            (t.nodes_[a.id].value.array() > 0.0).cast<double>();
    });
}

Var Tape::leaky_relu(Var a, double slope) {
    const Matrix& va = value(a);
    Matrix out = va.cwiseMax(va * slope);
    check_finite(out, "leaky_relu");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a), [a, slope, self](Tape& t) {
        if (!t.rg(a)) return;
        const auto pos = (t.nodes_[a.id].value.array() > 0.0).cast<double>();
        t.nodes_[a.id].grad.array() +=
            t.nodes_[self.id].grad.array() * (pos + (1.0 - pos) * slope);
    });
}

Var Tape::add_rowvec(Var a, Var b) {
    if (value(b).rows() != 1 || value(b).cols() != value(a).cols())
        throw std::invalid_argument("add_rowvec: b must be 1 x cols(a)");
    Matrix out = value(a).rowwise() + value(b).row(0);
    check_finite(out, "add_rowvec");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a) || rg(b), [a, b, self](Tape& t) {
        const Matrix& g = t.nodes_[self.id].grad;
        if (t.rg(a)) t.nodes_[a.id].grad += g;
        if (t.rg(b)) t.nodes_[b.id].grad.row(0) += g.colwise().sum();
    });
}

Var Tape::sum_all(Var a) {
    Matrix out(1, 1);
    out(0, 0) = value(a).sum();
    check_finite(out, "sum_all");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (t.rg(a)) t.nodes_[a.id].grad.array() += t.nodes_[self.id].grad(0, 0);
    });
}

Var Tape::mean_all(Var a) {
    const double n = static_cast<double>(value(a).size());
    if (n == 0) throw std::invalid_argument("mean_all: empty matrix");
    Matrix out(1, 1);
    out(0, 0) = value(a).mean();
    check_finite(out, "mean_all");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a), [a, n, self](Tape& t) {
        if (t.rg(a)) t.nodes_[a.id].grad.array() += t.nodes_[self.id].grad(0, 0) / n;
    });
}

Var Tape::concat_cols(Var a, Var b) {
    if (value(a).rows() != value(b).rows())
        throw std::invalid_argument("concat_cols: row counts differ");
    const Eigen::Index ca = value(a).cols();
    const Eigen::Index cb = value(b).cols();
    Matrix out(value(a).rows(), ca + cb);
    out.leftCols(ca) = value(a);
    out.rightCols(cb) = value(b);
    check_finite(out, "concat_cols");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a) || rg(b), [a, b, ca, cb, self](Tape& t) {
        const Matrix& g = t.nodes_[self.id].grad;
        if (t.rg(a)) t.nodes_[a.id].grad += g.leftCols(ca);
        if (t.rg(b)) t.nodes_[b.id].grad += g.rightCols(cb);
    });
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
    const Matrix& va = value(a);
    Matrix out(static_cast<Eigen::Index>(idx.size()), va.cols());
    for (size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= va.rows())
            throw std::invalid_argument("gather_rows: index out of range");
        out.row(static_cast<Eigen::Index>(r)) = va.row(idx[r]);
    }
    check_finite(out, "gather_rows");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a), [a, idx = std::move(idx), self](Tape& t) {
        if (!t.rg(a)) return;
        const Matrix& g = t.nodes_[self.id].grad;
        for (size_t r = 0; r < idx.size(); ++r)
            t.nodes_[a.id].grad.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
    });
}

Var Tape::scatter_sum_rows(Var a, std::vector<int> dst, int rows) {
    const Matrix& va = value(a);
    if (static_cast<Eigen::Index>(dst.size()) != va.rows())
        throw std::invalid_argument("scatter_sum_rows: one destination per row required");
    Matrix out = Matrix::Zero(rows, va.cols());
    for (size_t r = 0; r < dst.size(); ++r) {
        if (dst[r] < 0 || dst[r] >= rows)
            throw std::invalid_argument("scatter_sum_rows: destination out of range");
        out.row(dst[r]) += va.row(static_cast<Eigen::Index>(r));
    }
    check_finite(out, "scatter_sum_rows");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a), [a, dst = std::move(dst), self](Tape& t) {
        if (!t.rg(a)) return;
        const Matrix& g = t.nodes_[self.id].grad;
        for (size_t r = 0; r < dst.size(); ++r)
            t.nodes_[a.id].grad.row(static_cast<Eigen::Index>(r)) += g.row(dst[r]);
    });
}

Var Tape::segment_softmax(Var scores, std::vector<int> seg, int n_segs) {
    const Matrix& vs = value(scores);
    if (vs.cols() != 1) throw std::invalid_argument("segment_softmax: scores must be n x 1");
    if (static_cast<Eigen::Index>(seg.size()) != vs.rows())
        throw std::invalid_argument("segment_softmax: one segment id per score required");
    std::vector<double> seg_max(static_cast<size_t>(n_segs),
                                -std::numeric_limits<double>::infinity());
    for (size_t r = 0; r < seg.size(); ++r) {
        if (seg[r] < 0 || seg[r] >= n_segs)
            throw std::invalid_argument("segment_softmax: segment id out of range");
        seg_max[seg[r]] = std::max(seg_max[seg[r]], vs(static_cast<Eigen::Index>(r), 0));
    }
    std::vector<double> seg_sum(static_cast<size_t>(n_segs), 0.0);
    Matrix out(vs.rows(), 1);
    for (size_t r = 0; r < seg.size(); ++r) {
        out(static_cast<Eigen::Index>(r), 0) =
            std::exp(vs(static_cast<Eigen::Index>(r), 0) - seg_max[seg[r]]);
        seg_sum[seg[r]] += out(static_cast<Eigen::Index>(r), 0);
    }
    for (size_t r = 0; r < seg.size(); ++r) out(static_cast<Eigen::Index>(r), 0) /= seg_sum[seg[r]];
    check_finite(out, "segment_softmax");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(scores),
                [scores, seg = std::move(seg), n_segs, self](Tape& t) {
                    if (!t.rg(scores)) return;
                    const Matrix& g = t.nodes_[self.id].grad;
                    const Matrix& alpha = t.nodes_[self.id].value;
                    std::vector<double> seg_dot(static_cast<size_t>(n_segs), 0.0);
                    for (size_t r = 0; r < seg.size(); ++r)
                        seg_dot[seg[r]] += alpha(static_cast<Eigen::Index>(r), 0) *
                                           g(static_cast<Eigen::Index>(r), 0);
                    for (size_t r = 0; r < seg.size(); ++r)
                        t.nodes_[scores.id].grad(static_cast<Eigen::Index>(r), 0) +=
                            alpha(static_cast<Eigen::Index>(r), 0) *
                            (g(static_cast<Eigen::Index>(r), 0) - seg_dot[seg[r]]);
                });
}

Var Tape::segment_mean(Var a, std::vector<int> seg, int n_segs) {
    const Matrix& va = value(a);
    if (static_cast<Eigen::Index>(seg.size()) != va.rows())
        throw std::invalid_argument("segment_mean: one segment id per row required");
    std::vector<double> counts(static_cast<size_t>(n_segs), 0.0);
    Matrix out = Matrix::Zero(n_segs, va.cols());
    for (size_t r = 0; r < seg.size(); ++r) {
        if (seg[r] < 0 || seg[r] >= n_segs)
            throw std::invalid_argument("segment_mean: segment id out of range");
        out.row(seg[r]) += va.row(static_cast<Eigen::Index>(r));
        counts[seg[r]] += 1.0;
    }
    for (int s = 0; s < n_segs; ++s) {
        if (counts[s] == 0.0) throw std::invalid_argument("segment_mean: empty segment");
        out.row(s) /= counts[s];
    }
    check_finite(out, "segment_mean");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a),
                [a, seg = std::move(seg), counts = std::move(counts), self](Tape& t) {
                    if (!t.rg(a)) return;
                    const Matrix& g = t.nodes_[self.id].grad;
                    for (size_t r = 0; r < seg.size(); ++r)
                        t.nodes_[a.id].grad.row(static_cast<Eigen::Index>(r)) +=
                            g.row(seg[r]) / counts[seg[r]];
                });
}

Var Tape::softmax_rows(Var a) {
    const Matrix& va = value(a);
    Matrix out(va.rows(), va.cols());
    for (Eigen::Index r = 0; r < va.rows(); ++r) {
        const double m = va.row(r).maxCoeff();
        out.row(r) = (va.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    check_finite(out, "softmax_rows");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        const Matrix& g = t.nodes_[self.id].grad;
        const Matrix& p = t.nodes_[self.id].value;
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            const double dot = p.row(r).dot(g.row(r));
            t.nodes_[a.id].grad.row(r).array() +=
                p.row(r).array() * (g.row(r).array() - dot);
        }
    });
}

Var Tape::scale_rows(Var a, Var w) {
    const Matrix& va = value(a);
    const Matrix& vw = value(w);
    if (vw.cols() != 1 || vw.rows() != va.rows())
        throw std::invalid_argument("scale_rows: w must be rows(a) x 1");
    Matrix out = va.array().colwise() * vw.col(0).array();
    check_finite(out, "scale_rows");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), rg(a) || rg(w), [a, w, self](Tape& t) {
        const Matrix& g = t.nodes_[self.id].grad;
        if (t.rg(a))
            t.nodes_[a.id].grad.array() +=
                g.array().colwise() * t.nodes_[w.id].value.col(0).array();
        if (t.rg(w))
            t.nodes_[w.id].grad.col(0).array() +=
                (g.array() * t.nodes_[a.id].value.array()).rowwise().sum();
    });
}

Var Tape::straight_through(Var soft, Matrix hard) {
    check_same_shape(value(soft), hard, "straight_through");
    check_finite(hard, "straight_through");
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(hard), rg(soft), [soft, self](Tape& t) {
        if (t.rg(soft)) t.nodes_[soft.id].grad += t.nodes_[self.id].grad;
    });
}

void Tape::backward(Var loss) {
    const Node& top = node(loss);
    if (top.value.rows() != 1 || top.value.cols() != 1)
        throw std::invalid_argument("backward: loss must be a 1 x 1 matrix");
    for (Node& n : nodes_)
        if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    if (!top.requires_grad)
        throw std::invalid_argument("backward: loss does not depend on any trainable input");
    nodes_[loss.id].grad(0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i)
        if (nodes_[i].requires_grad && nodes_[i].pull) nodes_[i].pull(*this);
}

}  // namespace relaysim

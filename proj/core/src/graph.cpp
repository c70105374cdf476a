#include "acqa/graph.hpp"

#include <algorithm>
#include <cmath>

namespace acqa {

// ----------------------------- ParamStore -----------------------------

Tensor& ParamStore::create(const std::string& name, std::vector<int> shape) {
    if (has(name)) {
        throw ModelError("ParamStore: duplicate parameter name '" + name + "'");
    }
    index_[name] = entries_.size();
    entries_.push_back(Entry{name, Tensor(shape), Tensor(shape)});
    return entries_.back().value;
}

Tensor& ParamStore::value(const std::string& name) {
    return entries_[entry_index(name)].value;
}

const Tensor& ParamStore::value(const std::string& name) const {
    return entries_[entry_index(name)].value;
}

Tensor& ParamStore::grad(const std::string& name) {
    return entries_[entry_index(name)].grad;
}

std::size_t ParamStore::entry_index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ModelError("ParamStore: unknown parameter '" + name + "'");
    }
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& e : entries_) {
        e.grad.fill(0.0f);
    }
}

std::size_t ParamStore::total_params() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        n += e.value.numel();
    }
    return n;
}

// ----------------------------- value-level losses -----------------------------

namespace {

template <class S>
S cross_entropy_impl(std::span<const S> logits, int target) {
    if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
        throw ModelError("cross_entropy: target " + std::to_string(target) +
                         " out of range for " + std::to_string(logits.size()) + " logits");
    }
    S m = logits[0];
    for (S x : logits) {
        m = std::max(m, x);
    }
    S sum = S(0);
    for (S x : logits) {
        sum += std::exp(x - m);
    }
    return (m + std::log(sum)) - logits[target];
}

template <class S>
S bce_clamp_impl(S p) {
    const S eps = S(1e-7);
    return std::clamp(p, eps, S(1) - eps);
}

template <class S>
S bce_impl(S p, int label) {
    const S q = bce_clamp_impl(p);
    return label ? -std::log(q) : -std::log(S(1) - q);
}

} // namespace

float cross_entropy_value(std::span<const float> logits, int target) {
    return cross_entropy_impl(logits, target);
}
double cross_entropy_value(std::span<const double> logits, int target) {
    return cross_entropy_impl(logits, target);
}
float bce_clamp(float p) { return bce_clamp_impl(p); }
double bce_clamp(double p) { return bce_clamp_impl(p); }
float binary_cross_entropy_value(float p, int label) { return bce_impl(p, label); }
double binary_cross_entropy_value(double p, int label) { return bce_impl(p, label); }

// ----------------------------- GraphT -----------------------------

template <class S>
typename GraphT<S>::NodeId GraphT<S>::push(TensorS value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) {
        n.grad = TensorS(n.value.shape);
    }
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::constant(TensorS t) {
    return push(std::move(t), false);
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::constant(const Tensor& t)
    requires(!std::is_same_v<S, float>)
{
    TensorS converted(t.shape);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        converted.data[i] = static_cast<S>(t.data[i]);
    }
    return push(std::move(converted), false);
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::param(const std::string& name) {
    if (params_ == nullptr) {
        throw ModelError("Graph::param: no ParamStore bound");
    }
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) {
        return it->second;
    }
    const Tensor& v = params_->value(name);
    TensorS copy(v.shape);
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        copy.data[i] = static_cast<S>(v.data[i]);
    }
    NodeId id = push(std::move(copy), true);
    nodes_[id].store_entry = static_cast<int>(params_->entry_index(name));
    param_nodes_[name] = id;
    param_leaves_.push_back(id);
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::matmul(NodeId a, NodeId b) {
    const TensorS& A = nodes_[a].value;
    const TensorS& B = nodes_[b].value;
    if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0]) {
        throw ModelError("matmul: shape mismatch " + shape_str(A.shape) + " vs " +
                         shape_str(B.shape));
    }
    const int m = A.shape[0], k = A.shape[1], n = B.shape[1];
    TensorS out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const S aip = A.at(i, p);
            if (aip == S(0)) {
                continue;
            }
            for (int j = 0; j < n; ++j) {
                out.at(i, j) += aip * B.at(p, j);
            }
        }
    }
    bool ng = wants_grad(a) || wants_grad(b);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, a, b, m, k, n]() {
            const TensorS& dC = nodes_[id].grad;
            if (wants_grad(a)) {
                TensorS& dA = grad_ref(a);
                const TensorS& B2 = nodes_[b].value;
                // dA += dC * B^T
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) {
                        const S d = dC.at(i, j);
                        if (d == S(0)) continue;
                        for (int p = 0; p < k; ++p) {
                            dA.at(i, p) += d * B2.at(p, j);
                        }
                    }
                }
            }
            if (wants_grad(b)) {
                TensorS& dB = grad_ref(b);
                const TensorS& A2 = nodes_[a].value;
                // dB += A^T * dC
                for (int i = 0; i < m; ++i) {
                    for (int p = 0; p < k; ++p) {
                        const S v = A2.at(i, p);
                        if (v == S(0)) continue;
                        for (int j = 0; j < n; ++j) {
                            dB.at(p, j) += v * dC.at(i, j);
                        }
                    }
                }
            }
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::add(NodeId a, NodeId b) {
    const TensorS& A = nodes_[a].value;
    const TensorS& B = nodes_[b].value;

    enum class Mode { same, row, scalar };
    Mode mode;
    if (A.same_shape(B)) {
        mode = Mode::same;
    } else if (B.numel() == 1) {
        mode = Mode::scalar;
    } else if (A.shape.size() == 2 && B.shape.size() == 2 && B.shape[0] == 1 &&
               B.shape[1] == A.shape[1]) {
        mode = Mode::row;
    } else {
        throw ModelError("add: shape mismatch " + shape_str(A.shape) + " vs " +
                         shape_str(B.shape));
    }

    TensorS out = A;
    const int cols = A.cols();
    switch (mode) {
    case Mode::same:
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
        break;
    case Mode::scalar:
        for (auto& v : out.data) v += B.data[0];
        break;
    case Mode::row:
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i % cols];
        break;
    }

    bool ng = wants_grad(a) || wants_grad(b);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, a, b, mode, cols]() {
            const TensorS& dC = nodes_[id].grad;
            if (wants_grad(a)) {
                TensorS& dA = grad_ref(a);
                for (std::size_t i = 0; i < dC.data.size(); ++i) dA.data[i] += dC.data[i];
            }
            if (wants_grad(b)) {
                TensorS& dB = grad_ref(b);
                switch (mode) {
                case Mode::same:
                    for (std::size_t i = 0; i < dC.data.size(); ++i) dB.data[i] += dC.data[i];
                    break;
                case Mode::scalar: {
                    S s = S(0);
                    for (S v : dC.data) s += v;
                    dB.data[0] += s;
                    break;
                }
                case Mode::row:
                    for (std::size_t i = 0; i < dC.data.size(); ++i) dB.data[i % cols] += dC.data[i];
                    break;
                }
            }
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::mul(NodeId a, NodeId b) {
    const TensorS& A = nodes_[a].value;
    const TensorS& B = nodes_[b].value;
    require_same_shape(A, B, "mul");
    TensorS out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];

    bool ng = wants_grad(a) || wants_grad(b);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, a, b]() {
            const TensorS& dC = nodes_[id].grad;
            if (wants_grad(a)) {
                TensorS& dA = grad_ref(a);
                const TensorS& B2 = nodes_[b].value;
                for (std::size_t i = 0; i < dC.data.size(); ++i) dA.data[i] += dC.data[i] * B2.data[i];
            }
            if (wants_grad(b)) {
                TensorS& dB = grad_ref(b);
                const TensorS& A2 = nodes_[a].value;
                for (std::size_t i = 0; i < dC.data.size(); ++i) dB.data[i] += dC.data[i] * A2.data[i];
            }
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::scale(NodeId a, S c) {
    TensorS out = nodes_[a].value;
    for (auto& v : out.data) v *= c;
    bool ng = wants_grad(a);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, a, c]() {
            const TensorS& dC = nodes_[id].grad;
            TensorS& dA = grad_ref(a);
            for (std::size_t i = 0; i < dC.data.size(); ++i) dA.data[i] += c * dC.data[i];
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::tanh_op(NodeId a) {
    TensorS out = nodes_[a].value;
    for (auto& v : out.data) v = std::tanh(v);
    bool ng = wants_grad(a);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, a]() {
            const TensorS& Y = nodes_[id].value;
            const TensorS& dY = nodes_[id].grad;
            TensorS& dA = grad_ref(a);
            for (std::size_t i = 0; i < dY.data.size(); ++i) {
                dA.data[i] += (S(1) - Y.data[i] * Y.data[i]) * dY.data[i];
            }
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::sigmoid_op(NodeId a) {
    TensorS out = nodes_[a].value;
    for (auto& v : out.data) {
        if (v >= S(0)) {
            v = S(1) / (S(1) + std::exp(-v));
        } else {
            const S e = std::exp(v);
            v = e / (S(1) + e);
        }
    }
    bool ng = wants_grad(a);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, a]() {
            const TensorS& Y = nodes_[id].value;
            const TensorS& dY = nodes_[id].grad;
            TensorS& dA = grad_ref(a);
            for (std::size_t i = 0; i < dY.data.size(); ++i) {
                dA.data[i] += Y.data[i] * (S(1) - Y.data[i]) * dY.data[i];
            }
        };
    }
    return id;
}

// Lines along `axis`: for rank-2 axis=1 each row is a line, axis=0 each
// column. Rank-1 tensors are treated as a single line.
template <class S>
typename GraphT<S>::NodeId GraphT<S>::softmax(NodeId a, int axis) {
    const TensorS& A = nodes_[a].value;
    const bool vec = A.shape.size() == 1;
    if (!vec && A.shape.size() != 2) {
        throw ModelError("softmax: rank must be 1 or 2, got " + shape_str(A.shape));
    }
    if (!vec && axis != 0 && axis != 1) {
        throw ModelError("softmax: bad axis " + std::to_string(axis));
    }
    const int rows = vec ? 1 : A.shape[0];
    const int cols = vec ? static_cast<int>(A.numel()) : A.shape[1];
    const bool row_lines = vec || axis == 1;
    const int n_lines = row_lines ? rows : cols;
    const int line_len = row_lines ? cols : rows;
    auto idx = [row_lines, cols](int line, int i) {
        return row_lines ? static_cast<std::size_t>(line) * cols + i
                         : static_cast<std::size_t>(i) * cols + line;
    };

    TensorS out = A;
    for (int l = 0; l < n_lines; ++l) {
        S m = out.data[idx(l, 0)];
        for (int i = 1; i < line_len; ++i) m = std::max(m, out.data[idx(l, i)]);
        S sum = S(0);
        for (int i = 0; i < line_len; ++i) {
            S e = std::exp(out.data[idx(l, i)] - m);
            out.data[idx(l, i)] = e;
            sum += e;
        }
        for (int i = 0; i < line_len; ++i) out.data[idx(l, i)] /= sum;
    }

    bool ng = wants_grad(a);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, a, n_lines, line_len, idx]() {
            const TensorS& Y = nodes_[id].value;
            const TensorS& dY = nodes_[id].grad;
            TensorS& dA = grad_ref(a);
            for (int l = 0; l < n_lines; ++l) {
                S dot = S(0);
                for (int i = 0; i < line_len; ++i) {
                    dot += dY.data[idx(l, i)] * Y.data[idx(l, i)];
                }
                for (int i = 0; i < line_len; ++i) {
                    dA.data[idx(l, i)] += Y.data[idx(l, i)] * (dY.data[idx(l, i)] - dot);
                }
            }
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::mean(NodeId a, int axis) {
    const TensorS& A = nodes_[a].value;
    if (A.shape.size() == 1) {
        if (axis != 0) {
            throw ModelError("mean: bad axis " + std::to_string(axis) + " for " +
                             shape_str(A.shape));
        }
        const int n = static_cast<int>(A.numel());
        TensorS out({1});
        S s = S(0);
        for (S v : A.data) s += v;
        out.data[0] = s / static_cast<S>(n);
        bool ng = wants_grad(a);
        NodeId id = push(std::move(out), ng);
        if (ng) {
            nodes_[id].back = [this, id, a, n]() {
                const S d = nodes_[id].grad.data[0] / static_cast<S>(n);
                TensorS& dA = grad_ref(a);
                for (auto& g : dA.data) g += d;
            };
        }
        return id;
    }
    if (A.shape.size() != 2 || (axis != 0 && axis != 1)) {
        throw ModelError("mean: bad axis " + std::to_string(axis) + " for " + shape_str(A.shape));
    }
    const int rows = A.shape[0], cols = A.shape[1];
    TensorS out(axis == 0 ? std::vector<int>{1, cols} : std::vector<int>{rows, 1});
    if (axis == 0) {
        for (int j = 0; j < cols; ++j) {
            S s = S(0);
            for (int i = 0; i < rows; ++i) s += A.at(i, j);
            out.data[j] = s / static_cast<S>(rows);
        }
    } else {
        for (int i = 0; i < rows; ++i) {
            S s = S(0);
            for (int j = 0; j < cols; ++j) s += A.at(i, j);
            out.data[i] = s / static_cast<S>(cols);
        }
    }
    bool ng = wants_grad(a);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, a, axis, rows, cols]() {
            const TensorS& dY = nodes_[id].grad;
            TensorS& dA = grad_ref(a);
            if (axis == 0) {
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < cols; ++j) {
                        dA.at(i, j) += dY.data[j] / static_cast<S>(rows);
                    }
                }
            } else {
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < cols; ++j) {
                        dA.at(i, j) += dY.data[i] / static_cast<S>(cols);
                    }
                }
            }
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::concat(NodeId a, NodeId b, int axis) {
    const TensorS& A = nodes_[a].value;
    const TensorS& B = nodes_[b].value;
    TensorS out;
    if (A.shape.size() == 1 && B.shape.size() == 1) {
        if (axis != 0) {
            throw ModelError("concat: bad axis for rank-1 inputs");
        }
        out = TensorS({static_cast<int>(A.numel() + B.numel())});
        std::copy(A.data.begin(), A.data.end(), out.data.begin());
        std::copy(B.data.begin(), B.data.end(), out.data.begin() + A.numel());
    } else if (A.shape.size() == 2 && B.shape.size() == 2 && axis == 0 &&
               A.shape[1] == B.shape[1]) {
        out = TensorS({A.shape[0] + B.shape[0], A.shape[1]});
        std::copy(A.data.begin(), A.data.end(), out.data.begin());
        std::copy(B.data.begin(), B.data.end(), out.data.begin() + A.numel());
    } else if (A.shape.size() == 2 && B.shape.size() == 2 && axis == 1 &&
               A.shape[0] == B.shape[0]) {
        out = TensorS({A.shape[0], A.shape[1] + B.shape[1]});
        for (int i = 0; i < A.shape[0]; ++i) {
            for (int j = 0; j < A.shape[1]; ++j) out.at(i, j) = A.at(i, j);
            for (int j = 0; j < B.shape[1]; ++j) out.at(i, A.shape[1] + j) = B.at(i, j);
        }
    } else {
        throw ModelError("concat: shape mismatch " + shape_str(A.shape) + " vs " +
                         shape_str(B.shape) + " along axis " + std::to_string(axis));
    }

    bool ng = wants_grad(a) || wants_grad(b);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        const auto a_shape = A.shape;
        const auto b_shape = B.shape;
        nodes_[id].back = [this, id, a, b, axis, a_shape, b_shape]() {
            const TensorS& dC = nodes_[id].grad;
            const std::size_t a_numel = TensorS::numel_of(a_shape);
            if (a_shape.size() == 1 || axis == 0) {
                if (wants_grad(a)) {
                    TensorS& dA = grad_ref(a);
                    for (std::size_t i = 0; i < a_numel; ++i) dA.data[i] += dC.data[i];
                }
                if (wants_grad(b)) {
                    TensorS& dB = grad_ref(b);
                    for (std::size_t i = 0; i < dB.data.size(); ++i) dB.data[i] += dC.data[a_numel + i];
                }
            } else {
                const int rows = a_shape[0];
                const int ac = a_shape[1], bc = b_shape[1];
                for (int i = 0; i < rows; ++i) {
                    if (wants_grad(a)) {
                        TensorS& dA = grad_ref(a);
                        for (int j = 0; j < ac; ++j) dA.at(i, j) += dC.at(i, j);
                    }
                    if (wants_grad(b)) {
                        TensorS& dB = grad_ref(b);
                        for (int j = 0; j < bc; ++j) dB.at(i, j) += dC.at(i, ac + j);
                    }
                }
            }
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::transpose(NodeId a) {
    const TensorS& A = nodes_[a].value;
    if (A.shape.size() != 2) {
        throw ModelError("transpose: rank-2 required, got " + shape_str(A.shape));
    }
    const int m = A.shape[0], n = A.shape[1];
    TensorS out({n, m});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.at(j, i) = A.at(i, j);
    }
    bool ng = wants_grad(a);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, a, m, n]() {
            const TensorS& dY = nodes_[id].grad;
            TensorS& dA = grad_ref(a);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) dA.at(i, j) += dY.at(j, i);
            }
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::reshape(NodeId a, std::vector<int> shape) {
    const TensorS& A = nodes_[a].value;
    if (TensorS::numel_of(shape) != A.numel()) {
        throw ModelError("reshape: numel mismatch " + shape_str(A.shape) + " -> " +
                         shape_str(shape));
    }
    TensorS out(shape);
    out.data = A.data;
    bool ng = wants_grad(a);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, a]() {
            const TensorS& dY = nodes_[id].grad;
            TensorS& dA = grad_ref(a);
            for (std::size_t i = 0; i < dY.data.size(); ++i) dA.data[i] += dY.data[i];
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::stack_rows(const std::vector<NodeId>& rows) {
    if (rows.empty()) {
        throw ModelError("stack_rows: empty input");
    }
    const int n = nodes_[rows[0]].value.cols();
    TensorS out({static_cast<int>(rows.size()), n});
    bool ng = false;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const TensorS& R = nodes_[rows[r]].value;
        if (R.numel() != static_cast<std::size_t>(n)) {
            throw ModelError("stack_rows: row shape mismatch " + shape_str(R.shape));
        }
        std::copy(R.data.begin(), R.data.end(), out.data.begin() + r * n);
        ng = ng || wants_grad(rows[r]);
    }
    NodeId id = push(std::move(out), ng);
    if (ng) {
        auto rows_copy = rows;
        nodes_[id].back = [this, id, rows_copy, n]() {
            const TensorS& dY = nodes_[id].grad;
            for (std::size_t r = 0; r < rows_copy.size(); ++r) {
                if (!wants_grad(rows_copy[r])) continue;
                TensorS& dR = grad_ref(rows_copy[r]);
                for (int j = 0; j < n; ++j) dR.data[j] += dY.data[r * n + j];
            }
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::embedding_lookup(NodeId table, const std::vector<int>& ids) {
    const TensorS& T = nodes_[table].value;
    if (T.shape.size() != 2) {
        throw ModelError("embedding_lookup: table must be rank-2, got " + shape_str(T.shape));
    }
    const int V = T.shape[0], d = T.shape[1];
    for (int id : ids) {
        if (id < 0 || id >= V) {
            throw ModelError("embedding_lookup: token id " + std::to_string(id) +
                             " out of vocab range [0," + std::to_string(V) + ")");
        }
    }
    TensorS out({static_cast<int>(ids.size()), d});
    for (std::size_t l = 0; l < ids.size(); ++l) {
        for (int j = 0; j < d; ++j) out.data[l * d + j] = T.at(ids[l], j);
    }
    bool ng = wants_grad(table);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        auto ids_copy = ids;
        nodes_[id].back = [this, id, table, ids_copy, d]() {
            const TensorS& dY = nodes_[id].grad;
            TensorS& dT = grad_ref(table);
            for (std::size_t l = 0; l < ids_copy.size(); ++l) {
                for (int j = 0; j < d; ++j) {
                    dT.at(ids_copy[l], j) += dY.data[l * d + j];
                }
            }
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::cross_entropy(NodeId logits, int target) {
    const TensorS& X = nodes_[logits].value;
    const int n = static_cast<int>(X.numel());
    TensorS out({1});
    out.data[0] = cross_entropy_value(std::span<const S>(X.data), target); // throws on bad target
    bool ng = wants_grad(logits);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, logits, target, n]() {
            const S d = nodes_[id].grad.data[0];
            const TensorS& X2 = nodes_[logits].value;
            TensorS& dX = grad_ref(logits);
            S m = X2.data[0];
            for (S v : X2.data) m = std::max(m, v);
            S sum = S(0);
            for (S v : X2.data) sum += std::exp(v - m);
            for (int i = 0; i < n; ++i) {
                const S p = std::exp(X2.data[i] - m) / sum;
                dX.data[i] += d * (p - (i == target ? S(1) : S(0)));
            }
        };
    }
    return id;
}

template <class S>
typename GraphT<S>::NodeId GraphT<S>::binary_cross_entropy(NodeId p, int label) {
    const TensorS& P = nodes_[p].value;
    if (P.numel() != 1) {
        throw ModelError("binary_cross_entropy: p must be scalar, got " + shape_str(P.shape));
    }
    TensorS out({1});
    out.data[0] = binary_cross_entropy_value(P.data[0], label);
    bool ng = wants_grad(p);
    NodeId id = push(std::move(out), ng);
    if (ng) {
        nodes_[id].back = [this, id, p, label]() {
            const S d = nodes_[id].grad.data[0];
            const S raw = nodes_[p].value.data[0];
            const S q = bce_clamp(raw);
            if (raw != q) {
                return; // clamped region: flat
            }
            const S y = static_cast<S>(label);
            grad_ref(p).data[0] += d * (q - y) / (q * (S(1) - q));
        };
    }
    return id;
}

template <class S>
void GraphT<S>::backward(NodeId loss) {
    if (nodes_[loss].value.numel() != 1) {
        throw ModelError("backward: loss must be scalar, got " +
                         shape_str(nodes_[loss].value.shape));
    }
    if (!nodes_[loss].needs_grad) {
        return; // loss does not depend on any parameter
    }
    nodes_[loss].grad.data[0] = S(1);
    for (NodeId id = loss; id >= 0; --id) {
        if (nodes_[id].needs_grad && nodes_[id].back) {
            nodes_[id].back();
        }
    }
    if (params_ != nullptr) {
        for (NodeId leaf : param_leaves_) {
            const int e = nodes_[leaf].store_entry;
            if (e < 0) continue;
            Tensor& dst = params_->entries()[static_cast<std::size_t>(e)].grad;
            const TensorS& src = nodes_[leaf].grad;
            for (std::size_t i = 0; i < dst.data.size(); ++i) {
                dst.data[i] += static_cast<float>(src.data[i]);
            }
        }
    }
}

template class GraphT<float>;
template class GraphT<double>;

// ----------------------------- Adam -----------------------------

double clip_global_norm(ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& e : params.entries()) {
        for (float g : e.grad.data) {
            sq += static_cast<double>(g) * static_cast<double>(g);
        }
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const float f = static_cast<float>(max_norm / norm);
        for (auto& e : params.entries()) {
            for (auto& g : e.grad.data) g *= f;
        }
    }
    return norm;
}

void Adam::step(ParamStore& params) {
    if (cfg_.clip_norm > 0.0f) {
        clip_global_norm(params, cfg_.clip_norm);
    }
    t_ += 1;
    const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
    for (auto& e : params.entries()) {
        auto it = moments_.find(e.name);
        if (it == moments_.end()) {
            it = moments_.emplace(e.name, Moments{Tensor(e.value.shape), Tensor(e.value.shape)})
                     .first;
        }
        Tensor& m = it->second.m;
        Tensor& v = it->second.v;
        for (std::size_t i = 0; i < e.value.data.size(); ++i) {
            const float g = e.grad.data[i];
            m.data[i] = cfg_.beta1 * m.data[i] + (1.0f - cfg_.beta1) * g;
            v.data[i] = cfg_.beta2 * v.data[i] + (1.0f - cfg_.beta2) * g * g;
            const float mhat = m.data[i] / bc1;
            const float vhat = v.data[i] / bc2;
            e.value.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        e.grad.fill(0.0f);
    }
}

} // namespace acqa

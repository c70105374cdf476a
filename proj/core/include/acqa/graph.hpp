#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "acqa/tensor.hpp"

namespace acqa {

// Named trainable parameters (float32), insertion-ordered. Gradients live
// next to the values and are accumulated into by GraphT::backward.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
    };

    Tensor& create(const std::string& name, std::vector<int> shape);
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    Tensor& grad(const std::string& name);
    std::size_t entry_index(const std::string& name) const;

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    void zero_grads();
    std::size_t total_params() const;

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Numerically stable value-level losses, shared by the graph ops and by
// reporting code that works on plain floats.
float cross_entropy_value(std::span<const float> logits, int target);
double cross_entropy_value(std::span<const double> logits, int target);
float binary_cross_entropy_value(float p, int label);
double binary_cross_entropy_value(double p, int label);
float bce_clamp(float p);
double bce_clamp(double p);

// Dynamic reverse-mode tape over dense tensors. A graph is built fresh for
// every forward pass; node creation order is a topological order, so backward
// is a single reverse sweep. Gradients of parameter leaves are accumulated
// into the bound ParamStore (always float32). The double instantiation is
// used by grad_check to evaluate the identical forward at float64.
template <class S>
class GraphT {
public:
    using NodeId = int;
    using TensorS = TensorT<S>;

    explicit GraphT(ParamStore* params = nullptr) : params_(params) {}

    // Leaves.
    NodeId constant(TensorS t);
    NodeId constant(const Tensor& t)
        requires(!std::is_same_v<S, float>);
    NodeId param(const std::string& name);

    // Core ops.
    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b); // same shape, or b broadcast as (1xn) row / single scalar
    NodeId mul(NodeId a, NodeId b); // elementwise, same shape
    NodeId scale(NodeId a, S c);
    NodeId tanh_op(NodeId a);
    NodeId sigmoid_op(NodeId a);
    NodeId softmax(NodeId a, int axis);
    NodeId mean(NodeId a, int axis);
    NodeId concat(NodeId a, NodeId b, int axis);
    NodeId transpose(NodeId a);
    NodeId reshape(NodeId a, std::vector<int> shape);
    NodeId stack_rows(const std::vector<NodeId>& rows); // k nodes of (1xn) -> (kxn)
    NodeId embedding_lookup(NodeId table, const std::vector<int>& ids);

    // Losses.
    NodeId cross_entropy(NodeId logits, int target);
    NodeId binary_cross_entropy(NodeId p, int label);

    // Populates grads of every reachable parameter (accumulating into the
    // bound ParamStore). `loss` must be scalar.
    void backward(NodeId loss);

    const TensorS& value(NodeId id) const { return nodes_[id].value; }
    const TensorS& grad(NodeId id) const { return nodes_[id].grad; }
    S scalar(NodeId id) const { return nodes_[id].value.data[0]; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        TensorS value;
        TensorS grad; // allocated when needs_grad
        bool needs_grad = false;
        int store_entry = -1; // >= 0 for parameter leaves
        std::function<void()> back;
    };

    NodeId push(TensorS value, bool needs_grad);
    bool wants_grad(NodeId id) const { return nodes_[id].needs_grad; }
    TensorS& grad_ref(NodeId id) { return nodes_[id].grad; }

    std::deque<Node> nodes_; // deque: references from value()/grad() stay valid as the tape grows
    ParamStore* params_;
    std::unordered_map<std::string, NodeId> param_nodes_;
    std::vector<NodeId> param_leaves_;
};

using Graph = GraphT<float>;
using GraphD = GraphT<double>;

// Adam with bias correction; gradients are clipped by global norm before the
// update and zeroed afterwards.
struct AdamConfig {
    float lr = 1e-2f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float clip_norm = 5.0f; // <= 0 disables clipping
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(ParamStore& params);
    std::int64_t steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Moments {
        Tensor m;
        Tensor v;
    };
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    std::unordered_map<std::string, Moments> moments_;
};

// Scales all grads so the global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(ParamStore& params, double max_norm);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t checked = 0;
};

// Central finite-difference verification of backward(). build_loss must be a
// generic callable (auto& graph) constructing the loss node from graph-bound
// parameters; the analytic pass runs it on the float32 graph, the +/- eps
// probes on the float64 twin so FD cancellation stays below the comparison
// tolerance. Returns the max of |analytic - numeric| / max(|a|,|n|,1e-6).
template <class F>
GradCheckResult grad_check(ParamStore& params, F&& build_loss, float eps) {
    if (eps < 1e-4f || eps > 1e-2f) {
        throw ConfigError("grad_check: eps must lie in [1e-4, 1e-2] for the float32 regime");
    }

    params.zero_grads();
    {
        Graph g(&params);
        g.backward(build_loss(g));
    }
    std::vector<Tensor> analytic;
    analytic.reserve(params.entries().size());
    for (const auto& e : params.entries()) {
        analytic.push_back(e.grad);
    }

    auto eval = [&]() -> double {
        GraphD g(&params);
        return g.scalar(build_loss(g));
    };

    GradCheckResult res;
    for (std::size_t e = 0; e < params.entries().size(); ++e) {
        auto& entry = params.entries()[e];
        for (std::size_t i = 0; i < entry.value.data.size(); ++i) {
            const float original = entry.value.data[i];
            const float plus = original + eps;   // rounded to float32
            const float minus = original - eps;
            entry.value.data[i] = plus;
            const double f_plus = eval();
            entry.value.data[i] = minus;
            const double f_minus = eval();
            entry.value.data[i] = original;

            // divide by the realized perturbation, not the nominal 2*eps
            const double numeric =
                (f_plus - f_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
            const double a = static_cast<double>(analytic[e].data[i]);
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = entry.name + "[" + std::to_string(i) + "]";
            }
            res.checked += 1;
        }
    }
    params.zero_grads();
    return res;
}

} // namespace acqa

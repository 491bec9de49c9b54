#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "taskmoe/common.hpp"

namespace taskmoe {

// Reverse-mode autodiff over dense row-major double tensors (rank 1 or 2).
// A Tensor is a cheap handle onto a shared node; ops record the tape on the
// result node and backward() replays it in reverse topological order.
// Gradients accumulate until zero_grad() is called on the leaves.

struct TensorNode {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated lazily during backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    std::size_t size() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

class Tensor {
  public:
    Tensor() : node_(std::make_shared<TensorNode>()) {}
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
    static Tensor full(const std::vector<int>& shape, double value, bool requires_grad = false);
    static Tensor from(const std::vector<int>& shape, std::vector<double> values,
                       bool requires_grad = false);
    /// 2-D convenience: row-major rows.
    static Tensor from_rows(const std::vector<std::vector<double>>& rows,
                            bool requires_grad = false);

    const std::vector<int>& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int rows() const;
    int cols() const;
    std::size_t size() const { return node_->size(); }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& grad() { return node_->grad; }
    const std::vector<double>& grad() const { return node_->grad; }

    double value() const;          // scalar tensors only
    double at(int i) const { return node_->data.at(static_cast<std::size_t>(i)); }
    double at(int i, int j) const;
    double& at(int i) { return node_->data.at(static_cast<std::size_t>(i)); }
    double& at(int i, int j);

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }
    void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

    std::shared_ptr<TensorNode> node() const { return node_; }
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

    /// Deep copy of values; the copy is a fresh leaf (no tape history).
    Tensor clone() const;

  private:
    std::shared_ptr<TensorNode> node_;
};

/// While a guard is alive on a thread, ops skip tape recording. Used by
/// decoding and analysis paths that never call backward().
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};
bool grad_enabled();

// ---- ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
/// x[m×n] + bias[n] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
/// x scaled by a 1-element tensor; gradient flows to both arguments.
Tensor scale_by(const Tensor& x, const Tensor& s);
Tensor relu(const Tensor& x);
Tensor transpose(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
/// Mean NLL over positions whose target != pad_id; scalar result.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int pad_id);
/// Row gather: table[V×d] indexed by ids -> [len×d].
Tensor embedding(const Tensor& table, const std::vector<int>& ids);
Tensor slice_cols(const Tensor& x, int start, int len);
/// Column gather on a 2-D tensor: out[:,j] = x[:,idx[j]].
Tensor select_cols(const Tensor& x, const std::vector<int>& idx);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor sum_all(const Tensor& x);
Tensor reciprocal(const Tensor& s);

/// Backpropagate from a scalar loss into every reachable requires_grad leaf.
/// Grads accumulate across calls; zero them explicitly between steps.
void backward(const Tensor& loss);

/// Max relative error between reverse-mode and central finite-difference
/// gradients of a scalar-valued f at x. Denominator max(|a|,|n|,1e-8).
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor& x, double h);

}  // namespace taskmoe

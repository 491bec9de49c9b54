#include "taskmoe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace taskmoe {

namespace {

thread_local int g_no_grad_depth = 0;

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void check_finite(const TensorNode& node, const char* op) {
#ifndef NDEBUG
    for (double v : node.data) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
    }
#else
    (void)node;
    (void)op;
#endif
}

// Shared result construction: tape is recorded only if some input needs it
// and grad mode is on.
Tensor make_result(std::vector<int> shape, std::vector<double> data,
                   std::vector<std::shared_ptr<TensorNode>> parents,
                   std::function<void(TensorNode&)> backward_fn, const char* op) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    check_finite(*node, op);
    bool needs = grad_enabled();
    if (needs) {
        needs = false;
        for (const auto& p : parents)
            if (p->requires_grad) {
                needs = true;
                break;
            }
    }
    if (needs) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(node);
}

void require_rank12(const Tensor& t, const char* op) {
    if (t.rank() != 1 && t.rank() != 2)
        throw ShapeError(std::string(op) + ": rank must be 1 or 2, got " + shape_str(t.shape()));
}

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->shape = shape;
    node->data.assign(shape_numel(shape), 0.0);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::full(const std::vector<int>& shape, double value, bool requires_grad) {
    Tensor t = zeros(shape, requires_grad);
    std::fill(t.data().begin(), t.data().end(), value);
    return t;
}

Tensor Tensor::from(const std::vector<int>& shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                         shape_str(shape));
    auto node = std::make_shared<TensorNode>();
    node->shape = shape;
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows, bool requires_grad) {
    if (rows.empty()) throw ShapeError("from_rows: no rows");
    const int n = static_cast<int>(rows[0].size());
    std::vector<double> flat;
    flat.reserve(rows.size() * rows[0].size());
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != n) throw ShapeError("from_rows: ragged rows");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return from({static_cast<int>(rows.size()), n}, std::move(flat), requires_grad);
}

int Tensor::rows() const {
    require_rank12(*this, "rows");
    return node_->shape[0];
}

int Tensor::cols() const {
    require_rank12(*this, "cols");
    return rank() == 1 ? 1 : node_->shape[1];
}

double Tensor::value() const {
    if (size() != 1) throw ShapeError("value(): tensor is not scalar, shape " + shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(int i, int j) const {
    if (rank() != 2) throw ShapeError("at(i,j) on non-matrix tensor");
    return node_->data.at(static_cast<std::size_t>(i) * node_->shape[1] + j);
}

double& Tensor::at(int i, int j) {
    if (rank() != 2) throw ShapeError("at(i,j) on non-matrix tensor");
    return node_->data.at(static_cast<std::size_t>(i) * node_->shape[1] + j);
}

Tensor Tensor::clone() const {
    auto node = std::make_shared<TensorNode>();
    node->shape = node_->shape;
    node->data = node_->data;
    node->requires_grad = node_->requires_grad;
    return Tensor(node);
}

// ---- ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: both operands must be matrices, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1];
    const int k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));

    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (int i = 0; i < m; ++i) {
        double* po = out.data() + static_cast<std::size_t>(i) * n;
        const double* pai = pa + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double av = pai[kk];
            const double* pbk = pb + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) po[j] += av * pbk[j];
        }
    }

    auto an = a.node(), bn = b.node();
    return make_result(
        {m, n}, std::move(out), {an, bn},
        [an, bn, m, k, n](TensorNode& node) {
            const double* g = node.grad.data();
            if (an->requires_grad) {
                an->ensure_grad();
                const double* pb = bn->data.data();
                for (int i = 0; i < m; ++i) {
                    const double* gi = g + static_cast<std::size_t>(i) * n;
                    double* dai = an->grad.data() + static_cast<std::size_t>(i) * k;
                    for (int kk = 0; kk < k; ++kk) {
                        const double* pbk = pb + static_cast<std::size_t>(kk) * n;
                        double s = 0.0;
                        for (int j = 0; j < n; ++j) s += gi[j] * pbk[j];
                        dai[kk] += s;
                    }
                }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                const double* pa = an->data.data();
                for (int kk = 0; kk < k; ++kk) {
                    double* dbk = bn->grad.data() + static_cast<std::size_t>(kk) * n;
                    for (int i = 0; i < m; ++i) {
                        const double av = pa[static_cast<std::size_t>(i) * k + kk];
                        const double* gi = g + static_cast<std::size_t>(i) * n;
                        for (int j = 0; j < n; ++j) dbk[j] += av * gi[j];
                    }
                }
            }
        },
        "matmul");
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto an = a.node(), bn = b.node();
    return make_result(
        a.shape(), std::move(out), {an, bn},
        [an, bn](TensorNode& node) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < node.grad.size(); ++i) an->grad[i] += node.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < node.grad.size(); ++i) bn->grad[i] += node.grad[i];
            }
        },
        "add");
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 2 || bias.rank() != 1 || bias.shape()[0] != x.shape()[1])
        throw ShapeError("add_bias: need x[m×n] and bias[n], got " + shape_str(x.shape()) +
                         " and " + shape_str(bias.shape()));
    const int m = x.shape()[0], n = x.shape()[1];
    std::vector<double> out(x.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i) * n + j] =
                x.data()[static_cast<std::size_t>(i) * n + j] + bias.data()[j];
    auto xn = x.node(), bn = bias.node();
    return make_result(
        {m, n}, std::move(out), {xn, bn},
        [xn, bn, m, n](TensorNode& node) {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < node.grad.size(); ++i) xn->grad[i] += node.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j)
                        bn->grad[j] += node.grad[static_cast<std::size_t>(i) * n + j];
            }
        },
        "add_bias");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto an = a.node(), bn = b.node();
    return make_result(
        a.shape(), std::move(out), {an, bn},
        [an, bn](TensorNode& node) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < node.grad.size(); ++i)
                    an->grad[i] += node.grad[i] * bn->data[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < node.grad.size(); ++i)
                    bn->grad[i] += node.grad[i] * an->data[i];
            }
        },
        "mul");
}

Tensor scale(const Tensor& x, double c) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * c;
    auto xn = x.node();
    return make_result(
        x.shape(), std::move(out), {xn},
        [xn, c](TensorNode& node) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < node.grad.size(); ++i) xn->grad[i] += node.grad[i] * c;
        },
        "scale");
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
    if (s.size() != 1) throw ShapeError("scale_by: scale must be a 1-element tensor");
    const double sv = s.data()[0];
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * sv;
    auto xn = x.node(), sn = s.node();
    return make_result(
        x.shape(), std::move(out), {xn, sn},
        [xn, sn](TensorNode& node) {
            if (xn->requires_grad) {
                xn->ensure_grad();
                const double sv2 = sn->data[0];
                for (std::size_t i = 0; i < node.grad.size(); ++i)
                    xn->grad[i] += node.grad[i] * sv2;
            }
            if (sn->requires_grad) {
                sn->ensure_grad();
                double acc = 0.0;
                for (std::size_t i = 0; i < node.grad.size(); ++i)
                    acc += node.grad[i] * xn->data[i];
                sn->grad[0] += acc;
            }
        },
        "scale_by");
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    auto xn = x.node();
    return make_result(
        x.shape(), std::move(out), {xn},
        [xn](TensorNode& node) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < node.grad.size(); ++i)
                if (xn->data[i] > 0.0) xn->grad[i] += node.grad[i];
        },
        "relu");
}

Tensor transpose(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("transpose: need a matrix, got " + shape_str(x.shape()));
    const int m = x.shape()[0], n = x.shape()[1];
    std::vector<double> out(x.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j) * m + i] = x.data()[static_cast<std::size_t>(i) * n + j];
    auto xn = x.node();
    return make_result(
        {n, m}, std::move(out), {xn},
        [xn, m, n](TensorNode& node) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    xn->grad[static_cast<std::size_t>(i) * n + j] +=
                        node.grad[static_cast<std::size_t>(j) * m + i];
        },
        "transpose");
}

Tensor softmax(const Tensor& x, int axis) {
    require_rank12(x, "softmax");
    const bool vec = x.rank() == 1;
    if (vec && axis != 0) throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for rank-1 tensor");
    if (!vec && axis != 0 && axis != 1)
        throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for rank-2 tensor");

    // Normalize along rows for (2-D, axis=1) and whole vector for 1-D;
    // axis=0 on a matrix normalizes down columns via a transposed view.
    const int m = vec ? 1 : x.shape()[0];
    const int n = vec ? x.shape()[0] : x.shape()[1];
    const bool by_rows = vec || axis == 1;

    std::vector<double> out(x.size());
    const auto& in = x.data();
    const int outer = by_rows ? m : n;
    const int inner = by_rows ? n : m;
    auto idx = [by_rows, n](int o, int i) {
        return by_rows ? static_cast<std::size_t>(o) * n + i : static_cast<std::size_t>(i) * n + o;
    };
    for (int o = 0; o < outer; ++o) {
        double mx = in[idx(o, 0)];
        for (int i = 1; i < inner; ++i) mx = std::max(mx, in[idx(o, i)]);
        double sum = 0.0;
        for (int i = 0; i < inner; ++i) {
            const double e = std::exp(in[idx(o, i)] - mx);
            out[idx(o, i)] = e;
            sum += e;
        }
        for (int i = 0; i < inner; ++i) out[idx(o, i)] /= sum;
    }

    auto xn = x.node();
    return make_result(
        x.shape(), std::move(out), {xn},
        [xn, outer, inner, idx](TensorNode& node) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            // dx_i = y_i * (g_i - sum_j g_j y_j) per normalization group
            for (int o = 0; o < outer; ++o) {
                double dot = 0.0;
                for (int i = 0; i < inner; ++i) dot += node.grad[idx(o, i)] * node.data[idx(o, i)];
                for (int i = 0; i < inner; ++i) {
                    const std::size_t p = idx(o, i);
                    xn->grad[p] += node.data[p] * (node.grad[p] - dot);
                }
            }
        },
        "softmax");
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_rank12(x, "layer_norm");
    const bool vec = x.rank() == 1;
    const int m = vec ? 1 : x.shape()[0];
    const int n = vec ? x.shape()[0] : x.shape()[1];
    if (gain.rank() != 1 || gain.shape()[0] != n || bias.rank() != 1 || bias.shape()[0] != n)
        throw ShapeError("layer_norm: gain/bias must have shape [" + std::to_string(n) + "], got " +
                         shape_str(gain.shape()) + " and " + shape_str(bias.shape()));

    std::vector<double> out(x.size());
    std::vector<double> inv_sigma(m);
    std::vector<double> xhat(x.size());
    for (int i = 0; i < m; ++i) {
        const double* row = x.data().data() + static_cast<std::size_t>(i) * n;
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += row[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= n;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[i] = is;
        for (int j = 0; j < n; ++j) {
            const std::size_t p = static_cast<std::size_t>(i) * n + j;
            xhat[p] = (row[j] - mean) * is;
            out[p] = gain.data()[j] * xhat[p] + bias.data()[j];
        }
    }

    auto xn = x.node(), gn = gain.node(), bn = bias.node();
    return make_result(
        x.shape(), std::move(out), {xn, gn, bn},
        [xn, gn, bn, m, n, inv_sigma = std::move(inv_sigma),
         xhat = std::move(xhat)](TensorNode& node) {
            for (int i = 0; i < m; ++i) {
                const double* g = node.grad.data() + static_cast<std::size_t>(i) * n;
                const double* xh = xhat.data() + static_cast<std::size_t>(i) * n;
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (int j = 0; j < n; ++j) gn->grad[j] += g[j] * xh[j];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int j = 0; j < n; ++j) bn->grad[j] += g[j];
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    double mean_a = 0.0, mean_axh = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const double a = g[j] * gn->data[j];
                        mean_a += a;
                        mean_axh += a * xh[j];
                    }
                    mean_a /= n;
                    mean_axh /= n;
                    double* dx = xn->grad.data() + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) {
                        const double a = g[j] * gn->data[j];
                        dx[j] += inv_sigma[i] * (a - mean_a - xh[j] * mean_axh);
                    }
                }
            }
        },
        "layer_norm");
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int pad_id) {
    if (logits.rank() != 2)
        throw ShapeError("cross_entropy: logits must be [seq×vocab], got " +
                         shape_str(logits.shape()));
    const int m = logits.shape()[0], v = logits.shape()[1];
    if (static_cast<int>(targets.size()) != m)
        throw ShapeError("cross_entropy: target length " + std::to_string(targets.size()) +
                         " != logit rows " + std::to_string(m));
    for (int t : targets)
        if (t < 0 || t >= v)
            throw ShapeError("cross_entropy: target id " + std::to_string(t) +
                             " outside vocabulary of size " + std::to_string(v));

    // Softmax probabilities retained for the backward pass.
    std::vector<double> probs(logits.size());
    int live = 0;
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        const double* row = logits.data().data() + static_cast<std::size_t>(i) * v;
        double mx = row[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < v; ++j) {
            const double e = std::exp(row[j] - mx);
            probs[static_cast<std::size_t>(i) * v + j] = e;
            sum += e;
        }
        const double log_sum = std::log(sum);
        for (int j = 0; j < v; ++j) probs[static_cast<std::size_t>(i) * v + j] /= sum;
        if (targets[i] != pad_id) {
            ++live;
            total += log_sum - (row[targets[i]] - mx);
        }
    }
    const double loss = live > 0 ? total / live : 0.0;

    auto ln = logits.node();
    return make_result(
        {1}, {loss}, {ln},
        [ln, targets, pad_id, m, v, live, probs = std::move(probs)](TensorNode& node) {
            if (!ln->requires_grad || live == 0) return;
            ln->ensure_grad();
            const double g = node.grad[0] / live;
            for (int i = 0; i < m; ++i) {
                if (targets[i] == pad_id) continue;
                double* dst = ln->grad.data() + static_cast<std::size_t>(i) * v;
                const double* p = probs.data() + static_cast<std::size_t>(i) * v;
                for (int j = 0; j < v; ++j) dst[j] += g * p[j];
                dst[targets[i]] -= g;
            }
        },
        "cross_entropy");
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
    if (table.rank() != 2)
        throw ShapeError("embedding: table must be [V×d], got " + shape_str(table.shape()));
    const int v = table.shape()[0], d = table.shape()[1];
    if (ids.empty()) throw ShapeError("embedding: empty id list");
    for (int id : ids)
        if (id < 0 || id >= v)
            throw ShapeError("embedding: id " + std::to_string(id) + " outside table of size " +
                             std::to_string(v));
    const int m = static_cast<int>(ids.size());
    std::vector<double> out(static_cast<std::size_t>(m) * d);
    for (int i = 0; i < m; ++i)
        std::copy_n(table.data().data() + static_cast<std::size_t>(ids[i]) * d, d,
                    out.data() + static_cast<std::size_t>(i) * d);
    auto tn = table.node();
    return make_result(
        {m, d}, std::move(out), {tn},
        [tn, ids, d](TensorNode& node) {
            if (!tn->requires_grad) return;
            tn->ensure_grad();
            for (std::size_t i = 0; i < ids.size(); ++i) {
                double* dst = tn->grad.data() + static_cast<std::size_t>(ids[i]) * d;
                const double* src = node.grad.data() + i * d;
                for (int j = 0; j < d; ++j) dst[j] += src[j];
            }
        },
        "embedding");
}

Tensor slice_cols(const Tensor& x, int start, int len) {
    if (x.rank() != 2) throw ShapeError("slice_cols: need a matrix, got " + shape_str(x.shape()));
    const int m = x.shape()[0], n = x.shape()[1];
    if (start < 0 || len <= 0 || start + len > n)
        throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") outside " + std::to_string(n) +
                         " columns");
    std::vector<double> out(static_cast<std::size_t>(m) * len);
    for (int i = 0; i < m; ++i)
        std::copy_n(x.data().data() + static_cast<std::size_t>(i) * n + start, len,
                    out.data() + static_cast<std::size_t>(i) * len);
    auto xn = x.node();
    return make_result(
        {m, len}, std::move(out), {xn},
        [xn, start, len, m, n](TensorNode& node) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < len; ++j)
                    xn->grad[static_cast<std::size_t>(i) * n + start + j] +=
                        node.grad[static_cast<std::size_t>(i) * len + j];
        },
        "slice_cols");
}

Tensor select_cols(const Tensor& x, const std::vector<int>& idx) {
    if (x.rank() != 2) throw ShapeError("select_cols: need a matrix, got " + shape_str(x.shape()));
    const int m = x.shape()[0], n = x.shape()[1];
    if (idx.empty()) throw ShapeError("select_cols: empty index list");
    for (int j : idx)
        if (j < 0 || j >= n)
            throw ShapeError("select_cols: column " + std::to_string(j) + " outside " +
                             std::to_string(n));
    const int k = static_cast<int>(idx.size());
    std::vector<double> out(static_cast<std::size_t>(m) * k);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j)
            out[static_cast<std::size_t>(i) * k + j] =
                x.data()[static_cast<std::size_t>(i) * n + idx[j]];
    auto xn = x.node();
    return make_result(
        {m, k}, std::move(out), {xn},
        [xn, idx, m, n, k](TensorNode& node) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < k; ++j)
                    xn->grad[static_cast<std::size_t>(i) * n + idx[j]] +=
                        node.grad[static_cast<std::size_t>(i) * k + j];
        },
        "select_cols");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const int m = parts[0].shape()[0];
    int total = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.shape()[0] != m)
            throw ShapeError("concat_cols: parts must be matrices with equal row counts");
        total += p.shape()[1];
    }
    std::vector<double> out(static_cast<std::size_t>(m) * total);
    int off = 0;
    for (const auto& p : parts) {
        const int n = p.shape()[1];
        for (int i = 0; i < m; ++i)
            std::copy_n(p.data().data() + static_cast<std::size_t>(i) * n, n,
                        out.data() + static_cast<std::size_t>(i) * total + off);
        off += n;
    }
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::vector<int> widths;
    for (const auto& p : parts) {
        parents.push_back(p.node());
        widths.push_back(p.shape()[1]);
    }
    return make_result(
        {m, total}, std::move(out), parents,
        [parents, widths, m, total](TensorNode& node) {
            int off2 = 0;
            for (std::size_t pi = 0; pi < parents.size(); ++pi) {
                const int n = widths[pi];
                if (parents[pi]->requires_grad) {
                    parents[pi]->ensure_grad();
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < n; ++j)
                            parents[pi]->grad[static_cast<std::size_t>(i) * n + j] +=
                                node.grad[static_cast<std::size_t>(i) * total + off2 + j];
                }
                off2 += n;
            }
        },
        "concat_cols");
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    auto xn = x.node();
    return make_result(
        {1}, {s}, {xn},
        [xn](TensorNode& node) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (double& g : xn->grad) g += node.grad[0];
        },
        "sum_all");
}

Tensor reciprocal(const Tensor& s) {
    if (s.size() != 1) throw ShapeError("reciprocal: need a 1-element tensor");
    const double v = s.data()[0];
    if (v == 0.0) throw NumericError("reciprocal of zero");
    auto sn = s.node();
    return make_result(
        s.shape(), {1.0 / v}, {sn},
        [sn](TensorNode& node) {
            if (!sn->requires_grad) return;
            sn->ensure_grad();
            const double x = sn->data[0];
            sn->grad[0] += -node.grad[0] / (x * x);
        },
        "reciprocal");
}

void backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    // Depth-first topological order, then replay in reverse.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second)
                stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor& x, double h) {
    if (h <= 0.0) throw NumericError("grad_check: step size must be positive");
    const bool had_rg = x.requires_grad();
    x.set_requires_grad(true);
    x.zero_grad();
    Tensor loss = f(x);
    if (loss.size() != 1) throw ShapeError("grad_check: f must be scalar-valued");
    backward(loss);
    std::vector<double> analytic = x.grad();

    double max_rel = 0.0;
    {
        NoGradGuard ng;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double saved = x.data()[i];
            x.data()[i] = saved + h;
            const double up = f(x).value();
            x.data()[i] = saved - h;
            const double down = f(x).value();
            x.data()[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
        }
    }
    x.set_requires_grad(had_rg);
    return max_rel;
}

}  // namespace taskmoe

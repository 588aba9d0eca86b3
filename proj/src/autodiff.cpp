#include "nfa/autodiff.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace nfa {

namespace {

std::atomic<std::uint64_t> g_tape_counter{1};

Tensor transpose2(const Tensor& t) {
    std::size_t m = t.shape()[0], n = t.shape()[1];
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data()[j * m + i] = t.data()[i * n + j];
    return out;
}

// Sum `g` down to `target` shape, undoing broadcast. Accumulates in 64-bit.
Tensor reduce_to_shape(const Tensor& g, const Shape& target) {
    if (g.shape() == target) return g;
    std::vector<double> acc(shape_size(target), 0.0);
    std::size_t rank = g.rank();
    const Shape& gs = g.shape();
    // strides of target padded to g's rank, 0 on broadcast axes
    std::vector<std::size_t> st(rank, 0);
    {
        std::size_t stride = 1;
        std::size_t off = rank - target.size();
        for (std::size_t i = target.size(); i-- > 0;) {
            st[off + i] = (target[i] == 1 && gs[off + i] != 1) ? 0 : stride;
            stride *= target[i];
        }
    }
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ti = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        acc[ti] += g.at(k);
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            ti += st[d];
            if (idx[d] < gs[d]) break;
            ti -= st[d] * gs[d];
            idx[d] = 0;
        }
    }
    Tensor out(target);
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = static_cast<float>(acc[i]);
    return out;
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw std::invalid_argument(std::string(op) + ": expected rank-2 value, got shape " +
                                    shape_str(t.shape()));
}

}  // namespace

// ---------------------------------------------------------------- ParamSet

void ParamSet::add(const std::string& name, Tensor value, bool trainable) {
    if (lookup_.count(name)) throw std::invalid_argument("ParamSet: duplicate name '" + name + "'");
    lookup_[name] = entries_.size();
    order_.push_back(name);
    entries_.push_back({std::move(value), trainable});
}

bool ParamSet::contains(const std::string& name) const { return lookup_.count(name) != 0; }

std::size_t ParamSet::index_of(const std::string& name) const {
    auto it = lookup_.find(name);
    if (it == lookup_.end()) throw std::invalid_argument("ParamSet: unknown name '" + name + "'");
    return it->second;
}

bool ParamSet::trainable(const std::string& name) const { return entries_[index_of(name)].trainable; }

Tensor& ParamSet::value(const std::string& name) {
    Entry& e = entries_[index_of(name)];
    if (!e.trainable)
        throw std::invalid_argument("ParamSet: entry '" + name + "' is frozen");
    return e.value;
}

const Tensor& ParamSet::cvalue(const std::string& name) const { return entries_[index_of(name)].value; }

// -------------------------------------------------------------------- Tape

Tape::Tape() : id_(g_tape_counter.fetch_add(1)) {}

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1, id_};
}

const Tape::Node& Tape::node(Var v) const {
    check_owned(v, "tape");
    return nodes_[static_cast<std::size_t>(v.i)];
}

void Tape::check_owned(Var v, const char* op) const {
    if (v.tape_id != id_ || v.i < 0 || static_cast<std::size_t>(v.i) >= nodes_.size())
        throw std::invalid_argument(std::string(op) + ": value does not belong to this tape");
}

void Tape::accum(int idx, const Tensor& g) {
    Node& n = nodes_[static_cast<std::size_t>(idx)];
    if (!n.needs_grad) return;
    if (!n.grad) {
        n.grad = Tensor(n.value.shape());
    }
    Tensor& acc = *n.grad;
    for (std::size_t i = 0; i < acc.size(); ++i) acc.at(i) += g.at(i);
}

const Tensor* Tape::grad_ptr(int idx) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    return n.grad ? &*n.grad : nullptr;
}

Var Tape::leaf(Tensor value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    return push(std::move(n));
}

Var Tape::param(ParamSet& ps, const std::string& name) {
    auto it = param_cache_.find(name);
    if (it != param_cache_.end()) return Var{it->second, id_};
    Node n;
    n.value = ps.cvalue(name);
    n.needs_grad = ps.trainable(name);
    if (n.needs_grad) n.pname = name;
    Var v = push(std::move(n));
    param_cache_[name] = v.i;
    return v;
}

Var Tape::matmul(Var a, Var b) {
    check_owned(a, "matmul");
    check_owned(b, "matmul");
    Node n;
    n.value = ops::matmul(node(a).value, node(b).value);
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    if (n.needs_grad) {
        int ia = a.i, ib = b.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, ib, io](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            if (t.nodes_[ia].needs_grad)
                t.accum(ia, ops::matmul(*go, transpose2(t.nodes_[ib].value)));
            if (t.nodes_[ib].needs_grad)
                t.accum(ib, ops::matmul(transpose2(t.nodes_[ia].value), *go));
        };
    }
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    check_owned(a, "add");
    check_owned(b, "add");
    Node n;
    n.value = ops::add(node(a).value, node(b).value);
    if (node(a).v64 && node(b).v64) n.v64 = *node(a).v64 + *node(b).v64;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    if (n.needs_grad) {
        int ia = a.i, ib = b.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, ib, io](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            if (t.nodes_[ia].needs_grad) t.accum(ia, reduce_to_shape(*go, t.nodes_[ia].value.shape()));
            if (t.nodes_[ib].needs_grad) t.accum(ib, reduce_to_shape(*go, t.nodes_[ib].value.shape()));
        };
    }
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    check_owned(a, "mul");
    check_owned(b, "mul");
    Node n;
    n.value = ops::mul(node(a).value, node(b).value);
    if (node(a).v64 && node(b).v64) n.v64 = *node(a).v64 * *node(b).v64;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    if (n.needs_grad) {
        int ia = a.i, ib = b.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, ib, io](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            if (t.nodes_[ia].needs_grad)
                t.accum(ia, reduce_to_shape(ops::mul(*go, t.nodes_[ib].value), t.nodes_[ia].value.shape()));
            if (t.nodes_[ib].needs_grad)
                t.accum(ib, reduce_to_shape(ops::mul(*go, t.nodes_[ia].value), t.nodes_[ib].value.shape()));
        };
    }
    return push(std::move(n));
}

// Elementwise unaries share one recording path; `dfn(x, y)` is d/dx given
// the input x and output y = f(x).
Var Tape::tanh(Var a) {
    check_owned(a, "tanh");
    return unary(a, ops::tanh(node(a).value), [](float, float y) { return 1.0f - y * y; });
}

Var Tape::atan(Var a) {
    check_owned(a, "atan");
    return unary(a, ops::atan(node(a).value), [](float x, float) { return 1.0f / (1.0f + x * x); });
}

Var Tape::exp(Var a) {
    check_owned(a, "exp");
    return unary(a, ops::exp(node(a).value), [](float, float y) { return y; });
}

Var Tape::log(Var a) {
    check_owned(a, "log");
    return unary(a, ops::log(node(a).value), [](float x, float) { return 1.0f / x; });
}

Var Tape::unary(Var a, Tensor value, float (*dfn)(float, float)) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = node(a).needs_grad;
    if (n.needs_grad) {
        int ia = a.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, io, dfn](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            const Tensor& xv = t.nodes_[ia].value;
            const Tensor& yv = t.nodes_[io].value;
            Tensor g(xv.shape());
            for (std::size_t i = 0; i < g.size(); ++i)
                g.at(i) = go->at(i) * dfn(xv.at(i), yv.at(i));
            t.accum(ia, g);
        };
    }
    return push(std::move(n));
}

Var Tape::leaky_relu(Var a, float slope) {
    check_owned(a, "leaky_relu");
    Node n;
    n.value = ops::leaky_relu(node(a).value, slope);
    n.needs_grad = node(a).needs_grad;
    if (n.needs_grad) {
        int ia = a.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, io, slope](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            const Tensor& xv = t.nodes_[ia].value;
            Tensor g(xv.shape());
            for (std::size_t i = 0; i < g.size(); ++i)
                g.at(i) = go->at(i) * (xv.at(i) > 0.0f ? 1.0f : slope);
            t.accum(ia, g);
        };
    }
    return push(std::move(n));
}

Var Tape::pow(Var a, float exponent) {
    check_owned(a, "pow");
    Node n;
    n.value = ops::pow(node(a).value, exponent);
    n.needs_grad = node(a).needs_grad;
    if (n.needs_grad) {
        int ia = a.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, io, exponent](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            const Tensor& xv = t.nodes_[ia].value;
            Tensor g(xv.shape());
            for (std::size_t i = 0; i < g.size(); ++i)
                g.at(i) = go->at(i) * exponent * std::pow(xv.at(i), exponent - 1.0f);
            t.accum(ia, g);
        };
    }
    return push(std::move(n));
}

Var Tape::sum(Var a) {
    check_owned(a, "sum");
    Node n;
    double s = ops::sum(node(a).value);
    n.value = Tensor::scalar(static_cast<float>(s));
    n.v64 = s;
    n.needs_grad = node(a).needs_grad;
    if (n.needs_grad) {
        int ia = a.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, io](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            t.accum(ia, Tensor::full(t.nodes_[ia].value.shape(), go->at(0)));
        };
    }
    return push(std::move(n));
}

Var Tape::mean(Var a) {
    check_owned(a, "mean");
    Node n;
    double s = ops::mean(node(a).value);
    n.value = Tensor::scalar(static_cast<float>(s));
    n.v64 = s;
    n.needs_grad = node(a).needs_grad;
    if (n.needs_grad) {
        int ia = a.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, io](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            float inv = 1.0f / static_cast<float>(t.nodes_[ia].value.size());
            t.accum(ia, Tensor::full(t.nodes_[ia].value.shape(), go->at(0) * inv));
        };
    }
    return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, std::vector<int> labels) {
    check_owned(logits, "softmax_cross_entropy");
    Node n;
    double loss = ops::softmax_cross_entropy(node(logits).value, labels);
    n.value = Tensor::scalar(static_cast<float>(loss));
    n.v64 = loss;
    n.needs_grad = node(logits).needs_grad;
    if (n.needs_grad) {
        Tensor probs = ops::softmax_rows(node(logits).value);
        int ia = logits.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, io, probs, labels](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            const Tensor& lv = t.nodes_[ia].value;
            std::size_t b = lv.rank() == 1 ? 1 : lv.rows();
            std::size_t k = lv.rank() == 1 ? lv.shape()[0] : lv.shape()[1];
            Tensor g(lv.shape());
            float scale = go->at(0) / static_cast<float>(b);
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < k; ++j) {
                    float p = probs.data()[i * k + j];
                    float onehot = (static_cast<std::size_t>(labels[i]) == j) ? 1.0f : 0.0f;
                    g.data()[i * k + j] = scale * (p - onehot);
                }
            t.accum(ia, g);
        };
    }
    return push(std::move(n));
}

Var Tape::gaussian_log_density(Var x, double mean_v, double stddev) {
    check_owned(x, "gaussian_log_density");
    Node n;
    n.value = ops::gaussian_log_density(node(x).value, mean_v, stddev);
    n.needs_grad = node(x).needs_grad;
    if (n.needs_grad) {
        int ia = x.i, io = static_cast<int>(nodes_.size());
        double inv_var = 1.0 / (stddev * stddev);
        n.back = [ia, io, mean_v, inv_var](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            const Tensor& xv = t.nodes_[ia].value;
            Tensor g(xv.shape());
            for (std::size_t i = 0; i < g.size(); ++i)
                g.at(i) = go->at(i) * static_cast<float>(-(static_cast<double>(xv.at(i)) - mean_v) * inv_var);
            t.accum(ia, g);
        };
    }
    return push(std::move(n));
}

Var Tape::slice_cols(Var x, std::size_t start, std::size_t len) {
    check_owned(x, "slice_cols");
    const Tensor& v = node(x).value;
    require_rank2(v, "slice_cols");
    std::size_t b = v.shape()[0], d = v.shape()[1];
    if (start + len > d)
        throw std::invalid_argument("slice_cols: [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of range for shape " +
                                    shape_str(v.shape()));
    Node n;
    Tensor out({b, len});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < len; ++j) out.data()[i * len + j] = v.data()[i * d + start + j];
    n.value = std::move(out);
    n.needs_grad = node(x).needs_grad;
    if (n.needs_grad) {
        int ia = x.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, io, start, len](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            const Tensor& xv = t.nodes_[ia].value;
            std::size_t b2 = xv.shape()[0], d2 = xv.shape()[1];
            Tensor g(xv.shape());
            for (std::size_t i = 0; i < b2; ++i)
                for (std::size_t j = 0; j < len; ++j)
                    g.data()[i * d2 + start + j] = go->data()[i * len + j];
            t.accum(ia, g);
        };
    }
    return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
    check_owned(a, "concat_cols");
    check_owned(b, "concat_cols");
    const Tensor& va = node(a).value;
    const Tensor& vb = node(b).value;
    require_rank2(va, "concat_cols");
    require_rank2(vb, "concat_cols");
    if (va.shape()[0] != vb.shape()[0])
        throw std::invalid_argument("concat_cols: row counts differ, " + shape_str(va.shape()) +
                                    " vs " + shape_str(vb.shape()));
    std::size_t rows = va.shape()[0], da = va.shape()[1], db = vb.shape()[1];
    Node n;
    Tensor out({rows, da + db});
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < da; ++j) out.data()[i * (da + db) + j] = va.data()[i * da + j];
        for (std::size_t j = 0; j < db; ++j) out.data()[i * (da + db) + da + j] = vb.data()[i * db + j];
    }
    n.value = std::move(out);
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    if (n.needs_grad) {
        int ia = a.i, ib = b.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, ib, io, rows, da, db](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            if (t.nodes_[ia].needs_grad) {
                Tensor g({rows, da});
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < da; ++j)
                        g.data()[i * da + j] = go->data()[i * (da + db) + j];
                t.accum(ia, g);
            }
            if (t.nodes_[ib].needs_grad) {
                Tensor g({rows, db});
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < db; ++j)
                        g.data()[i * db + j] = go->data()[i * (da + db) + da + j];
                t.accum(ib, g);
            }
        };
    }
    return push(std::move(n));
}

Var Tape::permute_cols(Var x, std::vector<std::uint32_t> perm) {
    check_owned(x, "permute_cols");
    const Tensor& v = node(x).value;
    require_rank2(v, "permute_cols");
    std::size_t b = v.shape()[0], d = v.shape()[1];
    if (perm.size() != d)
        throw std::invalid_argument("permute_cols: permutation length " + std::to_string(perm.size()) +
                                    " vs width " + std::to_string(d));
    Node n;
    Tensor out({b, d});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < d; ++j) out.data()[i * d + j] = v.data()[i * d + perm[j]];
    n.value = std::move(out);
    n.needs_grad = node(x).needs_grad;
    if (n.needs_grad) {
        int ia = x.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, io, perm](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            const Tensor& xv = t.nodes_[ia].value;
            std::size_t b2 = xv.shape()[0], d2 = xv.shape()[1];
            Tensor g(xv.shape());
            for (std::size_t i = 0; i < b2; ++i)
                for (std::size_t j = 0; j < d2; ++j)
                    g.data()[i * d2 + perm[j]] += go->data()[i * d2 + j];
            t.accum(ia, g);
        };
    }
    return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
    check_owned(a, "scale");
    Node n;
    const Tensor& v = node(a).value;
    Tensor out(v.shape());
    for (std::size_t i = 0; i < v.size(); ++i) out.at(i) = static_cast<float>(c * v.at(i));
    n.value = std::move(out);
    if (node(a).v64) n.v64 = c * *node(a).v64;
    n.needs_grad = node(a).needs_grad;
    if (n.needs_grad) {
        int ia = a.i, io = static_cast<int>(nodes_.size());
        n.back = [ia, io, c](Tape& t) {
            const Tensor* go = t.grad_ptr(io);
            if (!go) return;
            Tensor g(go->shape());
            for (std::size_t i = 0; i < g.size(); ++i) g.at(i) = static_cast<float>(c) * go->at(i);
            t.accum(ia, g);
        };
    }
    return push(std::move(n));
}

Var Tape::add_const(Var a, double c) { return add(a, leaf(Tensor::scalar(static_cast<float>(c)))); }

Var Tape::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Tape::affine(Var x, Var w, Var b) { return add(matmul(x, w), b); }

GradMap Tape::backward(Var loss, const ParamSet& ps) {
    check_owned(loss, "backward");
    if (backward_done_)
        throw std::invalid_argument("backward: tape already consumed; record a new forward pass");
    if (node(loss).value.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(node(loss).value.shape()));
    backward_done_ = true;
    accum(loss.i, Tensor::scalar(1.0f));
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        if (nodes_[i].back && nodes_[i].grad) nodes_[i].back(*this);
    }
    GradMap out;
    for (const auto& name : ps.names()) {
        if (!ps.trainable(name)) continue;
        auto it = param_cache_.find(name);
        if (it != param_cache_.end() && nodes_[static_cast<std::size_t>(it->second)].grad)
            out[name] = *nodes_[static_cast<std::size_t>(it->second)].grad;
        else
            out[name] = Tensor(ps.cvalue(name).shape());
    }
    return out;
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar_value(Var v) const {
    const Node& n = node(v);
    if (n.value.size() != 1)
        throw std::invalid_argument("scalar_value: shape " + shape_str(n.value.shape()) + " is not scalar");
    return n.v64 ? *n.v64 : static_cast<double>(n.value.at(0));
}

Tensor Tape::grad(Var v) const {
    const Node& n = node(v);
    return n.grad ? *n.grad : Tensor(n.value.shape());
}

}  // namespace nfa

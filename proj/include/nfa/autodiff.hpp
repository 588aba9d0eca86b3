#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nfa/tensor.hpp"

namespace nfa {

// Named tensor parameters. Frozen entries never change after construction:
// mutable access is only granted to trainable ones.
class ParamSet {
  public:
    void add(const std::string& name, Tensor value, bool trainable = true);
    bool contains(const std::string& name) const;
    bool trainable(const std::string& name) const;
    Tensor& value(const std::string& name);  // trainable entries only
    const Tensor& cvalue(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    std::size_t count() const { return order_.size(); }

  private:
    struct Entry {
        Tensor value;
        bool trainable;
    };
    std::size_t index_of(const std::string& name) const;
    std::vector<std::string> order_;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

using GradMap = std::map<std::string, Tensor>;

struct Var {
    int i = -1;
    std::uint64_t tape_id = 0;
};

// Records one forward pass; backward() walks it once in reverse and
// accumulates gradients. Single-threaded by construction.
class Tape {
  public:
    Tape();

    Var leaf(Tensor value, bool needs_grad = false);
    Var param(ParamSet& ps, const std::string& name);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var tanh(Var a);
    Var atan(Var a);
    Var exp(Var a);
    Var log(Var a);
    Var leaky_relu(Var a, float slope);
    Var pow(Var a, float exponent);
    Var sum(Var a);
    Var mean(Var a);
    Var softmax_cross_entropy(Var logits, std::vector<int> labels);
    Var gaussian_log_density(Var x, double mean, double stddev);

    // Column restructuring on (batch, d) values. These are frozen linear
    // maps; gradients route through the corresponding inverse placement.
    Var slice_cols(Var x, std::size_t start, std::size_t len);
    Var concat_cols(Var a, Var b);
    Var permute_cols(Var x, std::vector<std::uint32_t> perm);

    // Convenience compositions of the primitives above.
    Var scale(Var a, double c);         // elementwise multiply by a constant
    Var add_const(Var a, double c);
    Var sub(Var a, Var b);
    Var affine(Var x, Var w, Var b);    // matmul(x, w) + b

    // Gradient of `loss` (a scalar produced under this tape) with respect to
    // every trainable entry of `ps`; parameters the pass never touched map to
    // exact zeros. A second backward without a new forward is an error.
    GradMap backward(Var loss, const ParamSet& ps);

    const Tensor& value(Var v) const;
    // Scalar value at the precision it was accumulated (64-bit for
    // reductions), for finite-difference work.
    double scalar_value(Var v) const;
    // Accumulated gradient of any node after backward; zeros if unreached.
    Tensor grad(Var v) const;

    std::size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        std::optional<double> v64;
        std::optional<Tensor> grad;
        bool needs_grad = false;
        std::string pname;  // non-empty for trainable parameter leaves
        std::function<void(Tape&)> back;
    };

    Var push(Node n);
    Var unary(Var a, Tensor value, float (*dfn)(float x, float y));
    const Node& node(Var v) const;
    void check_owned(Var v, const char* op) const;
    void accum(int idx, const Tensor& g);
    const Tensor* grad_ptr(int idx) const;

    std::vector<Node> nodes_;
    std::unordered_map<std::string, int> param_cache_;
    std::uint64_t id_;
    bool backward_done_ = false;
};

}  // namespace nfa

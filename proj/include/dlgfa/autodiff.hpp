#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dlgfa/tensor.hpp"

namespace dlgfa {

// Named parameters with same-shaped gradient slots.
class ParamStore {
public:
    void add(const std::string& name, Tensor value);
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    Tensor& param(const std::string& name);
    const Tensor& param(const std::string& name) const;
    Tensor& grad(const std::string& name);
    const Tensor& grad(const std::string& name) const;
    void zero_grad();
    std::vector<std::string> names() const;
    std::size_t size() const { return params_.size(); }

private:
    std::map<std::string, Tensor> params_;
    std::map<std::string, Tensor> grads_;
};

enum class ActKind { Relu, Tanh, Sigmoid, Exp };

// Reverse-mode tape over dense matrices. All node values are checked finite
// after every forward op. Rebuilt from scratch each forward pass.
class Tape {
public:
    using Var = int;

    // Leaf bound to a store parameter; backward accumulates into its grad slot.
    Var param(const ParamStore& store, const std::string& name);
    // Leaf without a store binding; its gradient is still available via grad().
    Var leaf(Tensor value);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    // y = x * w^T for x: m x k, w: n x k.
    Var matmul_nt(Var x, Var w);
    // Broadcast-add a 1 x n row to every row of an m x n matrix.
    Var add_row(Var x, Var bias);
    // Tile a 1 x n row into m x n.
    Var broadcast_rows(Var bias, std::size_t m);
    Var activation(Var a, ActKind kind);
    Var relu(Var a) { return activation(a, ActKind::Relu); }
    Var tanh(Var a) { return activation(a, ActKind::Tanh); }
    Var sigmoid(Var a) { return activation(a, ActKind::Sigmoid); }
    // exp with input clamped to [-30, 30].
    Var exp(Var a) { return activation(a, ActKind::Exp); }
    Var log(Var a);
    Var scale(Var a, double c);
    Var add_const(Var a, double c);
    Var concat_cols(Var a, Var b);
    Var sum_all(Var a);  // 1 x 1

    // y = w x + bias for x a (batch of) row vectors; see matmul_nt layout.
    Var affine(Var x, Var w, Var bias) { return add_row(matmul_nt(x, w), bias); }

    const Tensor& value(Var v) const;
    // Gradient of the last backward() loss w.r.t. node v.
    const Tensor& grad(Var v) const;
    std::size_t size() const { return nodes_.size(); }

    // Zeroes the store's gradient slots, then accumulates d loss / d param.
    void backward(Var loss, ParamStore& store);

private:
    enum class Op {
        Leaf, Add, Sub, Mul, Div, MatmulNT, AddRow, BroadcastRows,
        Relu, Tanh, Sigmoid, ExpClamp, Log, Scale, AddConst, ConcatCols, SumAll
    };
    struct Node {
        Op op;
        Var a = -1, b = -1;
        double c = 0.0;
        Tensor value;
        Tensor grad;
        std::string param;  // empty unless store-bound leaf
    };

    Var push(Node n);
    void check_var(Var v) const;

    std::vector<Node> nodes_;
    bool has_grads_ = false;
};

// Max over store parameters of |autodiff - central difference| relative error.
// loss_and_grad must evaluate the loss and populate the store's gradient slots
// (only the value is used at perturbed points). Two base evaluations must
// agree bit-exactly or the oracle refuses to run.
double finite_diff_check(const std::function<double(ParamStore&)>& loss_and_grad,
                         ParamStore& store, double eps);

}  // namespace dlgfa

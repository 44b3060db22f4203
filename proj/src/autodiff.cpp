#include "dlgfa/autodiff.hpp"

#include <cmath>

namespace dlgfa {

void ParamStore::add(const std::string& name, Tensor value) {
    if (params_.count(name)) throw ContractError("duplicate parameter name: " + name);
    grads_.emplace(name, Tensor::zeros(value.shape()));
    params_.emplace(name, std::move(value));
}

Tensor& ParamStore::param(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamStore::param(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

Tensor& ParamStore::grad(const std::string& name) {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamStore::grad(const std::string& name) const {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [name, g] : grads_) {
        std::fill(g.data().begin(), g.data().end(), 0.0);
    }
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, p] : params_) out.push_back(name);
    return out;
}

namespace {
constexpr double kExpClamp = 30.0;
}

Tape::Var Tape::push(Node n) {
    if (n.op != Op::Leaf && !n.value.all_finite()) {
        throw NumericError("non-finite value produced by forward op");
    }
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
}

void Tape::check_var(Var v) const {
    if (v < 0 || static_cast<std::size_t>(v) >= nodes_.size()) {
        throw ContractError("variable not on this tape");
    }
}

Tape::Var Tape::param(const ParamStore& store, const std::string& name) {
    Node n;
    n.op = Op::Leaf;
    n.value = store.param(name);
    n.param = name;
    return push(std::move(n));
}

Tape::Var Tape::leaf(Tensor value) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
    check_var(a); check_var(b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (!ta.same_shape(tb)) {
        throw DimensionError("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.value = ta;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += tb[i];
    return push(std::move(n));
}

Tape::Var Tape::sub(Var a, Var b) {
    check_var(a); check_var(b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (!ta.same_shape(tb)) {
        throw DimensionError("sub: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.value = ta;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= tb[i];
    return push(std::move(n));
}

Tape::Var Tape::mul(Var a, Var b) {
    check_var(a); check_var(b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (!ta.same_shape(tb)) {
        throw DimensionError("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.value = ta;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= tb[i];
    return push(std::move(n));
}

Tape::Var Tape::div(Var a, Var b) {
    check_var(a); check_var(b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (!ta.same_shape(tb)) {
        throw DimensionError("div: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::Div;
    n.a = a;
    n.b = b;
    n.value = ta;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] /= tb[i];
    return push(std::move(n));
}

Tape::Var Tape::matmul_nt(Var x, Var w) {
    check_var(x); check_var(w);
    const Tensor& tx = nodes_[x].value;
    const Tensor& tw = nodes_[w].value;
    const std::size_t m = tx.rows(), k = tx.cols();
    const std::size_t n = tw.rows();
    if (tw.cols() != k) {
        throw DimensionError("matmul: inner dims disagree " + tx.shape_str() + " vs " + tw.shape_str());
    }
    Node nd;
    nd.op = Op::MatmulNT;
    nd.a = x;
    nd.b = w;
    nd.value = Tensor::zeros({m, n});
    const double* px = tx.data().data();
    const double* pw = tw.data().data();
    double* py = nd.value.data().data();
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            double acc = 0.0;
            const double* xr = px + r * k;
            const double* wr = pw + c * k;
            for (std::size_t i = 0; i < k; ++i) acc += xr[i] * wr[i];
            py[r * n + c] = acc;
        }
    }
    return push(std::move(nd));
}

Tape::Var Tape::add_row(Var x, Var bias) {
    check_var(x); check_var(bias);
    const Tensor& tx = nodes_[x].value;
    const Tensor& tb = nodes_[bias].value;
    if (tb.rows() != 1 || tb.cols() != tx.cols()) {
        throw DimensionError("add_row: bias " + tb.shape_str() + " vs matrix " + tx.shape_str());
    }
    Node n;
    n.op = Op::AddRow;
    n.a = x;
    n.b = bias;
    n.value = tx;
    const std::size_t cols = tx.cols();
    for (std::size_t r = 0; r < tx.rows(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) n.value.data()[r * cols + c] += tb[c];
    }
    return push(std::move(n));
}

Tape::Var Tape::broadcast_rows(Var bias, std::size_t m) {
    check_var(bias);
    const Tensor& tb = nodes_[bias].value;
    if (tb.rows() != 1) throw DimensionError("broadcast_rows expects a row, got " + tb.shape_str());
    Node n;
    n.op = Op::BroadcastRows;
    n.a = bias;
    const std::size_t cols = tb.cols();
    n.value = Tensor::zeros({m, cols});
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < cols; ++c) n.value.data()[r * cols + c] = tb[c];
    }
    return push(std::move(n));
}

Tape::Var Tape::activation(Var a, ActKind kind) {
    check_var(a);
    Node n;
    n.a = a;
    n.value = nodes_[a].value;
    switch (kind) {
        case ActKind::Relu:
            n.op = Op::Relu;
            for (double& v : n.value.data()) v = v > 0.0 ? v : 0.0;
            break;
        case ActKind::Tanh:
            n.op = Op::Tanh;
            for (double& v : n.value.data()) v = std::tanh(v);
            break;
        case ActKind::Sigmoid:
            n.op = Op::Sigmoid;
            for (double& v : n.value.data()) v = 1.0 / (1.0 + std::exp(-v));
            break;
        case ActKind::Exp:
            n.op = Op::ExpClamp;
            for (double& v : n.value.data()) {
                double x = v < -kExpClamp ? -kExpClamp : (v > kExpClamp ? kExpClamp : v);
                v = std::exp(x);
            }
            break;
    }
    return push(std::move(n));
}

Tape::Var Tape::log(Var a) {
    check_var(a);
    Node n;
    n.op = Op::Log;
    n.a = a;
    n.value = nodes_[a].value;
    for (double& v : n.value.data()) v = std::log(v);
    return push(std::move(n));
}

Tape::Var Tape::scale(Var a, double c) {
    check_var(a);
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.c = c;
    n.value = nodes_[a].value;
    for (double& v : n.value.data()) v *= c;
    return push(std::move(n));
}

Tape::Var Tape::add_const(Var a, double c) {
    check_var(a);
    Node n;
    n.op = Op::AddConst;
    n.a = a;
    n.c = c;
    n.value = nodes_[a].value;
    for (double& v : n.value.data()) v += c;
    return push(std::move(n));
}

Tape::Var Tape::concat_cols(Var a, Var b) {
    check_var(a); check_var(b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (ta.rows() != tb.rows()) {
        throw DimensionError("concat_cols: row counts differ " + ta.shape_str() + " vs " + tb.shape_str());
    }
    const std::size_t m = ta.rows(), ca = ta.cols(), cb = tb.cols();
    Node n;
    n.op = Op::ConcatCols;
    n.a = a;
    n.b = b;
    n.value = Tensor::zeros({m, ca + cb});
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < ca; ++c) n.value.data()[r * (ca + cb) + c] = ta.data()[r * ca + c];
        for (std::size_t c = 0; c < cb; ++c) n.value.data()[r * (ca + cb) + ca + c] = tb.data()[r * cb + c];
    }
    return push(std::move(n));
}

Tape::Var Tape::sum_all(Var a) {
    check_var(a);
    Node n;
    n.op = Op::SumAll;
    n.a = a;
    double acc = 0.0;
    for (double v : nodes_[a].value.data()) acc += v;
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
}

const Tensor& Tape::value(Var v) const {
    check_var(v);
    return nodes_[v].value;
}

const Tensor& Tape::grad(Var v) const {
    check_var(v);
    if (!has_grads_) throw ContractError("grad() before backward()");
    return nodes_[v].grad;
}

void Tape::backward(Var loss, ParamStore& store) {
    check_var(loss);
    if (nodes_[loss].value.size() != 1) {
        throw ContractError("backward: loss must be a scalar tensor");
    }
    for (auto& n : nodes_) n.grad = Tensor::zeros(n.value.shape());
    nodes_[loss].grad[0] = 1.0;
    has_grads_ = true;

    for (Var v = loss; v >= 0; --v) {
        Node& n = nodes_[v];
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Add: {
                Tensor& ga = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                for (std::size_t i = 0; i < g.size(); ++i) { ga[i] += g[i]; gb[i] += g[i]; }
                break;
            }
            case Op::Sub: {
                Tensor& ga = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                for (std::size_t i = 0; i < g.size(); ++i) { ga[i] += g[i]; gb[i] -= g[i]; }
                break;
            }
            case Op::Mul: {
                Tensor& ga = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                const Tensor& va = nodes_[n.a].value;
                const Tensor& vb = nodes_[n.b].value;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i] * vb[i];
                    gb[i] += g[i] * va[i];
                }
                break;
            }
            case Op::Div: {
                Tensor& ga = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                const Tensor& va = nodes_[n.a].value;
                const Tensor& vb = nodes_[n.b].value;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i] / vb[i];
                    gb[i] -= g[i] * va[i] / (vb[i] * vb[i]);
                }
                break;
            }
            case Op::MatmulNT: {
                const Tensor& vx = nodes_[n.a].value;  // m x k
                const Tensor& vw = nodes_[n.b].value;  // n x k
                Tensor& gx = nodes_[n.a].grad;
                Tensor& gw = nodes_[n.b].grad;
                const std::size_t m = vx.rows(), k = vx.cols(), nc = vw.rows();
                // gx += g * w ; gw += g^T * x
                for (std::size_t r = 0; r < m; ++r) {
                    for (std::size_t c = 0; c < nc; ++c) {
                        const double gv = g.data()[r * nc + c];
                        if (gv == 0.0) continue;
                        const double* wr = vw.data().data() + c * k;
                        const double* xr = vx.data().data() + r * k;
                        double* gxr = gx.data().data() + r * k;
                        double* gwr = gw.data().data() + c * k;
                        for (std::size_t i = 0; i < k; ++i) {
                            gxr[i] += gv * wr[i];
                            gwr[i] += gv * xr[i];
                        }
                    }
                }
                break;
            }
            case Op::AddRow: {
                Tensor& gx = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                const std::size_t cols = n.value.cols();
                for (std::size_t r = 0; r < n.value.rows(); ++r) {
                    for (std::size_t c = 0; c < cols; ++c) {
                        gx.data()[r * cols + c] += g.data()[r * cols + c];
                        gb[c] += g.data()[r * cols + c];
                    }
                }
                break;
            }
            case Op::BroadcastRows: {
                Tensor& gb = nodes_[n.a].grad;
                const std::size_t cols = n.value.cols();
                for (std::size_t r = 0; r < n.value.rows(); ++r) {
                    for (std::size_t c = 0; c < cols; ++c) gb[c] += g.data()[r * cols + c];
                }
                break;
            }
            case Op::Relu: {
                Tensor& ga = nodes_[n.a].grad;
                const Tensor& va = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (va[i] > 0.0) ga[i] += g[i];
                }
                break;
            }
            case Op::Tanh: {
                Tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
                }
                break;
            }
            case Op::Sigmoid: {
                Tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
                }
                break;
            }
            case Op::ExpClamp: {
                Tensor& ga = nodes_[n.a].grad;
                const Tensor& va = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (va[i] > -kExpClamp && va[i] < kExpClamp) ga[i] += g[i] * n.value[i];
                }
                break;
            }
            case Op::Log: {
                Tensor& ga = nodes_[n.a].grad;
                const Tensor& va = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / va[i];
                break;
            }
            case Op::Scale: {
                Tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.c;
                break;
            }
            case Op::AddConst: {
                Tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                break;
            }
            case Op::ConcatCols: {
                Tensor& ga = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                const std::size_t ca = nodes_[n.a].value.cols();
                const std::size_t cb = nodes_[n.b].value.cols();
                for (std::size_t r = 0; r < n.value.rows(); ++r) {
                    for (std::size_t c = 0; c < ca; ++c) ga.data()[r * ca + c] += g.data()[r * (ca + cb) + c];
                    for (std::size_t c = 0; c < cb; ++c) gb.data()[r * cb + c] += g.data()[r * (ca + cb) + ca + c];
                }
                break;
            }
            case Op::SumAll: {
                Tensor& ga = nodes_[n.a].grad;
                const double gv = g[0];
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
                break;
            }
        }
    }

    store.zero_grad();
    for (const auto& n : nodes_) {
        if (n.op == Op::Leaf && !n.param.empty() && store.has(n.param)) {
            Tensor& slot = store.grad(n.param);
            for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += n.grad[i];
        }
    }
}

double finite_diff_check(const std::function<double(ParamStore&)>& loss_and_grad,
                         ParamStore& store, double eps) {
    if (eps <= 0.0) throw ContractError("finite_diff_check: eps must be positive");
    const double l1 = loss_and_grad(store);
    std::map<std::string, Tensor> autodiff;
    for (const auto& name : store.names()) autodiff.emplace(name, store.grad(name));
    const double l2 = loss_and_grad(store);
    if (l1 != l2) throw ContractError("finite_diff_check: loss function is not deterministic");

    double max_rel = 0.0;
    for (const auto& name : store.names()) {
        Tensor& p = store.param(name);
        const Tensor& g = autodiff.at(name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double orig = p[i];
            p[i] = orig + eps;
            const double lp = loss_and_grad(store);
            p[i] = orig - eps;
            const double lm = loss_and_grad(store);
            p[i] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double rel = std::abs(g[i] - fd) / (std::abs(fd) + 1e-8);
            if (rel > max_rel) max_rel = rel;
        }
    }
    // restore base-point gradients
    loss_and_grad(store);
    return max_rel;
}

}  // namespace dlgfa

#include "glass/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace glass::ad {

double sorted_sum(std::vector<double>& scratch) {
    std::sort(scratch.begin(), scratch.end());
    double s = 0.0;
    for (double v : scratch) s += v;
    return s;
}

Var Tape::make(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Var Tape::input(Tensor value) {
    return make(std::move(value), false);
}

Var Tape::param(Tensor value, std::string name) {
    Var v = make(std::move(value), true);
    nodes_[static_cast<size_t>(v.id)].name = std::move(name);
    return v;
}

const Tensor& Tape::val(Var v) const {
    return nodes_.at(static_cast<size_t>(v.id)).value;
}

const Tensor& Tape::grad(Var v) const {
    const Node& n = nodes_.at(static_cast<size_t>(v.id));
    if (!n.grad_alloc) throw std::logic_error("gradient not computed for this var");
    return n.grad;
}

Tensor& Tape::grad_buf(int32_t id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_alloc) {
        n.grad = Tensor(n.value.shape);
        n.grad_alloc = true;
    }
    return n.grad;
}

void Tape::accum(int32_t id, const double* g, int64_t n) {
    Node& node = nodes_[static_cast<size_t>(id)];
    if (!node.requires_grad) return;
    Tensor& buf = grad_buf(id);
    for (int64_t i = 0; i < n; ++i) buf.data[static_cast<size_t>(i)] += g[i];
}

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                                    shape_str(b.shape));
}

static void check_2d(const Tensor& a, const char* op) {
    if (a.rank() != 2) throw std::invalid_argument(std::string(op) + ": expected 2-D tensor, got " + shape_str(a.shape));
}

// ------------------------------------------------------------- elementwise --

Var Tape::add(Var a, Var b) {
    check_same_shape(val(a), val(b), "add");
    Tensor out = val(a);
    const Tensor& tb = val(b);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];
    bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, ib = b.id, io = o.id;
        nodes_[io].back = [ia, ib, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            t.accum(ia, g.data.data(), g.numel());
            t.accum(ib, g.data.data(), g.numel());
        };
    }
    return o;
}

Var Tape::sub(Var a, Var b) {
    check_same_shape(val(a), val(b), "sub");
    Tensor out = val(a);
    const Tensor& tb = val(b);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= tb.data[i];
    bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, ib = b.id, io = o.id;
        nodes_[io].back = [ia, ib, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            t.accum(ia, g.data.data(), g.numel());
            if (t.nodes_[ib].requires_grad) {
                Tensor& gb = t.grad_buf(ib);
                for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= g.data[i];
            }
        };
    }
    return o;
}

Var Tape::mul(Var a, Var b) {
    check_same_shape(val(a), val(b), "mul");
    Tensor out = val(a);
    const Tensor& tb = val(b);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= tb.data[i];
    bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, ib = b.id, io = o.id;
        nodes_[io].back = [ia, ib, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            if (t.nodes_[ia].requires_grad) {
                Tensor& ga = t.grad_buf(ia);
                const Tensor& vb = t.nodes_[ib].value;
                for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] * vb.data[i];
            }
            if (t.nodes_[ib].requires_grad) {
                Tensor& gb = t.grad_buf(ib);
                const Tensor& va = t.nodes_[ia].value;
                for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += g.data[i] * va.data[i];
            }
        };
    }
    return o;
}

Var Tape::scale(Var a, double s) {
    Tensor out = val(a);
    for (double& v : out.data) v *= s;
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io, s](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] * s;
        };
    }
    return o;
}

Var Tape::add_scalar(Var a, double s) {
    Tensor out = val(a);
    for (double& v : out.data) v += s;
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            t.accum(ia, g.data.data(), g.numel());
        };
    }
    return o;
}

Var Tape::exp(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::exp(v);
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& y = t.nodes_[io].value;
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] * y.data[i];
        };
    }
    return o;
}

Var Tape::log(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::log(v);
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& x = t.nodes_[ia].value;
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] / x.data[i];
        };
    }
    return o;
}

Var Tape::sqrt(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::sqrt(v);
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& y = t.nodes_[io].value;
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] * 0.5 / y.data[i];
        };
    }
    return o;
}

Var Tape::square(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = v * v;
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& x = t.nodes_[ia].value;
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] * 2.0 * x.data[i];
        };
    }
    return o;
}

Var Tape::sigmoid(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& y = t.nodes_[io].value;
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
        };
    }
    return o;
}

Var Tape::tanh(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::tanh(v);
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& y = t.nodes_[io].value;
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
        };
    }
    return o;
}

Var Tape::silu(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = v / (1.0 + std::exp(-v));
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& x = t.nodes_[ia].value;
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < ga.data.size(); ++i) {
                double s = 1.0 / (1.0 + std::exp(-x.data[i]));
                ga.data[i] += g.data[i] * s * (1.0 + x.data[i] * (1.0 - s));
            }
        };
    }
    return o;
}

Var Tape::relu(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& x = t.nodes_[ia].value;
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < ga.data.size(); ++i)
                if (x.data[i] > 0.0) ga.data[i] += g.data[i];
        };
    }
    return o;
}

Var Tape::reciprocal(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = 1.0 / v;
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& y = t.nodes_[io].value;
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] -= g.data[i] * y.data[i] * y.data[i];
        };
    }
    return o;
}

Var Tape::clamp(Var a, double lo, double hi) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::min(std::max(v, lo), hi);
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io, lo, hi](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& x = t.nodes_[ia].value;
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < ga.data.size(); ++i)
                if (x.data[i] >= lo && x.data[i] <= hi) ga.data[i] += g.data[i];
        };
    }
    return o;
}

Var Tape::eps_guard(Var a, double threshold, double eps) {
    Tensor out = val(a);
    for (double& v : out.data)
        if (v < threshold) v += eps;
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            t.accum(ia, g.data.data(), g.numel());
        };
    }
    return o;
}

// ------------------------------------------------------------------- shape --

Var Tape::reshape(Var a, Shape s) {
    Tensor out = val(a).reshaped(std::move(s));
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            t.accum(ia, g.data.data(), g.numel());
        };
    }
    return o;
}

Var Tape::transpose(Var a) {
    check_2d(val(a), "transpose");
    const Tensor& x = val(a);
    int64_t m = x.shape[0], n = x.shape[1];
    Tensor out{Shape{n, m}};
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.at(j, i) = x.at(i, j);
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io, m, n](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            Tensor& ga = t.grad_buf(ia);
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j) ga.at(i, j) += g.at(j, i);
        };
    }
    return o;
}

Var Tape::slice_rows(Var a, int64_t r0, int64_t r1) {
    check_2d(val(a), "slice_rows");
    const Tensor& x = val(a);
    int64_t n = x.shape[1];
    if (r0 < 0 || r1 > x.shape[0] || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
    Tensor out{Shape{r1 - r0, n}};
    std::copy(x.data.begin() + r0 * n, x.data.begin() + r1 * n, out.data.begin());
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io, r0, n](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            Tensor& ga = t.grad_buf(ia);
            for (int64_t i = 0; i < g.numel(); ++i) ga.data[static_cast<size_t>(r0 * n + i)] += g.data[static_cast<size_t>(i)];
        };
    }
    return o;
}

Var Tape::slice_cols(Var a, int64_t c0, int64_t c1) {
    check_2d(val(a), "slice_cols");
    const Tensor& x = val(a);
    int64_t m = x.shape[0], n = x.shape[1];
    if (c0 < 0 || c1 > n || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
    int64_t w = c1 - c0;
    Tensor out{Shape{m, w}};
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < w; ++j) out.at(i, j) = x.at(i, c0 + j);
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io, c0, w, m](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            Tensor& ga = t.grad_buf(ia);
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < w; ++j) ga.at(i, c0 + j) += g.at(i, j);
        };
    }
    return o;
}

Var Tape::concat_channels(Var a, Var b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    if (x.rank() != 3 || y.rank() != 3 || x.shape[1] != y.shape[1] || x.shape[2] != y.shape[2])
        throw std::invalid_argument("concat_channels: incompatible shapes");
    Tensor out{Shape{x.shape[0] + y.shape[0], x.shape[1], x.shape[2]}};
    std::copy(x.data.begin(), x.data.end(), out.data.begin());
    std::copy(y.data.begin(), y.data.end(), out.data.begin() + x.numel());
    bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, ib = b.id, io = o.id;
        int64_t na = x.numel();
        nodes_[io].back = [ia, ib, io, na](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            t.accum(ia, g.data.data(), na);
            t.accum(ib, g.data.data() + na, g.numel() - na);
        };
    }
    return o;
}

// ------------------------------------------------------------------ matrix --

Var Tape::matmul(Var a, Var b) {
    check_2d(val(a), "matmul");
    check_2d(val(b), "matmul");
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    if (x.shape[1] != y.shape[0])
        throw std::invalid_argument("matmul: inner dims " + shape_str(x.shape) + " x " + shape_str(y.shape));
    int64_t m = x.shape[0], k = x.shape[1], n = y.shape[1];
    Tensor out{Shape{m, n}};
    linalg::matmul(x.data.data(), y.data.data(), out.data.data(), m, k, n);
    bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, ib = b.id, io = o.id;
        nodes_[io].back = [ia, ib, io, m, k, n](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            if (t.nodes_[ia].requires_grad) {
                Tensor& ga = t.grad_buf(ia);
                linalg::matmul_a_bt(g.data.data(), t.nodes_[ib].value.data.data(), ga.data.data(), m, n, k);
            }
            if (t.nodes_[ib].requires_grad) {
                Tensor& gb = t.grad_buf(ib);
                linalg::matmul_at_b(t.nodes_[ia].value.data.data(), g.data.data(), gb.data.data(), m, k, n);
            }
        };
    }
    return o;
}

Var Tape::add_rowvec(Var a, Var v) {
    check_2d(val(a), "add_rowvec");
    const Tensor& x = val(a);
    const Tensor& r = val(v);
    if (r.rank() != 1 || r.shape[0] != x.shape[1]) throw std::invalid_argument("add_rowvec: vector size mismatch");
    int64_t m = x.shape[0], n = x.shape[1];
    Tensor out = x;
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.at(i, j) += r.at(j);
    bool rg = nodes_[a.id].requires_grad || nodes_[v.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, iv = v.id, io = o.id;
        nodes_[io].back = [ia, iv, io, m, n](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            t.accum(ia, g.data.data(), g.numel());
            if (t.nodes_[iv].requires_grad) {
                Tensor& gv = t.grad_buf(iv);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) gv.at(j) += g.at(i, j);
            }
        };
    }
    return o;
}

Var Tape::mul_rowvec(Var a, Var v) {
    check_2d(val(a), "mul_rowvec");
    const Tensor& x = val(a);
    const Tensor& r = val(v);
    if (r.rank() != 1 || r.shape[0] != x.shape[1]) throw std::invalid_argument("mul_rowvec: vector size mismatch");
    int64_t m = x.shape[0], n = x.shape[1];
    Tensor out = x;
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.at(i, j) *= r.at(j);
    bool rg = nodes_[a.id].requires_grad || nodes_[v.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, iv = v.id, io = o.id;
        nodes_[io].back = [ia, iv, io, m, n](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            if (t.nodes_[ia].requires_grad) {
                Tensor& ga = t.grad_buf(ia);
                const Tensor& r = t.nodes_[iv].value;
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) ga.at(i, j) += g.at(i, j) * r.at(j);
            }
            if (t.nodes_[iv].requires_grad) {
                Tensor& gv = t.grad_buf(iv);
                const Tensor& x = t.nodes_[ia].value;
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) gv.at(j) += g.at(i, j) * x.at(i, j);
            }
        };
    }
    return o;
}

Var Tape::rowwise_scale(Var a, Var s) {
    check_2d(val(a), "rowwise_scale");
    check_2d(val(s), "rowwise_scale");
    const Tensor& x = val(a);
    const Tensor& r = val(s);
    if (r.shape[0] != 1 || r.shape[1] != x.shape[1]) throw std::invalid_argument("rowwise_scale: scaler must be (1,N)");
    int64_t m = x.shape[0], n = x.shape[1];
    Tensor out = x;
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.at(i, j) *= r.at(0, j);
    bool rg = nodes_[a.id].requires_grad || nodes_[s.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, is = s.id, io = o.id;
        nodes_[io].back = [ia, is, io, m, n](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            if (t.nodes_[ia].requires_grad) {
                Tensor& ga = t.grad_buf(ia);
                const Tensor& r = t.nodes_[is].value;
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) ga.at(i, j) += g.at(i, j) * r.at(0, j);
            }
            if (t.nodes_[is].requires_grad) {
                Tensor& gs = t.grad_buf(is);
                const Tensor& x = t.nodes_[ia].value;
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) gs.at(0, j) += g.at(i, j) * x.at(i, j);
            }
        };
    }
    return o;
}

Var Tape::sum(Var a) {
    const Tensor& x = val(a);
    double s = 0.0;
    for (double v : x.data) s += v;
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(Tensor::scalar(s), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io](Tape& t) {
            double g = t.nodes_[io].grad.data[0];
            Tensor& ga = t.grad_buf(ia);
            for (double& v : ga.data) v += g;
        };
    }
    return o;
}

Var Tape::mean(Var a) {
    const Tensor& x = val(a);
    double s = 0.0;
    for (double v : x.data) s += v;
    double inv = 1.0 / static_cast<double>(x.numel());
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(Tensor::scalar(s * inv), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io, inv](Tape& t) {
            double g = t.nodes_[io].grad.data[0] * inv;
            Tensor& ga = t.grad_buf(ia);
            for (double& v : ga.data) v += g;
        };
    }
    return o;
}

Var Tape::sum_rows(Var a) {
    check_2d(val(a), "sum_rows");
    const Tensor& x = val(a);
    int64_t m = x.shape[0], n = x.shape[1];
    Tensor out{Shape{n}};
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.at(j) += x.at(i, j);
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io, m, n](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            Tensor& ga = t.grad_buf(ia);
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j) ga.at(i, j) += g.at(j);
        };
    }
    return o;
}

Var Tape::sum_cols(Var a) {
    check_2d(val(a), "sum_cols");
    const Tensor& x = val(a);
    int64_t m = x.shape[0], n = x.shape[1];
    Tensor out{Shape{m}};
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.at(i) += x.at(i, j);
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io, m, n](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            Tensor& ga = t.grad_buf(ia);
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j) ga.at(i, j) += g.at(i);
        };
    }
    return o;
}

Var Tape::softmax_rows(Var a) {
    check_2d(val(a), "softmax_rows");
    const Tensor& x = val(a);
    int64_t m = x.shape[0], n = x.shape[1];
    Tensor out{Shape{m, n}};
    std::vector<double> scratch(static_cast<size_t>(n));
    for (int64_t i = 0; i < m; ++i) {
        double mx = x.at(i, 0);
        for (int64_t j = 1; j < n; ++j) mx = std::max(mx, x.at(i, j));
        for (int64_t j = 0; j < n; ++j) {
            double e = std::exp(x.at(i, j) - mx);
            out.at(i, j) = e;
            scratch[static_cast<size_t>(j)] = e;
        }
        double denom = sorted_sum(scratch);
        for (int64_t j = 0; j < n; ++j) out.at(i, j) /= denom;
    }
    bool rg = nodes_[a.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ia = a.id, io = o.id;
        nodes_[io].back = [ia, io, m, n](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& y = t.nodes_[io].value;
            Tensor& ga = t.grad_buf(ia);
            for (int64_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (int64_t j = 0; j < n; ++j) dot += g.at(i, j) * y.at(i, j);
                for (int64_t j = 0; j < n; ++j) ga.at(i, j) += (g.at(i, j) - dot) * y.at(i, j);
            }
        };
    }
    return o;
}

Var Tape::layer_norm_rows(Var xv, Var gain, Var bias, double eps) {
    check_2d(val(xv), "layer_norm_rows");
    const Tensor& x = val(xv);
    const Tensor& gm = val(gain);
    const Tensor& bt = val(bias);
    int64_t m = x.shape[0], n = x.shape[1];
    if (gm.rank() != 1 || gm.shape[0] != n || bt.rank() != 1 || bt.shape[0] != n)
        throw std::invalid_argument("layer_norm_rows: gain/bias size mismatch");
    Tensor out{Shape{m, n}};
    Tensor xhat{Shape{m, n}};
    Tensor inv_std{Shape{m}};
    for (int64_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (int64_t j = 0; j < n; ++j) mu += x.at(i, j);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            double d = x.at(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double is = 1.0 / std::sqrt(var + eps);
        inv_std.at(i) = is;
        for (int64_t j = 0; j < n; ++j) {
            double xh = (x.at(i, j) - mu) * is;
            xhat.at(i, j) = xh;
            out.at(i, j) = gm.at(j) * xh + bt.at(j);
        }
    }
    bool rg = nodes_[xv.id].requires_grad || nodes_[gain.id].requires_grad || nodes_[bias.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ix = xv.id, ig = gain.id, ib = bias.id, io = o.id;
        auto xh = std::make_shared<Tensor>(std::move(xhat));
        auto istd = std::make_shared<Tensor>(std::move(inv_std));
        nodes_[io].back = [ix, ig, ib, io, m, n, xh, istd](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            const Tensor& gm = t.nodes_[ig].value;
            if (t.nodes_[ig].requires_grad) {
                Tensor& gg = t.grad_buf(ig);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) gg.at(j) += g.at(i, j) * xh->at(i, j);
            }
            if (t.nodes_[ib].requires_grad) {
                Tensor& gb = t.grad_buf(ib);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) gb.at(j) += g.at(i, j);
            }
            if (t.nodes_[ix].requires_grad) {
                Tensor& gx = t.grad_buf(ix);
                for (int64_t i = 0; i < m; ++i) {
                    double mean_gy = 0.0, mean_gyxh = 0.0;
                    for (int64_t j = 0; j < n; ++j) {
                        double gy = g.at(i, j) * gm.at(j);
                        mean_gy += gy;
                        mean_gyxh += gy * xh->at(i, j);
                    }
                    mean_gy /= static_cast<double>(n);
                    mean_gyxh /= static_cast<double>(n);
                    for (int64_t j = 0; j < n; ++j) {
                        double gy = g.at(i, j) * gm.at(j);
                        gx.at(i, j) += istd->at(i) * (gy - mean_gy - xh->at(i, j) * mean_gyxh);
                    }
                }
            }
        };
    }
    return o;
}

// -------------------------------------------------------------------- nets --

Var Tape::conv2d(Var xv, Var wv, Var bv, int stride, int pad) {
    const Tensor& x = val(xv);
    const Tensor& w = val(wv);
    const Tensor& b = val(bv);
    if (x.rank() != 3 || w.rank() != 4) throw std::invalid_argument("conv2d: x must be (C,H,W), w (OC,IC,KH,KW)");
    int64_t ic = x.shape[0], h = x.shape[1], wd = x.shape[2];
    int64_t oc = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    if (w.shape[1] != ic) throw std::invalid_argument("conv2d: channel mismatch");
    if (b.rank() != 1 || b.shape[0] != oc) throw std::invalid_argument("conv2d: bias size mismatch");
    int64_t oh = (h + 2 * pad - kh) / stride + 1;
    int64_t ow = (wd + 2 * pad - kw) / stride + 1;
    int64_t patch = ic * kh * kw;

    Tensor cols{Shape{patch, oh * ow}};
    for (int64_t c = 0; c < ic; ++c)
        for (int64_t ky = 0; ky < kh; ++ky)
            for (int64_t kx = 0; kx < kw; ++kx) {
                int64_t prow = (c * kh + ky) * kw + kx;
                for (int64_t oy = 0; oy < oh; ++oy) {
                    int64_t sy = oy * stride + ky - pad;
                    for (int64_t ox = 0; ox < ow; ++ox) {
                        int64_t sx = ox * stride + kx - pad;
                        double v = 0.0;
                        if (sy >= 0 && sy < h && sx >= 0 && sx < wd) v = x.at(c, sy, sx);
                        cols.at(prow, oy * ow + ox) = v;
                    }
                }
            }

    Tensor out{Shape{oc, oh, ow}};
    linalg::matmul(w.data.data(), cols.data.data(), out.data.data(), oc, patch, oh * ow);
    for (int64_t c = 0; c < oc; ++c)
        for (int64_t p = 0; p < oh * ow; ++p) out.data[static_cast<size_t>(c * oh * ow + p)] += b.at(c);

    bool rg = nodes_[xv.id].requires_grad || nodes_[wv.id].requires_grad || nodes_[bv.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ix = xv.id, iw = wv.id, ib = bv.id, io = o.id;
        auto saved_cols = std::make_shared<Tensor>(std::move(cols));
        int64_t s = stride, p = pad;
        nodes_[io].back = [ix, iw, ib, io, saved_cols, ic, h, wd, oc, kh, kw, oh, ow, patch, s, p](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;  // (OC, OH, OW)
            if (t.nodes_[ib].requires_grad) {
                Tensor& gb = t.grad_buf(ib);
                for (int64_t c = 0; c < oc; ++c) {
                    double acc = 0.0;
                    for (int64_t q = 0; q < oh * ow; ++q) acc += g.data[static_cast<size_t>(c * oh * ow + q)];
                    gb.at(c) += acc;
                }
            }
            if (t.nodes_[iw].requires_grad) {
                Tensor& gw = t.grad_buf(iw);
                // dW (OC, patch) += g (OC, P) * cols (patch, P)^T
                linalg::matmul_a_bt(g.data.data(), saved_cols->data.data(), gw.data.data(), oc, oh * ow, patch);
            }
            if (t.nodes_[ix].requires_grad) {
                Tensor dcols{Shape{patch, oh * ow}};
                // dcols = W^T (patch, OC) * g (OC, P)
                linalg::matmul_at_b(t.nodes_[iw].value.data.data(), g.data.data(), dcols.data.data(), oc, patch,
                                    oh * ow);
                Tensor& gx = t.grad_buf(ix);
                for (int64_t c = 0; c < ic; ++c)
                    for (int64_t ky = 0; ky < kh; ++ky)
                        for (int64_t kx = 0; kx < kw; ++kx) {
                            int64_t prow = (c * kh + ky) * kw + kx;
                            for (int64_t oy = 0; oy < oh; ++oy) {
                                int64_t sy = oy * s + ky - p;
                                if (sy < 0 || sy >= h) continue;
                                for (int64_t ox = 0; ox < ow; ++ox) {
                                    int64_t sx = ox * s + kx - p;
                                    if (sx < 0 || sx >= wd) continue;
                                    gx.at(c, sy, sx) += dcols.at(prow, oy * ow + ox);
                                }
                            }
                        }
            }
        };
    }
    return o;
}

Var Tape::upsample_nearest2x(Var xv) {
    const Tensor& x = val(xv);
    if (x.rank() != 3) throw std::invalid_argument("upsample_nearest2x: expected (C,H,W)");
    int64_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
    Tensor out{Shape{c, h * 2, w * 2}};
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t y = 0; y < h * 2; ++y)
            for (int64_t z = 0; z < w * 2; ++z) out.at(ch, y, z) = x.at(ch, y / 2, z / 2);
    bool rg = nodes_[xv.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ix = xv.id, io = o.id;
        nodes_[io].back = [ix, io, c, h, w](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            Tensor& gx = t.grad_buf(ix);
            for (int64_t ch = 0; ch < c; ++ch)
                for (int64_t y = 0; y < h * 2; ++y)
                    for (int64_t z = 0; z < w * 2; ++z) gx.at(ch, y / 2, z / 2) += g.at(ch, y, z);
        };
    }
    return o;
}

// Shared bilinear weight computation: half-pixel centers, clamped to edges.
// Each output pixel mixes at most four inputs with convex weights, so
// pixelwise sums across channels are preserved.
struct BilinearTap {
    int64_t lo, hi;
    double w_hi;
};

static BilinearTap bilinear_tap(int64_t out_i, int64_t in_size, int64_t out_size) {
    double src = (static_cast<double>(out_i) + 0.5) * static_cast<double>(in_size) / static_cast<double>(out_size) - 0.5;
    if (src < 0.0) src = 0.0;
    double max_src = static_cast<double>(in_size - 1);
    if (src > max_src) src = max_src;
    int64_t lo = static_cast<int64_t>(src);
    int64_t hi = std::min(lo + 1, in_size - 1);
    return BilinearTap{lo, hi, src - static_cast<double>(lo)};
}

Var Tape::bilinear_resize(Var xv, int64_t oh, int64_t ow) {
    const Tensor& x = val(xv);
    if (x.rank() != 3) throw std::invalid_argument("bilinear_resize: expected (C,H,W)");
    int64_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
    if (oh == h && ow == w) {
        // identity resize must be bit-exact
        Tensor out = x;
        bool rg = nodes_[xv.id].requires_grad;
        Var o = make(std::move(out), rg);
        if (rg) {
            int32_t ix = xv.id, io = o.id;
            nodes_[io].back = [ix, io](Tape& t) {
                const Tensor& g = t.nodes_[io].grad;
                t.accum(ix, g.data.data(), g.numel());
            };
        }
        return o;
    }
    std::vector<BilinearTap> ty(static_cast<size_t>(oh)), tx(static_cast<size_t>(ow));
    for (int64_t i = 0; i < oh; ++i) ty[static_cast<size_t>(i)] = bilinear_tap(i, h, oh);
    for (int64_t i = 0; i < ow; ++i) tx[static_cast<size_t>(i)] = bilinear_tap(i, w, ow);
    Tensor out{Shape{c, oh, ow}};
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t y = 0; y < oh; ++y) {
            const auto& by = ty[static_cast<size_t>(y)];
            for (int64_t z = 0; z < ow; ++z) {
                const auto& bx = tx[static_cast<size_t>(z)];
                double v00 = x.at(ch, by.lo, bx.lo), v01 = x.at(ch, by.lo, bx.hi);
                double v10 = x.at(ch, by.hi, bx.lo), v11 = x.at(ch, by.hi, bx.hi);
                double top = v00 * (1.0 - bx.w_hi) + v01 * bx.w_hi;
                double bot = v10 * (1.0 - bx.w_hi) + v11 * bx.w_hi;
                out.at(ch, y, z) = top * (1.0 - by.w_hi) + bot * by.w_hi;
            }
        }
    bool rg = nodes_[xv.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ix = xv.id, io = o.id;
        auto tys = std::make_shared<std::vector<BilinearTap>>(std::move(ty));
        auto txs = std::make_shared<std::vector<BilinearTap>>(std::move(tx));
        nodes_[io].back = [ix, io, c, oh, ow, tys, txs](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            Tensor& gx = t.grad_buf(ix);
            for (int64_t ch = 0; ch < c; ++ch)
                for (int64_t y = 0; y < oh; ++y) {
                    const auto& by = (*tys)[static_cast<size_t>(y)];
                    for (int64_t z = 0; z < ow; ++z) {
                        const auto& bx = (*txs)[static_cast<size_t>(z)];
                        double gv = g.at(ch, y, z);
                        gx.at(ch, by.lo, bx.lo) += gv * (1.0 - by.w_hi) * (1.0 - bx.w_hi);
                        gx.at(ch, by.lo, bx.hi) += gv * (1.0 - by.w_hi) * bx.w_hi;
                        gx.at(ch, by.hi, bx.lo) += gv * by.w_hi * (1.0 - bx.w_hi);
                        gx.at(ch, by.hi, bx.hi) += gv * by.w_hi * bx.w_hi;
                    }
                }
        };
    }
    return o;
}

Var Tape::add_channel_bias(Var xv, Var bv) {
    const Tensor& x = val(xv);
    const Tensor& b = val(bv);
    if (x.rank() != 3 || b.rank() != 1 || b.shape[0] != x.shape[0])
        throw std::invalid_argument("add_channel_bias: expected (C,H,W) + (C)");
    int64_t c = x.shape[0], hw = x.shape[1] * x.shape[2];
    Tensor out = x;
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t p = 0; p < hw; ++p) out.data[static_cast<size_t>(ch * hw + p)] += b.at(ch);
    bool rg = nodes_[xv.id].requires_grad || nodes_[bv.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t ix = xv.id, ib = bv.id, io = o.id;
        nodes_[io].back = [ix, ib, io, c, hw](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            t.accum(ix, g.data.data(), g.numel());
            if (t.nodes_[ib].requires_grad) {
                Tensor& gb = t.grad_buf(ib);
                for (int64_t ch = 0; ch < c; ++ch) {
                    double acc = 0.0;
                    for (int64_t p = 0; p < hw; ++p) acc += g.data[static_cast<size_t>(ch * hw + p)];
                    gb.at(ch) += acc;
                }
            }
        };
    }
    return o;
}

Var Tape::gather_rows(Var table, std::vector<int64_t> idx) {
    check_2d(val(table), "gather_rows");
    const Tensor& x = val(table);
    int64_t n = x.shape[1];
    Tensor out{Shape{static_cast<int64_t>(idx.size()), n}};
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= x.shape[0]) throw std::invalid_argument("gather_rows: index out of range");
        std::copy(x.data.begin() + idx[i] * n, x.data.begin() + (idx[i] + 1) * n, out.data.begin() + static_cast<int64_t>(i) * n);
    }
    bool rg = nodes_[table.id].requires_grad;
    Var o = make(std::move(out), rg);
    if (rg) {
        int32_t it = table.id, io = o.id;
        auto ids = std::make_shared<std::vector<int64_t>>(std::move(idx));
        nodes_[io].back = [it, io, ids, n](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            Tensor& gt = t.grad_buf(it);
            for (size_t i = 0; i < ids->size(); ++i)
                for (int64_t j = 0; j < n; ++j)
                    gt.at((*ids)[i], j) += g.at(static_cast<int64_t>(i), j);
        };
    }
    return o;
}

Var Tape::broadcast_slot_grid(Var slots, Var pos) {
    check_2d(val(slots), "broadcast_slot_grid");
    check_2d(val(pos), "broadcast_slot_grid");
    const Tensor& s = val(slots);
    const Tensor& p = val(pos);
    if (s.shape[1] != p.shape[1]) throw std::invalid_argument("broadcast_slot_grid: dim mismatch");
    int64_t o_cnt = s.shape[0], g_cnt = p.shape[0], d = s.shape[1];
    Tensor out{Shape{o_cnt * g_cnt, d}};
    for (int64_t o = 0; o < o_cnt; ++o)
        for (int64_t g = 0; g < g_cnt; ++g)
            for (int64_t j = 0; j < d; ++j) out.at(o * g_cnt + g, j) = s.at(o, j) + p.at(g, j);
    bool rg = nodes_[slots.id].requires_grad || nodes_[pos.id].requires_grad;
    Var ov = make(std::move(out), rg);
    if (rg) {
        int32_t is = slots.id, ip = pos.id, io = ov.id;
        nodes_[io].back = [is, ip, io, o_cnt, g_cnt, d](Tape& t) {
            const Tensor& g = t.nodes_[io].grad;
            if (t.nodes_[is].requires_grad) {
                Tensor& gs = t.grad_buf(is);
                for (int64_t o = 0; o < o_cnt; ++o)
                    for (int64_t gg = 0; gg < g_cnt; ++gg)
                        for (int64_t j = 0; j < d; ++j) gs.at(o, j) += g.at(o * g_cnt + gg, j);
            }
            if (t.nodes_[ip].requires_grad) {
                Tensor& gp = t.grad_buf(ip);
                for (int64_t o = 0; o < o_cnt; ++o)
                    for (int64_t gg = 0; gg < g_cnt; ++gg)
                        for (int64_t j = 0; j < d; ++j) gp.at(gg, j) += g.at(o * g_cnt + gg, j);
            }
        };
    }
    return ov;
}

void Tape::backward(Var loss) {
    if (val(loss).numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grad_buf(loss.id).data[0] = 1.0;
    for (int32_t id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.requires_grad || !n.grad_alloc || !n.back) continue;
        n.back(*this);
    }
}

std::map<std::string, Tensor> Tape::param_grads() const {
    std::map<std::string, Tensor> out;
    for (const Node& n : nodes_) {
        if (n.name.empty()) continue;
        if (n.grad_alloc)
            out.emplace(n.name, n.grad);
        else
            out.emplace(n.name, Tensor(n.value.shape));
    }
    return out;
}

}  // namespace glass::ad

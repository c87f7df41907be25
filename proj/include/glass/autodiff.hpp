#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "glass/tensor.hpp"

namespace glass::ad {

struct Var {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense double tensors. One tape per sample; batch
// parallelism runs independent tapes and merges named-parameter gradients in
// index order so results do not depend on thread scheduling.
//
// Softmax reductions sum exponentials in sorted order, which makes the
// forward pass exactly invariant under permutation of the softmax axis.
class Tape {
public:
    // constant leaf (no gradient)
    Var input(Tensor value);
    // named leaf whose gradient is collected by param_grads()
    Var param(Tensor value, std::string name);

    const Tensor& val(Var v) const;
    const Tensor& grad(Var v) const;

    // elementwise
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var add_scalar(Var a, double s);
    Var exp(Var a);
    Var log(Var a);
    Var sqrt(Var a);
    Var square(Var a);
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var silu(Var a);
    Var relu(Var a);
    Var reciprocal(Var a);
    Var clamp(Var a, double lo, double hi);
    // v + eps wherever v < threshold; identity elsewhere (unit derivative)
    Var eps_guard(Var a, double threshold, double eps);

    // shape
    Var reshape(Var a, Shape s);
    Var transpose(Var a);                          // 2-D
    Var slice_rows(Var a, int64_t r0, int64_t r1);  // 2-D
    Var slice_cols(Var a, int64_t c0, int64_t c1);  // 2-D
    Var concat_channels(Var a, Var b);  // (C1,H,W)+(C2,H,W) -> (C1+C2,H,W)

    // matrix
    Var matmul(Var a, Var b);
    Var add_rowvec(Var a, Var v);   // (M,N) + (N)
    Var mul_rowvec(Var a, Var v);   // (M,N) * (N), i.e. scales column j by v[j]
    Var rowwise_scale(Var a, Var s);  // (M,N) * (1,N), every row scaled elementwise
    Var sum(Var a);       // -> (1)
    Var mean(Var a);      // -> (1)
    Var sum_rows(Var a);  // (M,N) -> (N)
    Var sum_cols(Var a);  // (M,N) -> (M)
    Var softmax_rows(Var a);
    Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);

    // nets
    Var conv2d(Var x, Var w, Var b, int stride, int pad);  // x (C,H,W), w (OC,IC,KH,KW)
    Var upsample_nearest2x(Var x);                         // (C,H,W)
    Var bilinear_resize(Var x, int64_t oh, int64_t ow);    // (C,H,W), half-pixel centers
    Var add_channel_bias(Var x, Var b);                    // (C,H,W) + (C)
    Var gather_rows(Var table, std::vector<int64_t> idx);
    // out[o*G+g, :] = slots[o, :] + pos[g, :]
    Var broadcast_slot_grid(Var slots, Var pos);

    Var detach(Var a) { return input(val(a)); }

    void backward(Var loss);
    // gradient of each named leaf; zero tensors for untouched params are not included
    std::map<std::string, Tensor> param_grads() const;

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool grad_alloc = false;
        std::string name;  // nonempty for named params
        std::function<void(Tape&)> back;
    };
    std::vector<Node> nodes_;

    Var make(Tensor value, bool requires_grad, std::function<void(Tape&)> back = nullptr);
    Tensor& grad_buf(int32_t id);
    void accum(int32_t id, const double* g, int64_t n);
    friend struct TapeOps;
};

// sums `v` ascending after sorting, so the result depends only on the multiset
double sorted_sum(std::vector<double>& scratch);

}  // namespace glass::ad

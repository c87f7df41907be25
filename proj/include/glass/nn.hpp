#pragma once

#include <map>
#include <string>
#include <vector>

#include "glass/autodiff.hpp"
#include "glass/rng.hpp"
#include "glass/tensor.hpp"

namespace glass::nn {

// Named parameter set. std::map keeps iteration order stable, which the
// optimizer and checkpoint format rely on.
struct ParamStore {
    std::map<std::string, Tensor> values;

    Tensor& add(const std::string& name, Tensor init);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return values.count(name) != 0; }
};

Tensor init_uniform(Shape shape, double limit, Rng& rng);
// Kaiming-style fan-in scaling for linear / conv weights
Tensor init_linear(Shape shape, int64_t fan_in, Rng& rng);
Tensor init_zeros(Shape shape);
Tensor init_normal(Shape shape, double std, Rng& rng);

// x (M,K) * w (K,N) + b
ad::Var linear(ad::Tape& t, ad::Var x, ad::Var w, ad::Var b);

// Standard GRU cell applied row-wise: x and h are (M,D); weight layout is
// w_i (D,3D), w_h (D,3D), b_i (3D), b_h (3D) with gate order (r, z, n).
ad::Var gru_cell(ad::Tape& t, ad::Var x, ad::Var h, ad::Var w_i, ad::Var w_h, ad::Var b_i, ad::Var b_h);

// Adds tensors of the GRU parameter block to a store under `prefix`.
void add_gru_params(ParamStore& store, const std::string& prefix, int64_t dim, Rng& rng);
ad::Var gru_cell_from_store(ad::Tape& t, ad::Var x, ad::Var h,
                            const std::map<std::string, ad::Var>& leaves, const std::string& prefix);

// Adam with bias correction; moments keyed by parameter name.
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step_count = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;

    void step(ParamStore& params, const std::map<std::string, Tensor>& grads,
              const std::vector<std::string>& trainable);
};

// Builds tape leaves for every parameter; `trainable` ones become named params
// (gradients collected), the rest constant inputs.
std::map<std::string, ad::Var> mount_params(ad::Tape& t, const ParamStore& store,
                                            const std::vector<std::string>& trainable);
std::map<std::string, ad::Var> mount_params_frozen(ad::Tape& t, const ParamStore& store);

// Sums per-sample gradient maps in index order and divides by count.
std::map<std::string, Tensor> average_grads(const std::vector<std::map<std::string, Tensor>>& per_sample);

}  // namespace glass::nn

#include "glass/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace glass::nn {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    auto [it, inserted] = values.emplace(name, std::move(init));
    if (!inserted) throw std::logic_error("duplicate parameter '" + name + "'");
    return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
    auto it = values.find(name);
    if (it == values.end()) throw std::out_of_range("no parameter '" + name + "'");
    return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw std::out_of_range("no parameter '" + name + "'");
    return it->second;
}

Tensor init_uniform(Shape shape, double limit, Rng& rng) {
    Tensor t{std::move(shape)};
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

Tensor init_linear(Shape shape, int64_t fan_in, Rng& rng) {
    double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
    return init_uniform(std::move(shape), limit, rng);
}

Tensor init_zeros(Shape shape) {
    return Tensor{std::move(shape)};
}

Tensor init_normal(Shape shape, double std, Rng& rng) {
    Tensor t{std::move(shape)};
    for (double& v : t.data) v = std * rng.normal();
    return t;
}

ad::Var linear(ad::Tape& t, ad::Var x, ad::Var w, ad::Var b) {
    return t.add_rowvec(t.matmul(x, w), b);
}

ad::Var gru_cell(ad::Tape& t, ad::Var x, ad::Var h, ad::Var w_i, ad::Var w_h, ad::Var b_i, ad::Var b_h) {
    int64_t d = t.val(h).shape[1];
    ad::Var gi = linear(t, x, w_i, b_i);  // (M,3D)
    ad::Var gh = linear(t, h, w_h, b_h);
    ad::Var r = t.sigmoid(t.add(t.slice_cols(gi, 0, d), t.slice_cols(gh, 0, d)));
    ad::Var z = t.sigmoid(t.add(t.slice_cols(gi, d, 2 * d), t.slice_cols(gh, d, 2 * d)));
    ad::Var n = t.tanh(t.add(t.slice_cols(gi, 2 * d, 3 * d), t.mul(r, t.slice_cols(gh, 2 * d, 3 * d))));
    // h' = (1-z) * n + z * h
    return t.add(t.sub(n, t.mul(z, n)), t.mul(z, h));
}

void add_gru_params(ParamStore& store, const std::string& prefix, int64_t dim, Rng& rng) {
    store.add(prefix + ".w_i", init_linear({dim, 3 * dim}, dim, rng));
    store.add(prefix + ".w_h", init_linear({dim, 3 * dim}, dim, rng));
    store.add(prefix + ".b_i", init_zeros({3 * dim}));
    store.add(prefix + ".b_h", init_zeros({3 * dim}));
}

ad::Var gru_cell_from_store(ad::Tape& t, ad::Var x, ad::Var h,
                            const std::map<std::string, ad::Var>& leaves, const std::string& prefix) {
    return gru_cell(t, x, h, leaves.at(prefix + ".w_i"), leaves.at(prefix + ".w_h"),
                    leaves.at(prefix + ".b_i"), leaves.at(prefix + ".b_h"));
}

void Adam::step(ParamStore& params, const std::map<std::string, Tensor>& grads,
                const std::vector<std::string>& trainable) {
    ++step_count;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (const std::string& name : trainable) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor& g = git->second;
        Tensor& p = params.at(name);
        Tensor& mm = m.try_emplace(name, Tensor(p.shape)).first->second;
        Tensor& vv = v.try_emplace(name, Tensor(p.shape)).first->second;
        for (size_t i = 0; i < p.data.size(); ++i) {
            double gi = g.data[i];
            mm.data[i] = beta1 * mm.data[i] + (1.0 - beta1) * gi;
            vv.data[i] = beta2 * vv.data[i] + (1.0 - beta2) * gi * gi;
            double mhat = mm.data[i] / bc1;
            double vhat = vv.data[i] / bc2;
            p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

std::map<std::string, ad::Var> mount_params(ad::Tape& t, const ParamStore& store,
                                            const std::vector<std::string>& trainable) {
    std::map<std::string, ad::Var> leaves;
    std::vector<std::string> train_sorted = trainable;
    for (const auto& [name, tensor] : store.values) {
        bool is_trainable = false;
        for (const auto& tn : train_sorted)
            if (tn == name) {
                is_trainable = true;
                break;
            }
        leaves[name] = is_trainable ? t.param(tensor, name) : t.input(tensor);
    }
    return leaves;
}

std::map<std::string, ad::Var> mount_params_frozen(ad::Tape& t, const ParamStore& store) {
    return mount_params(t, store, {});
}

std::map<std::string, Tensor> average_grads(const std::vector<std::map<std::string, Tensor>>& per_sample) {
    std::map<std::string, Tensor> out;
    if (per_sample.empty()) return out;
    double inv = 1.0 / static_cast<double>(per_sample.size());
    for (const auto& grads : per_sample) {
        for (const auto& [name, g] : grads) {
            auto it = out.find(name);
            if (it == out.end())
                out.emplace(name, g);
            else
                for (size_t i = 0; i < g.data.size(); ++i) it->second.data[i] += g.data[i];
        }
    }
    for (auto& [name, g] : out)
        for (double& v : g.data) v *= inv;
    return out;
}

}  // namespace glass::nn

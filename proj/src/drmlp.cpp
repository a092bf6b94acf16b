// SPDX-License-Identifier: Apache-2.0

#include "drnet/drmlp.hpp"

#include <cmath>
#include <limits>

#include "drnet/ops.hpp"

namespace drnet {

int task_index(std::string_view name) {
    for (size_t i = 0; i < kTaskNames.size(); ++i) {
        if (kTaskNames[i] == name) return static_cast<int>(i);
    }
    throw ContractError("unknown task '" + std::string(name) + "'");
}

TaskPrior TaskPrior::for_task(std::string_view name, int num_tasks) {
    return for_index(task_index(name), num_tasks);
}

TaskPrior TaskPrior::for_index(int index, int num_tasks) {
    if (index < 0 || index >= num_tasks) {
        throw ContractError("task index " + std::to_string(index) + " outside [0, " + std::to_string(num_tasks) + ")");
    }
    TaskPrior p;
    p.z.assign(static_cast<size_t>(num_tasks), 0.0f);
    p.z[static_cast<size_t>(index)] = 1.0f;
    p.task_name = index < kNumTasks ? std::string(kTaskNames[static_cast<size_t>(index)])
                                    : "task" + std::to_string(index);
    return p;
}

void TaskPrior::validate() const {
    int ones = 0;
    for (float v : z) {
        if (v == 1.0f) {
            ++ones;
        } else if (v != 0.0f) {
            throw ContractError("task prior must be one-hot");
        }
    }
    if (ones != 1) throw ContractError("task prior must be one-hot");
}

int TaskPrior::index() const {
    validate();
    for (size_t i = 0; i < z.size(); ++i) {
        if (z[i] == 1.0f) return static_cast<int>(i);
    }
    return -1;
}

Tensor TaskPrior::as_tensor() const {
    validate();
    return Tensor({static_cast<int64_t>(z.size())}, z);
}

LinearBank make_bank(int64_t in_features, int64_t out_features, int64_t size, Rng& rng) {
    if (size < 1) throw DimensionError("bank size must be at least 1");
    LinearBank bank;
    for (int64_t j = 0; j < size; ++j) {
        bank.branches.push_back({fan_in_uniform({out_features, in_features}, in_features, rng),
                                 fan_in_uniform({out_features}, in_features, rng)});
    }
    return bank;
}

DRMLPParams make_drmlp_params(const DrmlpShape& shape, Rng& rng) {
    const int64_t hidden_tsm = shape.tsm_hidden > 0 ? shape.tsm_hidden : 4 * int64_t{shape.num_tasks};
    const int64_t hidden = shape.expansion * shape.channels;
    DRMLPParams p;
    p.bank1 = make_bank(shape.channels, hidden, shape.bank1_size, rng);
    p.bank2 = make_bank(hidden, shape.channels, shape.bank2_size, rng);
    // A single-branch bank always gets weight 1, so it carries no head.
    auto head = [&](int64_t n) {
        TsmHead h;
        if (n == 1) return h;
        h.hidden = {fan_in_uniform({hidden_tsm, shape.num_tasks}, shape.num_tasks, rng), Tensor::zeros({hidden_tsm})};
        h.logits = {Tensor::zeros({n, hidden_tsm}), Tensor::zeros({n})};
        return h;
    };
    p.tsm.bank1 = head(shape.bank1_size);
    p.tsm.bank2 = head(shape.bank2_size);
    return p;
}

namespace {

Tensor head_weights(const Tensor& z, const TsmHead& head) {
    if (!head.logits.weight.defined()) return Tensor::of({1}, {1.0f});
    Tensor hidden = linear(z, head.hidden.weight, head.hidden.bias);
    return softmax(linear(hidden, head.logits.weight, head.logits.bias));
}

void check_bank(const LinearBank& bank) {
    if (bank.branches.empty()) throw DimensionError("empty linear bank");
    for (const Affine& a : bank.branches) {
        if (a.weight.shape() != bank.branches[0].weight.shape() || a.bias.shape() != bank.branches[0].bias.shape()) {
            throw DimensionError("bank branches must share one shape");
        }
    }
}

}  // namespace

BankWeights tsm_weights(const TaskPrior& prior, const TSMParams& tsm) {
    Tensor z = prior.as_tensor();
    return {head_weights(z, tsm.bank1), head_weights(z, tsm.bank2)};
}

Tensor bank_forward(const Tensor& x, const LinearBank& bank, const Tensor& weights) {
    check_bank(bank);
    const int64_t n = bank.size();
    const int64_t din = bank.in_features(), dout = bank.out_features();
    if (x.rank() < 1 || x.dim(-1) != din) {
        throw DimensionError("bank_forward: x" + shape_str(x.shape()) + " vs branch W" +
                             shape_str(bank.branches[0].weight.shape()));
    }
    if (weights.rank() != 1 || weights.dim(0) != n) {
        throw DimensionError("bank_forward: " + std::to_string(n) + " branches but weights " +
                             shape_str(weights.shape()));
    }
    const int64_t rows = x.numel() / din;
    Shape out_shape = x.shape();
    out_shape.back() = dout;
    Tensor out(out_shape);
    const auto wv = weights.data();
    {
        const float* xp = x.data().data();
        float* op = out.mutable_data().data();
        for (int64_t m = 0; m < rows; ++m) {
            const float* xr = xp + m * din;
            for (int64_t o = 0; o < dout; ++o) {
                double acc = 0.0;
                for (int64_t j = 0; j < n; ++j) {
                    const Affine& br = bank.branches[static_cast<size_t>(j)];
                    const double branch = detail::dot(br.weight.data().data() + o * din, xr, din) + br.bias.data()[static_cast<size_t>(o)];
                    acc += wv[static_cast<size_t>(j)] * branch;
                }
                op[m * dout + o] = static_cast<float>(acc);
            }
        }
    }
    // Mixing costs one multiply per branch output; a lone branch has weight 1.
    count_op(n * rows * din * dout + (n > 1 ? n * rows * dout : 0));

    std::vector<Tensor> inputs = {x, weights};
    for (const Affine& br : bank.branches) {
        inputs.push_back(br.weight);
        inputs.push_back(br.bias);
    }
    if (Tape* tape = recording_tape(std::span<const Tensor>(inputs))) {
        tape->record(out, [inputs, n, rows, din, dout](std::span<const float> g) mutable {
            Tensor& x = inputs[0];
            Tensor& weights = inputs[1];
            const auto wv = weights.data();
            const float* xp = x.data().data();
            // G[o, i] = sum_m g[m, o] x[m, i];  gb[o] = sum_m g[m, o]
            std::vector<double> gmat(static_cast<size_t>(dout * din), 0.0), gb(static_cast<size_t>(dout), 0.0);
            for (int64_t m = 0; m < rows; ++m) {
                const float* xr = xp + m * din;
                for (int64_t o = 0; o < dout; ++o) {
                    const double go = g[static_cast<size_t>(m * dout + o)];
                    gb[static_cast<size_t>(o)] += go;
                    if (go == 0.0) continue;
                    double* gr = gmat.data() + o * din;
                    for (int64_t i = 0; i < din; ++i) gr[i] += go * xr[i];
                }
            }
            std::vector<double> dw(static_cast<size_t>(n), 0.0);
            for (int64_t j = 0; j < n; ++j) {
                Tensor& wt = inputs[static_cast<size_t>(2 + 2 * j)];
                Tensor& bt = inputs[static_cast<size_t>(3 + 2 * j)];
                const double wj = wv[static_cast<size_t>(j)];
                const auto wd = wt.data();
                const auto bd = bt.data();
                double s = 0.0;
                for (size_t k = 0; k < gmat.size(); ++k) s += wd[k] * gmat[k];
                for (size_t o = 0; o < gb.size(); ++o) s += bd[o] * gb[o];
                dw[static_cast<size_t>(j)] = s;
                if (wt.requires_grad()) {
                    auto gw = wt.grad_buffer();
                    for (size_t k = 0; k < gw.size(); ++k) gw[k] += static_cast<float>(wj * gmat[k]);
                }
                if (bt.requires_grad()) {
                    auto gbb = bt.grad_buffer();
                    for (size_t o = 0; o < gbb.size(); ++o) gbb[o] += static_cast<float>(wj * gb[o]);
                }
            }
            if (weights.requires_grad()) {
                auto gw = weights.grad_buffer();
                for (int64_t j = 0; j < n; ++j) gw[static_cast<size_t>(j)] += static_cast<float>(dw[static_cast<size_t>(j)]);
            }
            if (x.requires_grad()) {
                // dx[m, :] = sum_o g[m, o] sum_j w_j W_j[o, :]
                std::vector<double> weff(static_cast<size_t>(dout * din), 0.0);
                for (int64_t j = 0; j < n; ++j) {
                    const auto wd = inputs[static_cast<size_t>(2 + 2 * j)].data();
                    const double wj = wv[static_cast<size_t>(j)];
                    for (size_t k = 0; k < weff.size(); ++k) weff[k] += wj * wd[k];
                }
                auto gx = x.grad_buffer();
                std::vector<double> acc(static_cast<size_t>(din));
                for (int64_t m = 0; m < rows; ++m) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int64_t o = 0; o < dout; ++o) {
                        const double go = g[static_cast<size_t>(m * dout + o)];
                        if (go == 0.0) continue;
                        const double* wr = weff.data() + o * din;
                        for (int64_t i = 0; i < din; ++i) acc[static_cast<size_t>(i)] += go * wr[i];
                    }
                    float* gr = gx.data() + m * din;
                    for (int64_t i = 0; i < din; ++i) gr[i] += static_cast<float>(acc[static_cast<size_t>(i)]);
                }
            }
        });
    }
    return out;
}

Tensor drmlp_forward_train(const Tensor& x, const DRMLPParams& params, const Tensor& w1, const Tensor& w2) {
    if (params.bank1.out_features() != params.bank2.in_features()) {
        throw DimensionError("drmlp: bank widths do not chain");
    }
    Tensor hidden = gelu(bank_forward(x, params.bank1, w1));
    return bank_forward(hidden, params.bank2, w2);
}

Tensor drmlp_forward_train(const Tensor& x, const DRMLPParams& params, const TaskPrior& prior) {
    BankWeights w = tsm_weights(prior, params.tsm);
    return drmlp_forward_train(x, params, w.w1, w.w2);
}

FusedAffine fuse_bank(const LinearBank& bank, std::span<const float> weights) {
    check_bank(bank);
    if (static_cast<int64_t>(weights.size()) != bank.size()) {
        throw DimensionError("fuse_bank: " + std::to_string(bank.size()) + " branches but " +
                             std::to_string(weights.size()) + " weights");
    }
    const auto& first = bank.branches[0];
    std::vector<double> w(static_cast<size_t>(first.weight.numel()), 0.0);
    std::vector<double> b(static_cast<size_t>(first.bias.numel()), 0.0);
    for (size_t j = 0; j < weights.size(); ++j) {
        const double wj = weights[j];
        auto wd = bank.branches[j].weight.data();
        auto bd = bank.branches[j].bias.data();
        for (size_t k = 0; k < w.size(); ++k) w[k] += wj * wd[k];
        for (size_t k = 0; k < b.size(); ++k) b[k] += wj * bd[k];
    }
    FusedAffine fused{Tensor(first.weight.shape()), Tensor(first.bias.shape())};
    auto fw = fused.weight.mutable_data();
    auto fb = fused.bias.mutable_data();
    for (size_t k = 0; k < w.size(); ++k) fw[k] = static_cast<float>(w[k]);
    for (size_t k = 0; k < b.size(); ++k) fb[k] = static_cast<float>(b[k]);
    return fused;
}

FusedMLP drmlp_fuse(const DRMLPParams& params, const TaskPrior& prior) {
    BankWeights w = tsm_weights(prior, params.tsm);
    return {fuse_bank(params.bank1, w.w1.data()), fuse_bank(params.bank2, w.w2.data())};
}

Tensor fused_mlp_forward(const Tensor& x, const FusedMLP& mlp) {
    Tensor hidden = gelu(linear(x, mlp.fc1.weight, mlp.fc1.bias));
    return linear(hidden, mlp.fc2.weight, mlp.fc2.bias);
}

SimilarityMatrix weight_similarity(std::span<const FusedMLP> fused, int bank) {
    if (bank != 1 && bank != 2) throw ContractError("weight_similarity: bank must be 1 or 2");
    SimilarityMatrix m;
    m.size = static_cast<int>(fused.size());
    m.values.assign(fused.size() * fused.size(), 0.0);
    m.flagged.assign(fused.size() * fused.size(), false);
    auto weight_of = [bank](const FusedMLP& f) { return (bank == 1 ? f.fc1 : f.fc2).weight.data(); };
    std::vector<double> norms;
    for (const FusedMLP& f : fused) {
        double s = 0.0;
        for (float v : weight_of(f)) s += static_cast<double>(v) * v;
        norms.push_back(std::sqrt(s));
    }
    for (size_t i = 0; i < fused.size(); ++i) {
        for (size_t j = 0; j < fused.size(); ++j) {
            const size_t k = i * fused.size() + j;
            auto a = weight_of(fused[i]);
            auto b = weight_of(fused[j]);
            if (a.size() != b.size()) throw DimensionError("weight_similarity: fused weights differ in shape");
            if (norms[i] == 0.0 || norms[j] == 0.0) {
                m.values[k] = std::numeric_limits<double>::quiet_NaN();
                m.flagged[k] = true;
                continue;
            }
            double dot = 0.0;
            for (size_t e = 0; e < a.size(); ++e) dot += static_cast<double>(a[e]) * b[e];
            m.values[k] = i == j ? 1.0 : dot / (norms[i] * norms[j]);
        }
    }
    // Enforce exact symmetry regardless of summation order.
    for (size_t i = 0; i < fused.size(); ++i)
        for (size_t j = i + 1; j < fused.size(); ++j) m.values[j * fused.size() + i] = m.values[i * fused.size() + j];
    return m;
}

}  // namespace drnet

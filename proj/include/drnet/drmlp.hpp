// SPDX-License-Identifier: Apache-2.0
//
// Task-modulated multi-branch MLP and its one-time fusion.
//
// Training form:  y = sum_k w2_k L2_k( GELU( sum_j w1_j L1_j(x) ) )
// where (w1, w2) = softmax outputs of a small modulator fed with a one-hot task
// prior. Because every bank is a convex combination of affine maps, each bank
// collapses to a single affine map once the prior is fixed:
//   W_new = sum_j w_j W_j,   b_new = sum_j w_j b_j.

#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drnet/init.hpp"
#include "drnet/tensor.hpp"

namespace drnet {

/// Prior slots, in one-hot index order.
inline constexpr std::array<std::string_view, 6> kTaskNames = {"denoise", "derain", "dehaze",
                                                               "deblur",  "enhance", "blind"};
inline constexpr int kNumTasks = static_cast<int>(kTaskNames.size());

/// Index of a named task; throws ContractError for unknown names.
int task_index(std::string_view name);

struct TaskPrior {
    std::vector<float> z;
    std::string task_name;

    /// One-hot prior for a named task over `num_tasks` slots.
    static TaskPrior for_task(std::string_view name, int num_tasks = kNumTasks);
    static TaskPrior for_index(int index, int num_tasks = kNumTasks);

    /// Throws ContractError unless z is a standard basis vector.
    void validate() const;
    int index() const;
    Tensor as_tensor() const;
};

struct Affine {
    Tensor weight;  // [D_out, D_in]
    Tensor bias;    // [D_out]

    int64_t in_features() const { return weight.dim(1); }
    int64_t out_features() const { return weight.dim(0); }
};

using FusedAffine = Affine;

struct LinearBank {
    std::vector<Affine> branches;

    int64_t size() const { return static_cast<int64_t>(branches.size()); }
    int64_t in_features() const { return branches.front().in_features(); }
    int64_t out_features() const { return branches.front().out_features(); }
};

/// linear_b(linear_a(z)): K -> hidden -> N logits for one bank. Left undefined
/// for a single-branch bank, whose weight is the constant 1.
struct TsmHead {
    Affine hidden;
    Affine logits;
};

struct TSMParams {
    TsmHead bank1;
    TsmHead bank2;
};

struct DRMLPParams {
    LinearBank bank1;  // C -> rC
    LinearBank bank2;  // rC -> C
    TSMParams tsm;
};

struct FusedMLP {
    FusedAffine fc1;
    FusedAffine fc2;
};

struct BankWeights {
    Tensor w1;  // [N1], on the simplex
    Tensor w2;  // [N2], on the simplex
};

struct DrmlpShape {
    int64_t channels = 0;
    int64_t expansion = 2;
    int64_t bank1_size = 4;
    int64_t bank2_size = 4;
    int num_tasks = kNumTasks;
    /// 0 selects 4 * num_tasks.
    int64_t tsm_hidden = 0;
};

/// Independent fan-in uniform branches; TSM hidden layer random, logits layer zero
/// (so every prior starts from uniform branch weights).
DRMLPParams make_drmlp_params(const DrmlpShape& shape, Rng& rng);

LinearBank make_bank(int64_t in_features, int64_t out_features, int64_t size, Rng& rng);

/// softmax(linear_b(linear_a(z))) for both banks. Differentiable in the TSM parameters.
BankWeights tsm_weights(const TaskPrior& prior, const TSMParams& tsm);

/// sum_j w_j (W_j x + b_j), evaluated branch by branch.
Tensor bank_forward(const Tensor& x, const LinearBank& bank, const Tensor& weights);

/// Multi-branch training path.
Tensor drmlp_forward_train(const Tensor& x, const DRMLPParams& params, const Tensor& w1, const Tensor& w2);
/// Convenience overload deriving the weights from the prior.
Tensor drmlp_forward_train(const Tensor& x, const DRMLPParams& params, const TaskPrior& prior);

FusedAffine fuse_bank(const LinearBank& bank, std::span<const float> weights);
FusedMLP drmlp_fuse(const DRMLPParams& params, const TaskPrior& prior);
Tensor fused_mlp_forward(const Tensor& x, const FusedMLP& mlp);

struct SimilarityMatrix {
    int size = 0;
    std::vector<double> values;  // row-major [size, size]
    std::vector<bool> flagged;   // entries involving a zero-norm weight

    double at(int i, int j) const { return values[static_cast<size_t>(i * size + j)]; }
};

/// Cosine similarity of flattened fused weights; `bank` is 1 or 2.
SimilarityMatrix weight_similarity(std::span<const FusedMLP> fused, int bank);

}  // namespace drnet

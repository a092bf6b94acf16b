// SPDX-License-Identifier: Apache-2.0
//
// Hourglass restoration network built from shifted-window blocks whose MLPs are
// task-modulated branch banks, with a Haar-wavelet encoder.
//
//   x -> 3x3 conv (F_s) -> stage-1 blocks (F_1)
//     -> 3 x [3x3 conv -> Haar; LL descends, (LH, HL, HH) skip]
//     -> decoder stages 4, 3, 2, each followed by inverse Haar with the skipped
//        bands and a 1x1 projection
//     -> concat with F_1 -> 1x1 fuse -> post blocks -> 3x3 conv -> + F_s
//     -> 3x3 conv -> + x
//
// A DRNet carries trainable banks and modulators. reconfigure() collapses every
// bank for one prior into a FusedDRNet that shares all other tensors.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "drnet/attention.hpp"
#include "drnet/drmlp.hpp"
#include "drnet/tensor.hpp"

namespace drnet {

struct DRNetConfig {
    int64_t input_channels = 3;
    int64_t base_channels = 48;
    int64_t deep_channels = 192;
    /// Stage 1 (full resolution) then decoder stages 2..4.
    std::array<int64_t, 4> blocks = {4, 6, 6, 8};
    std::array<int, 4> heads = {1, 2, 4, 8};
    int window = 8;
    int64_t expansion = 2;
    int64_t bank1_size = 4;
    int64_t bank2_size = 4;
    int64_t refinement_blocks = 4;
    int num_tasks = kNumTasks;

    /// Desk-scale configuration: C=8, deep=16, one block per stage, w=4, N=2.
    static DRNetConfig tiny();

    /// Throws ContractError listing every invalid field.
    void validate() const;
    /// Spatial extents must be multiples of this (three Haar levels, then windows).
    int64_t size_multiple() const { return 8 * int64_t{window}; }

    /// Canonical `key=value` tokens separated by spaces.
    std::string canonical() const;
    /// FNV-1a 64 of canonical().
    uint64_t digest() const;

    bool operator==(const DRNetConfig&) const = default;
};

/// Parses flat `key = value` text (comments with '#'). Unknown keys are an error
/// unless `ignore_unknown` is set, which lets one file also carry training keys.
DRNetConfig parse_model_config(const std::string& text, bool ignore_unknown = false);

struct ConvParams {
    Tensor kernel;  // [C_out, C_in, s, s]
    Tensor bias;    // [C_out]
};

struct NormParams {
    Tensor gamma;
    Tensor beta;
};

/// Everything in a block except its MLP.
struct BlockCore {
    NormParams norm1;
    AttentionParams attn;
    NormParams norm2;
    int shift = 0;
};

enum class Stage : int { kStage1 = 0, kStage4, kStage3, kStage2, kPost };
inline constexpr int kNumStages = 5;

struct StageRange {
    size_t begin = 0;
    size_t count = 0;
};

/// Parameters shared by the trainable and fused networks.
struct Backbone {
    DRNetConfig config;
    ConvParams shallow;
    ConvParams encoder[3];
    /// decoder_proj[l] follows the inverse Haar at level l (0 = full resolution).
    ConvParams decoder_proj[3];
    ConvParams fuse;
    ConvParams refine;
    ConvParams output;
    /// All blocks in execution order: stage 1, stage 4, stage 3, stage 2, post.
    std::vector<BlockCore> blocks;
    std::array<StageRange, kNumStages> stages;

    const StageRange& stage(Stage s) const { return stages[static_cast<size_t>(s)]; }
};

struct DRNet {
    std::shared_ptr<Backbone> backbone;
    std::vector<DRMLPParams> mlps;  // one per block

    const DRNetConfig& config() const { return backbone->config; }
};

struct FusedDRNet {
    std::shared_ptr<const Backbone> backbone;
    std::vector<FusedMLP> mlps;
    std::string task_name;

    const DRNetConfig& config() const { return backbone->config; }
};

DRNet build(const DRNetConfig& config, uint64_t seed);

/// Full pipeline with banks combined by the prior's modulator weights.
/// Inputs whose extents are not multiples of size_multiple() are reflect-padded
/// and the output is cropped back.
Tensor forward_train(const DRNet& model, const Tensor& x, const TaskPrior& prior);
Tensor forward_fused(const FusedDRNet& model, const Tensor& x);

/// Initialization stage: fuses every bank for `prior`.
FusedDRNet reconfigure(const DRNet& model, const TaskPrior& prior);

/// Cosine similarity between the fused weights of every prior slot. `bank` is 1
/// or 2; `block` selects one block, or -1 to flatten all blocks together.
SimilarityMatrix fused_weight_similarity(const DRNet& model, int bank, int block = -1);

/// Deep copy with independent storage.
DRNet clone(const DRNet& model);

using NamedTensor = std::pair<std::string, Tensor>;
std::vector<NamedTensor> named_parameters(const Backbone& backbone);
std::vector<NamedTensor> named_parameters(const DRNet& model);
std::vector<NamedTensor> named_parameters(const FusedDRNet& model);
/// Parameters that can be trained (everything in a DRNet).
std::vector<Tensor> parameters(const DRNet& model);

enum class Mode { kTrain, kFused };

int64_t parameter_count(const std::vector<NamedTensor>& tensors);
/// Train counts every branch and modulator; fused counts one branch-equivalent
/// per bank and no modulator.
int64_t count_params(const DRNet& model, Mode mode);
int64_t count_params(const FusedDRNet& model);
/// Analytic count from the configuration alone.
int64_t count_params(const DRNetConfig& config, Mode mode);

/// Multiply-accumulate count of one forward pass, mirroring the ops actually run.
/// flops() uses the convention that one multiply-accumulate is two operations.
struct FlopEstimate {
    int64_t macs = 0;
    int64_t flops() const { return 2 * macs; }
};

/// H and W are padded to size_multiple() first, as forward does.
FlopEstimate estimate_flops(const DRNetConfig& config, int64_t height, int64_t width, Mode mode);

}  // namespace drnet

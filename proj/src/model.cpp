// SPDX-License-Identifier: Apache-2.0

#include "drnet/model.hpp"

#include "drnet/ops.hpp"
#include "drnet/wavelet.hpp"

namespace drnet {

namespace {

constexpr int64_t kMaxExtent = 8192;

ConvParams make_conv(int64_t cin, int64_t cout, int64_t size, Rng& rng) {
    return {fan_in_uniform({cout, cin, size, size}, cin * size * size, rng), Tensor::zeros({cout})};
}

NormParams make_norm(int64_t channels) {
    return {Tensor::full({channels}, 1.0f), Tensor::zeros({channels})};
}

int stage_heads(const DRNetConfig& c, Stage s) {
    switch (s) {
        case Stage::kStage1:
        case Stage::kPost:
            return c.heads[0];
        case Stage::kStage2:
            return c.heads[1];
        case Stage::kStage3:
            return c.heads[2];
        case Stage::kStage4:
            return c.heads[3];
    }
    return 1;
}

int64_t stage_channels(const DRNetConfig& c, Stage s) {
    return (s == Stage::kStage1 || s == Stage::kPost) ? c.base_channels : c.deep_channels;
}

int64_t stage_blocks(const DRNetConfig& c, Stage s) {
    switch (s) {
        case Stage::kStage1:
            return c.blocks[0];
        case Stage::kStage2:
            return c.blocks[1];
        case Stage::kStage3:
            return c.blocks[2];
        case Stage::kStage4:
            return c.blocks[3];
        case Stage::kPost:
            return 1 + c.refinement_blocks;
    }
    return 0;
}

/// Downsampling factor of a stage relative to the input.
int64_t stage_stride(Stage s) {
    switch (s) {
        case Stage::kStage2:
            return 2;
        case Stage::kStage3:
            return 4;
        case Stage::kStage4:
            return 8;
        default:
            return 1;
    }
}

constexpr std::array<Stage, kNumStages> kExecutionOrder = {Stage::kStage1, Stage::kStage4, Stage::kStage3,
                                                            Stage::kStage2, Stage::kPost};

using MlpFn = std::function<Tensor(size_t block, const Tensor& tokens)>;

Tensor run_stage(const Backbone& bb, Stage s, const Tensor& x, const MlpFn& mlp) {
    const StageRange& range = bb.stage(s);
    if (range.count == 0) return x;
    Tensor tokens = to_channels_last(x);
    for (size_t i = range.begin; i < range.begin + range.count; ++i) {
        const BlockCore& b = bb.blocks[i];
        Tensor h = add(tokens, swsa(layer_norm(tokens, b.norm1.gamma, b.norm1.beta), b.attn, {b.shift}));
        tokens = add(h, mlp(i, layer_norm(h, b.norm2.gamma, b.norm2.beta)));
    }
    return to_channels_first(tokens);
}

Tensor conv(const Tensor& x, const ConvParams& p) { return conv2d(x, p.kernel, p.bias); }

Tensor forward_core(const Backbone& bb, const Tensor& x, const MlpFn& mlp) {
    Tensor shallow = conv(x, bb.shallow);
    Tensor first = run_stage(bb, Stage::kStage1, shallow, mlp);

    DetailBands skips[3];
    Tensor e = first;
    for (int l = 0; l < 3; ++l) {
        SubBands sb = haar_decompose(conv(e, bb.encoder[l]));
        skips[l] = {sb.lh, sb.hl, sb.hh};
        e = sb.ll;
    }

    constexpr Stage kDecoder[3] = {Stage::kStage2, Stage::kStage3, Stage::kStage4};
    Tensor d = e;
    for (int l = 2; l >= 0; --l) {
        d = run_stage(bb, kDecoder[l], d, mlp);
        d = haar_reconstruct({d, skips[l].lh, skips[l].hl, skips[l].hh});
        d = conv(d, bb.decoder_proj[l]);
    }

    Tensor fused = conv(concat0(d, first), bb.fuse);
    Tensor refined = conv(run_stage(bb, Stage::kPost, fused, mlp), bb.refine);
    Tensor out = conv(add(refined, shallow), bb.output);
    return add(out, x);
}

Tensor forward_padded(const Backbone& bb, const Tensor& x, const MlpFn& mlp) {
    const DRNetConfig& c = bb.config;
    if (x.rank() != 3 || x.dim(0) != c.input_channels) {
        throw DimensionError("forward: expected [" + std::to_string(c.input_channels) + ", H, W], got " +
                             shape_str(x.shape()));
    }
    const int64_t h = x.dim(1), w = x.dim(2);
    if (h > kMaxExtent || w > kMaxExtent) {
        throw DimensionError("forward: extent " + shape_str(x.shape()) + " exceeds the padding budget of " +
                             std::to_string(kMaxExtent));
    }
    const int64_t m = c.size_multiple();
    const int64_t ph = (m - h % m) % m, pw = (m - w % m) % m;
    if (ph == 0 && pw == 0) return forward_core(bb, x, mlp);
    return crop(forward_core(bb, reflect_pad(x, ph, pw), mlp), h, w);
}

void append_conv(std::vector<NamedTensor>& out, const std::string& name, const ConvParams& p) {
    out.emplace_back(name + ".kernel", p.kernel);
    out.emplace_back(name + ".bias", p.bias);
}

void append_affine(std::vector<NamedTensor>& out, const std::string& name, const Affine& a) {
    out.emplace_back(name + ".weight", a.weight);
    out.emplace_back(name + ".bias", a.bias);
}

std::string block_name(size_t i) { return "blocks." + std::to_string(i); }

}  // namespace

DRNet build(const DRNetConfig& config, uint64_t seed) {
    config.validate();
    Rng rng(seed);
    auto bb = std::make_shared<Backbone>();
    bb->config = config;
    const int64_t c = config.base_channels, d = config.deep_channels;

    bb->shallow = make_conv(config.input_channels, c, 3, rng);
    bb->encoder[0] = make_conv(c, d, 3, rng);
    bb->encoder[1] = make_conv(d, d, 3, rng);
    bb->encoder[2] = make_conv(d, d, 3, rng);
    bb->decoder_proj[0] = make_conv(d, c, 1, rng);
    bb->decoder_proj[1] = make_conv(d, d, 1, rng);
    bb->decoder_proj[2] = make_conv(d, d, 1, rng);
    bb->fuse = make_conv(2 * c, c, 1, rng);
    bb->refine = make_conv(c, c, 3, rng);
    bb->output = make_conv(c, config.input_channels, 3, rng);

    DRNet model;
    for (Stage s : kExecutionOrder) {
        StageRange& range = bb->stages[static_cast<size_t>(s)];
        range.begin = bb->blocks.size();
        range.count = static_cast<size_t>(stage_blocks(config, s));
        const int64_t ch = stage_channels(config, s);
        for (size_t i = 0; i < range.count; ++i) {
            BlockCore b;
            b.norm1 = make_norm(ch);
            b.attn = make_attention_params(ch, stage_heads(config, s), config.window, rng);
            b.norm2 = make_norm(ch);
            b.shift = (i % 2 == 1) ? config.window / 2 : 0;
            bb->blocks.push_back(std::move(b));
            DrmlpShape shape;
            shape.channels = ch;
            shape.expansion = config.expansion;
            shape.bank1_size = config.bank1_size;
            shape.bank2_size = config.bank2_size;
            shape.num_tasks = config.num_tasks;
            model.mlps.push_back(make_drmlp_params(shape, rng));
        }
    }
    model.backbone = std::move(bb);
    return model;
}

Tensor forward_train(const DRNet& model, const Tensor& x, const TaskPrior& prior) {
    if (static_cast<int>(prior.z.size()) != model.config().num_tasks) {
        throw ContractError("prior has " + std::to_string(prior.z.size()) + " slots, model expects " +
                            std::to_string(model.config().num_tasks));
    }
    prior.validate();
    MlpFn mlp = [&](size_t block, const Tensor& tokens) {
        return drmlp_forward_train(tokens, model.mlps[block], prior);
    };
    return forward_padded(*model.backbone, x, mlp);
}

Tensor forward_fused(const FusedDRNet& model, const Tensor& x) {
    MlpFn mlp = [&](size_t block, const Tensor& tokens) { return fused_mlp_forward(tokens, model.mlps[block]); };
    return forward_padded(*model.backbone, x, mlp);
}

FusedDRNet reconfigure(const DRNet& model, const TaskPrior& prior) {
    if (static_cast<int>(prior.z.size()) != model.config().num_tasks) {
        throw ContractError("prior has " + std::to_string(prior.z.size()) + " slots, model expects " +
                            std::to_string(model.config().num_tasks));
    }
    FusedDRNet fused;
    fused.backbone = model.backbone;
    fused.task_name = prior.task_name;
    fused.mlps.reserve(model.mlps.size());
    for (const DRMLPParams& p : model.mlps) fused.mlps.push_back(drmlp_fuse(p, prior));
    return fused;
}

SimilarityMatrix fused_weight_similarity(const DRNet& model, int bank, int block) {
    const int blocks = static_cast<int>(model.mlps.size());
    if (block < -1 || block >= blocks) {
        throw ContractError("block index " + std::to_string(block) + " out of range for " + std::to_string(blocks) +
                            " blocks");
    }
    std::vector<FusedMLP> per_task;
    for (int t = 0; t < model.config().num_tasks; ++t) {
        const TaskPrior prior = TaskPrior::for_index(t, model.config().num_tasks);
        if (block >= 0) {
            per_task.push_back(drmlp_fuse(model.mlps[static_cast<size_t>(block)], prior));
            continue;
        }
        // One flattened [1, n] weight per bank covering every block.
        std::vector<float> w1, w2;
        for (const DRMLPParams& p : model.mlps) {
            const FusedMLP f = drmlp_fuse(p, prior);
            w1.insert(w1.end(), f.fc1.weight.data().begin(), f.fc1.weight.data().end());
            w2.insert(w2.end(), f.fc2.weight.data().begin(), f.fc2.weight.data().end());
        }
        const auto n1 = static_cast<int64_t>(w1.size()), n2 = static_cast<int64_t>(w2.size());
        per_task.push_back({{Tensor({1, n1}, std::move(w1)), Tensor::zeros({1})},
                            {Tensor({1, n2}, std::move(w2)), Tensor::zeros({1})}});
    }
    return weight_similarity(per_task, bank);
}

DRNet clone(const DRNet& model) {
    DRNet copy = build(model.config(), 0);
    auto src = named_parameters(model);
    auto dst = named_parameters(copy);
    for (size_t i = 0; i < src.size(); ++i) {
        auto from = src[i].second.data();
        auto to = dst[i].second.mutable_data();
        std::copy(from.begin(), from.end(), to.begin());
        dst[i].second.set_requires_grad(src[i].second.requires_grad());
    }
    return copy;
}

std::vector<NamedTensor> named_parameters(const Backbone& bb) {
    std::vector<NamedTensor> out;
    append_conv(out, "shallow", bb.shallow);
    for (int l = 0; l < 3; ++l) append_conv(out, "encoder." + std::to_string(l), bb.encoder[l]);
    for (int l = 0; l < 3; ++l) append_conv(out, "decoder_proj." + std::to_string(l), bb.decoder_proj[l]);
    append_conv(out, "fuse", bb.fuse);
    append_conv(out, "refine", bb.refine);
    append_conv(out, "output", bb.output);
    for (size_t i = 0; i < bb.blocks.size(); ++i) {
        const BlockCore& b = bb.blocks[i];
        const std::string n = block_name(i);
        out.emplace_back(n + ".norm1.gamma", b.norm1.gamma);
        out.emplace_back(n + ".norm1.beta", b.norm1.beta);
        out.emplace_back(n + ".attn.qkv_weight", b.attn.qkv_weight);
        out.emplace_back(n + ".attn.qkv_bias", b.attn.qkv_bias);
        out.emplace_back(n + ".attn.proj_weight", b.attn.proj_weight);
        out.emplace_back(n + ".attn.proj_bias", b.attn.proj_bias);
        out.emplace_back(n + ".attn.rel_bias_table", b.attn.rel_bias_table);
        out.emplace_back(n + ".norm2.gamma", b.norm2.gamma);
        out.emplace_back(n + ".norm2.beta", b.norm2.beta);
    }
    return out;
}

std::vector<NamedTensor> named_parameters(const DRNet& model) {
    auto out = named_parameters(*model.backbone);
    for (size_t i = 0; i < model.mlps.size(); ++i) {
        const DRMLPParams& p = model.mlps[i];
        const std::string n = block_name(i) + ".mlp";
        for (size_t j = 0; j < p.bank1.branches.size(); ++j) {
            append_affine(out, n + ".bank1." + std::to_string(j), p.bank1.branches[j]);
        }
        for (size_t j = 0; j < p.bank2.branches.size(); ++j) {
            append_affine(out, n + ".bank2." + std::to_string(j), p.bank2.branches[j]);
        }
        for (auto [tag, head] : {std::pair{"bank1", &p.tsm.bank1}, std::pair{"bank2", &p.tsm.bank2}}) {
            if (!head->logits.weight.defined()) continue;
            append_affine(out, n + ".tsm." + tag + ".hidden", head->hidden);
            append_affine(out, n + ".tsm." + tag + ".logits", head->logits);
        }
    }
    return out;
}

std::vector<NamedTensor> named_parameters(const FusedDRNet& model) {
    auto out = named_parameters(*model.backbone);
    for (size_t i = 0; i < model.mlps.size(); ++i) {
        const std::string n = block_name(i) + ".mlp";
        append_affine(out, n + ".fc1", model.mlps[i].fc1);
        append_affine(out, n + ".fc2", model.mlps[i].fc2);
    }
    return out;
}

std::vector<Tensor> parameters(const DRNet& model) {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters(model)) out.push_back(t);
    return out;
}

int64_t parameter_count(const std::vector<NamedTensor>& tensors) {
    int64_t n = 0;
    for (const auto& [name, t] : tensors) n += t.numel();
    return n;
}

int64_t count_params(const DRNet& model, Mode mode) {
    if (mode == Mode::kTrain) return parameter_count(named_parameters(model));
    int64_t n = parameter_count(named_parameters(*model.backbone));
    for (const DRMLPParams& p : model.mlps) {
        const Affine& a = p.bank1.branches.front();
        const Affine& b = p.bank2.branches.front();
        n += a.weight.numel() + a.bias.numel() + b.weight.numel() + b.bias.numel();
    }
    return n;
}

int64_t count_params(const FusedDRNet& model) { return parameter_count(named_parameters(model)); }

int64_t count_params(const DRNetConfig& c, Mode mode) {
    c.validate();
    auto conv_params = [](int64_t cin, int64_t cout, int64_t s) { return cout * cin * s * s + cout; };
    const int64_t base = c.base_channels, deep = c.deep_channels;
    int64_t n = conv_params(c.input_channels, base, 3) + conv_params(base, deep, 3) + 2 * conv_params(deep, deep, 3) +
                conv_params(deep, base, 1) + 2 * conv_params(deep, deep, 1) + conv_params(2 * base, base, 1) +
                conv_params(base, base, 3) + conv_params(base, c.input_channels, 3);
    const int64_t span = 2 * int64_t{c.window} - 1;
    const int64_t tsm_hidden = 4 * int64_t{c.num_tasks};
    for (Stage s : kExecutionOrder) {
        const int64_t ch = stage_channels(c, s), blocks = stage_blocks(c, s), hid = c.expansion * ch;
        const int64_t core = 4 * ch + (3 * ch * ch + 3 * ch) + (ch * ch + ch) + stage_heads(c, s) * span * span;
        const int64_t fc1 = hid * ch + hid, fc2 = ch * hid + ch;
        int64_t mlp = fc1 + fc2;
        if (mode == Mode::kTrain) {
            auto head = [&](int64_t n) { return n > 1 ? tsm_hidden * c.num_tasks + tsm_hidden + n * tsm_hidden + n : 0; };
            mlp = c.bank1_size * fc1 + c.bank2_size * fc2 + head(c.bank1_size) + head(c.bank2_size);
        }
        n += blocks * (core + mlp);
    }
    return n;
}

FlopEstimate estimate_flops(const DRNetConfig& c, int64_t height, int64_t width, Mode mode) {
    c.validate();
    const int64_t m = c.size_multiple();
    const int64_t h = (height + m - 1) / m * m, w = (width + m - 1) / m * m;
    const int64_t base = c.base_channels, deep = c.deep_channels, hw = h * w;
    auto conv_macs = [](int64_t pixels, int64_t cin, int64_t cout, int64_t s) { return pixels * cin * cout * s * s; };

    int64_t macs = conv_macs(hw, c.input_channels, base, 3);           // shallow
    macs += conv_macs(hw, base, deep, 3);                               // encoder 0
    macs += conv_macs(hw / 4, deep, deep, 3);                           // encoder 1
    macs += conv_macs(hw / 16, deep, deep, 3);                          // encoder 2
    macs += conv_macs(hw / 16, deep, deep, 1);                          // decoder_proj 2
    macs += conv_macs(hw / 4, deep, deep, 1);                           // decoder_proj 1
    macs += conv_macs(hw, deep, base, 1);                               // decoder_proj 0
    macs += conv_macs(hw, 2 * base, base, 1);                           // fuse
    macs += conv_macs(hw, base, base, 3);                               // refine
    macs += conv_macs(hw, base, c.input_channels, 3);                   // output

    const int64_t tsm_hidden = 4 * int64_t{c.num_tasks};
    const int64_t t = int64_t{c.window} * c.window;
    for (Stage s : kExecutionOrder) {
        const int64_t stride = stage_stride(s);
        const int64_t tokens = (h / stride) * (w / stride);
        const int64_t ch = stage_channels(c, s), hid = c.expansion * ch;
        const int64_t nwin = tokens / t;
        int64_t block = tokens * ch * 3 * ch   // qkv
                        + nwin * 2 * t * t * ch  // scores and weighted values
                        + tokens * ch * ch;      // output projection
        if (mode == Mode::kTrain) {
            block += c.bank1_size * tokens * ch * hid + (c.bank1_size > 1 ? c.bank1_size * tokens * hid : 0);
            block += c.bank2_size * tokens * hid * ch + (c.bank2_size > 1 ? c.bank2_size * tokens * ch : 0);
            for (int64_t n : {c.bank1_size, c.bank2_size})
                if (n > 1) block += tsm_hidden * c.num_tasks + tsm_hidden * n;
        } else {
            block += tokens * ch * hid + tokens * hid * ch;
        }
        macs += stage_blocks(c, s) * block;
    }
    return {macs};
}

}  // namespace drnet

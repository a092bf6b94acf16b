// SPDX-License-Identifier: Apache-2.0

#include "drnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "drnet/kv.hpp"

namespace drnet {

namespace {

constexpr const char* kMagic = "drnet-checkpoint";

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void append_le(std::string& out, float v) {
    uint32_t bits = std::bit_cast<uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float read_le(const char* p) {
    uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return std::bit_cast<float>(bits);
}

std::string serialize_tensors(const DRNetConfig& config, const std::string& mode,
                              const std::vector<NamedTensor>& tensors) {
    std::string payload;
    std::ostringstream head;
    head << kMagic << '\n'
         << "version " << kCheckpointVersion << '\n'
         << "mode " << mode << '\n'
         << "config " << config.canonical() << '\n'
         << "config_digest " << hex64(config.digest()) << '\n'
         << "tensors " << tensors.size() << '\n';
    for (const auto& [name, t] : tensors) {
        head << "tensor " << name << ' ' << t.rank();
        for (int64_t d : t.shape()) head << ' ' << d;
        head << ' ' << payload.size() << ' ' << t.numel() << '\n';
        for (float v : t.data()) append_le(payload, v);
    }
    head << "payload_bytes " << payload.size() << '\n'
         << "payload_checksum " << hex64(fnv1a64(payload)) << '\n'
         << "end\n";
    return head.str() + payload;
}

struct Record {
    Shape shape;
    size_t offset = 0;
    size_t count = 0;
};

struct Parsed {
    std::string mode;
    DRNetConfig config;
    std::map<std::string, Record> records;
    std::vector<std::string> order;
    std::string_view payload;
};

std::string expect_line(std::istringstream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("checkpoint truncated before '" + key + "'");
    if (line.rfind(key + " ", 0) != 0) throw FormatError("checkpoint: expected '" + key + "', got '" + line + "'");
    return line.substr(key.size() + 1);
}

Parsed parse(const std::string& bytes) {
    const std::string terminator = "\nend\n";
    const size_t end = bytes.find(terminator);
    if (bytes.rfind(std::string(kMagic) + "\n", 0) != 0) throw FormatError("not a drnet checkpoint");
    if (end == std::string::npos) throw FormatError("checkpoint header truncated");
    std::istringstream in(bytes.substr(0, end + 1));
    std::string line;
    std::getline(in, line);

    Parsed p;
    const std::string version = expect_line(in, "version");
    if (version != std::to_string(kCheckpointVersion)) {
        throw FormatError("checkpoint version " + version + " not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    p.mode = expect_line(in, "mode");
    if (p.mode != "train" && p.mode != "fused" && p.mode.rfind("fused:", 0) != 0) {
        throw FormatError("checkpoint: unknown mode '" + p.mode + "'");
    }
    std::string config_text;
    for (const auto& token : split(expect_line(in, "config"), ' ')) config_text += token + "\n";
    p.config = parse_model_config(config_text);
    const std::string digest = expect_line(in, "config_digest");
    if (digest != hex64(p.config.digest())) throw FormatError("checkpoint: config digest mismatch");

    const int64_t count = parse_int("tensors", expect_line(in, "tensors"));
    size_t next_offset = 0;
    for (int64_t k = 0; k < count; ++k) {
        std::istringstream rec(expect_line(in, "tensor"));
        std::string name;
        int64_t rank = -1;
        rec >> name >> rank;
        if (!rec || rank < 0 || rank > 8) throw FormatError("checkpoint: malformed tensor record");
        Record r;
        for (int64_t i = 0; i < rank; ++i) {
            int64_t d = 0;
            rec >> d;
            if (!rec || d <= 0) throw FormatError("checkpoint: bad extent for '" + name + "'");
            r.shape.push_back(d);
        }
        rec >> r.offset >> r.count;
        if (!rec) throw FormatError("checkpoint: malformed tensor record for '" + name + "'");
        if (static_cast<int64_t>(r.count) != shape_numel(r.shape) || r.offset != next_offset) {
            throw FormatError("checkpoint: inconsistent manifest entry for '" + name + "'");
        }
        next_offset += 4 * r.count;
        if (!p.records.emplace(name, r).second) throw FormatError("checkpoint: duplicate tensor '" + name + "'");
        p.order.push_back(name);
    }
    const auto payload_bytes = static_cast<size_t>(parse_int("payload_bytes", expect_line(in, "payload_bytes")));
    const std::string checksum = expect_line(in, "payload_checksum");
    if (payload_bytes != next_offset) throw FormatError("checkpoint: payload size disagrees with manifest");
    const size_t start = end + terminator.size();
    if (bytes.size() - start != payload_bytes) {
        throw FormatError("checkpoint payload is " + std::to_string(bytes.size() - start) + " bytes, expected " +
                          std::to_string(payload_bytes));
    }
    p.payload = std::string_view(bytes).substr(start);
    if (hex64(fnv1a64(p.payload)) != checksum) throw FormatError("checkpoint: payload checksum mismatch");
    return p;
}

void fill(const Parsed& p, const std::vector<NamedTensor>& targets) {
    if (targets.size() != p.records.size()) {
        throw FormatError("checkpoint holds " + std::to_string(p.records.size()) + " tensors, model expects " +
                          std::to_string(targets.size()));
    }
    for (const auto& [name, t] : targets) {
        auto it = p.records.find(name);
        if (it == p.records.end()) throw FormatError("checkpoint: missing tensor '" + name + "'");
        if (it->second.shape != t.shape()) {
            throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_str(it->second.shape) +
                              ", expected " + shape_str(t.shape()));
        }
        Tensor dst = t;
        auto data = dst.mutable_data();
        const char* src = p.payload.data() + it->second.offset;
        for (size_t i = 0; i < data.size(); ++i) data[i] = read_le(src + 4 * i);
    }
}

FusedDRNet fused_skeleton(const DRNetConfig& config) {
    DRNet base = build(config, 0);
    FusedDRNet f;
    f.backbone = base.backbone;
    for (const DRMLPParams& p : base.mlps) {
        const Affine& a = p.bank1.branches.front();
        const Affine& b = p.bank2.branches.front();
        f.mlps.push_back({{Tensor(a.weight.shape()), Tensor(a.bias.shape())}, {Tensor(b.weight.shape()), Tensor(b.bias.shape())}});
    }
    return f;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string serialize(const DRNet& model) { return serialize_tensors(model.config(), "train", named_parameters(model)); }

std::string serialize(const FusedDRNet& model) {
    const std::string mode = model.task_name.empty() ? "fused" : "fused:" + model.task_name;
    return serialize_tensors(model.config(), mode, named_parameters(model));
}

AnyModel deserialize(const std::string& bytes) {
    Parsed p = parse(bytes);
    if (p.mode == "train") {
        DRNet model = build(p.config, 0);
        fill(p, named_parameters(model));
        return model;
    }
    FusedDRNet model = fused_skeleton(p.config);
    model.task_name = p.mode.size() > 6 ? p.mode.substr(6) : std::string();
    fill(p, named_parameters(model));
    return model;
}

void save(const DRNet& model, const std::filesystem::path& path) { write_file(path, serialize(model)); }
void save(const FusedDRNet& model, const std::filesystem::path& path) { write_file(path, serialize(model)); }

AnyModel load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

DRNet load_train(const std::filesystem::path& path) {
    AnyModel m = load(path);
    if (auto* train = std::get_if<DRNet>(&m)) return std::move(*train);
    throw FormatError("'" + path.string() + "' holds a fused model; fusion cannot be undone for training");
}

FusedDRNet load_fused(const std::filesystem::path& path) {
    AnyModel m = load(path);
    if (auto* fused = std::get_if<FusedDRNet>(&m)) return std::move(*fused);
    throw FormatError("'" + path.string() + "' holds a train-mode model; run fuse first");
}

}  // namespace drnet

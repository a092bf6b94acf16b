// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <sstream>

#include "drnet/kv.hpp"
#include "drnet/model.hpp"

namespace drnet {

DRNetConfig DRNetConfig::tiny() {
    DRNetConfig c;
    c.base_channels = 8;
    c.deep_channels = 16;
    c.blocks = {1, 1, 1, 1};
    c.heads = {1, 2, 4, 8};
    c.window = 4;
    c.bank1_size = 2;
    c.bank2_size = 2;
    c.refinement_blocks = 1;
    return c;
}

void DRNetConfig::validate() const {
    std::vector<std::string> problems;
    auto need = [&](bool ok, const std::string& what) {
        if (!ok) problems.push_back(what);
    };
    need(input_channels >= 1, "input_channels must be >= 1");
    need(base_channels >= 1, "base_channels must be >= 1");
    need(deep_channels >= 1, "deep_channels must be >= 1");
    for (size_t i = 0; i < blocks.size(); ++i) {
        need(blocks[i] >= 0, "blocks[" + std::to_string(i) + "] must be >= 0");
        need(heads[i] >= 1, "heads[" + std::to_string(i) + "] must be >= 1");
    }
    if (heads[0] >= 1) need(base_channels % heads[0] == 0, "heads[0] must divide base_channels");
    for (size_t i = 1; i < heads.size(); ++i) {
        if (heads[i] >= 1) {
            need(deep_channels % heads[i] == 0, "heads[" + std::to_string(i) + "] must divide deep_channels");
        }
    }
    need(window >= 1, "window must be >= 1");
    need(expansion >= 1, "expansion must be >= 1");
    need(bank1_size >= 1, "bank1_size must be >= 1");
    need(bank2_size >= 1, "bank2_size must be >= 1");
    need(refinement_blocks >= 0, "refinement_blocks must be >= 0");
    need(num_tasks >= 1, "num_tasks must be >= 1");
    if (!problems.empty()) {
        std::string msg = "invalid DRNetConfig:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw ContractError(msg);
    }
}

std::string DRNetConfig::canonical() const {
    std::ostringstream os;
    os << "input_channels=" << input_channels << " base_channels=" << base_channels
       << " deep_channels=" << deep_channels << " blocks=" << blocks[0] << ',' << blocks[1] << ',' << blocks[2]
       << ',' << blocks[3] << " heads=" << heads[0] << ',' << heads[1] << ',' << heads[2] << ',' << heads[3]
       << " window=" << window << " expansion=" << expansion << " bank1_size=" << bank1_size
       << " bank2_size=" << bank2_size << " refinement_blocks=" << refinement_blocks << " num_tasks=" << num_tasks;
    return os.str();
}

uint64_t DRNetConfig::digest() const { return fnv1a64(canonical()); }

DRNetConfig parse_model_config(const std::string& text, bool ignore_unknown) {
    DRNetConfig c;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "input_channels") {
            c.input_channels = parse_int(key, value);
        } else if (key == "base_channels") {
            c.base_channels = parse_int(key, value);
        } else if (key == "deep_channels") {
            c.deep_channels = parse_int(key, value);
        } else if (key == "blocks") {
            auto v = parse_int_list(key, value, 4);
            for (size_t i = 0; i < 4; ++i) c.blocks[i] = v[i];
        } else if (key == "heads") {
            auto v = parse_int_list(key, value, 4);
            for (size_t i = 0; i < 4; ++i) c.heads[i] = static_cast<int>(v[i]);
        } else if (key == "window") {
            c.window = static_cast<int>(parse_int(key, value));
        } else if (key == "expansion") {
            c.expansion = parse_int(key, value);
        } else if (key == "bank_size") {
            c.bank1_size = c.bank2_size = parse_int(key, value);
        } else if (key == "bank1_size") {
            c.bank1_size = parse_int(key, value);
        } else if (key == "bank2_size") {
            c.bank2_size = parse_int(key, value);
        } else if (key == "refinement_blocks") {
            c.refinement_blocks = parse_int(key, value);
        } else if (key == "num_tasks") {
            c.num_tasks = static_cast<int>(parse_int(key, value));
        } else if (key == "preset") {
            if (value == "tiny") {
                c = DRNetConfig::tiny();
            } else if (value != "default") {
                throw FormatError("unknown preset '" + value + "'");
            }
        } else if (!ignore_unknown) {
            throw FormatError("unknown model config key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

}  // namespace drnet

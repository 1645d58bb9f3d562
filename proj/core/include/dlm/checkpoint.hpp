#pragma once

#include <optional>
#include <string>

#include "dlm/consolidation.hpp"
#include "dlm/lm.hpp"
#include "dlm/meta.hpp"

namespace dlm {

// "DLM1" container: magic, format version u32, config (|V|, E, H as u32),
// P u64, P little-endian doubles, layout descriptor table, then optional
// tagged sections (META, ANCH, FISH, LAMB). Round-trips bit-exactly.
struct Checkpoint {
    LMConfig config;
    ParamVector params;
    std::optional<MetaParams> meta;
    std::optional<ConsolidatedMemory> memory;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dlm

#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "twinarm/reward.hpp"
#include "twinarm/sac.hpp"

namespace twinarm {

// Versioned little-endian binary: magic "TWFG", format_version u32,
// case_id u8, config digest (32 bytes), then length-prefixed f64 arrays in
// declaration order (five nets' layers, log_alpha, Adam moments, scalars),
// then the serialized generator state. Save -> load round-trips bit-exactly.
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    CaseId case_id = CaseId::Case1;
    std::array<uint8_t, 32> config_digest{};
    std::string rng_state;
};

void save_checkpoint(const std::string& path, const SacAgent& agent, const CheckpointMeta& meta);

// Fills every SacAgent field from the file. The agent must already have the
// shapes implied by the run's config; mismatches raise CheckpointError.
CheckpointMeta load_checkpoint(const std::string& path, SacAgent& agent);

// Transfer warm start: copies only the five networks' parameters; optimizer
// moments, temperature, replay buffer, and step counter stay fresh.
CheckpointMeta warm_start_checkpoint(const std::string& path, SacAgent& agent);

}  // namespace twinarm

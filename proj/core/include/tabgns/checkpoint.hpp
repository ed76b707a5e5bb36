#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tabgns/supernet.hpp"

namespace tabgns {

/// Everything a run persists. Search runs store the SuperNet plus the
/// extracted architecture with its fine-tuned weights; baseline runs store
/// only the architecture. At least one of the two must be present.
struct Checkpoint {
    std::uint64_t seed = 0;
    std::optional<SuperNet> net;
    std::optional<Architecture> finetuned;

    bool operator==(const Checkpoint&) const = default;
};

/// Binary layout: magic "TGNSCKPT", u32 format version, payload, FNV-1a-64
/// checksum trailer. All integers little-endian, doubles as IEEE-754 bit
/// patterns, so save -> load -> save is byte-identical on any host.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);

/// Throws IntegrityError on bad magic, unknown version, truncation, or a
/// checksum mismatch.
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace tabgns

#pragma once

#include <filesystem>

#include "emt/networks.hpp"

namespace emt {

// Binary parameter files:
//   "EMTNET\0\0" magic, u32 format version, u32 network kind,
//   u32 header count + u64 header values (architecture sizes),
//   u32 tensor count + per tensor (u32 rank, u64 extents...),
//   then every tensor's doubles, all little-endian.
inline constexpr std::uint32_t kNetFormatVersion = 1;

void save_network(const ResidualNet& net, const std::filesystem::path& file);
void save_network(const SkillClassifier& net, const std::filesystem::path& file);

ResidualNet load_residual_net(const std::filesystem::path& file);
SkillClassifier load_skill_classifier(const std::filesystem::path& file);

}  // namespace emt

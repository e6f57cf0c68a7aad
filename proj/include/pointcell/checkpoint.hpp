// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "pointcell/optim.hpp"
#include "pointcell/parameters.hpp"

namespace pointcell {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Flat binary container: "PTCK", u32 version, then records of
/// (u32 name length, UTF-8 name, u64 rank, u64 extents..., f64 data...),
/// all little-endian, until end of file.
struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

std::vector<CheckpointRecord> read_checkpoint_records(const std::filesystem::path& path);
void write_checkpoint_records(const std::filesystem::path& path,
                              const std::vector<CheckpointRecord>& records);

/// Parameters, optionally followed by optimizer moments under "adamw/" names.
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const AdamWState* optimizer = nullptr);

/// Loads values into an already-built store. Names and shapes must match
/// exactly, otherwise VersionError. Optimizer records are restored when
/// `optimizer` is non-null and the file carries them.
void load_checkpoint(const std::filesystem::path& path, ParameterStore& params,
                     AdamWState* optimizer = nullptr);

}  // namespace pointcell

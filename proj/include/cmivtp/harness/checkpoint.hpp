#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cmivtp/model/cmivtp_model.hpp"

namespace cmivtp::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  num::Shape shape;
  std::vector<double> data;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// "CMIV", u32 version, u32 count, then per tensor: u32 name length, name,
/// u32 rank, u64 dims, f64 payload; all little-endian. A trailing u64
/// FNV-1a of every payload byte closes the file.
std::string encode_tensors(const std::vector<NamedTensor>& tensors);
/// `origin` names the source in error messages.
std::vector<NamedTensor> decode_tensors(const std::string& bytes, const std::string& origin);

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(const std::filesystem::path& path);

/// Model config, every parameter and, when given, the trajectory bank.
void save_checkpoint(const std::filesystem::path& path, const model::CmivtpModel& m,
                     const model::TrajectoryBank* bank = nullptr);

/// Copies the file's parameters into `m`. A missing tensor or a shape
/// difference throws CheckpointError naming the tensor; a config stored
/// with different values throws afterwards.
void load_parameters(const std::filesystem::path& path, model::CmivtpModel& m);

struct LoadedCheckpoint {
  std::unique_ptr<model::CmivtpModel> model;
  std::optional<model::TrajectoryBank> bank;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the stored config encoding.
std::uint64_t config_hash(const model::ModelConfig& cfg);

}  // namespace cmivtp::harness

#pragma once

#include "hnmt/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace hnmt {

/// Self-describing binary container.
///
/// Layout (all integers little-endian):
///   "HNMTCKPT" u32 version
///   u64 n_meta   { str key, str value }*
///   u64 n_tensor { str name, u32 rank, u64 dims[rank], f64 payload[prod(dims)] }*
///   u64 n_blob   { str name, str bytes }*
/// where str = u64 length + raw bytes. Entries are written in key order, so
/// equal containers serialize to identical bytes.
struct Container {
  std::map<std::string, std::string> meta;
  std::map<std::string, Matrix> tensors;
  std::map<std::string, std::string> blobs;

  void put_parameters(const ParameterSet& params, const std::string& prefix = "");
  /// Copies stored tensors into params; every parameter must be present with
  /// the same shape.
  void get_parameters(ParameterSet& params, const std::string& prefix = "") const;

  const std::string& meta_at(const std::string& key) const;
  const std::string& blob_at(const std::string& key) const;
};

inline constexpr std::uint32_t kContainerVersion = 1;

std::string serialize(const Container& c);
Container deserialize(const std::string& bytes);

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

}  // namespace hnmt

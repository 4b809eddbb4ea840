#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hyperv2x/tensor.hpp"

namespace hyperv2x::io {

/// FNV-1a 64-bit hash, used for scene/payload checksums and spec hashes.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& s);
std::string hex64(std::uint64_t x);

/// Writes `content` to `path` atomically (temp file in the same directory,
/// then rename). Partial outputs are never left at the final path.
void atomic_write(const std::filesystem::path& path, const std::string& content);
void atomic_write(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

std::string read_file(const std::filesystem::path& path);

/// Named dense arrays in one binary container. Format:
///   magic "HVXTNS1\n", u32 array count, then per array:
///   u16 name length, name bytes, u8 dtype (0 = f64, 1 = i32),
///   u8 rank, u64 dims..., raw little-endian payload.
struct ArrayBundle {
  std::map<std::string, Tensor> f64;
  std::map<std::string, GridI> i32;   // rank-2 integer grids

  std::vector<std::uint8_t> encode() const;
  static ArrayBundle decode(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static ArrayBundle load(const std::filesystem::path& path);
};

/// Minimal CSV writer with a fixed field order and a schema tag line so
/// downstream parsers can validate what they are reading.
class CsvWriter {
 public:
  CsvWriter(std::string schema, std::vector<std::string> columns);
  void add_row(const std::vector<std::string>& cells);
  std::string str() const;
  void write(const std::filesystem::path& path) const;

  static std::string fmt(double x);      // fixed round-trippable formatting
  static std::string fmt(std::int64_t x);

 private:
  std::string schema_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Parses CSVs produced by CsvWriter: returns (schema, header, rows).
struct CsvData {
  std::string schema;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const;
  double num(std::size_t row, const std::string& name) const;
};
CsvData parse_csv(const std::string& text);

}  // namespace hyperv2x::io

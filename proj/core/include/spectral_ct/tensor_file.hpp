#pragma once

#include "spectral_ct/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sct {

/// Binary tensor container:
///   "SCTF" | u32 version | u32 ndims (3 or 4) | ndims × u32 dims | payload
/// All integers and values are little-endian; dims[0] varies fastest.
/// Version 1 stores float32 values, version 2 float64.
enum class TensorPrecision : std::uint32_t { float32 = 1, float64 = 2 };

struct TensorFileData {
  TensorPrecision precision = TensorPrecision::float32;
  std::vector<std::size_t> dims;
  std::vector<double> values;
};

std::string encode_tensor(std::span<const std::size_t> dims, std::span<const double> values, TensorPrecision p);
TensorFileData decode_tensor(std::string_view bytes);

void write_tensor(const std::filesystem::path& path, const Tensor3& t,
                  TensorPrecision p = TensorPrecision::float32);
void write_tensor(const std::filesystem::path& path, const Tensor4& t,
                  TensorPrecision p = TensorPrecision::float32);
TensorFileData read_tensor_file(const std::filesystem::path& path);
Tensor3 read_tensor3(const std::filesystem::path& path);
Tensor4 read_tensor4(const std::filesystem::path& path);

/// Write to a sibling temporary file and rename it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace sct

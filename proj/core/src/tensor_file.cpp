#include "spectral_ct/tensor_file.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace sct {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'C', 'T', 'F'};

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(std::string_view bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size()) throw std::runtime_error("tensor file truncated in header");
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + pos, 4);
  pos += 4;
  return v;
}

}  // namespace

std::string encode_tensor(std::span<const std::size_t> dims, std::span<const double> values, TensorPrecision p) {
  if (dims.size() != 3 && dims.size() != 4) throw std::invalid_argument("tensor files hold 3 or 4 dimensions");
  std::size_t count = 1;
  for (std::size_t d : dims) {
    if (d == 0 || d > 0xFFFFFFFFu) throw std::invalid_argument("tensor dimension out of range");
    count *= d;
  }
  if (count != values.size()) throw std::invalid_argument("tensor value count does not match dims");
  std::string out(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(p));
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) put_u32(out, static_cast<std::uint32_t>(d));
  if (p == TensorPrecision::float32) {
    out.reserve(out.size() + 4 * count);
    for (double v : values) {
      const auto f = static_cast<float>(v);
      char b[4];
      std::memcpy(b, &f, 4);
      out.append(b, 4);
    }
  } else {
    out.append(reinterpret_cast<const char*>(values.data()), 8 * count);
  }
  return out;
}

TensorFileData decode_tensor(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw std::runtime_error("not a tensor file (bad magic)");
  }
  std::size_t pos = 4;
  const std::uint32_t version = get_u32(bytes, pos);
  if (version != 1 && version != 2) throw std::runtime_error("unsupported tensor file version " + std::to_string(version));
  const std::uint32_t ndims = get_u32(bytes, pos);
  if (ndims != 3 && ndims != 4) throw std::runtime_error("tensor file must have 3 or 4 dims, found " + std::to_string(ndims));
  TensorFileData out;
  out.precision = static_cast<TensorPrecision>(version);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndims; ++i) {
    const std::uint32_t d = get_u32(bytes, pos);
    if (d == 0) throw std::runtime_error("tensor file has a zero dimension");
    out.dims.push_back(d);
    count *= d;
  }
  const std::size_t width = version == 1 ? 4 : 8;
  if (bytes.size() - pos != count * width) {
    throw std::runtime_error("tensor file payload is " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                             std::to_string(count * width));
  }
  out.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (width == 4) {
      float f;
      std::memcpy(&f, bytes.data() + pos + 4 * i, 4);
      out.values[i] = f;
    } else {
      std::memcpy(&out.values[i], bytes.data() + pos + 8 * i, 8);
    }
  }
  return out;
}

void write_tensor(const std::filesystem::path& path, const Tensor3& t, TensorPrecision p) {
  write_file_atomic(path, encode_tensor(t.dims(), t.data(), p));
}

void write_tensor(const std::filesystem::path& path, const Tensor4& t, TensorPrecision p) {
  write_file_atomic(path, encode_tensor(t.dims(), t.data(), p));
}

TensorFileData read_tensor_file(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

Tensor3 read_tensor3(const std::filesystem::path& path) {
  TensorFileData d = read_tensor_file(path);
  if (d.dims.size() != 3) throw std::runtime_error(path.string() + ": expected a 3-D tensor");
  return Tensor3({d.dims[0], d.dims[1], d.dims[2]}, std::move(d.values));
}

Tensor4 read_tensor4(const std::filesystem::path& path) {
  TensorFileData d = read_tensor_file(path);
  if (d.dims.size() != 4) throw std::runtime_error(path.string() + ": expected a 4-D tensor");
  return Tensor4({d.dims[0], d.dims[1], d.dims[2], d.dims[3]}, std::move(d.values));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

}  // namespace sct

#pragma once

#include "spectral_ct/geometry.hpp"
#include "spectral_ct/recon.hpp"
#include "spectral_ct/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sct {

/// Invalid or unreadable configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DictionaryTraining {
  std::size_t iterations = 50;
  std::size_t max_patches = 10000;
  std::size_t als_sweeps = 4;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  ScanGeometry geometry;  ///< full-view scan
  std::vector<double> channel_edges;
  std::vector<std::string> materials;
  DoseModel dose;
  bool noisy = true;
  PhantomSpec phantom;
  std::string preset;
  std::size_t recon_views = 80;
  ReconParams recon;
  DictionaryTraining training;
  std::string source_text;  ///< verbatim config, hashed into manifests

  MaterialBasis basis() const { return xcom_basis(materials, channel_edges); }
  /// The sparse-view scan used for reconstruction.
  ScanGeometry recon_geometry() const;
};

/// Parse the YAML run configuration. Unknown keys, wrong types, and invalid
/// values raise ConfigError naming the offending key.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace sct

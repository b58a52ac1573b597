#pragma once

#include "spectral_ct/config.hpp"
#include "spectral_ct/dictionary.hpp"
#include "spectral_ct/recon.hpp"
#include "spectral_ct/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sct {

enum class ExitCode : int { ok = 0, config_error = 2, missing_input = 3, numerical_failure = 4 };

class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommandOverrides {
  std::optional<std::size_t> views;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

void apply_overrides(RunConfig& cfg, const CommandOverrides& o);

/// Reconstruction methods accepted by `reconstruct`.
const std::vector<std::string>& recon_methods();

// In-memory stages shared by the commands and the tests.

struct SimulatedData {
  PhantomImages truth;
  Tensor3 sino_full;  ///< all views
  Tensor3 sino;       ///< the reconstruction views
};

SimulatedData simulate(const RunConfig& cfg);

/// Keep the listed views (second mode) of a (detector, view, channel) set.
Tensor3 select_views(const Tensor3& sino, const std::vector<std::size_t>& views);

/// Max voxel of the full-view FBP across channels.
double full_view_scale(const RunConfig& cfg, const Tensor3& sino_full);

/// Patches of the normalized full-view FBP; at most max_patches, drawn
/// without replacement under the seed and kept in grid order.
std::vector<Tensor3> training_patches(const Tensor3& image, std::size_t patch_size, std::size_t max_patches,
                                      std::uint64_t seed);

TensorDictionary train_dictionary(const RunConfig& cfg, const Tensor3& sino_full, KcpdTrace* trace = nullptr);

struct MethodOutput {
  Tensor3 image;  ///< physical units, ≥ 0
  std::vector<IterationRecord> history;
  double lambda = 0.0;
  double beta = 0.0;
};

/// Reconstruct the sparse-view data with one of recon_methods(). truth is
/// optional and only feeds the history log.
MethodOutput reconstruct(const RunConfig& cfg, const Tensor3& sino, double scale, const std::string& method,
                         const TensorDictionary* dict, const Tensor3* truth);

/// Serialized dictionary: CP factors as a ((2N+S), K, 1) float64 tensor.
Tensor3 dictionary_factor_tensor(const TensorDictionary& dict);
TensorDictionary dictionary_from_factors(const Tensor3& factors, std::size_t patch_size, std::size_t channels);

// File-level commands. Artifacts go to cfg.output_dir.
void cmd_simulate(const RunConfig& cfg);
void cmd_train_dict(const RunConfig& cfg);
void cmd_reconstruct(const RunConfig& cfg, const std::string& method);
void cmd_evaluate(const RunConfig& cfg, const std::string& method);
void cmd_decompose(const RunConfig& cfg, const std::string& method);
void cmd_report(const RunConfig& cfg);

/// Load the config, apply overrides, run the command, and map failures to
/// exit codes with a message on err.
int run_command(const std::string& command, const std::filesystem::path& config_path, const std::string& method,
                const CommandOverrides& overrides, std::ostream& err);

}  // namespace sct

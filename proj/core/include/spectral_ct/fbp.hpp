#pragma once

#include "spectral_ct/geometry.hpp"

#include <span>
#include <vector>

namespace sct {

enum class FbpFilter { ram_lak, hann };

/// Equal-spaced fan-beam filtered backprojection over a full 2π scan:
/// cosine pre-weighting, discrete ramp convolution on the virtual detector
/// through the isocenter, and distance-weighted backprojection with linear
/// detector interpolation. Sparse angular sampling is accepted and produces
/// the usual streaks. Sinogram layout as in Projector (detector fastest).
std::vector<double> fbp_reconstruct(std::span<const double> sinogram, const ScanGeometry& g,
                                    FbpFilter filter = FbpFilter::ram_lak);

}  // namespace sct

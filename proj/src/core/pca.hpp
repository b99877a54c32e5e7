#pragma once
// PCA encoding of the Gaussian blur-kernel family. The basis is fit once
// over 1000 evenly spaced widths in [0.2, 3.0] (15x15 kernels, float64
// math) and persisted as a named-tensor container; a degradation map
// stretches the projection coefficients plus the noise level over a
// spatial grid so the network can condition on them per pixel.

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace udvd {

struct PcaBasis {
  int kernel_size = 0;
  std::vector<float> mean;         // kernel_size^2
  std::vector<float> components;   // row-major (n_components, kernel_size^2), orthonormal rows
  std::vector<float> eigenvalues;  // descending

  int n_components() const { return static_cast<int>(eigenvalues.size()); }
  int dim() const { return kernel_size * kernel_size; }
};

// Eigendecomposition of the population covariance; component signs are
// fixed so each row's first component above 1e-12 is positive.
PcaBasis pca_fit(int n_components = 15, int n_samples = 1000, int kernel_size = 15);

// Projection coefficients of the width-eps kernel; eps must lie in the
// training range [0.2, 3.0].
std::vector<float> pca_encode(const PcaBasis& basis, double eps);

// mean + components^T coeffs.
std::vector<float> pca_reconstruct(const PcaBasis& basis, const std::vector<float>& coeffs);

void save_basis(const PcaBasis& basis, const std::string& path);
PcaBasis load_basis(const std::string& path);

// (1, t+1, h, w) map: channels 0..t-1 hold the blur coefficients, channel
// t holds sigma/75. sigma is in 8-bit units, [0, 75].
Tensor encode_degradation(const PcaBasis& basis, double eps, double sigma, int h, int w);

// Per-column parameters (matching the spatial degradation ramps); all
// columns of channel c share coefficient c of their column's width.
Tensor encode_degradation_spatial(const PcaBasis& basis, const std::vector<double>& eps_cols,
                                  const std::vector<double>& sigma_cols, int h);

}  // namespace udvd

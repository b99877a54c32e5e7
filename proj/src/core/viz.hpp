#pragma once
// Kernel visualization: renders the per-pixel filtering kernels a model
// predicts for one image under two degradation maps, side by side with their
// absolute difference. Each pixel's k×k kernel is drawn as a k×k tile at the
// pixel's grid position; for upsampling blocks the sub-kernel of output phase
// (0,0) is shown. Panels are min/max normalized independently so kernel shape
// differences stay visible regardless of magnitude.

#include <string>

#include "core/model.hpp"

namespace udvd {

// Returns a (1, 1, k·H, 3·k·W + 4) tensor in [0,1]: the kernels under map_a,
// under map_b, and |a−b|, separated by 2-pixel mid-gray columns. H and W are
// the spatial dims of the chosen block's input feature grid. A constant panel
// (e.g. the difference of identical maps) renders as all zeros.
Tensor render_kernel_panels(const UdvdModel& model, const Tensor& lr, const Tensor& map_a,
                            const Tensor& map_b, int block_index);

// Writes render_kernel_panels() to an 8-bit grayscale PNG.
void export_kernel_viz(const UdvdModel& model, const Tensor& lr, const Tensor& map_a,
                       const Tensor& map_b, int block_index, const std::string& out_png);

}  // namespace udvd

#include "core/viz.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "core/image_io.hpp"

namespace udvd {

namespace {

constexpr int kSeparator = 2;     // gap columns between panels
constexpr float kGapGray = 0.5f;  // separator intensity

// Tiles the phase-(0,0) kernels of one block into a (k·h, k·w) panel of raw
// (unnormalized) tap values. Channel u·k+v of the kernel tensor holds the tap
// at row offset u, column offset v of the k×k window.
std::vector<float> tile_panel(const Tensor& kern, int k) {
  int h = kern.h(), w = kern.w();
  std::vector<float> panel(static_cast<size_t>(k) * h * k * w);
  size_t stride = static_cast<size_t>(k) * w;
  for (int i = 0; i < h; ++i)
    for (int u = 0; u < k; ++u)
      for (int j = 0; j < w; ++j)
        for (int v = 0; v < k; ++v)
          panel[(static_cast<size_t>(i) * k + u) * stride + static_cast<size_t>(j) * k + v] =
              kern.at(0, u * k + v, i, j);
  return panel;
}

// Maps a panel linearly onto [0,1]; a constant panel becomes all zeros.
void normalize(std::vector<float>& p) {
  auto [lo_it, hi_it] = std::minmax_element(p.begin(), p.end());
  float lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    std::fill(p.begin(), p.end(), 0.0f);
    return;
  }
  float inv = 1.0f / (hi - lo);
  for (float& v : p) v = (v - lo) * inv;
}

}  // namespace

Tensor render_kernel_panels(const UdvdModel& model, const Tensor& lr, const Tensor& map_a,
                            const Tensor& map_b, int block_index) {
  int n_blocks = static_cast<int>(model.config().block_seq.size());
  if (block_index < 0 || block_index >= n_blocks)
    fail_param("render_kernel_panels: block index ", block_index, " out of range [0, ", n_blocks,
               ")");
  if (!map_a.same_shape(map_b))
    fail_shape("render_kernel_panels: degradation maps have shapes ", shape_str(map_a), " and ",
               shape_str(map_b));

  int k = model.config().k;
  Tensor kern_a = model.predict_kernels(lr, map_a)[static_cast<size_t>(block_index)];
  Tensor kern_b = model.predict_kernels(lr, map_b)[static_cast<size_t>(block_index)];

  std::vector<float> pa = tile_panel(kern_a, k);
  std::vector<float> pb = tile_panel(kern_b, k);
  std::vector<float> pd(pa.size());
  for (size_t i = 0; i < pa.size(); ++i) pd[i] = std::fabs(pa[i] - pb[i]);
  normalize(pa);
  normalize(pb);
  normalize(pd);

  int ph = k * kern_a.h();
  int pw = k * kern_a.w();
  Tensor out(1, 1, ph, 3 * pw + 2 * kSeparator);
  std::fill(out.data(), out.data() + out.numel(), kGapGray);
  const std::vector<float>* panels[3] = {&pa, &pb, &pd};
  for (int p = 0; p < 3; ++p) {
    int x0 = p * (pw + kSeparator);
    for (int y = 0; y < ph; ++y)
      std::copy(panels[p]->begin() + static_cast<size_t>(y) * pw,
                panels[p]->begin() + static_cast<size_t>(y + 1) * pw,
                out.data() + out.offset(0, 0, y, x0));
  }
  return out;
}

void export_kernel_viz(const UdvdModel& model, const Tensor& lr, const Tensor& map_a,
                       const Tensor& map_b, int block_index, const std::string& out_png) {
  write_png(render_kernel_panels(model, lr, map_a, map_b, block_index), out_png);
}

}  // namespace udvd

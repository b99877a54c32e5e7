#include "core/pca.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "core/degrade.hpp"
#include "core/tensor_io.hpp"

namespace udvd {

namespace {

Eigen::VectorXd kernel_vec(double eps, int size) {
  Tensor k = gaussian_kernel(eps, size);
  Eigen::VectorXd v(k.numel());
  for (size_t i = 0; i < k.numel(); ++i) v[static_cast<Eigen::Index>(i)] = k[i];
  return v;
}

void check_eps(double eps) {
  if (eps < 0.2 || eps > 3.0)
    fail_param("pca encode: blur width must lie in [0.2, 3.0], got ", eps);
}

std::vector<float> encode_one(const PcaBasis& basis, double eps) {
  check_eps(eps);
  Eigen::VectorXd v = kernel_vec(eps, basis.kernel_size);
  const int d = basis.dim(), t = basis.n_components();
  std::vector<float> coeffs(static_cast<size_t>(t));
  for (int i = 0; i < t; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j)
      acc += static_cast<double>(basis.components[static_cast<size_t>(i) * d + j]) *
             (v[j] - static_cast<double>(basis.mean[static_cast<size_t>(j)]));
    coeffs[static_cast<size_t>(i)] = static_cast<float>(acc);
  }
  return coeffs;
}

}  // namespace

PcaBasis pca_fit(int n_components, int n_samples, int kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    fail_param("pca_fit: kernel size must be odd, got ", kernel_size);
  const int d = kernel_size * kernel_size;
  if (n_components < 1 || n_components > d)
    fail_param("pca_fit: component count must lie in [1, ", d, "], got ", n_components);
  if (n_samples < 2) fail_param("pca_fit: need at least 2 samples, got ", n_samples);

  Eigen::MatrixXd X(n_samples, d);
  for (int s = 0; s < n_samples; ++s) {
    double eps = 0.2 + (3.0 - 0.2) * static_cast<double>(s) / (n_samples - 1);
    X.row(s) = kernel_vec(eps, kernel_size).transpose();
  }
  Eigen::VectorXd mean = X.colwise().mean();
  Eigen::MatrixXd Xc = X.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = Xc.transpose() * Xc / static_cast<double>(n_samples);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    fail(ErrorCode::Numeric, "pca_fit: eigendecomposition failed");

  PcaBasis basis;
  basis.kernel_size = kernel_size;
  basis.mean.resize(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) basis.mean[static_cast<size_t>(j)] = static_cast<float>(mean[j]);
  basis.components.resize(static_cast<size_t>(n_components) * d);
  basis.eigenvalues.resize(static_cast<size_t>(n_components));
  for (int i = 0; i < n_components; ++i) {
    // eigh orders ascending; take from the top end.
    int col = d - 1 - i;
    Eigen::VectorXd comp = solver.eigenvectors().col(col);
    for (int j = 0; j < d; ++j) {
      if (std::abs(comp[j]) > 1e-12) {
        if (comp[j] < 0) comp = -comp;
        break;
      }
    }
    for (int j = 0; j < d; ++j)
      basis.components[static_cast<size_t>(i) * d + j] = static_cast<float>(comp[j]);
    basis.eigenvalues[static_cast<size_t>(i)] = static_cast<float>(solver.eigenvalues()[col]);
  }
  return basis;
}

std::vector<float> pca_encode(const PcaBasis& basis, double eps) { return encode_one(basis, eps); }

std::vector<float> pca_reconstruct(const PcaBasis& basis, const std::vector<float>& coeffs) {
  const int d = basis.dim(), t = basis.n_components();
  if (coeffs.size() != static_cast<size_t>(t))
    fail_shape("pca_reconstruct: expected ", t, " coefficients, got ", coeffs.size());
  std::vector<float> out(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) {
    double acc = basis.mean[static_cast<size_t>(j)];
    for (int i = 0; i < t; ++i)
      acc += static_cast<double>(coeffs[static_cast<size_t>(i)]) *
             static_cast<double>(basis.components[static_cast<size_t>(i) * d + j]);
    out[static_cast<size_t>(j)] = static_cast<float>(acc);
  }
  return out;
}

void save_basis(const PcaBasis& basis, const std::string& path) {
  NamedTensors c;
  TenData meta;
  meta.dims = {1};
  meta.values = {static_cast<float>(basis.kernel_size)};
  c.put("kernel_size", meta);
  TenData mean;
  mean.dims = {static_cast<uint32_t>(basis.dim())};
  mean.values = basis.mean;
  c.put("mean", mean);
  TenData comp;
  comp.dims = {static_cast<uint32_t>(basis.n_components()), static_cast<uint32_t>(basis.dim())};
  comp.values = basis.components;
  c.put("components", comp);
  TenData ev;
  ev.dims = {static_cast<uint32_t>(basis.n_components())};
  ev.values = basis.eigenvalues;
  c.put("eigenvalues", ev);
  save_container(c, path);
}

PcaBasis load_basis(const std::string& path) {
  NamedTensors c = load_container(path);
  const TenData* meta = c.find("kernel_size");
  const TenData* mean = c.find("mean");
  const TenData* comp = c.find("components");
  const TenData* ev = c.find("eigenvalues");
  if (!meta || !mean || !comp || !ev)
    fail(ErrorCode::Io, "basis file ", path, " is missing required entries");
  PcaBasis basis;
  basis.kernel_size = static_cast<int>(meta->values.at(0));
  if (basis.kernel_size < 1 || basis.kernel_size % 2 == 0)
    fail(ErrorCode::Io, "basis file ", path, " has invalid kernel size ", basis.kernel_size);
  const size_t d = static_cast<size_t>(basis.kernel_size) * basis.kernel_size;
  if (mean->values.size() != d || comp->dims.size() != 2 || comp->dims[1] != d ||
      comp->dims[0] != ev->values.size())
    fail(ErrorCode::Io, "basis file ", path, " has inconsistent entry shapes");
  basis.mean = mean->values;
  basis.components = comp->values;
  basis.eigenvalues = ev->values;
  return basis;
}

Tensor encode_degradation(const PcaBasis& basis, double eps, double sigma, int h, int w) {
  return encode_degradation_spatial(basis, std::vector<double>(static_cast<size_t>(w), eps),
                                    std::vector<double>(static_cast<size_t>(w), sigma), h);
}

Tensor encode_degradation_spatial(const PcaBasis& basis, const std::vector<double>& eps_cols,
                                  const std::vector<double>& sigma_cols, int h) {
  const int w = static_cast<int>(eps_cols.size());
  if (w < 1 || h < 1) fail_shape("degradation map: empty grid ", h, "x", w);
  if (sigma_cols.size() != eps_cols.size())
    fail_shape("degradation map: ", eps_cols.size(), " blur columns vs ", sigma_cols.size(),
               " noise columns");
  const int t = basis.n_components();
  Tensor map(1, t + 1, h, w);
  for (int j = 0; j < w; ++j) {
    double sigma = sigma_cols[static_cast<size_t>(j)];
    if (sigma < 0.0 || sigma > 75.0)
      fail_param("degradation map: noise level must lie in [0, 75], got ", sigma);
    std::vector<float> coeffs = encode_one(basis, eps_cols[static_cast<size_t>(j)]);
    for (int c = 0; c < t; ++c)
      for (int i = 0; i < h; ++i) map.at(0, c, i, j) = coeffs[static_cast<size_t>(c)];
    for (int i = 0; i < h; ++i) map.at(0, t, i, j) = static_cast<float>(sigma / 75.0);
  }
  return map;
}

}  // namespace udvd

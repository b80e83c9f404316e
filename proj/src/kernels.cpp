#include "atmom/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace atmom::kernels {

namespace {

// Runs body(i) for i in [0, n). The parallel backend splits the range statically;
// each index is handled by exactly one thread.
template <typename Body>
void for_each_index(Backend be, std::size_t n, Body&& body) {
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (be == Backend::parallel) {
#pragma omp parallel for schedule(static) if (count > 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  }
}

}  // namespace

void affine_forward(Backend be, Shape s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
  for_each_index(be, s.batch, [&](std::size_t b) {
    const double* xr = x.data() + b * s.in;
    double* yr = y.data() + b * s.out;
    for (std::size_t o = 0; o < s.out; ++o) {
      const double* wr = w.data() + o * s.in;
      double acc = bias[o];
      for (std::size_t i = 0; i < s.in; ++i) acc += xr[i] * wr[i];
      yr[o] = acc;
    }
  });
}

void affine_backward(Backend be, Shape s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> dbias) {
  if (!dx.empty()) {
    for_each_index(be, s.batch, [&](std::size_t b) {
      double* dxr = dx.data() + b * s.in;
      const double* dyr = dy.data() + b * s.out;
      for (std::size_t i = 0; i < s.in; ++i) dxr[i] = 0.0;
      for (std::size_t o = 0; o < s.out; ++o) {
        const double g = dyr[o];
        const double* wr = w.data() + o * s.in;
        for (std::size_t i = 0; i < s.in; ++i) dxr[i] += g * wr[i];
      }
    });
  }
  for_each_index(be, s.out, [&](std::size_t o) {
    double* dwr = dw.data() + o * s.in;
    for (std::size_t i = 0; i < s.in; ++i) dwr[i] = 0.0;
    double db = 0.0;
    for (std::size_t b = 0; b < s.batch; ++b) {
      const double g = dy[b * s.out + o];
      const double* xr = x.data() + b * s.in;
      for (std::size_t i = 0; i < s.in; ++i) dwr[i] += g * xr[i];
      db += g;
    }
    dbias[o] = db;
  });
}

void layernorm_forward(Backend be, std::size_t batch, std::size_t n, std::span<const double> x,
                       std::span<const double> gain, std::span<const double> bias, double eps,
                       std::span<double> xhat, std::span<double> inv_std, std::span<double> y) {
  const double inv_n = 1.0 / static_cast<double>(n);
  for_each_index(be, batch, [&](std::size_t b) {
    const double* xr = x.data() + b * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += xr[i];
    mean *= inv_n;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var *= inv_n;
    const double r = 1.0 / std::sqrt(var + eps);
    inv_std[b] = r;
    double* hr = xhat.data() + b * n;
    double* yr = y.data() + b * n;
    for (std::size_t i = 0; i < n; ++i) {
      hr[i] = (xr[i] - mean) * r;
      yr[i] = gain[i] * hr[i] + bias[i];
    }
  });
}

void layernorm_backward(Backend be, std::size_t batch, std::size_t n,
                        std::span<const double> xhat, std::span<const double> inv_std,
                        std::span<const double> gain, std::span<const double> dy,
                        std::span<double> dx, std::span<double> dgain, std::span<double> dbias) {
  const double inv_n = 1.0 / static_cast<double>(n);
  for_each_index(be, batch, [&](std::size_t b) {
    const double* hr = xhat.data() + b * n;
    const double* dyr = dy.data() + b * n;
    double* dxr = dx.data() + b * n;
    double mean_dh = 0.0;
    double mean_dh_h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dh = dyr[i] * gain[i];
      mean_dh += dh;
      mean_dh_h += dh * hr[i];
    }
    mean_dh *= inv_n;
    mean_dh_h *= inv_n;
    const double r = inv_std[b];
    for (std::size_t i = 0; i < n; ++i) {
      const double dh = dyr[i] * gain[i];
      dxr[i] = r * (dh - mean_dh - hr[i] * mean_dh_h);
    }
  });
  for_each_index(be, n, [&](std::size_t i) {
    double dg = 0.0;
    double db = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      dg += dy[b * n + i] * xhat[b * n + i];
      db += dy[b * n + i];
    }
    dgain[i] = dg;
    dbias[i] = db;
  });
}

void relu_forward(Backend be, std::span<const double> x, std::span<double> y) {
  for_each_index(be, x.size(), [&](std::size_t i) { y[i] = x[i] > 0.0 ? x[i] : 0.0; });
}

void relu_backward(Backend be, std::span<const double> y, std::span<const double> dy,
                   std::span<double> dx) {
  for_each_index(be, y.size(), [&](std::size_t i) { dx[i] = y[i] > 0.0 ? dy[i] : 0.0; });
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace atmom::kernels

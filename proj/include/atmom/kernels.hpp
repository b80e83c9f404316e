#pragma once

#include <cstddef>
#include <span>

// Dense kernels behind the policy network. All matrices are row-major.
//
// Two backends share the same per-row/per-column bodies: `serial` is the reference
// implementation, `parallel` distributes the outer loop with OpenMP. No reduction is
// ever split across threads, so both backends produce bitwise-identical results.
namespace atmom::kernels {

enum class Backend { serial, parallel };

struct Shape {
  std::size_t batch = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

// y[b, o] = bias[o] + sum_i x[b, i] * w[o, i]
void affine_forward(Backend be, Shape s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);

// dx = dy * w;  dw = dy^T * x;  dbias = column sums of dy. dx may be empty to skip it.
void affine_backward(Backend be, Shape s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> dbias);

// Per-row normalization: xhat = (x - mean) / sqrt(var + eps); y = gain * xhat + bias.
void layernorm_forward(Backend be, std::size_t batch, std::size_t n, std::span<const double> x,
                       std::span<const double> gain, std::span<const double> bias, double eps,
                       std::span<double> xhat, std::span<double> inv_std, std::span<double> y);

void layernorm_backward(Backend be, std::size_t batch, std::size_t n,
                        std::span<const double> xhat, std::span<const double> inv_std,
                        std::span<const double> gain, std::span<const double> dy,
                        std::span<double> dx, std::span<double> dgain, std::span<double> dbias);

void relu_forward(Backend be, std::span<const double> x, std::span<double> y);
// dx = dy where the forward output was positive, else 0.
void relu_backward(Backend be, std::span<const double> y, std::span<const double> dy,
                   std::span<double> dx);

int max_threads();

}  // namespace atmom::kernels

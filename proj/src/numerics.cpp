#include "atmom/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atmom/error.hpp"

namespace atmom {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
  double u = 0.0;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0, v = 0.0, s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw DomainError("gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost to shape + 1 and rescale by U^(1/shape).
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform_open(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0, v = 0.0;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw DomainError("Rng::below: empty range");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

Rng Rng::split(std::uint64_t stream) { return Rng(mix_seed(engine_(), stream)); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double trigamma(double x) {
  if (!(x > 0.0)) throw DomainError("trigamma: argument must be positive");
  double acc = 0.0;
  while (x < 6.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  // psi1(x) ~ 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
  const double r = 1.0 / x;
  const double r2 = r * r;
  double series = 7.0 / 6.0;
  series = series * r2 - 691.0 / 2730.0;
  series = series * r2 + 5.0 / 66.0;
  series = series * r2 - 1.0 / 30.0;
  series = series * r2 + 1.0 / 42.0;
  series = series * r2 - 1.0 / 30.0;
  series = series * r2 + 1.0 / 6.0;
  return acc + r + 0.5 * r2 + series * r2 * r;
}

Vec sample_gaussian(Rng& rng, std::span<const double> mean, std::span<const double> stddev) {
  require_same_size(mean.size(), stddev.size(), "sample_gaussian");
  Vec out(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (stddev[i] < 0.0) throw DomainError("sample_gaussian: negative standard deviation");
    const double eps = rng.normal();
    out[i] = mean[i] + stddev[i] * eps;
  }
  return out;
}

Vec sample_student_t(Rng& rng, double nu, std::size_t dim) {
  if (!(nu > 0.0)) throw DomainError("sample_student_t: nu must be positive");
  Vec out(dim);
  for (auto& v : out) v = rng.normal();
  const double scale = 1.0 / std::sqrt(rng.chi_square(nu) / nu);
  for (auto& v : out) v *= scale;
  return out;
}

Vec finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> x, double h) {
  if (!(h > 0.0)) throw DomainError("finite_difference_gradient: step must be positive");
  Vec probe(x.begin(), x.end());
  Vec grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = probe[i];
    probe[i] = xi + h;
    const double fp = f(probe);
    probe[i] = xi - h;
    const double fm = f(probe);
    probe[i] = xi;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of empty sequence");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (values.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(values.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace atmom

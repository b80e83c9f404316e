#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace atmom {

using Vec = std::vector<double>;

// Seeded generator. mt19937_64's output sequence is fixed by the C++ standard, and
// all conversions to real-valued draws below are written out by hand, so a given
// seed yields the same stream on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  double normal();
  // Gamma(shape, 1), Marsaglia-Tsang.
  double gamma(double shape);
  double chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Child generator with a decorrelated stream, for per-run/per-episode seeding.
  Rng split(std::uint64_t stream);

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer; used to derive seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Trigamma function, recurrence up to x >= 6 followed by the asymptotic series.
double trigamma(double x);

Vec sample_gaussian(Rng& rng, std::span<const double> mean, std::span<const double> stddev);

// Standard multivariate Student-t: N(0, I) / sqrt(chi2(nu) / nu).
Vec sample_student_t(Rng& rng, double nu, std::size_t dim);

// Central differences, one coordinate at a time.
Vec finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> x, double h = 1e-5);

double median(std::vector<double> values);

}  // namespace atmom

#pragma once

#include <cmath>
#include <cstdint>

#include "frailmeta/normal.hpp"

namespace frailmeta {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with splitmix64 seeding.  Substreams are derived by hashing
// (seed, stream) so that replicate k always sees the same stream regardless
// of scheduling order.
class rng {
 public:
  explicit rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t sm = seed;
    (void)splitmix64(sm);
    sm ^= 0x632be59bd9b4e019ULL * (stream + 1);
    for (auto& si : s_) si = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // in (0, 1)
  double u01() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    // Marsaglia polar
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * u01() - 1.0;
      v = 2.0 * u01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Gamma(shape k, scale theta) via Marsaglia-Tsang, with the U^{1/k} boost
  // for k < 1.
  double gamma(double k, double theta = 1.0) {
    if (k < 1.0) {
      const double u = u01();
      return gamma(k + 1.0, theta) * std::pow(u, 1.0 / k);
    }
    const double d = k - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = u01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * theta;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * theta;
    }
  }

  // Poisson by inversion; large means are split using additivity so the
  // multiplicative loop never underflows.
  long poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 600.0) {
      const long half = poisson(0.5 * mean);
      return half + poisson(mean - 0.5 * mean);
    }
    const double l = std::exp(-mean);
    long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= u01();
    } while (p > l);
    return k - 1;
  }

  // N(mu, sd^2) conditioned to (lo, hi), by inverse CDF.
  double truncated_normal(double mu, double sd, double lo, double hi) {
    const double a = normal_cdf(lo, mu, sd);
    const double b = normal_cdf(hi, mu, sd);
    const double u = a + (b - a) * u01();
    const double ucl = std::min(std::max(u, 1e-16), 1.0 - 1e-16);
    const double x = mu + sd * normal_ppf(ucl);
    return std::min(std::max(x, lo), hi);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int r) {
    return (x << r) | (x >> (64 - r));
  }
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace frailmeta

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace piic {

// Deterministic RNG used throughout the library. All distribution transforms
// are implemented here rather than via <random> distributions, whose output
// is not pinned down by the standard; a run must reproduce bit-for-bit from
// its seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // splitmix warmup so that nearby seeds decorrelate
    for (int i = 0; i < 4; ++i) next_u64();
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform on (0,1); never returns 0 or 1
  double uniform() {
    while (true) {
      const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
      if (u > 0.0 && u < 1.0) return u;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; the spare is cached, so draw order matters
  // for reproducibility (it does not matter for correctness)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Student t with integer dof, as normal / sqrt(chi2/dof)
  double student_t(int dof) {
    const double z = normal();
    double chi2 = 0.0;
    for (int k = 0; k < dof; ++k) {
      const double w = normal();
      chi2 += w * w;
    }
    return z / std::sqrt(chi2 / static_cast<double>(dof));
  }

  bool bernoulli(double p) { return uniform() < p; }

  int binomial(int m, double p) {
    int y = 0;
    for (int k = 0; k < m; ++k) y += bernoulli(p) ? 1 : 0;
    return y;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stable seed derivation: master seed plus a purpose tag and up to two indices.
// FNV-1a over the tag, mixed with the indices; used to give every sampler,
// replication and data stream its own independent deterministic stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  };
  mix(master);
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  mix(a);
  mix(b);
  return h;
}

}  // namespace piic

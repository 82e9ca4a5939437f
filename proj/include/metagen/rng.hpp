#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace metagen {

// splitmix64 finalizer; the basis of all seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable seed derivation: a pure function of (master, stream ids), never of
// wall clock or thread id. Campaign cells, trials and inner streams all hang
// off this so any figure can be regenerated from its recorded seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t h = mix64(master ^ 0x6a09e667f3bcc909ULL);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  return h;
}

// mt19937_64 with hand-rolled variate transforms. The engine's output sequence
// is pinned by the standard; std::*_distribution is not, so we avoid it to
// keep seeded runs bit-identical everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // uniform on [0, 1)
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // uniform on (0, 1]
  double uniform01_open0() { return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53; }

  // standard normal via Box-Muller (cosine branch only, stateless)
  double normal() {
    const double u1 = uniform01_open0();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // index in [0, n)
  int uniform_int(int n) {
    const double u = uniform01();
    int k = static_cast<int>(u * n);
    return k >= n ? n - 1 : k;
  }

  bool rademacher_positive() { return (eng_() & 1ULL) != 0; }

  // inverse-CDF walk over a probability vector
  int categorical(std::span<const double> probs) {
    const double u = uniform01();
    double c = 0.0;
    int last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] > 0.0) last_positive = static_cast<int>(i);
      c += probs[i];
      if (u < c) return static_cast<int>(i);
    }
    return last_positive;
  }

  // k distinct indices from [0, n), partial Fisher-Yates, order discarded
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + uniform_int(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace metagen

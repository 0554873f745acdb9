#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace reflectsim {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A draw is a
/// pure function of (key, counter), which makes every Monte Carlo path
/// reproducible from (seed, stream) no matter which worker evaluates it.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t key)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  Block operator()(Block counter) const {
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * counter[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * counter[2];
      counter = {static_cast<std::uint32_t>(p1 >> 32) ^ counter[1] ^ key[0],
                 static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ counter[3] ^ key[1],
                 static_cast<std::uint32_t>(p0)};
    }
    return counter;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  std::array<std::uint32_t, 2> key_;
};

/// SplitMix64 finalizer; used to derive independent seeds for sub-experiments.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag + 0x632BE59BD9B4E019ull));
}

/// Random-access stream of uniforms and standard normals identified by
/// (seed, stream). Index i of the normal sequence is always the same number.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) : gen_(seed), stream_(stream) {}

  /// Two uniforms in (0, 1) with 53-bit resolution from block `block`.
  std::array<double, 2> uniform_pair(std::uint64_t block) const {
    const auto r = gen_({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                         static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)});
    const std::uint64_t a = (std::uint64_t{r[0]} << 32) | r[1];
    const std::uint64_t b = (std::uint64_t{r[2]} << 32) | r[3];
    return {to_unit(a), to_unit(b)};
  }

  double uniform(std::uint64_t index) const { return uniform_pair(index >> 1)[index & 1]; }

  /// Box-Muller pair for block `block`; normal(2b) and normal(2b+1) share it.
  std::array<double, 2> normal_pair(std::uint64_t block) const {
    const auto u = uniform_pair(block);
    const double radius = std::sqrt(-2.0 * std::log(u[0]));
    const double angle = 2.0 * std::numbers::pi * u[1];
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  double normal(std::uint64_t index) const { return normal_pair(index >> 1)[index & 1]; }

  /// Fills `out` with normals first_index, first_index + 1, ...
  void fill_normals(std::span<double> out, std::uint64_t first_index = 0) const {
    std::size_t k = 0;
    std::uint64_t index = first_index;
    if ((index & 1) != 0 && k < out.size()) {
      out[k++] = normal_pair(index >> 1)[1];
      ++index;
    }
    for (; k + 1 < out.size(); k += 2, index += 2) {
      const auto z = normal_pair(index >> 1);
      out[k] = z[0];
      out[k + 1] = z[1];
    }
    if (k < out.size()) out[k] = normal_pair(index >> 1)[0];
  }

 private:
  static double to_unit(std::uint64_t bits) { return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; }

  Philox4x32 gen_;
  std::uint64_t stream_;
};

/// Sequential reader over a RandomStream's normals; caches the second half
/// of each Box-Muller pair.
class NormalSequence {
 public:
  NormalSequence(std::uint64_t seed, std::uint64_t stream, std::uint64_t first_index = 0)
      : stream_(seed, stream), index_(first_index) {}

  double next() {
    if ((index_ & 1) == 0 || !cached_) {
      pair_ = stream_.normal_pair(index_ >> 1);
      cached_ = true;
    }
    const double z = pair_[index_ & 1];
    ++index_;
    if ((index_ & 1) == 0) cached_ = false;
    return z;
  }

 private:
  RandomStream stream_;
  std::uint64_t index_;
  std::array<double, 2> pair_{};
  bool cached_ = false;
};

}  // namespace reflectsim

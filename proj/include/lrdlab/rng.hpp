#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>

namespace lrd {

// Philox 4x32-10 counter-based generator.  A stream is addressed by
// (seed, stream_id); values within a stream are addressed by a 64-bit block
// index, so draws are reproducible and independent of evaluation order at
// the replicate level.
struct Philox4x32 {
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;

  static std::array<std::uint32_t, 4> block(std::uint64_t seed,
                                            std::uint64_t stream,
                                            std::uint64_t index) {
    std::uint32_t k0 = std::uint32_t(seed);
    std::uint32_t k1 = std::uint32_t(seed >> 32);
    std::array<std::uint32_t, 4> c = {
        std::uint32_t(index), std::uint32_t(index >> 32),
        std::uint32_t(stream), std::uint32_t(stream >> 32)};
    for (int round = 0; round < 10; ++round) {
      std::uint64_t p0 = std::uint64_t(kMul0) * c[0];
      std::uint64_t p1 = std::uint64_t(kMul1) * c[2];
      std::array<std::uint32_t, 4> n;
      n[0] = std::uint32_t(p1 >> 32) ^ c[1] ^ k0;
      n[1] = std::uint32_t(p1);
      n[2] = std::uint32_t(p0 >> 32) ^ c[3] ^ k1;
      n[3] = std::uint32_t(p0);
      c = n;
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    return c;
  }
};

// Stream purposes keep draws for distinct sampler paths statistically
// disjoint even when they share (seed, replicate).
enum class StreamPurpose : std::uint64_t {
  FieldDirect = 1,
  FieldCirculant = 2,
  FieldSpectralGrid = 3,
  SpectralIncrements = 4,
  Generic = 5,
};

inline std::uint64_t stream_id(std::uint64_t replicate, StreamPurpose purpose) {
  return (replicate & 0x00FFFFFFFFFFFFFFull) |
         (static_cast<std::uint64_t>(purpose) << 56);
}

// Gaussian stream over the Philox generator (Box-Muller).  Deterministic for
// a given (seed, stream) across platforms and call patterns.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {}

  NormalStream(std::uint64_t seed, std::uint64_t replicate, StreamPurpose p)
      : NormalStream(seed, stream_id(replicate, p)) {}

  std::uint64_t next_u64() {
    if (!have_u64_) {
      auto b = Philox4x32::block(seed_, stream_, index_++);
      pending_u64_ = (std::uint64_t(b[2]) << 32) | b[3];
      have_u64_ = true;
      return (std::uint64_t(b[0]) << 32) | b[1];
    }
    have_u64_ = false;
    return pending_u64_;
  }

  // Uniform in (0,1].
  double next_uniform() {
    return (double(next_u64() >> 11) + 1.0) * 0x1p-53;
  }

  double next_normal() {
    if (have_normal_) {
      have_normal_ = false;
      return pending_normal_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    pending_normal_ = r * std::sin(a);
    have_normal_ = true;
    return r * std::cos(a);
  }

  // Complex normal with E z conj(z) = 1, E z^2 = 0 (real and imaginary parts
  // independent N(0, 1/2)).
  std::complex<double> next_complex_normal() {
    static const double inv_sqrt2 = 0.70710678118654752440;
    double re = next_normal();
    double im = next_normal();
    return {re * inv_sqrt2, im * inv_sqrt2};
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  std::uint64_t pending_u64_ = 0;
  bool have_u64_ = false;
  double pending_normal_ = 0.0;
  bool have_normal_ = false;
};

}  // namespace lrd

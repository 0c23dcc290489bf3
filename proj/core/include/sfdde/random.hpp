#pragma once

#include <array>
#include <cstdint>

namespace sfdde {

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter encrypt(Counter counter, Key key) noexcept;
};

/// What a substream is used for. Jump substreams are offset by component.
enum class StreamPurpose : std::uint32_t {
  Brownian = 1,
  Substitute = 2,  // the auxiliary Brownian motion B of the approximating model
  Probe = 3,       // test and diagnostic draws
  Jumps = 64,      // + component index
};

constexpr std::uint32_t jump_purpose(int component) noexcept {
  return static_cast<std::uint32_t>(StreamPurpose::Jumps) + static_cast<std::uint32_t>(component);
}

/// A deterministic random stream identified by (seed, path, purpose). Two
/// streams with different identifiers never share counter values, so draws are
/// independent of scheduling and thread count.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t path, std::uint32_t purpose) noexcept;
  RandomStream(std::uint64_t seed, std::uint64_t path, StreamPurpose purpose) noexcept
      : RandomStream(seed, path, static_cast<std::uint32_t>(purpose)) {}

  std::uint32_t next_u32() noexcept;
  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal (Box-Muller; consumes uniforms in pairs).
  double normal() noexcept;
  /// Exponential with unit rate.
  double exponential() noexcept;

 private:
  void refill() noexcept;

  Philox4x32::Key key_;
  Philox4x32::Counter counter_;
  std::array<std::uint32_t, 4> block_{};
  int position_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sfdde

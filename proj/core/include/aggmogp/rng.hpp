#pragma once

#include <array>
#include <cstdint>

namespace aggmogp {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Stream identifiers. Every consumer of randomness draws from its own
/// stream so that adding draws in one place never shifts another.
namespace streams {
inline constexpr std::uint64_t kInit = 0x1ull << 40;
inline constexpr std::uint64_t kTrain = 0x2ull << 40;       // + iteration
inline constexpr std::uint64_t kPredict = 0x3ull << 40;     // + domain
inline constexpr std::uint64_t kSynth = 0x4ull << 40;       // + purpose
inline constexpr std::uint64_t kElboCheck = 0x5ull << 40;   // + call index
} // namespace streams

/// Counter-based generator: the output depends only on (seed, stream, draw
/// index), never on thread scheduling or on other streams.
///
/// The counter word layout is {index lo, index hi, stream lo, stream hi}; the
/// key is the seed. Normals come from Box-Muller on consecutive uniform
/// pairs, both outputs used in order.
class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() noexcept;
  double normal() noexcept;
  std::uint32_t next_u32() noexcept;

private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

} // namespace aggmogp

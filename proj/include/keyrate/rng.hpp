#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace keyrate {

/// Generators a stream can name. Only one is implemented; the id is carried
/// in run manifests so a future generator cannot silently change results.
enum class RngAlgorithm : std::uint8_t { philox4x32_10 };

std::string_view to_string(RngAlgorithm algorithm);

/**
 * Identifies one independent random sequence.
 *
 * The sequence is a pure function of (algorithm, seed, substream): draw i is
 * computed from a counter, so any slice of a stream can be produced on any
 * worker without replaying the draws before it.
 */
struct RngStream {
  RngAlgorithm algorithm = RngAlgorithm::philox4x32_10;
  std::uint64_t seed = 0;
  std::uint64_t substream = 0;

  friend bool operator==(const RngStream&, const RngStream&) = default;
};

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter counter, Key key);
};

/**
 * Random-access uniform source over an RngStream.
 *
 * Uniforms live on the lattice (2k+1)·2⁻⁵³, k < 2⁵², so every draw is in the
 * open interval (0,1) and 1-u is exactly representable on the same lattice
 * (antithetic partners need that).
 */
class UniformSource {
 public:
  explicit UniformSource(RngStream stream, std::uint64_t position = 0);

  /// Uniform number `index` of the stream. Does not move the cursor.
  [[nodiscard]] double at(std::uint64_t index) const;

  double next();

  void seek(std::uint64_t position) { position_ = position; }
  [[nodiscard]] std::uint64_t position() const { return position_; }
  [[nodiscard]] const RngStream& stream() const { return stream_; }

 private:
  RngStream stream_;
  Philox4x32::Key key_;
  std::uint64_t position_;
  // One Philox block yields two uniforms; cache the last block.
  mutable std::uint64_t cached_block_ = ~std::uint64_t{0};
  mutable std::array<double, 2> cached_{};
};

/// Maps 52 random bits onto the midpoint lattice described above.
constexpr double uniform_from_bits(std::uint64_t bits) {
  constexpr double kScale = 1.0 / 4503599627370496.0;  // 2^-52
  return (static_cast<double>(bits >> 12) + 0.5) * kScale;
}

}  // namespace keyrate

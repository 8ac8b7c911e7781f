#include "keyrate/rng.hpp"

namespace keyrate {

std::string_view to_string(RngAlgorithm algorithm) {
  switch (algorithm) {
    case RngAlgorithm::philox4x32_10:
      return "philox4x32-10";
  }
  return "unknown";
}

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

UniformSource::UniformSource(RngStream stream, std::uint64_t position)
    : stream_(stream),
      key_{static_cast<std::uint32_t>(stream.seed), static_cast<std::uint32_t>(stream.seed >> 32)},
      position_(position) {}

double UniformSource::at(std::uint64_t index) const {
  const std::uint64_t block_index = index >> 1;
  if (block_index != cached_block_) {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_index),
                                  static_cast<std::uint32_t>(block_index >> 32),
                                  static_cast<std::uint32_t>(stream_.substream),
                                  static_cast<std::uint32_t>(stream_.substream >> 32)};
    const auto out = Philox4x32::block(ctr, key_);
    cached_[0] = uniform_from_bits((static_cast<std::uint64_t>(out[0]) << 32) | out[1]);
    cached_[1] = uniform_from_bits((static_cast<std::uint64_t>(out[2]) << 32) | out[3]);
    cached_block_ = block_index;
  }
  return cached_[index & 1];
}

double UniformSource::next() { return at(position_++); }

}  // namespace keyrate

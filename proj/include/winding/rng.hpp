#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace winding {

// Philox4x32-10 (Salmon et al., SC'11).  A block is a pure function of
// (key, counter), so every stream can be positioned without state.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
    ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
           std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

// One reproducible random stream: the master seed is the Philox key and
// the stream id occupies the upper half of the counter.
class RngStream {
public:
  using result_type = std::uint32_t;

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : seed_(master_seed), id_(stream_id),
        key_{std::uint32_t(master_seed), std::uint32_t(master_seed >> 32)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  // uniform on the open interval (0, 1)
  double uniform() {
    const std::uint64_t hi = (*this)();
    const std::uint64_t lo = (*this)();
    return (double(((hi << 32) | lo) >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_(*this); }

  std::uint64_t master_seed() const { return seed_; }
  std::uint64_t stream_id() const { return id_; }

private:
  void refill() {
    buf_ = philox4x32({std::uint32_t(block_), std::uint32_t(block_ >> 32), std::uint32_t(id_),
                       std::uint32_t(id_ >> 32)},
                      key_);
    ++block_;
    pos_ = 0;
  }

  std::uint64_t seed_, id_;
  std::array<std::uint32_t, 2> key_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  boost::random::normal_distribution<double> normal_;
};

}  // namespace winding

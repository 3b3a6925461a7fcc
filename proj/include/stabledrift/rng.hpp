#pragma once

// Counter-based random streams: Philox4x32-10 keyed by the run seed, with
// the stream id (path index) and a draw counter in the counter block. Any
// stream can be generated independently of every other one, so results do
// not depend on scheduling.

#include <array>
#include <cstdint>
#include <limits>

namespace sdrift::rng {

using Block = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

Block philox4x32_10(Block ctr, Key key);

// Stream ids used by different consumers of one seed.
inline constexpr std::uint64_t kChainStreamBase = 1ull << 62;

class Stream {
public:
    using result_type = std::uint64_t;

    Stream(std::uint64_t seed, std::uint64_t stream_id);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();
    // Uniform on the open interval (0, 1), 53 random bits.
    double uniform();
    // Uniform on (lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double exponential();
    // Standard normal (Box-Muller, both values used).
    double normal();

    std::uint64_t blocks_used() const { return counter_; }

private:
    Key key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    Block buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace sdrift::rng

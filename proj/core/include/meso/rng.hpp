#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace meso {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Output is a pure function of (key, counter). Every random quantity in the
/// library is addressed by a counter, so sharding work across threads or
/// restricting a realization to a sub-box never changes a drawn value.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept;
};

/// 64-bit seed of one realization or stream.
struct SeedRecord {
    std::uint64_t value = 0;
    friend bool operator==(SeedRecord, SeedRecord) = default;
};

/// Derive a child seed from a parent seed and a list of tags
/// (experiment id, L, replicate index, ...). Order of tags matters.
SeedRecord derive_seed(SeedRecord parent, std::initializer_list<std::uint64_t> tags) noexcept;

/// Stable 64-bit tag for a string (FNV-1a). Used to turn names into seed tags
/// and config text into a run hash.
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Uniform double in [0,1) with 53 random bits, addressed by (seed, counter).
double uniform01(SeedRecord seed, const Philox4x32::Counter& ctr) noexcept;

/// Sequential engine over a Philox stream. Satisfies UniformRandomBitGenerator
/// so standard distributions can draw from it; two engines with the same
/// (seed, stream) produce the same sequence.
class PhiloxEngine {
public:
    using result_type = std::uint32_t;

    PhiloxEngine(SeedRecord seed, std::uint32_t stream) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;
    double uniform() noexcept;

private:
    Philox4x32::Key key_;
    Philox4x32::Counter ctr_;
    Philox4x32::Counter block_{};
    int used_ = 4;
};

}  // namespace meso

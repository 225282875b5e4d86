#include "meso/rng.hpp"

#include <string_view>

namespace meso {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline Philox4x32::Counter round(const Philox4x32::Counter& c, const Philox4x32::Key& k) noexcept {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline Philox4x32::Key split(std::uint64_t v) noexcept {
    return {static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v >> 32)};
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
    return static_cast<double>(bits & ((std::uint64_t{1} << 53) - 1)) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) noexcept {
    for (int r = 0; r < 10; ++r) {
        if (r > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        ctr = round(ctr, key);
    }
    return ctr;
}

SeedRecord derive_seed(SeedRecord parent, std::initializer_list<std::uint64_t> tags) noexcept {
    std::uint64_t state = parent.value;
    std::uint32_t position = 0;
    for (std::uint64_t tag : tags) {
        const auto out = Philox4x32::generate(
            {static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32), position, 0x5eedu},
            split(state));
        state = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
        ++position;
    }
    return SeedRecord{state};
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

double uniform01(SeedRecord seed, const Philox4x32::Counter& ctr) noexcept {
    const auto out = Philox4x32::generate(ctr, split(seed.value));
    return to_unit(out[0], out[1]);
}

PhiloxEngine::PhiloxEngine(SeedRecord seed, std::uint32_t stream) noexcept
    : key_(split(seed.value)), ctr_{0, 0, stream, 0xE7u} {}

PhiloxEngine::result_type PhiloxEngine::operator()() noexcept {
    if (used_ == 4) {
        block_ = Philox4x32::generate(ctr_, key_);
        if (++ctr_[0] == 0) ++ctr_[1];
        used_ = 0;
    }
    return block_[used_++];
}

double PhiloxEngine::uniform() noexcept {
    const std::uint32_t hi = (*this)();
    const std::uint32_t lo = (*this)();
    return to_unit(hi, lo);
}

}  // namespace meso

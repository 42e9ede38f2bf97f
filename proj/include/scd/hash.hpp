#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace scd {

// FNV-1a, 64-bit. Used for run fingerprints, not for security.
class Fnv1a {
  public:
    Fnv1a& update(std::span<const std::uint8_t> bytes) noexcept {
        for (auto b : bytes) {
            state_ ^= b;
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Fnv1a& update(std::string_view text) noexcept {
        return update(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }
    template <typename T>
    Fnv1a& update_pod(const T& value) noexcept {
        return update(std::span(reinterpret_cast<const std::uint8_t*>(&value), sizeof(T)));
    }
    std::uint64_t digest() const noexcept { return state_; }
    std::string hex() const;

  private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string Fnv1a::hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = state_;
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    return out;
}

// Mixes a base seed with stream indices so that every consumer gets its own RNG.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

}  // namespace scd

#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "irkey/channel.hpp"

namespace irkey {

enum class Scheme { none, s1, s2 };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view s);

struct EncState {
    std::uint8_t key = 0;
    std::uint8_t counter = 0;
};

std::pair<std::uint8_t, EncState> encrypt(Scheme scheme, std::uint8_t tap, EncState state);
std::pair<std::uint8_t, EncState> decrypt(Scheme scheme, std::uint8_t cipher, EncState state);

// Seeded 8-bit key source.
std::uint8_t generate_key(std::uint64_t seed);

KeyboardLayout shuffle_layout(const KeyboardLayout& layout, std::uint64_t seed);

struct DefenseConfig {
    Scheme scheme = Scheme::none;
    std::uint64_t key_seed = 1;
    bool shuffle = false;
    std::uint64_t shuffle_seed = 1;
};

// Press frames carry encrypted payloads; scheme 2 also sends a counter-sync
// frame after each tap.
std::vector<TapFrames> apply_encryption_to_session(const TypingScript& script, const DefenseConfig& cfg);

}  // namespace irkey

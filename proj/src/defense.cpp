#include "irkey/defense.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "irkey/errors.hpp"

namespace irkey {

std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::none: return "none";
        case Scheme::s1: return "s1";
        case Scheme::s2: return "s2";
    }
    return "none";
}

Scheme parse_scheme(std::string_view s) {
    for (auto k : {Scheme::none, Scheme::s1, Scheme::s2})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown defense scheme: " + std::string(s));
}

std::pair<std::uint8_t, EncState> encrypt(Scheme scheme, std::uint8_t tap, EncState state) {
    switch (scheme) {
        case Scheme::none: return {tap, state};
        case Scheme::s1: return {static_cast<std::uint8_t>(tap ^ state.key), state};
        case Scheme::s2: {
            auto pad = static_cast<std::uint8_t>((state.key + state.counter) % 256);
            EncState next = state;
            next.counter = static_cast<std::uint8_t>(state.counter + 1);
            return {static_cast<std::uint8_t>(tap ^ pad), next};
        }
    }
    return {tap, state};
}

std::pair<std::uint8_t, EncState> decrypt(Scheme scheme, std::uint8_t cipher, EncState state) {
    return encrypt(scheme, cipher, state);
}

std::uint8_t generate_key(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return static_cast<std::uint8_t>(rng() >> 56);
}

KeyboardLayout shuffle_layout(const KeyboardLayout& layout, std::uint64_t seed) {
    KeyboardLayout out = layout;
    std::vector<std::size_t> slots;
    std::vector<KeyId> ids;
    for (std::size_t i = 0; i < out.keys.size(); ++i) {
        if (out.keys[i].id == KeyId::Space) continue;
        slots.push_back(i);
        ids.push_back(out.keys[i].id);
    }
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit bounded draw so the permutation is portable.
    for (std::size_t i = ids.size(); i > 1; --i) {
        std::uint64_t bound = i, x;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        do x = rng();
        while (x >= limit);
        std::swap(ids[i - 1], ids[static_cast<std::size_t>(x % bound)]);
    }
    for (std::size_t j = 0; j < slots.size(); ++j) out.keys[slots[j]].id = ids[j];
    return out;
}

std::vector<TapFrames> apply_encryption_to_session(const TypingScript& script, const DefenseConfig& cfg) {
    auto frames = plain_payloads(script);
    if (cfg.scheme == Scheme::none) return frames;
    EncState st{generate_key(cfg.key_seed), 0};
    for (auto& f : frames) {
        auto [cipher, next] = encrypt(cfg.scheme, f.press.command, st);
        f.press.command = cipher;
        if (cfg.scheme == Scheme::s2) f.sync = FramePayload{0x01, next.counter};
        st = next;
    }
    return frames;
}

}  // namespace irkey

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <bitset>
#include <map>
#include <set>

#include "irkey/defense.hpp"
#include "irkey/errors.hpp"

using namespace irkey;

namespace {

// Bitwise XOR spelled out one bit at a time.
std::uint8_t xor_bits(std::uint8_t a, std::uint8_t b) {
    std::bitset<8> x(a), y(b), out;
    for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] != y[static_cast<std::size_t>(i)];
    return static_cast<std::uint8_t>(out.to_ulong());
}

std::uint64_t seed_with_key(std::uint8_t key) {
    for (std::uint64_t s = 0;; ++s)
        if (generate_key(s) == key) return s;
}

}  // namespace

TEST_CASE("encrypt examples", "[defense][enc]") {
    REQUIRE(encrypt(Scheme::s1, 0x00, {0x00, 0}).first == 0x00);
    REQUIRE(encrypt(Scheme::s1, 0xAB, {0xFF, 0}).first == 0x54);
    auto [c, next] = encrypt(Scheme::s2, 0x41, {0x10, 0x05});
    REQUIRE(c == xor_bits(0x41, 0x15));
    REQUIRE(c == 0x54);
    REQUIRE(next.counter == 0x06);
    REQUIRE(next.key == 0x10);
    REQUIRE(encrypt(Scheme::s1, 0x12, {0x34, 9}).second.counter == 9);
    REQUIRE(encrypt(Scheme::none, 0x77, {0x34, 0}).first == 0x77);
    REQUIRE(parse_scheme("s2") == Scheme::s2);
    REQUIRE_THROWS_AS(parse_scheme("rot13"), ConfigError);
}

TEST_CASE("scheme 1 round trips exhaustively", "[defense][enc]") {
    int ok = 0;
    for (int tap = 0; tap < 256; ++tap)
        for (int key = 0; key < 256; ++key) {
            EncState st{static_cast<std::uint8_t>(key), 0};
            auto [c, s1] = encrypt(Scheme::s1, static_cast<std::uint8_t>(tap), st);
            REQUIRE(c == xor_bits(static_cast<std::uint8_t>(tap), static_cast<std::uint8_t>(key)));
            ok += decrypt(Scheme::s1, c, st).first == tap;
        }
    REQUIRE(ok == 65536);
}

TEST_CASE("scheme 2 round trips through counter wraparound", "[defense][enc]") {
    for (int key : {0x00, 0x10, 0xFF}) {
        for (int start : {0, 200, 255}) {
            EncState enc{static_cast<std::uint8_t>(key), static_cast<std::uint8_t>(start)};
            EncState dec = enc;
            bool wrapped = false;
            for (int i = 0; i < 300; ++i) {
                auto tap = static_cast<std::uint8_t>((i * 37 + 11) & 0xFF);
                auto [c, e2] = encrypt(Scheme::s2, tap, enc);
                auto [p, d2] = decrypt(Scheme::s2, c, dec);
                REQUIRE(p == tap);
                REQUIRE(e2.counter == d2.counter);
                REQUIRE(e2.counter == static_cast<std::uint8_t>(enc.counter + 1));
                wrapped |= e2.counter == 0;
                enc = e2;
                dec = d2;
            }
            REQUIRE(wrapped);
        }
    }
    SECTION("every tap, every counter") {
        for (int tap = 0; tap < 256; ++tap)
            for (int ctr = 0; ctr < 256; ++ctr) {
                EncState st{0x5A, static_cast<std::uint8_t>(ctr)};
                REQUIRE(decrypt(Scheme::s2, encrypt(Scheme::s2, static_cast<std::uint8_t>(tap), st).first, st).first == tap);
            }
    }
}

TEST_CASE("scheme 2 payload period is exactly 256", "[defense][enc]") {
    EncState st{0x3C, 0};
    std::vector<std::uint8_t> seq;
    for (int i = 0; i < 1024; ++i) {
        auto [c, n] = encrypt(Scheme::s2, 0x41, st);
        seq.push_back(c);
        st = n;
    }
    int period = 0;
    for (int p = 1; p <= 512 && !period; ++p) {
        bool ok = true;
        for (std::size_t i = 0; i + static_cast<std::size_t>(p) < seq.size() && ok; ++i) ok = seq[i] == seq[i + static_cast<std::size_t>(p)];
        if (ok) period = p;
    }
    REQUIRE(period == 256);
}

TEST_CASE("desynchronized counter breaks decryption", "[defense][enc]") {
    EncState enc{0x10, 0x05};
    EncState off{0x10, 0x06};
    int broken = 0;
    for (int tap = 0; tap < 256; ++tap) {
        auto c = encrypt(Scheme::s2, static_cast<std::uint8_t>(tap), enc).first;
        broken += decrypt(Scheme::s2, c, off).first != tap;
    }
    REQUIRE(broken == 256);
}

TEST_CASE("shuffle_layout", "[defense][shuffle]") {
    auto base = build_default_layout();
    auto a = shuffle_layout(base, 42);
    auto b = shuffle_layout(base, 42);
    REQUIRE(layout_to_json(a) == layout_to_json(b));
    a.validate();

    std::multiset<int> ids_a, ids_base;
    for (const auto& k : a.keys) ids_a.insert(key_index(k.id));
    for (const auto& k : base.keys) ids_base.insert(key_index(k.id));
    REQUIRE(ids_a == ids_base);

    // rectangles are untouched, only labels move
    REQUIRE(a.keys.size() == base.keys.size());
    for (std::size_t i = 0; i < a.keys.size(); ++i) {
        REQUIRE(a.keys[i].center == base.keys[i].center);
        REQUIRE(a.keys[i].half_extent == base.keys[i].half_extent);
    }
    REQUIRE(a.rect(KeyId::Space).center == base.rect(KeyId::Space).center);
    REQUIRE(layout_to_json(shuffle_layout(base, 43)) != layout_to_json(a));

    SECTION("a letter keeps its slot about once in 30 seeds") {
        for (KeyId k : {KeyId::A, KeyId::Q, KeyId::M}) {
            int kept = 0;
            for (std::uint64_t s = 0; s < 1000; ++s)
                kept += shuffle_layout(base, s).rect(k).center == base.rect(k).center;
            REQUIRE(std::abs(kept / 1000.0 - 1.0 / 30.0) <= 0.01);
        }
    }
}

TEST_CASE("session encryption", "[defense][session]") {
    auto script = make_script(keys_from_text("aa"), SpeedClass::medium, 5);
    auto plain = plain_payloads(script);

    SECTION("scheme 1 with a zero key is the undefended session") {
        DefenseConfig cfg{Scheme::s1, seed_with_key(0x00), false, 1};
        auto frames = apply_encryption_to_session(script, cfg);
        for (std::size_t i = 0; i < frames.size(); ++i) {
            REQUIRE(frames[i].press.command == plain[i].press.command);
            REQUIRE_FALSE(frames[i].sync.has_value());
        }
        SimScenario sc;
        auto x = simulate_session_full(sc, script, &frames);
        auto y = simulate_session_full(sc, script);
        REQUIRE(x.traces.traces.size() == y.traces.traces.size());
        for (std::size_t i = 0; i < x.traces.traces.size(); ++i) REQUIRE(x.traces.traces[i].volts == y.traces.traces[i].volts);
    }
    SECTION("scheme 2 gives identical taps different payloads") {
        DefenseConfig cfg{Scheme::s2, 3, false, 1};
        auto frames = apply_encryption_to_session(script, cfg);
        REQUIRE(frames.size() == 2);
        REQUIRE(plain[0].press.command == plain[1].press.command);
        REQUIRE(frames[0].press.command != frames[1].press.command);
        REQUIRE(frames[0].sync.has_value());
        REQUIRE(frames[0].sync->command == 1);
        REQUIRE(frames[1].sync->command == 2);
        // the legitimate receiver recovers both taps
        EncState st{generate_key(3), 0};
        for (const auto& f : frames) {
            auto [p, n] = decrypt(Scheme::s2, f.press.command, st);
            REQUIRE(p == plain[0].press.command);
            st = n;
        }
    }
    SECTION("keys are deterministic per seed") {
        REQUIRE(generate_key(9) == generate_key(9));
        std::set<int> seen;
        for (std::uint64_t s = 0; s < 2000; ++s) seen.insert(generate_key(s));
        REQUIRE(seen.size() == 256);
    }
}

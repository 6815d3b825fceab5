// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>

#include "common/rng.hpp"

using propcredit::CounterRng;
using propcredit::make_stream;
using propcredit::philox4x32;
using propcredit::StreamTag;

TEST_SUITE("rng") {

TEST_CASE("philox known answers") {
    using Block = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are independent of each other's draws") {
    CounterRng a(7, 3);
    CounterRng noisy(7, 4);
    for (int i = 0; i < 1000; ++i) noisy.normal();
    CounterRng b(7, 3);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());

    CounterRng c(7, 5);
    CounterRng d(8, 3);
    CounterRng e(7, 3);
    const double x = e.uniform();
    CHECK(c.uniform() != x);
    CHECK(d.uniform() != x);
}

TEST_CASE("uniform range and normal moments") {
    CounterRng rng(1, make_stream(StreamTag::Test, 1));
    double lo = 1.0, hi = 0.0, sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("stream ids do not collide across tags") {
    std::set<std::uint64_t> ids;
    for (auto tag : {StreamTag::Rollout, StreamTag::Pretrain, StreamTag::Init, StreamTag::Evaluation,
                     StreamTag::Subsample, StreamTag::Minibatch, StreamTag::Test}) {
        for (std::uint64_t a = 0; a < 4; ++a) {
            for (std::uint64_t b = 0; b < 4; ++b) ids.insert(make_stream(tag, a, b));
        }
    }
    CHECK(ids.size() == 7 * 16);
}

}

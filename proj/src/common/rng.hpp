// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

namespace propcredit {

// Philox4x32-10 block function. Counter-based: the output depends only on
// (counter, key), so any stream can be positioned without replaying others.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Stream of uniforms/normals keyed by a run seed and a stream id.
///
/// Two streams with different ids never share blocks; a stream's draws do not
/// depend on how many draws other streams made, which keeps parallel or
/// reordered rollouts reproducible.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    /// Uniform in (0, 1) with 53 bits of resolution; never returns 0.
    double uniform();
    double normal();

    std::uint64_t stream() const { return m_stream; }

private:
    void refill();

    std::array<std::uint32_t, 2> m_key;
    std::uint64_t m_stream;
    std::uint64_t m_block = 0;
    std::array<std::uint32_t, 4> m_buffer{};
    int m_used = 4;
    bool m_has_spare = false;
    double m_spare = 0.0;
};

/// Stream ids used across the toy harness. Keeps the tag in the top byte so
/// ids from different purposes cannot collide.
enum class StreamTag : std::uint64_t {
    Rollout = 1,
    Pretrain = 2,
    Init = 3,
    Evaluation = 4,
    Subsample = 5,
    Minibatch = 6,
    Test = 7,
};

constexpr std::uint64_t make_stream(StreamTag tag, std::uint64_t major, std::uint64_t minor = 0) {
    return (static_cast<std::uint64_t>(tag) << 56) | ((major & 0xffffffULL) << 32) | (minor & 0xffffffffULL);
}

}  // namespace propcredit

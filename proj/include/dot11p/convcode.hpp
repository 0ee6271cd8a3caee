#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dot11p/types.hpp"

namespace dot11p {

// Rate-1/2 convolutional code, constraint length 7, generators 133/171
// (octal), zero-tail terminated. Output bits are interleaved (g0, g1) per
// input bit.
namespace convcode {

constexpr int kConstraintLength = 7;
constexpr int kMemory = kConstraintLength - 1;
constexpr int kStates = 1 << kMemory;
constexpr unsigned kGen0 = 0133;  // taps at delays 0,2,3,5,6
constexpr unsigned kGen1 = 0171;  // taps at delays 0,1,2,3,6

inline int parity(unsigned x) { return __builtin_popcount(x) & 1; }

// State packs the previous kMemory inputs, newest in the MSB, so that
// (input << 6) | state lines up with the generator polynomials (whose MSB is
// the delay-0 tap).
inline std::uint8_t output_pair(int state, int bit) {
    unsigned window = (static_cast<unsigned>(bit) << kMemory) | static_cast<unsigned>(state);
    return static_cast<std::uint8_t>((parity(window & kGen0) << 1) | parity(window & kGen1));
}

inline int next_state(int state, int bit) {
    return (state >> 1) | (bit << (kMemory - 1));
}

struct Tables {
    // [state][input] -> 2 coded bits (g0 in bit1, g1 in bit0) and next state
    std::array<std::array<std::uint8_t, 2>, kStates> out;
    std::array<std::array<std::uint8_t, 2>, kStates> next;
    Tables() {
        for (int s = 0; s < kStates; ++s) {
            for (int u = 0; u < 2; ++u) {
                out[s][u] = output_pair(s, u);
                next[s][u] = static_cast<std::uint8_t>(next_state(s, u));
            }
        }
    }
};

inline const Tables& tables() {
    static const Tables t;
    return t;
}

}  // namespace convcode

/// Encodes with zero-tail termination; output length is
/// 2 * (bits.size() + constraint_length - 1).
inline bitvec conv_encode(const bitvec& bits) {
    if (bits.empty()) throw std::invalid_argument("conv_encode: empty input");
    const auto& t = convcode::tables();
    bitvec out;
    out.reserve(2 * (bits.size() + convcode::kMemory));
    int state = 0;
    auto push = [&](int u) {
        std::uint8_t pair = t.out[state][u];
        out.push_back((pair >> 1) & 1);
        out.push_back(pair & 1);
        state = t.next[state][u];
    };
    for (auto b : bits) push(b & 1);
    for (int i = 0; i < convcode::kMemory; ++i) push(0);
    return out;
}

namespace convcode {

// Viterbi over per-bit metrics. llr > 0 favors bit 0; ties between
// predecessors resolve toward the lower-indexed state. Expects a zero-tail
// terminated stream and strips the tail from the decoded output.
inline bitvec viterbi(const std::vector<double>& llrs) {
    if (llrs.size() % 2 != 0) throw std::invalid_argument("viterbi_decode: odd-length input");
    const std::size_t steps = llrs.size() / 2;
    if (steps <= static_cast<std::size_t>(kMemory))
        throw std::invalid_argument("viterbi_decode: shorter than termination tail");

    const auto& t = tables();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> metric(kStates, kInf), next_metric(kStates, kInf);
    metric[0] = 0.0;  // encoder starts in the zero state
    std::vector<std::uint8_t> from(steps * kStates);

    for (std::size_t i = 0; i < steps; ++i) {
        double l0 = llrs[2 * i], l1 = llrs[2 * i + 1];
        std::fill(next_metric.begin(), next_metric.end(), kInf);
        std::uint8_t* bp = &from[i * kStates];
        for (int s = 0; s < kStates; ++s) {
            if (metric[s] == kInf) continue;
            for (int u = 0; u < 2; ++u) {
                std::uint8_t pair = t.out[s][u];
                double cost = metric[s] + ((pair & 2) ? l0 : -l0) + ((pair & 1) ? l1 : -l1);
                int ns = t.next[s][u];
                if (cost < next_metric[ns]) {  // strict: first (lowest) predecessor wins ties
                    next_metric[ns] = cost;
                    bp[ns] = static_cast<std::uint8_t>(s);
                }
            }
        }
        metric.swap(next_metric);
    }

    // zero-tail termination ends in state 0; the input bit of each winning
    // transition sits in the MSB of the post-transition state
    bitvec decoded(steps);
    int state = 0;
    for (std::size_t i = steps; i-- > 0;) {
        decoded[i] = static_cast<std::uint8_t>((state >> (kMemory - 1)) & 1);
        state = from[i * kStates + state];
    }
    decoded.resize(steps - kMemory);
    return decoded;
}

}  // namespace convcode

/// Hard-decision decode: bits are converted to unit-magnitude metrics.
inline bitvec viterbi_decode(const bitvec& coded) {
    std::vector<double> llrs(coded.size());
    for (std::size_t i = 0; i < coded.size(); ++i) llrs[i] = coded[i] ? -1.0 : 1.0;
    return convcode::viterbi(llrs);
}

/// Soft-decision decode from per-bit LLRs (positive = bit 0 more likely).
inline bitvec viterbi_decode(const std::vector<double>& llrs) {
    return convcode::viterbi(llrs);
}

}  // namespace dot11p

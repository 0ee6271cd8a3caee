#include <gtest/gtest.h>

#include "dot11p/convcode.hpp"
#include "dot11p/rng.hpp"

using namespace dot11p;

TEST(ConvEncode, AllZeroInputGivesAllZeroOutput) {
    for (std::size_t len : {1u, 7u, 100u}) {
        bitvec zeros(len, 0);
        bitvec coded = conv_encode(zeros);
        ASSERT_EQ(coded.size(), 2 * (len + 6));
        for (auto b : coded) EXPECT_EQ(b, 0);
    }
}

TEST(ConvEncode, ImpulseResponseIsInterleavedGeneratorTaps) {
    // hand-run of the shift register for input {1} plus the zero tail:
    // g0 = 133 octal -> taps 1,0,1,1,0,1,1 over delays 0..6
    // g1 = 171 octal -> taps 1,1,1,1,0,0,1
    bitvec impulse = {1};
    bitvec expected = {1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1};
    EXPECT_EQ(conv_encode(impulse), expected);
}

TEST(ConvEncode, Linearity) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t len = 1 + rng.below(200);
        bitvec a = random_bits(len, rng), b = random_bits(len, rng), x(len);
        for (std::size_t i = 0; i < len; ++i) x[i] = a[i] ^ b[i];
        bitvec ca = conv_encode(a), cb = conv_encode(b), cx = conv_encode(x);
        for (std::size_t i = 0; i < cx.size(); ++i) ASSERT_EQ(cx[i], ca[i] ^ cb[i]);
    }
}

TEST(ConvEncode, RejectsEmptyInput) { EXPECT_THROW(conv_encode({}), std::invalid_argument); }

TEST(ViterbiDecode, NoiselessRoundTrip) {
    Rng rng(11);
    bitvec payload = random_bits(1000, rng);
    EXPECT_EQ(viterbi_decode(conv_encode(payload)), payload);
}

TEST(ViterbiDecode, AllZeroStreamDecodesToZeros) {
    bitvec coded(2 * (50 + 6), 0);
    bitvec decoded = viterbi_decode(coded);
    ASSERT_EQ(decoded.size(), 50u);
    for (auto b : decoded) EXPECT_EQ(b, 0);
}

TEST(ViterbiDecode, CorrectsSingleFlippedBit) {
    // free distance 10 comfortably covers one coded-bit error
    Rng rng(13);
    bitvec payload = random_bits(100, rng);
    bitvec coded = conv_encode(payload);
    for (int pos : {0, 57, static_cast<int>(coded.size()) - 1}) {
        bitvec corrupted = coded;
        corrupted[pos] ^= 1;
        EXPECT_EQ(viterbi_decode(corrupted), payload) << "flip at " << pos;
    }
}

TEST(ViterbiDecode, SoftMetricsOutweighWeakBits) {
    Rng rng(17);
    bitvec payload = random_bits(200, rng);
    bitvec coded = conv_encode(payload);
    std::vector<double> llrs(coded.size());
    for (std::size_t i = 0; i < coded.size(); ++i) llrs[i] = coded[i] ? -1.0 : 1.0;
    // a handful of confidently wrong bits plus weak correct neighbours
    for (std::size_t i = 40; i < 44; i += 2) {
        llrs[i] = coded[i] ? 0.4 : -0.4;
        llrs[i + 1] *= 0.1;
    }
    EXPECT_EQ(viterbi_decode(llrs), payload);
}

TEST(ViterbiDecode, RejectsOddLength) {
    std::vector<double> odd(15, 1.0);
    EXPECT_THROW(viterbi_decode(odd), std::invalid_argument);
}

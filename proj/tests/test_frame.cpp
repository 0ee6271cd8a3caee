#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "dot11p/frame.hpp"
#include "dot11p/rng.hpp"

using namespace dot11p;

namespace {

const FrameLayout kLayout = FrameLayout::ieee80211p();
const Constellation kQpsk = Constellation::make(Constellation::Order::qpsk);
const Constellation kQam16 = Constellation::make(Constellation::Order::qam16);

// independent nearest-point oracle: exact min distance, then lowest label
unsigned oracle_nearest(cplx z, const Constellation& c) {
    double best = 1e300;
    for (const auto& p : c.points) best = std::min(best, std::norm(z - p));
    for (unsigned lab = 0; lab < c.points.size(); ++lab)
        if (std::norm(z - c.points[lab]) <= best + 1e-15) return lab;
    return 0;
}

}  // namespace

TEST(FrameLayout, PaperConstants) {
    EXPECT_EQ(kLayout.total_subcarriers, 64);
    EXPECT_EQ(kLayout.n_active(), 52);
    EXPECT_EQ(kLayout.n_data(), 48);
    EXPECT_EQ(kLayout.n_pilots(), 4);
    EXPECT_EQ(kLayout.null_bins.size(), 12u);
    EXPECT_EQ(kLayout.symbols_per_frame, 50);
}

TEST(FrameLayout, IndexSetInvariants) {
    auto strictly_increasing = [](const std::vector<int>& v) {
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i] <= v[i - 1]) return false;
        return v.empty() || (v.front() >= 0 && v.back() < 64);
    };
    EXPECT_TRUE(strictly_increasing(kLayout.active_bins));
    EXPECT_TRUE(strictly_increasing(kLayout.data_bins));
    EXPECT_TRUE(strictly_increasing(kLayout.pilot_bins));

    std::set<int> kd(kLayout.data_bins.begin(), kLayout.data_bins.end());
    std::set<int> kp(kLayout.pilot_bins.begin(), kLayout.pilot_bins.end());
    std::set<int> kon(kLayout.active_bins.begin(), kLayout.active_bins.end());
    std::set<int> kn(kLayout.null_bins.begin(), kLayout.null_bins.end());

    std::set<int> uni;
    std::set_union(kd.begin(), kd.end(), kp.begin(), kp.end(), std::inserter(uni, uni.begin()));
    EXPECT_EQ(uni, kon);
    std::set<int> inter;
    std::set_intersection(kd.begin(), kd.end(), kp.begin(), kp.end(),
                          std::inserter(inter, inter.begin()));
    EXPECT_TRUE(inter.empty());
    std::set_intersection(kon.begin(), kon.end(), kn.begin(), kn.end(),
                          std::inserter(inter, inter.begin()));
    EXPECT_TRUE(inter.empty());
    EXPECT_EQ(kon.size() + kn.size(), 64u);

    EXPECT_EQ(kLayout.pilot_bins, (std::vector<int>{7, 21, 43, 57}));
}

TEST(FrameLayout, LtsIsUnitModulus) {
    for (cplx v : kLayout.lts()) EXPECT_DOUBLE_EQ(std::abs(v), 1.0);
}

TEST(Constellation, UnitAveragePower) {
    for (const auto* c : {&kQpsk, &kQam16}) {
        double p = 0.0;
        for (auto pt : c->points) p += std::norm(pt);
        EXPECT_NEAR(p / c->points.size(), 1.0, 1e-12);
    }
}

TEST(Constellation, GrayAdjacencyPerAxis) {
    for (const auto* c : {&kQpsk, &kQam16}) {
        // group labels by the other axis value, sort by this axis level,
        // require successive labels to differ in exactly one bit
        for (int axis = 0; axis < 2; ++axis) {
            std::map<long, std::vector<std::pair<double, unsigned>>> rows;
            for (unsigned lab = 0; lab < c->points.size(); ++lab) {
                double v = axis == 0 ? c->points[lab].real() : c->points[lab].imag();
                double o = axis == 0 ? c->points[lab].imag() : c->points[lab].real();
                rows[std::lround(o * 1e6)].push_back({v, lab});
            }
            for (auto& [key, row] : rows) {
                std::sort(row.begin(), row.end());
                for (std::size_t i = 1; i < row.size(); ++i)
                    EXPECT_EQ(__builtin_popcount(row[i].second ^ row[i - 1].second), 1);
            }
        }
    }
}

TEST(QamMap, QpskCornerCase) {
    cvec s = qam_map({0, 0}, kQpsk);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_NEAR(s[0].real(), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(s[0].imag(), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(QamMap, EmptyBitsGiveEmptySymbols) { EXPECT_TRUE(qam_map({}, kQam16).empty()); }

TEST(QamMap, RejectsNonDivisibleLength) {
    EXPECT_THROW(qam_map({1, 0, 1}, kQam16), std::invalid_argument);
}

TEST(DemapNearest, ExactPointsMapToThemselves) {
    for (const auto* c : {&kQpsk, &kQam16}) {
        cvec out = demap_nearest(c->points, *c);
        for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], c->points[i]);
    }
}

TEST(DemapNearest, BruteForceOracleAgrees) {
    Rng rng(23);
    for (int trial = 0; trial < 2000; ++trial) {
        cplx z(3.0 * (rng.uniform() - 0.5), 3.0 * (rng.uniform() - 0.5));
        for (const auto* c : {&kQpsk, &kQam16})
            EXPECT_EQ(c->nearest_label(z), oracle_nearest(z, *c));
    }
    // the spec's spot check: 0.9 + 0.9j lands on the outer corner point
    cplx z(0.9, 0.9);
    EXPECT_EQ(kQam16.points[kQam16.nearest_label(z)],
              kQam16.points[oracle_nearest(z, kQam16)]);
    EXPECT_NEAR(kQam16.points[kQam16.nearest_label(z)].real(), 3.0 / std::sqrt(10.0), 1e-15);
}

TEST(DemapNearest, TieBreaksToLowestLabel) {
    // the origin is equidistant from the four inner 16QAM points
    unsigned lab = kQam16.nearest_label(cplx(0.0, 0.0));
    EXPECT_EQ(lab, oracle_nearest(cplx(0.0, 0.0), kQam16));
    double d = std::norm(kQam16.points[lab]);
    int ties = 0;
    for (auto p : kQam16.points)
        if (std::abs(std::norm(p) - d) < 1e-15) ++ties;
    EXPECT_EQ(ties, 4);
}

TEST(DemapNearest, Idempotent) {
    Rng rng(29);
    for (int trial = 0; trial < 500; ++trial) {
        cvec z = {cplx(2.0 * (rng.uniform() - 0.5), 2.0 * (rng.uniform() - 0.5))};
        cvec once = demap_nearest(z, kQam16);
        EXPECT_EQ(demap_nearest(once, kQam16), once);
    }
}

TEST(QamMap, DemapRoundTripIsIdentity) {
    Rng rng(31);
    for (const auto* c : {&kQpsk, &kQam16}) {
        bitvec bits = random_bits(400 * c->bits_per_symbol, rng);
        cvec symbols = qam_map(bits, *c);
        EXPECT_EQ(demap_bits(symbols, *c), bits);
        EXPECT_EQ(demap_nearest(symbols, *c), symbols);
    }
}

TEST(SoftDemap, SignsMatchLabelsOnExactPoints) {
    for (const auto* c : {&kQpsk, &kQam16}) {
        for (unsigned lab = 0; lab < c->points.size(); ++lab) {
            std::vector<double> llrs;
            soft_demap(c->points[lab], *c, llrs);
            for (int b = 0; b < c->bits_per_symbol; ++b) {
                int bit = (lab >> (c->bits_per_symbol - 1 - b)) & 1;
                if (bit)
                    EXPECT_LT(llrs[b], 0.0);
                else
                    EXPECT_GT(llrs[b], 0.0);
            }
        }
    }
}

TEST(BuildFrame, PayloadSizingAndPilots) {
    // coded capacity loses the 6-bit zero tail: 50*48*4/2 - 6
    EXPECT_EQ(payload_bit_count(kLayout, kQam16, true), 4794u);
    EXPECT_EQ(payload_bit_count(kLayout, kQam16, false), 9600u);
    EXPECT_EQ(payload_bit_count(kLayout, kQpsk, true), 2394u);

    Rng rng(37);
    bitvec payload = random_bits(payload_bit_count(kLayout, kQam16, true), rng);
    FrameGrid g = build_frame(payload, kLayout, kQam16, true);
    ASSERT_EQ(g.data_tx.size(), 50u);
    for (const auto& sym : g.data_tx)
        for (std::size_t pp = 0; pp < kLayout.pilot_pos.size(); ++pp)
            EXPECT_EQ(sym[kLayout.pilot_pos[pp]], g.pilot_values[pp]);

    EXPECT_THROW(build_frame(random_bits(100, rng), kLayout, kQam16, true),
                 std::invalid_argument);
}

TEST(BuildFrame, DataEnergy) {
    Rng rng(41);
    // QPSK is constant-modulus: per-frame mean power is exactly 1
    bitvec p1 = random_bits(payload_bit_count(kLayout, kQpsk, true), rng);
    FrameGrid g1 = build_frame(p1, kLayout, kQpsk, true);
    double acc = 0.0;
    int n = 0;
    for (const auto& sym : g1.data_tx)
        for (int pos : kLayout.data_pos) {
            acc += std::norm(sym[pos]);
            ++n;
        }
    EXPECT_NEAR(acc / n, 1.0, 1e-10);

    // 16QAM has unit power in expectation; allow sampling slack
    bitvec p2 = random_bits(payload_bit_count(kLayout, kQam16, true), rng);
    FrameGrid g2 = build_frame(p2, kLayout, kQam16, true);
    acc = 0.0;
    n = 0;
    for (const auto& sym : g2.data_tx)
        for (int pos : kLayout.data_pos) {
            acc += std::norm(sym[pos]);
            ++n;
        }
    EXPECT_NEAR(acc / n, 1.0, 0.05);
}

TEST(GridCsv, RowCountAndHeader) {
    Rng rng(43);
    bitvec payload = random_bits(payload_bit_count(kLayout, kQpsk, false), rng);
    FrameGrid g = build_frame(payload, kLayout, kQpsk, false);
    std::ostringstream os;
    dump_grid_csv(os, g, kLayout, GridPlane::tx);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "symbol,subcarrier,re,im");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 52 * (2 + 50));
}

TEST(BitsFromFile, RoundTrip) {
    std::string path = testing::TempDir() + "payload.bin";
    {
        std::ofstream out(path, std::ios::binary);
        const unsigned char bytes[2] = {0xA5, 0x3C};
        out.write(reinterpret_cast<const char*>(bytes), 2);
    }
    bitvec bits = bits_from_file(path, 12);
    bitvec expected = {1, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 1};
    EXPECT_EQ(bits, expected);
    EXPECT_THROW(bits_from_file(path, 64), std::runtime_error);
}

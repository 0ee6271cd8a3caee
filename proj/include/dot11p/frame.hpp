#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dot11p/convcode.hpp"
#include "dot11p/rng.hpp"
#include "dot11p/types.hpp"

namespace dot11p {

/// Subcarrier bookkeeping for the 802.11p OFDM grid: 64 total bins, 52
/// active, 48 data + 4 pilots, DC plus 11 edge bins as guard.
///
/// Index-set members are FFT bins in strictly increasing order. Every
/// per-symbol vector in this library ("on Kon") runs in spectral order
/// instead: subcarriers -26..-1 then +1..+26, so that window and
/// interpolation operations see true frequency neighbours.
struct FrameLayout {
    int total_subcarriers = 64;  // K
    int symbols_per_frame = 50;  // I
    std::vector<int> active_bins;  // Kon
    std::vector<int> data_bins;    // Kd
    std::vector<int> pilot_bins;   // Kp
    std::vector<int> null_bins;    // Kn

    // spectral ordering
    std::vector<int> kon_order;     // spectral position -> FFT bin
    std::vector<int> subcarrier;    // spectral position -> signed subcarrier index
    std::vector<int> pilot_pos;     // positions of Kp within the Kon ordering
    std::vector<int> data_pos;      // positions of Kd within the Kon ordering
    std::vector<bool> is_pilot;     // per position

    int n_active() const { return static_cast<int>(active_bins.size()); }
    int n_data() const { return static_cast<int>(data_bins.size()); }
    int n_pilots() const { return static_cast<int>(pilot_bins.size()); }

    static FrameLayout ieee80211p(int symbols = 50) {
        FrameLayout l;
        l.symbols_per_frame = symbols;
        const int k = l.total_subcarriers;
        static constexpr std::array<int, 4> kPilotSubcarriers = {-21, -7, 7, 21};
        for (int s = -26; s <= 26; ++s) {
            if (s == 0) continue;
            int bin = s < 0 ? s + k : s;
            l.kon_order.push_back(bin);
            l.subcarrier.push_back(s);
            bool pilot = std::find(kPilotSubcarriers.begin(), kPilotSubcarriers.end(), s) !=
                         kPilotSubcarriers.end();
            l.is_pilot.push_back(pilot);
            int pos = static_cast<int>(l.kon_order.size()) - 1;
            (pilot ? l.pilot_pos : l.data_pos).push_back(pos);
            l.active_bins.push_back(bin);
            (pilot ? l.pilot_bins : l.data_bins).push_back(bin);
        }
        std::sort(l.active_bins.begin(), l.active_bins.end());
        std::sort(l.data_bins.begin(), l.data_bins.end());
        std::sort(l.pilot_bins.begin(), l.pilot_bins.end());
        l.null_bins.push_back(0);  // DC
        for (int bin = 27; bin <= 37; ++bin) l.null_bins.push_back(bin);
        return l;
    }

    /// The standard 52-point +/-1 long-training sequence in spectral order.
    cvec lts() const {
        static constexpr std::array<int, 52> kLts = {
            // subcarriers -26..-1
            1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1,
            // subcarriers +1..+26
            1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1};
        cvec p(kLts.size());
        for (std::size_t i = 0; i < kLts.size(); ++i) p[i] = cplx(kLts[i], 0.0);
        return p;
    }
};

/// Gray-labelled unit-average-power constellation (QPSK or 16QAM).
/// Point index is the bit label, bits consumed most-significant first.
struct Constellation {
    enum class Order { qpsk, qam16 };

    Order order = Order::qam16;
    int bits_per_symbol = 4;
    std::vector<cplx> points;

    static Constellation make(Order o) {
        Constellation c;
        c.order = o;
        if (o == Order::qpsk) {
            c.bits_per_symbol = 2;
            const double s = 1.0 / std::sqrt(2.0);
            c.points.resize(4);
            for (unsigned lab = 0; lab < 4; ++lab) {
                double i = ((lab >> 1) & 1) ? -1.0 : 1.0;
                double q = (lab & 1) ? -1.0 : 1.0;
                c.points[lab] = cplx(i * s, q * s);
            }
        } else {
            c.bits_per_symbol = 4;
            const double s = 1.0 / std::sqrt(10.0);
            // per-axis Gray code over levels: 00->+3, 01->+1, 11->-1, 10->-3
            auto level = [](unsigned b2) {
                static constexpr double lvl[4] = {3.0, 1.0, -3.0, -1.0};
                return lvl[b2];
            };
            c.points.resize(16);
            for (unsigned lab = 0; lab < 16; ++lab) {
                double i = level((lab >> 2) & 3);
                double q = level(lab & 3);
                c.points[lab] = cplx(i * s, q * s);
            }
        }
        return c;
    }

    static Constellation from_name(const std::string& name) {
        if (name == "qpsk") return make(Order::qpsk);
        if (name == "16qam" || name == "qam16") return make(Order::qam16);
        throw std::invalid_argument("unknown constellation: " + name);
    }

    /// Nearest point by Euclidean distance; ties go to the lowest bit label.
    unsigned nearest_label(cplx z) const {
        unsigned best = 0;
        double best_d = std::norm(z - points[0]);
        for (unsigned lab = 1; lab < points.size(); ++lab) {
            double d = std::norm(z - points[lab]);
            if (d < best_d) {
                best_d = d;
                best = lab;
            }
        }
        return best;
    }
};

/// Maps bits to symbols; bit count must divide evenly into symbols.
inline cvec qam_map(const bitvec& bits, const Constellation& c) {
    if (bits.size() % c.bits_per_symbol != 0)
        throw std::invalid_argument("qam_map: bit count not divisible by bits/symbol");
    cvec out(bits.size() / c.bits_per_symbol);
    for (std::size_t i = 0; i < out.size(); ++i) {
        unsigned lab = 0;
        for (int b = 0; b < c.bits_per_symbol; ++b)
            lab = (lab << 1) | (bits[i * c.bits_per_symbol + b] & 1);
        out[i] = c.points[lab];
    }
    return out;
}

/// The demapping operation D(.): each element snaps to the nearest
/// constellation point.
inline cvec demap_nearest(const cvec& z, const Constellation& c) {
    cvec out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = c.points[c.nearest_label(z[i])];
    return out;
}

inline bitvec demap_bits(const cvec& z, const Constellation& c) {
    bitvec out(z.size() * c.bits_per_symbol);
    for (std::size_t i = 0; i < z.size(); ++i) {
        unsigned lab = c.nearest_label(z[i]);
        for (int b = 0; b < c.bits_per_symbol; ++b)
            out[i * c.bits_per_symbol + b] = (lab >> (c.bits_per_symbol - 1 - b)) & 1;
    }
    return out;
}

/// Max-log per-bit LLRs, positive when bit 0 is more likely. Scale-free:
/// the Viterbi path metric is invariant to a common positive factor.
inline void soft_demap(cplx z, const Constellation& c, std::vector<double>& llrs_out) {
    const int bps = c.bits_per_symbol;
    for (int b = 0; b < bps; ++b) {
        double d0 = std::numeric_limits<double>::infinity();
        double d1 = d0;
        for (unsigned lab = 0; lab < c.points.size(); ++lab) {
            double d = std::norm(z - c.points[lab]);
            if ((lab >> (bps - 1 - b)) & 1)
                d1 = std::min(d1, d);
            else
                d0 = std::min(d0, d);
        }
        llrs_out.push_back(d1 - d0);
    }
}

/// One frame of frequency-domain symbols on the active subcarriers
/// (spectral order): two long-training preambles then I data symbols.
struct FrameGrid {
    std::array<cvec, 2> preamble_rx;
    std::vector<cvec> data_tx;
    std::vector<cvec> data_rx;
    cvec pilot_values;  // on Kp
    bitvec payload;
};

/// Payload capacity of one frame; the convolutional tail costs
/// constraint_length - 1 bits when coding is on.
inline std::size_t payload_bit_count(const FrameLayout& layout, const Constellation& c,
                                     bool coded) {
    std::size_t raw = static_cast<std::size_t>(layout.symbols_per_frame) * layout.n_data() *
                      c.bits_per_symbol;
    return coded ? raw / 2 - convcode::kMemory : raw;
}

/// Builds the transmit grid: encodes (optionally), maps, and places data on
/// Kd with fixed +1 pilots on Kp. Receive-side vectors stay empty until a
/// channel is applied.
inline FrameGrid build_frame(const bitvec& payload, const FrameLayout& layout,
                             const Constellation& c, bool coded = true) {
    if (payload.size() != payload_bit_count(layout, c, coded))
        throw std::invalid_argument("build_frame: payload size does not fill the frame");

    bitvec stream = coded ? conv_encode(payload) : payload;
    cvec symbols = qam_map(stream, c);

    FrameGrid g;
    g.payload = payload;
    g.pilot_values.assign(layout.n_pilots(), cplx(1.0, 0.0));
    g.data_tx.assign(layout.symbols_per_frame, cvec(layout.n_active()));
    std::size_t si = 0;
    for (auto& sym : g.data_tx) {
        for (int pos : layout.data_pos) sym[pos] = symbols[si++];
        for (std::size_t pp = 0; pp < layout.pilot_pos.size(); ++pp)
            sym[layout.pilot_pos[pp]] = g.pilot_values[pp];
    }
    return g;
}

/// Unpacks n payload bits from a file, MSB first within each byte.
inline bitvec bits_from_file(const std::string& path, std::size_t n) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open payload file: " + path);
    std::vector<char> bytes((n + 7) / 8);
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) < bytes.size())
        throw std::runtime_error("payload file too short: " + path);
    bitvec bits(n);
    for (std::size_t i = 0; i < n; ++i)
        bits[i] = (static_cast<unsigned char>(bytes[i / 8]) >> (7 - i % 8)) & 1;
    return bits;
}

enum class GridPlane { tx, rx };

/// CSV dump, one row per (symbol, subcarrier) cell: symbol index (0 and 1
/// are the preambles), FFT bin, re, im.
inline void dump_grid_csv(std::ostream& os, const FrameGrid& g, const FrameLayout& layout,
                          GridPlane plane) {
    os << "symbol,subcarrier,re,im\n";
    char buf[96];
    auto row = [&](int sym, int bin, cplx v) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", sym, bin, v.real(), v.imag());
        os << buf;
    };
    const cvec lts = layout.lts();
    for (int s = 0; s < 2; ++s) {
        const cvec& v = plane == GridPlane::tx ? lts : g.preamble_rx[s];
        for (int pos = 0; pos < layout.n_active(); ++pos)
            row(s, layout.kon_order[pos], pos < static_cast<int>(v.size()) ? v[pos] : cplx{});
    }
    const auto& planes = plane == GridPlane::tx ? g.data_tx : g.data_rx;
    for (std::size_t i = 0; i < planes.size(); ++i)
        for (int pos = 0; pos < layout.n_active(); ++pos)
            row(static_cast<int>(i) + 2, layout.kon_order[pos], planes[i][pos]);
}

}  // namespace dot11p

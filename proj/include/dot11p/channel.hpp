#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dot11p/frame.hpp"
#include "dot11p/rng.hpp"
#include "dot11p/types.hpp"

namespace dot11p {

/// Tapped-delay-line power profile. Powers are linear gains summing to 1;
/// delays are sample counts within the FFT window.
struct TdlProfile {
    std::vector<int> delays;
    std::vector<double> powers;

    int tap_count() const { return static_cast<int>(delays.size()); }

    void validate(int total_subcarriers) const {
        if (delays.empty() || delays.size() != powers.size())
            throw std::invalid_argument("TdlProfile: delays/powers mismatch");
        double sum = 0.0;
        int prev = -1;
        for (std::size_t i = 0; i < delays.size(); ++i) {
            if (delays[i] <= prev) throw std::invalid_argument("TdlProfile: delays not increasing");
            if (delays[i] >= total_subcarriers)
                throw std::invalid_argument("TdlProfile: max delay exceeds the FFT window");
            if (powers[i] <= 0.0) throw std::invalid_argument("TdlProfile: non-positive tap power");
            prev = delays[i];
            sum += powers[i];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("TdlProfile: tap powers must sum to 1");
    }

    static TdlProfile single_tap() { return TdlProfile{{0}, {1.0}}; }

    static TdlProfile from_json(const nlohmann::json& j) {
        TdlProfile p;
        p.delays = j.at("delays").get<std::vector<int>>();
        p.powers = j.at("powers").get<std::vector<double>>();
        return p;
    }

    static TdlProfile from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open profile: " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }
};

struct MobilityConfig {
    double doppler_hz = 550.0;
    double symbol_duration_s = 8e-6;  // 802.11p 10 MHz profile
    int sinusoid_count = 32;
    std::uint64_t seed = 1;
};

/// One frame's worth of channel: per-symbol tap gains (two preamble symbols
/// followed by I data symbols) and their frequency response on Kon.
struct ChannelRealization {
    std::vector<cvec> taps;  // (I + 2) x tap_count
    std::vector<cvec> cfr;   // (I + 2) x n_active, spectral order
    double noise_var = 0.0;  // sigma^2 set when noise is applied

    int n_symbols() const { return static_cast<int>(cfr.size()); }
    const cvec& preamble_cfr(int i) const { return cfr[i]; }
    const cvec& data_cfr(int i) const { return cfr[2 + i]; }  // i in [0, I)
};

namespace detail {

// DFT of the tap vector evaluated on the Kon bins, spectral order
inline std::vector<cvec> kon_dft_matrix(const TdlProfile& profile, const FrameLayout& layout) {
    std::vector<cvec> w(layout.n_active(), cvec(profile.tap_count()));
    const double base = -2.0 * std::numbers::pi / layout.total_subcarriers;
    for (int pos = 0; pos < layout.n_active(); ++pos) {
        int bin = layout.kon_order[pos];
        for (int l = 0; l < profile.tap_count(); ++l) {
            double phi = base * bin * profile.delays[l];
            w[pos][l] = cplx(std::cos(phi), std::sin(phi));
        }
    }
    return w;
}

}  // namespace detail

/// Generates a time-variant realization: each tap is an independent
/// sum-of-sinusoids Rayleigh process with the classical Doppler spectrum
/// (Clarke's model), sampled once per OFDM symbol. Block fading within a
/// symbol, matching the multiplicative frequency-domain model.
inline ChannelRealization gen_realization(const TdlProfile& profile, const MobilityConfig& mob,
                                          const FrameLayout& layout) {
    profile.validate(layout.total_subcarriers);
    if (mob.doppler_hz < 0 || mob.symbol_duration_s <= 0 || mob.sinusoid_count < 1)
        throw std::invalid_argument("MobilityConfig: invalid parameters");

    Rng rng(mob.seed);
    const int n_sym = layout.symbols_per_frame + 2;
    const int n_tap = profile.tap_count();
    const int n_sin = mob.sinusoid_count;
    const double wd = 2.0 * std::numbers::pi * mob.doppler_hz;

    ChannelRealization ch;
    ch.taps.assign(n_sym, cvec(n_tap));

    std::vector<double> phase(n_sin), omega(n_sin);
    for (int l = 0; l < n_tap; ++l) {
        // arrival angles: evenly spaced with a random rotation, so the
        // marginal angle is uniform and the ensemble autocorrelation is
        // J0(2 pi fd tau)
        double rot = rng.uniform();
        for (int n = 0; n < n_sin; ++n) {
            double angle = 2.0 * std::numbers::pi * (n + rot) / n_sin;
            omega[n] = wd * std::cos(angle);
            phase[n] = 2.0 * std::numbers::pi * rng.uniform();
        }
        const double amp = std::sqrt(profile.powers[l] / n_sin);
        for (int i = 0; i < n_sym; ++i) {
            double t = i * mob.symbol_duration_s;
            cplx acc(0.0, 0.0);
            for (int n = 0; n < n_sin; ++n) {
                double arg = omega[n] * t + phase[n];
                acc += cplx(std::cos(arg), std::sin(arg));
            }
            ch.taps[i][l] = amp * acc;
        }
    }

    const auto w = detail::kon_dft_matrix(profile, layout);
    ch.cfr.assign(n_sym, cvec(layout.n_active()));
    for (int i = 0; i < n_sym; ++i)
        for (int pos = 0; pos < layout.n_active(); ++pos) {
            cplx acc(0.0, 0.0);
            for (int l = 0; l < n_tap; ++l) acc += w[pos][l] * ch.taps[i][l];
            ch.cfr[i][pos] = acc;
        }
    return ch;
}

/// Applies the channel multiplicatively and adds circular complex Gaussian
/// noise with variance sigma^2 = 10^(-snr_db/10) relative to unit symbol
/// power. Preambles pass through the first two channel snapshots. An
/// infinite SNR disables the noise.
inline FrameGrid apply_channel(const FrameGrid& grid, ChannelRealization& ch, double snr_db,
                               const FrameLayout& layout, Rng& noise_rng) {
    if (static_cast<int>(grid.data_tx.size()) + 2 != ch.n_symbols())
        throw std::invalid_argument("apply_channel: symbol count mismatch");

    const bool noisy = std::isfinite(snr_db);
    const double sigma2 = noisy ? std::pow(10.0, -snr_db / 10.0) : 0.0;
    const double amp = std::sqrt(sigma2);
    ch.noise_var = sigma2;

    FrameGrid out = grid;
    const cvec lts = layout.lts();
    for (int s = 0; s < 2; ++s) {
        out.preamble_rx[s].resize(layout.n_active());
        for (int pos = 0; pos < layout.n_active(); ++pos) {
            cplx v = noisy ? amp * noise_rng.cgauss() : cplx(0.0, 0.0);
            out.preamble_rx[s][pos] = ch.cfr[s][pos] * lts[pos] + v;
        }
    }
    out.data_rx.assign(grid.data_tx.size(), cvec(layout.n_active()));
    for (std::size_t i = 0; i < grid.data_tx.size(); ++i) {
        const cvec& h = ch.cfr[i + 2];
        for (int pos = 0; pos < layout.n_active(); ++pos) {
            cplx v = noisy ? amp * noise_rng.cgauss() : cplx(0.0, 0.0);
            out.data_rx[i][pos] = h[pos] * grid.data_tx[i][pos] + v;
        }
    }
    return out;
}

/// Frame NMSE: sum_i ||est_i - truth_i||^2 / sum_i ||truth_i||^2.
inline double nmse(const std::vector<cvec>& estimates, const std::vector<cvec>& truth) {
    if (estimates.size() != truth.size())
        throw std::invalid_argument("nmse: symbol count mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (estimates[i].size() != truth[i].size())
            throw std::invalid_argument("nmse: subcarrier count mismatch");
        for (std::size_t k = 0; k < truth[i].size(); ++k) {
            num += std::norm(estimates[i][k] - truth[i][k]);
            den += std::norm(truth[i][k]);
        }
    }
    return num / den;
}

/// CFR dump in the same CSV shape as the frame grids.
inline void dump_realization_csv(std::ostream& os, const ChannelRealization& ch,
                                 const FrameLayout& layout) {
    os << "symbol,subcarrier,re,im\n";
    char buf[96];
    for (int i = 0; i < ch.n_symbols(); ++i)
        for (int pos = 0; pos < layout.n_active(); ++pos) {
            std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", i, layout.kon_order[pos],
                          ch.cfr[i][pos].real(), ch.cfr[i][pos].imag());
            os << buf;
        }
}

}  // namespace dot11p

#pragma once

#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "dot11p/channel.hpp"
#include "dot11p/frame.hpp"
#include "dot11p/spline.hpp"
#include "dot11p/types.hpp"

namespace dot11p {

using rational = boost::multiprecision::cpp_rational;

/// Per-frame output of one estimator run. est[0] is always the preamble LS
/// estimate; est[1..I] cover the data symbols. All vectors are on Kon in
/// spectral order.
struct EstimateTrace {
    std::string name;
    std::vector<cvec> est;               // I + 1 entries
    std::vector<cvec> decisions;         // I entries (d_i)
    std::vector<std::vector<int>> rs;    // TRFI only: reliable positions per symbol
    std::vector<std::vector<int>> urs;   // TRFI only
    long flagged = 0;                    // epsilon-clamped divisor count
};

struct StaConfig {
    double alpha = 2.0;  // time weight, >= 1
    int beta = 2;        // frequency half-window, >= 0
};

/// LS preamble estimate: (y1 + y2) / (2 p).
inline cvec ls_estimate(const cvec& y_p1, const cvec& y_p2, const cvec& p) {
    if (y_p1.size() != p.size() || y_p2.size() != p.size())
        throw std::invalid_argument("ls_estimate: size mismatch");
    cvec h(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (std::abs(p[k]) == 0.0) throw std::invalid_argument("ls_estimate: zero preamble entry");
        h[k] = (y_p1[k] + y_p2[k]) / (2.0 * p[k]);
    }
    return h;
}

namespace detail {

constexpr double kDivGuard = 1e-12;

// Magnitude clamp for demap-equalization divisors; counts clamped entries.
inline cplx guard_divisor(cplx v, long& flagged) {
    double m = std::abs(v);
    if (m >= kDivGuard) return v;
    ++flagged;
    if (m == 0.0) return cplx(kDivGuard, 0.0);
    return v * (kDivGuard / m);
}

}  // namespace detail

struct DpaResult {
    cvec decisions;  // on Kon; pilots carry the known pilot values
    cvec cfr;        // y / d on Kon
    long flagged = 0;
};

/// One decision-directed step: demap y/h_prev on the data subcarriers, force
/// the pilots, then divide y by the decisions.
inline DpaResult dpa_step(const cvec& y, const cvec& h_prev, const Constellation& c,
                          const FrameLayout& layout, const cvec& pilot_values) {
    DpaResult r;
    r.decisions.assign(layout.n_active(), cplx(0.0, 0.0));
    r.cfr.assign(layout.n_active(), cplx(0.0, 0.0));
    for (int pos : layout.data_pos) {
        cplx z = y[pos] / detail::guard_divisor(h_prev[pos], r.flagged);
        r.decisions[pos] = c.points[c.nearest_label(z)];
    }
    for (std::size_t pp = 0; pp < layout.pilot_pos.size(); ++pp)
        r.decisions[layout.pilot_pos[pp]] = pilot_values[pp];
    for (int pos = 0; pos < layout.n_active(); ++pos)
        r.cfr[pos] = y[pos] / detail::guard_divisor(r.decisions[pos], r.flagged);
    return r;
}

/// Uniform frequency window of half-width beta over positional neighbours on
/// Kon. Windows shrink at the band edges and the weights renormalize, so
/// constant inputs pass through unchanged.
inline cvec sta_freq_average(const cvec& h, int beta) {
    if (beta < 0) throw std::invalid_argument("sta_freq_average: negative beta");
    const int n = static_cast<int>(h.size());
    cvec out(n);
    for (int k = 0; k < n; ++k) {
        int lo = std::max(0, k - beta);
        int hi = std::min(n - 1, k + beta);
        cplx acc(0.0, 0.0);
        for (int j = lo; j <= hi; ++j) acc += h[j];
        out[k] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

/// One STA update: frequency average of the DPA output, then the IIR time
/// average (1 - 1/alpha) h_sta_prev + (1/alpha) h_fd.
inline cvec sta_estimate(const cvec& h_dpa_i, const cvec& h_sta_prev, const StaConfig& cfg) {
    if (cfg.alpha < 1.0) throw std::invalid_argument("sta_estimate: alpha < 1");
    cvec fd = sta_freq_average(h_dpa_i, cfg.beta);
    cvec out(fd.size());
    const double w = 1.0 / cfg.alpha;
    for (std::size_t k = 0; k < fd.size(); ++k) out[k] = (1.0 - w) * h_sta_prev[k] + w * fd[k];
    return out;
}

/// Temporal-averaging step: convex combination of the running estimate and
/// the fresh one. alpha = 1 keeps no memory; alpha = 2 is the midpoint.
inline cvec ta_step(const cvec& h_ta_prev, const cvec& h_new, double alpha) {
    if (alpha < 1.0) throw std::invalid_argument("ta_step: alpha < 1");
    cvec out(h_new.size());
    const double w = 1.0 / alpha;
    for (std::size_t k = 0; k < h_new.size(); ++k)
        out[k] = (1.0 - w) * h_ta_prev[k] + w * h_new[k];
    return out;
}

/// Closed-form noise-power ratio of the temporal average at the q-th
/// estimated channel (alpha = 2): (4^(q-1) + 2) / (3 * 4^(q-1)).
/// Exact rational; equals the recursion R_1 = 1, R_q = R_{q-1}/4 + 1/4.
inline rational ta_noise_ratio(int q) {
    if (q < 1) throw std::invalid_argument("ta_noise_ratio: q must be >= 1");
    boost::multiprecision::cpp_int p4 = boost::multiprecision::pow(
        boost::multiprecision::cpp_int(4), static_cast<unsigned>(q - 1));
    return rational(p4 + 2, 3 * p4);
}

inline double ta_noise_ratio_d(int q) { return static_cast<double>(ta_noise_ratio(q)); }

struct TrfiResult {
    cvec cfr;
    std::vector<int> rs;   // positions within Kon
    std::vector<int> urs;
};

/// Time-reliability frequency interpolation. The previous received symbol is
/// demapped through both candidate channels; positions where the decisions
/// agree are reliable and keep the DPA estimate, the rest are interpolated
/// with a natural cubic spline over the reliable set (clamped to the hull
/// boundary values outside it). Pilot positions are always reliable. Fewer
/// than 4 reliable positions would underdetermine the spline, so the whole
/// symbol falls back to the DPA estimate.
///
/// For the first data symbol the previous symbol is the second long-training
/// preamble; its content is BPSK, so the reliability comparison demaps it
/// against {+1, -1} instead of the data constellation.
inline TrfiResult trfi_estimate(const cvec& y_prev, const cvec& h_trfi_prev, const cvec& h_dpa_i,
                                const Constellation& c, const FrameLayout& layout,
                                bool prev_is_preamble = false) {
    TrfiResult r;
    r.cfr = h_dpa_i;
    long scratch = 0;
    std::vector<bool> reliable(layout.n_active(), false);
    for (int pos : layout.pilot_pos) reliable[pos] = true;
    for (int pos : layout.data_pos) {
        cplx z1 = y_prev[pos] / detail::guard_divisor(h_dpa_i[pos], scratch);
        cplx z2 = y_prev[pos] / detail::guard_divisor(h_trfi_prev[pos], scratch);
        reliable[pos] = prev_is_preamble
                            ? (z1.real() >= 0.0) == (z2.real() >= 0.0)
                            : c.nearest_label(z1) == c.nearest_label(z2);
    }
    for (int pos = 0; pos < layout.n_active(); ++pos)
        (reliable[pos] ? r.rs : r.urs).push_back(pos);

    if (r.urs.empty()) return r;
    if (static_cast<int>(r.rs.size()) < 4) return r;  // spline underdetermined

    std::vector<double> x;
    cvec y;
    x.reserve(r.rs.size());
    y.reserve(r.rs.size());
    for (int pos : r.rs) {
        x.push_back(static_cast<double>(layout.subcarrier[pos]));
        y.push_back(h_dpa_i[pos]);
    }
    CubicSpline<cplx> spline(std::move(x), std::move(y));
    for (int pos : r.urs) r.cfr[pos] = spline(static_cast<double>(layout.subcarrier[pos]));
    return r;
}

namespace detail {

inline cvec ls_from_grid(const FrameGrid& g, const FrameLayout& layout) {
    return ls_estimate(g.preamble_rx[0], g.preamble_rx[1], layout.lts());
}

inline cvec pilot_ls(const cvec& y, const FrameGrid& g, const FrameLayout& layout) {
    cvec out(layout.n_pilots());
    for (std::size_t pp = 0; pp < layout.pilot_pos.size(); ++pp)
        out[pp] = y[layout.pilot_pos[pp]] / g.pilot_values[pp];
    return out;
}

}  // namespace detail

inline EstimateTrace run_ls_only(const FrameGrid& g, const Constellation& c,
                                 const FrameLayout& layout) {
    EstimateTrace t;
    t.name = "ls";
    cvec ls = detail::ls_from_grid(g, layout);
    t.est.assign(layout.symbols_per_frame + 1, ls);
    for (int i = 0; i < layout.symbols_per_frame; ++i) {
        DpaResult r = dpa_step(g.data_rx[i], ls, c, layout, g.pilot_values);
        t.decisions.push_back(std::move(r.decisions));
        t.flagged += r.flagged;
    }
    return t;
}

inline EstimateTrace run_dpa(const FrameGrid& g, const Constellation& c,
                             const FrameLayout& layout) {
    EstimateTrace t;
    t.name = "dpa";
    t.est.push_back(detail::ls_from_grid(g, layout));
    for (int i = 0; i < layout.symbols_per_frame; ++i) {
        DpaResult r = dpa_step(g.data_rx[i], t.est.back(), c, layout, g.pilot_values);
        t.flagged += r.flagged;
        t.est.push_back(std::move(r.cfr));
        t.decisions.push_back(std::move(r.decisions));
    }
    return t;
}

inline EstimateTrace run_sta(const FrameGrid& g, const StaConfig& cfg, const Constellation& c,
                             const FrameLayout& layout) {
    EstimateTrace t;
    t.name = "sta";
    cvec ls = detail::ls_from_grid(g, layout);
    t.est.push_back(ls);
    cvec h_dpa_prev = ls;
    for (int i = 0; i < layout.symbols_per_frame; ++i) {
        DpaResult r = dpa_step(g.data_rx[i], h_dpa_prev, c, layout, g.pilot_values);
        t.flagged += r.flagged;
        h_dpa_prev = r.cfr;
        t.est.push_back(sta_estimate(r.cfr, t.est.back(), cfg));
        t.decisions.push_back(std::move(r.decisions));
    }
    return t;
}

inline EstimateTrace run_trfi(const FrameGrid& g, const Constellation& c,
                              const FrameLayout& layout) {
    EstimateTrace t;
    t.name = "trfi";
    cvec ls = detail::ls_from_grid(g, layout);
    t.est.push_back(ls);
    cvec h_dpa_prev = ls;
    const cvec* y_prev = &g.preamble_rx[1];
    for (int i = 0; i < layout.symbols_per_frame; ++i) {
        DpaResult r = dpa_step(g.data_rx[i], h_dpa_prev, c, layout, g.pilot_values);
        t.flagged += r.flagged;
        h_dpa_prev = r.cfr;
        TrfiResult f = trfi_estimate(*y_prev, t.est.back(), r.cfr, c, layout, i == 0);
        t.est.push_back(std::move(f.cfr));
        t.decisions.push_back(std::move(r.decisions));
        t.rs.push_back(std::move(f.rs));
        t.urs.push_back(std::move(f.urs));
        y_prev = &g.data_rx[i];
    }
    return t;
}

/// Per-symbol channel predictor. Stateful across the data symbols of one
/// frame (recurrent models carry hidden state); called exactly once per
/// symbol in order. Input is the assembled feedback vector on Kon (spectral
/// order); output is the predicted channel on Kd.
using ChannelPredictor = std::function<cvec(const cvec&)>;

enum class LstmFeedback { ta, lstm };

/// The proposed pipeline: per symbol, assemble the predictor input from the
/// previous smoothed data-subcarrier estimate plus the current per-symbol
/// pilot LS values, predict the channel on Kd, run a decision-directed
/// divide with the merged prediction, then smooth with the temporal average.
/// `feedback` selects what fills the data part of the next input: the final
/// TA output (default) or the raw predictor output.
inline EstimateTrace run_lstm_dpa_ta(const FrameGrid& g, const ChannelPredictor& predictor,
                                     double alpha, const Constellation& c,
                                     const FrameLayout& layout,
                                     LstmFeedback feedback = LstmFeedback::ta) {
    EstimateTrace t;
    t.name = "lstm-dpa-ta";
    cvec ls = detail::ls_from_grid(g, layout);
    t.est.push_back(ls);
    cvec fb = ls;  // data-part source for the next x-bar
    for (int i = 0; i < layout.symbols_per_frame; ++i) {
        const cvec& y = g.data_rx[i];
        cvec p_ls = detail::pilot_ls(y, g, layout);

        cvec xbar = fb;
        for (std::size_t pp = 0; pp < layout.pilot_pos.size(); ++pp)
            xbar[layout.pilot_pos[pp]] = p_ls[pp];

        cvec pred = predictor(xbar);
        if (static_cast<int>(pred.size()) != layout.n_data())
            throw std::invalid_argument("run_lstm_dpa_ta: predictor output must cover Kd");

        cvec divisor(layout.n_active());
        for (std::size_t d = 0; d < layout.data_pos.size(); ++d)
            divisor[layout.data_pos[d]] = pred[d];
        for (std::size_t pp = 0; pp < layout.pilot_pos.size(); ++pp)
            divisor[layout.pilot_pos[pp]] = p_ls[pp];

        DpaResult r = dpa_step(y, divisor, c, layout, g.pilot_values);
        t.flagged += r.flagged;
        cvec ta = ta_step(t.est.back(), r.cfr, alpha);
        fb = feedback == LstmFeedback::ta ? ta : divisor;
        t.est.push_back(std::move(ta));
        t.decisions.push_back(std::move(r.decisions));
    }
    return t;
}

/// Corrector applied to a conventional estimate on Kon (the DNN-hybrid
/// post-processing stage).
using EstimateCorrector = std::function<cvec(const cvec&)>;

struct missing_model_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class BaselineKind { ls_only, dpa, sta, trfi, sta_dnn, trfi_dnn, lstm_dnn_dpa };

inline BaselineKind baseline_from_name(const std::string& name) {
    if (name == "ls") return BaselineKind::ls_only;
    if (name == "dpa") return BaselineKind::dpa;
    if (name == "sta") return BaselineKind::sta;
    if (name == "trfi") return BaselineKind::trfi;
    if (name == "sta-dnn") return BaselineKind::sta_dnn;
    if (name == "trfi-dnn") return BaselineKind::trfi_dnn;
    if (name == "lstm-dnn-dpa") return BaselineKind::lstm_dnn_dpa;
    throw std::invalid_argument("unknown estimator: " + name);
}

/// Model hooks for the learned baselines; empty functions mean "not loaded".
struct BaselineModels {
    EstimateCorrector sta_dnn;
    EstimateCorrector trfi_dnn;
    ChannelPredictor lstm_dnn_dpa;  // input: previous Kon estimate + pilot LS (56 entries)
};

inline EstimateTrace run_lstm_dnn_dpa(const FrameGrid& g, const ChannelPredictor& predictor,
                                      const Constellation& c, const FrameLayout& layout) {
    EstimateTrace t;
    t.name = "lstm-dnn-dpa";
    cvec ls = detail::ls_from_grid(g, layout);
    t.est.push_back(ls);
    for (int i = 0; i < layout.symbols_per_frame; ++i) {
        const cvec& y = g.data_rx[i];
        cvec p_ls = detail::pilot_ls(y, g, layout);

        cvec xbar = t.est.back();
        xbar.insert(xbar.end(), p_ls.begin(), p_ls.end());
        cvec pred = predictor(xbar);
        if (static_cast<int>(pred.size()) != layout.n_data())
            throw std::invalid_argument("run_lstm_dnn_dpa: predictor output must cover Kd");

        cvec divisor(layout.n_active());
        for (std::size_t d = 0; d < layout.data_pos.size(); ++d)
            divisor[layout.data_pos[d]] = pred[d];
        for (std::size_t pp = 0; pp < layout.pilot_pos.size(); ++pp)
            divisor[layout.pilot_pos[pp]] = p_ls[pp];

        DpaResult r = dpa_step(y, divisor, c, layout, g.pilot_values);
        t.flagged += r.flagged;
        t.est.push_back(std::move(r.cfr));
        t.decisions.push_back(std::move(r.decisions));
    }
    return t;
}

inline EstimateTrace run_baseline(const FrameGrid& g, BaselineKind kind,
                                  const BaselineModels& models, const StaConfig& sta_cfg,
                                  const Constellation& c, const FrameLayout& layout) {
    switch (kind) {
        case BaselineKind::ls_only:
            return run_ls_only(g, c, layout);
        case BaselineKind::dpa:
            return run_dpa(g, c, layout);
        case BaselineKind::sta:
            return run_sta(g, sta_cfg, c, layout);
        case BaselineKind::trfi:
            return run_trfi(g, c, layout);
        case BaselineKind::sta_dnn: {
            if (!models.sta_dnn) throw missing_model_error("sta-dnn model not loaded");
            EstimateTrace t = run_sta(g, sta_cfg, c, layout);
            t.name = "sta-dnn";
            for (std::size_t i = 1; i < t.est.size(); ++i) t.est[i] = models.sta_dnn(t.est[i]);
            return t;
        }
        case BaselineKind::trfi_dnn: {
            if (!models.trfi_dnn) throw missing_model_error("trfi-dnn model not loaded");
            EstimateTrace t = run_trfi(g, c, layout);
            t.name = "trfi-dnn";
            for (std::size_t i = 1; i < t.est.size(); ++i) t.est[i] = models.trfi_dnn(t.est[i]);
            return t;
        }
        case BaselineKind::lstm_dnn_dpa:
            if (!models.lstm_dnn_dpa) throw missing_model_error("lstm-dnn-dpa model not loaded");
            return run_lstm_dnn_dpa(g, models.lstm_dnn_dpa, c, layout);
    }
    throw std::invalid_argument("run_baseline: unknown kind");
}

/// Trace export: one row per (symbol, subcarrier) with the estimate and the
/// true channel side by side.
inline void dump_trace_csv(std::ostream& os, const EstimateTrace& t, const ChannelRealization& ch,
                           const FrameLayout& layout, bool header = true) {
    if (header) os << "symbol,subcarrier,est_re,est_im,true_re,true_im,estimator_name\n";
    char buf[160];
    for (std::size_t i = 0; i < t.est.size(); ++i) {
        // est[0] corresponds to the preamble LS estimate; score it against
        // the second preamble snapshot
        const cvec& truth = i == 0 ? ch.cfr[1] : ch.cfr[i + 1];
        for (int pos = 0; pos < layout.n_active(); ++pos) {
            std::snprintf(buf, sizeof(buf), "%zu,%d,%.17g,%.17g,%.17g,%.17g,%s\n", i,
                          layout.kon_order[pos], t.est[i][pos].real(), t.est[i][pos].imag(),
                          truth[pos].real(), truth[pos].imag(), t.name.c_str());
            os << buf;
        }
    }
}

}  // namespace dot11p

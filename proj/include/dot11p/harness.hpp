#pragma once

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dot11p/channel.hpp"
#include "dot11p/dataset.hpp"
#include "dot11p/estimators.hpp"
#include "dot11p/neural.hpp"

namespace dot11p {

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Implementation-chosen 12-tap exponentially decaying vehicular profile
/// (1.5 dB per tap at 100 ns spacing). A stand-in for measured campaign
/// tables, which are not shipped; any profile can be loaded from a config
/// file instead.
inline TdlProfile default_vehicular_profile() {
    TdlProfile p;
    const double r = std::pow(10.0, -0.15);
    double sum = 0.0;
    for (int l = 0; l < 12; ++l) {
        p.delays.push_back(l);
        p.powers.push_back(std::pow(r, l));
        sum += p.powers.back();
    }
    for (auto& v : p.powers) v /= sum;
    return p;
}

struct EstimatorSpec {
    std::string name;  // ls|dpa|sta|trfi|sta-dnn|trfi-dnn|lstm-dnn-dpa|lstm-dpa-ta|perfect
    double alpha = 2.0;
    int beta = 2;
    std::string model_path;
    LstmFeedback feedback = LstmFeedback::ta;

    bool needs_model() const {
        return name == "sta-dnn" || name == "trfi-dnn" || name == "lstm-dnn-dpa" ||
               name == "lstm-dpa-ta";
    }

    static EstimatorSpec named(std::string n, std::string model = {}) {
        EstimatorSpec s;
        s.name = std::move(n);
        s.model_path = std::move(model);
        return s;
    }
};

struct SimConfig {
    std::string modulation = "16qam";
    bool coding = true;
    int symbols_per_frame = 50;
    TdlProfile profile = default_vehicular_profile();
    double doppler_hz = 550.0;
    double symbol_duration_s = 8e-6;
    int sinusoids = 32;
    std::vector<double> snr_db = {0, 5, 10, 15, 20, 25, 30, 35, 40};
    int frames = 200;
    std::vector<EstimatorSpec> estimators = {EstimatorSpec::named("dpa")};
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out = "metrics.csv";

    FrameLayout layout() const { return FrameLayout::ieee80211p(symbols_per_frame); }
    Constellation constellation() const { return Constellation::from_name(modulation); }

    DatasetSimConfig dataset_sim() const {
        DatasetSimConfig d;
        d.profile = profile;
        d.doppler_hz = doppler_hz;
        d.symbol_duration_s = symbol_duration_s;
        d.sinusoids = sinusoids;
        d.constellation = constellation();
        d.coding = coding;
        return d;
    }

    static SimConfig from_json(const nlohmann::json& j);
    static SimConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw config_error("cannot open config: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw config_error("config parse error in " + path + ": " + e.what());
        }
        return from_json(j);
    }
};

inline SimConfig SimConfig::from_json(const nlohmann::json& j) {
    SimConfig c;
    try {
        if (j.contains("modulation")) c.modulation = j.at("modulation").get<std::string>();
        if (j.contains("coding")) c.coding = j.at("coding").get<bool>();
        if (j.contains("symbols_per_frame"))
            c.symbols_per_frame = j.at("symbols_per_frame").get<int>();
        if (j.contains("profile")) {
            const auto& p = j.at("profile");
            c.profile = p.is_string() ? TdlProfile::from_file(p.get<std::string>())
                                      : TdlProfile::from_json(p);
        }
        if (j.contains("doppler_hz")) c.doppler_hz = j.at("doppler_hz").get<double>();
        if (j.contains("symbol_duration_s"))
            c.symbol_duration_s = j.at("symbol_duration_s").get<double>();
        if (j.contains("sinusoids")) c.sinusoids = j.at("sinusoids").get<int>();
        if (j.contains("snr_db")) c.snr_db = j.at("snr_db").get<std::vector<double>>();
        if (j.contains("frames")) c.frames = j.at("frames").get<int>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("threads")) c.threads = j.at("threads").get<int>();
        if (j.contains("out")) c.out = j.at("out").get<std::string>();
        if (j.contains("estimators")) {
            c.estimators.clear();
            for (const auto& e : j.at("estimators")) {
                EstimatorSpec s;
                if (e.is_string()) {
                    s.name = e.get<std::string>();
                } else {
                    s.name = e.at("name").get<std::string>();
                    if (e.contains("alpha")) s.alpha = e.at("alpha").get<double>();
                    if (e.contains("beta")) s.beta = e.at("beta").get<int>();
                    if (e.contains("model")) s.model_path = e.at("model").get<std::string>();
                    if (e.contains("feedback"))
                        s.feedback = e.at("feedback").get<std::string>() == "lstm"
                                         ? LstmFeedback::lstm
                                         : LstmFeedback::ta;
                }
                c.estimators.push_back(std::move(s));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("config schema violation: ") + e.what());
    }
    if (c.snr_db.empty()) throw config_error("config: snr_db grid must be nonempty");
    if (c.frames < 1) throw config_error("config: frames must be >= 1");
    if (c.estimators.empty()) throw config_error("config: estimator list must be nonempty");
    try {
        c.profile.validate(64);
        c.constellation();
    } catch (const std::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    return c;
}

/// Models loaded once per run, keyed by file path.
struct LoadedModels {
    std::map<std::string, LstmModel> lstm;
    std::map<std::string, Mlp> mlp;

    const LstmModel* find_lstm(const std::string& path) const {
        auto it = lstm.find(path);
        return it == lstm.end() ? nullptr : &it->second;
    }
    const Mlp* find_mlp(const std::string& path) const {
        auto it = mlp.find(path);
        return it == mlp.end() ? nullptr : &it->second;
    }
};

inline LoadedModels load_models(const SimConfig& cfg) {
    LoadedModels m;
    for (const auto& e : cfg.estimators) {
        if (!e.needs_model()) continue;
        if (e.model_path.empty())
            throw missing_model_error("estimator '" + e.name + "' needs a model path");
        if (e.name == "sta-dnn" || e.name == "trfi-dnn") {
            if (!m.mlp.count(e.model_path)) m.mlp.emplace(e.model_path, load_mlp_model(e.model_path));
        } else {
            if (!m.lstm.count(e.model_path))
                m.lstm.emplace(e.model_path, load_lstm_model(e.model_path));
        }
    }
    return m;
}

struct MetricRecord {
    std::string estimator;
    double snr_db = 0.0;
    double ber = 0.0;
    double nmse = 0.0;
    long frames = 0;
    long long bits = 0;
    long flagged = 0;
};

namespace detail {

inline EstimateTrace run_estimator(const EstimatorSpec& spec, const FrameGrid& rx,
                                   const ChannelRealization& ch, const LoadedModels& models,
                                   const Constellation& c, const FrameLayout& layout) {
    if (spec.name == "perfect") {
        EstimateTrace t;
        t.name = "perfect";
        t.est.push_back(ls_from_grid(rx, layout));
        for (int i = 0; i < layout.symbols_per_frame; ++i) t.est.push_back(ch.data_cfr(i));
        return t;
    }
    if (spec.name == "lstm-dpa-ta") {
        const LstmModel* m = models.find_lstm(spec.model_path);
        if (!m) throw missing_model_error("lstm-dpa-ta model not loaded: " + spec.model_path);
        return run_lstm_dpa_ta(rx, make_lstm_predictor(m), spec.alpha, c, layout, spec.feedback);
    }
    BaselineKind kind = baseline_from_name(spec.name);
    BaselineModels hooks;
    if (kind == BaselineKind::sta_dnn) {
        const Mlp* m = models.find_mlp(spec.model_path);
        if (!m) throw missing_model_error("sta-dnn model not loaded: " + spec.model_path);
        hooks.sta_dnn = make_mlp_corrector(m);
    } else if (kind == BaselineKind::trfi_dnn) {
        const Mlp* m = models.find_mlp(spec.model_path);
        if (!m) throw missing_model_error("trfi-dnn model not loaded: " + spec.model_path);
        hooks.trfi_dnn = make_mlp_corrector(m);
    } else if (kind == BaselineKind::lstm_dnn_dpa) {
        const LstmModel* m = models.find_lstm(spec.model_path);
        if (!m) throw missing_model_error("lstm-dnn-dpa model not loaded: " + spec.model_path);
        hooks.lstm_dnn_dpa = make_lstm_predictor(m);
    }
    return run_baseline(rx, kind, hooks, StaConfig{spec.alpha, spec.beta}, c, layout);
}

}  // namespace detail

/// Equalize with the per-symbol estimates, demap, decode, count bit errors
/// against the frame's payload.
inline long long count_bit_errors(const EstimateTrace& t, const FrameGrid& rx,
                                  const Constellation& c, const FrameLayout& layout,
                                  bool coded) {
    long scratch = 0;
    bitvec decoded;
    if (coded) {
        std::vector<double> llrs;
        llrs.reserve(static_cast<std::size_t>(layout.symbols_per_frame) * layout.n_data() *
                     c.bits_per_symbol);
        for (int i = 0; i < layout.symbols_per_frame; ++i)
            for (int pos : layout.data_pos) {
                cplx z = rx.data_rx[i][pos] / detail::guard_divisor(t.est[i + 1][pos], scratch);
                soft_demap(z, c, llrs);
            }
        decoded = viterbi_decode(llrs);
    } else {
        cvec eq;
        eq.reserve(static_cast<std::size_t>(layout.symbols_per_frame) * layout.n_data());
        for (int i = 0; i < layout.symbols_per_frame; ++i)
            for (int pos : layout.data_pos)
                eq.push_back(rx.data_rx[i][pos] / detail::guard_divisor(t.est[i + 1][pos], scratch));
        decoded = demap_bits(eq, c);
    }
    long long errors = 0;
    for (std::size_t b = 0; b < rx.payload.size(); ++b) errors += decoded[b] != rx.payload[b];
    return errors;
}

namespace detail {

inline double frame_nmse(const EstimateTrace& t, const ChannelRealization& ch) {
    std::vector<cvec> est(t.est.begin() + 1, t.est.end());
    std::vector<cvec> truth(ch.cfr.begin() + 2, ch.cfr.end());
    return nmse(est, truth);
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t realization_checksum(const ChannelRealization& ch) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& sym : ch.cfr)
        h = fnv1a64(sym.data(), sym.size() * sizeof(cplx), h);
    return h;
}

struct TrialAccum {
    long long bit_errors = 0;
    long long bits = 0;
    double nmse_sum = 0.0;
    long flagged = 0;
};

}  // namespace detail

/// Paired Monte-Carlo sweep: for each SNR point and trial, one payload,
/// channel realization, and noise draw are generated from seeds derived as
/// (master seed, snr index, trial index) and shared by every estimator.
/// Trials may run on several workers; per-trial results are reduced in trial
/// order, so the output is independent of the thread count.
inline std::vector<MetricRecord> run_sweep(const SimConfig& cfg, const LoadedModels& models,
                                           std::vector<std::uint64_t>* checksums_out = nullptr) {
    const FrameLayout layout = cfg.layout();
    const Constellation c = cfg.constellation();
    const int n_est = static_cast<int>(cfg.estimators.size());
    const int n_snr = static_cast<int>(cfg.snr_db.size());
    const long n_trials = static_cast<long>(n_snr) * cfg.frames;

    std::vector<detail::TrialAccum> cells(static_cast<std::size_t>(n_trials) * n_est);
    std::vector<std::uint64_t> checksums(n_trials, 0);

    auto run_trial = [&](long trial) {
        const int si = static_cast<int>(trial / cfg.frames);
        const int f = static_cast<int>(trial % cfg.frames);
        Rng payload_rng(derive_seed(cfg.seed, si, f, 1));
        bitvec payload = random_bits(payload_bit_count(layout, c, cfg.coding), payload_rng);
        FrameGrid tx = build_frame(payload, layout, c, cfg.coding);
        MobilityConfig mob{cfg.doppler_hz, cfg.symbol_duration_s, cfg.sinusoids,
                           derive_seed(cfg.seed, si, f, 2)};
        ChannelRealization ch = gen_realization(cfg.profile, mob, layout);
        Rng noise(derive_seed(cfg.seed, si, f, 3));
        FrameGrid rx = apply_channel(tx, ch, cfg.snr_db[si], layout, noise);
        checksums[trial] = detail::realization_checksum(ch);
        for (int e = 0; e < n_est; ++e) {
            EstimateTrace t = detail::run_estimator(cfg.estimators[e], rx, ch, models, c, layout);
            detail::TrialAccum& acc = cells[static_cast<std::size_t>(trial) * n_est + e];
            acc.bit_errors = count_bit_errors(t, rx, c, layout, cfg.coding);
            acc.bits = static_cast<long long>(payload.size());
            acc.nmse_sum = detail::frame_nmse(t, ch);
            acc.flagged = t.flagged;
        }
    };

    const int workers = std::max(1, cfg.threads);
    if (workers == 1) {
        for (long trial = 0; trial < n_trials; ++trial) run_trial(trial);
    } else {
        std::vector<std::thread> pool;
        std::atomic<long> next{0};
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (long t = next.fetch_add(1); t < n_trials; t = next.fetch_add(1)) run_trial(t);
            });
        for (auto& th : pool) th.join();
    }

    // reduction in fixed (snr, frame) order keeps the output thread-count
    // independent
    std::vector<MetricRecord> records;
    for (int si = 0; si < n_snr; ++si)
        for (int e = 0; e < n_est; ++e) {
            MetricRecord r;
            r.estimator = cfg.estimators[e].name;
            r.snr_db = cfg.snr_db[si];
            long long errors = 0, bits = 0;
            double nmse_acc = 0.0;
            long flagged = 0;
            for (int f = 0; f < cfg.frames; ++f) {
                const auto& acc =
                    cells[(static_cast<std::size_t>(si) * cfg.frames + f) * n_est + e];
                errors += acc.bit_errors;
                bits += acc.bits;
                nmse_acc += acc.nmse_sum;
                flagged += acc.flagged;
            }
            r.ber = bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0;
            r.nmse = nmse_acc / cfg.frames;
            r.frames = cfg.frames;
            r.bits = bits;
            r.flagged = flagged;
            records.push_back(std::move(r));
        }
    if (checksums_out) *checksums_out = std::move(checksums);
    return records;
}

/// Metrics CSV; stable ordering and fixed formatting make repeated runs
/// byte-identical.
inline std::string report(const std::vector<MetricRecord>& records) {
    std::string out = "estimator,snr_db,ber,nmse,frames,bits\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%ld,%lld\n", r.estimator.c_str(),
                      r.snr_db, r.ber, r.nmse, r.frames, r.bits);
        out += buf;
    }
    return out;
}

inline void print_summary(std::ostream& os, const std::vector<MetricRecord>& records) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-14s %8s %12s %12s %8s %10s %8s\n", "estimator", "snr_db",
                  "ber", "nmse", "frames", "bits", "flagged");
    os << buf;
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%-14s %8.1f %12.4e %12.4e %8ld %10lld %8ld\n",
                      r.estimator.c_str(), r.snr_db, r.ber, r.nmse, r.frames, r.bits, r.flagged);
        os << buf;
    }
}

// ---------------------------------------------------------------------------
// training front-end

struct TrainOptions {
    DatasetKind kind = DatasetKind::lstm_dpa_ta;
    int frames = 0;  // 0: derive from tc.samples / symbols_per_frame
    int hidden = 128;
    TrainConfig tc;
    std::string dataset_path;  // load instead of generating when set
    std::string resume_path;   // continue from an existing model
    std::string model_out = "model.bin";
    std::string loss_csv;
};

struct TrainSummary {
    std::vector<double> loss;
    std::string model_path;
};

inline TrainSummary train_command(const SimConfig& sim, const TrainOptions& opt) {
    const FrameLayout layout = sim.layout();
    const int frames = opt.frames > 0
                           ? opt.frames
                           : std::max(1, opt.tc.samples / layout.symbols_per_frame);
    TrainSummary out;
    out.model_path = opt.model_out;

    auto write_loss = [&](const std::vector<double>& loss) {
        if (opt.loss_csv.empty()) return;
        std::ofstream os(opt.loss_csv);
        if (!os) throw std::runtime_error("cannot write loss log: " + opt.loss_csv);
        os << "epoch,mse\n";
        char buf[64];
        for (std::size_t e = 0; e < loss.size(); ++e) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e + 1, loss[e]);
            os << buf;
        }
    };

    ModelMeta meta;
    meta.epochs = static_cast<std::uint32_t>(opt.tc.epochs);
    meta.batch = static_cast<std::uint32_t>(opt.tc.batch);
    meta.lr = opt.tc.lr;
    meta.train_snr_db = opt.tc.train_snr_db;
    meta.seed = opt.tc.seed;

    if (opt.kind == DatasetKind::sta_dnn || opt.kind == DatasetKind::trfi_dnn) {
        FlatDataset data;
        if (!opt.dataset_path.empty()) {
            SeqDataset seq = load_dataset(opt.dataset_path);
            for (std::size_t s = 0; s < seq.size(); ++s)
                for (std::size_t t = 0; t < seq.inputs[s].size(); ++t) {
                    data.inputs.push_back(seq.inputs[s][t]);
                    data.targets.push_back(seq.targets[s][t]);
                }
        } else {
            data = gen_flat_dataset(opt.kind, frames, opt.tc.train_snr_db, sim.dataset_sim(),
                                    layout, derive_seed(opt.tc.seed, 101));
        }
        Rng rng(derive_seed(opt.tc.seed, 7));
        Mlp model = opt.resume_path.empty()
                        ? Mlp::make({2 * layout.n_active(), 15, 15, 15, 2 * layout.n_active()}, rng)
                        : load_mlp_model(opt.resume_path);
        out.loss = train(model, data, opt.tc);
        save_model(opt.model_out, model, meta);
    } else {
        SeqDataset data = !opt.dataset_path.empty()
                              ? load_dataset(opt.dataset_path)
                              : gen_seq_dataset(opt.kind, frames, opt.tc.train_snr_db,
                                                sim.dataset_sim(), layout,
                                                derive_seed(opt.tc.seed, 101));
        Rng rng(derive_seed(opt.tc.seed, 7));
        LstmModel model;
        if (!opt.resume_path.empty()) {
            model = load_lstm_model(opt.resume_path);
        } else if (opt.kind == DatasetKind::lstm_dpa_ta) {
            model = LstmModel::make(opt.hidden, 2 * layout.n_active(), 2 * layout.n_data(), {},
                                    rng);
        } else {
            model = LstmModel::make(opt.hidden, 2 * (layout.n_active() + layout.n_pilots()),
                                    2 * layout.n_data(), {40}, rng);
        }
        out.loss = train(model, data, opt.tc);
        save_model(opt.model_out, model, meta);
    }
    write_loss(out.loss);
    return out;
}

}  // namespace dot11p

#pragma once

#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dot11p/channel.hpp"
#include "dot11p/estimators.hpp"
#include "dot11p/neural.hpp"

namespace dot11p {

enum class DatasetKind : std::uint8_t {
    lstm_dpa_ta = 0,   // x-bar input (2*Kon) -> true channel on Kd (2*Kd)
    lstm_dnn_dpa = 1,  // previous Kon estimate + pilot LS (2*(Kon+Kp)) -> 2*Kd
    sta_dnn = 2,       // STA estimate on Kon -> true channel on Kon
    trfi_dnn = 3,      // TRFI estimate on Kon -> true channel on Kon
};

inline DatasetKind dataset_kind_from_name(const std::string& name) {
    if (name == "lstm-dpa-ta") return DatasetKind::lstm_dpa_ta;
    if (name == "lstm-dnn-dpa") return DatasetKind::lstm_dnn_dpa;
    if (name == "sta-dnn") return DatasetKind::sta_dnn;
    if (name == "trfi-dnn") return DatasetKind::trfi_dnn;
    throw std::invalid_argument("unknown dataset kind: " + name);
}

/// Fills the predictor input on Kon: data positions from the feedback
/// estimate, pilot positions from the per-symbol pilot LS values.
inline cvec assemble_predictor_input(const cvec& feedback_kon, const cvec& pilot_ls,
                                     const FrameLayout& layout) {
    cvec xbar = feedback_kon;
    for (std::size_t pp = 0; pp < layout.pilot_pos.size(); ++pp)
        xbar[layout.pilot_pos[pp]] = pilot_ls[pp];
    return xbar;
}

struct DatasetSimConfig {
    TdlProfile profile;
    double doppler_hz = 550.0;
    double symbol_duration_s = 8e-6;
    int sinusoids = 32;
    Constellation constellation = Constellation::make(Constellation::Order::qam16);
    bool coding = true;
    StaConfig sta;  // for the sta-dnn kind
};

namespace detail {

struct SimulatedFrame {
    FrameGrid rx;
    ChannelRealization ch;
};

inline SimulatedFrame simulate_frame(const DatasetSimConfig& sim, const FrameLayout& layout,
                                     double snr_db, std::uint64_t seed) {
    Rng payload_rng(derive_seed(seed, 11));
    bitvec payload =
        random_bits(payload_bit_count(layout, sim.constellation, sim.coding), payload_rng);
    FrameGrid tx = build_frame(payload, layout, sim.constellation, sim.coding);
    MobilityConfig mob{sim.doppler_hz, sim.symbol_duration_s, sim.sinusoids,
                       derive_seed(seed, 13)};
    SimulatedFrame f;
    f.ch = gen_realization(sim.profile, mob, layout);
    Rng noise(derive_seed(seed, 17));
    f.rx = apply_channel(tx, f.ch, snr_db, layout, noise);
    return f;
}

}  // namespace detail

/// Simulates frames and records (input sequence, target sequence) pairs for
/// the recurrent estimators. During data generation the recurrent feedback is
/// teacher-forced with the true previous channel; the pilot entries stay the
/// noisy per-symbol LS values the estimator will see at run time.
inline SeqDataset gen_seq_dataset(DatasetKind kind, int n_frames, double snr_db,
                                  const DatasetSimConfig& sim, const FrameLayout& layout,
                                  std::uint64_t seed) {
    if (kind != DatasetKind::lstm_dpa_ta && kind != DatasetKind::lstm_dnn_dpa)
        throw std::invalid_argument("gen_seq_dataset: kind is not sequence-shaped");
    SeqDataset out;
    for (int f = 0; f < n_frames; ++f) {
        auto frame = detail::simulate_frame(sim, layout, snr_db, derive_seed(seed, f));
        std::vector<Vec> inputs, targets;
        for (int i = 0; i < layout.symbols_per_frame; ++i) {
            const cvec& y = frame.rx.data_rx[i];
            const cvec& h_prev = frame.ch.cfr[i + 1];  // true channel one symbol back
            const cvec& h_now = frame.ch.cfr[i + 2];
            cvec p_ls = detail::pilot_ls(y, frame.rx, layout);

            cvec x;
            if (kind == DatasetKind::lstm_dpa_ta) {
                x = assemble_predictor_input(h_prev, p_ls, layout);
            } else {
                x = h_prev;
                x.insert(x.end(), p_ls.begin(), p_ls.end());
            }
            inputs.push_back(stack_reim(x));

            cvec target_kd(layout.n_data());
            for (std::size_t d = 0; d < layout.data_pos.size(); ++d)
                target_kd[d] = h_now[layout.data_pos[d]];
            targets.push_back(stack_reim(target_kd));
        }
        out.inputs.push_back(std::move(inputs));
        out.targets.push_back(std::move(targets));
    }
    return out;
}

/// Per-symbol samples for the DNN correctors: conventional estimate in, true
/// channel out, both on Kon.
inline FlatDataset gen_flat_dataset(DatasetKind kind, int n_frames, double snr_db,
                                    const DatasetSimConfig& sim, const FrameLayout& layout,
                                    std::uint64_t seed) {
    if (kind != DatasetKind::sta_dnn && kind != DatasetKind::trfi_dnn)
        throw std::invalid_argument("gen_flat_dataset: kind is not flat-shaped");
    FlatDataset out;
    for (int f = 0; f < n_frames; ++f) {
        auto frame = detail::simulate_frame(sim, layout, snr_db, derive_seed(seed, f));
        EstimateTrace t = kind == DatasetKind::sta_dnn
                              ? run_sta(frame.rx, sim.sta, sim.constellation, layout)
                              : run_trfi(frame.rx, sim.constellation, layout);
        for (int i = 1; i <= layout.symbols_per_frame; ++i) {
            out.inputs.push_back(stack_reim(t.est[i]));
            out.targets.push_back(stack_reim(frame.ch.cfr[i + 1]));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// dataset files: binary (magic, version, kind, dims, f64 blobs) and CSV

namespace detail {

constexpr char kDatasetMagic[4] = {'D', '1', '1', 'D'};
constexpr std::uint32_t kDatasetVersion = 1;

}  // namespace detail

inline void save_dataset(const std::string& path, const SeqDataset& d, DatasetKind kind) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write dataset: " + path);
    os.write(detail::kDatasetMagic, 4);
    nn::write_pod(os, detail::kDatasetVersion);
    nn::write_pod(os, static_cast<std::uint8_t>(kind));
    nn::write_pod<std::uint64_t>(os, d.size());
    const std::uint32_t steps = d.size() ? static_cast<std::uint32_t>(d.inputs[0].size()) : 0;
    const std::uint32_t in_dim =
        steps && d.size() ? static_cast<std::uint32_t>(d.inputs[0][0].size()) : 0;
    const std::uint32_t out_dim =
        steps && d.size() ? static_cast<std::uint32_t>(d.targets[0][0].size()) : 0;
    nn::write_pod(os, steps);
    nn::write_pod(os, in_dim);
    nn::write_pod(os, out_dim);
    for (std::size_t s = 0; s < d.size(); ++s)
        for (std::uint32_t t = 0; t < steps; ++t) {
            os.write(reinterpret_cast<const char*>(d.inputs[s][t].data()),
                     static_cast<std::streamsize>(in_dim * sizeof(double)));
            os.write(reinterpret_cast<const char*>(d.targets[s][t].data()),
                     static_cast<std::streamsize>(out_dim * sizeof(double)));
        }
    if (!os) throw std::runtime_error("dataset write failed: " + path);
}

inline SeqDataset load_dataset(const std::string& path, DatasetKind* kind_out = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open dataset: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, detail::kDatasetMagic, 4) != 0)
        throw std::runtime_error("corrupt dataset file: bad magic in " + path);
    if (nn::read_pod<std::uint32_t>(is) != detail::kDatasetVersion)
        throw std::runtime_error("dataset version mismatch: " + path);
    auto kind = static_cast<DatasetKind>(nn::read_pod<std::uint8_t>(is));
    if (kind_out) *kind_out = kind;
    auto n_seq = nn::read_pod<std::uint64_t>(is);
    auto steps = nn::read_pod<std::uint32_t>(is);
    auto in_dim = nn::read_pod<std::uint32_t>(is);
    auto out_dim = nn::read_pod<std::uint32_t>(is);
    SeqDataset d;
    for (std::uint64_t s = 0; s < n_seq; ++s) {
        std::vector<Vec> in(steps, Vec(in_dim)), tg(steps, Vec(out_dim));
        for (std::uint32_t t = 0; t < steps; ++t) {
            is.read(reinterpret_cast<char*>(in[t].data()),
                    static_cast<std::streamsize>(in_dim * sizeof(double)));
            is.read(reinterpret_cast<char*>(tg[t].data()),
                    static_cast<std::streamsize>(out_dim * sizeof(double)));
            if (!is) throw std::runtime_error("dataset file truncated: " + path);
        }
        d.inputs.push_back(std::move(in));
        d.targets.push_back(std::move(tg));
    }
    return d;
}

/// Columns: sequence, step, in_0..in_{m-1}, out_0..out_{n-1}.
inline void dump_dataset_csv(std::ostream& os, const SeqDataset& d) {
    if (d.size() == 0) {
        os << "sequence,step\n";
        return;
    }
    os << "sequence,step";
    for (std::size_t k = 0; k < d.inputs[0][0].size(); ++k) os << ",in_" << k;
    for (std::size_t k = 0; k < d.targets[0][0].size(); ++k) os << ",out_" << k;
    os << "\n";
    char buf[32];
    for (std::size_t s = 0; s < d.size(); ++s)
        for (std::size_t t = 0; t < d.inputs[s].size(); ++t) {
            os << s << ',' << t;
            for (double v : d.inputs[s][t]) {
                std::snprintf(buf, sizeof(buf), ",%.17g", v);
                os << buf;
            }
            for (double v : d.targets[s][t]) {
                std::snprintf(buf, sizeof(buf), ",%.17g", v);
                os << buf;
            }
            os << "\n";
        }
}

// ---------------------------------------------------------------------------
// model adapters for the estimator pipelines

/// Wraps an LSTM model as a stateful per-frame channel predictor. The
/// returned functor owns a fresh hidden state; create one per frame. The
/// model must outlive the predictor.
inline ChannelPredictor make_lstm_predictor(const LstmModel* model) {
    auto state = std::make_shared<LstmState>(model->hidden());
    return [model, state](const cvec& xbar) {
        Vec x = stack_reim(xbar);
        if (static_cast<int>(x.size()) != model->in_dim())
            throw std::invalid_argument("lstm predictor: input width mismatch");
        Vec h = lstm_cell(model->cell, x, *state);
        return unstack_reim(mlp_forward(model->head, h));
    };
}

/// Wraps an MLP as a per-symbol estimate corrector on Kon.
inline EstimateCorrector make_mlp_corrector(const Mlp* model) {
    return [model](const cvec& est) {
        Vec x = stack_reim(est);
        if (static_cast<int>(x.size()) != model->in_dim())
            throw std::invalid_argument("mlp corrector: input width mismatch");
        return unstack_reim(mlp_forward(*model, x));
    };
}

}  // namespace dot11p

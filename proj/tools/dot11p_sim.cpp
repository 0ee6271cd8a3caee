// Batch front-end: Monte-Carlo BER/NMSE sweeps, dataset generation, model
// training and evaluation, complexity tables, and the temporal-averaging
// noise-ratio table.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dot11p/complexity.hpp"
#include "dot11p/dataset.hpp"
#include "dot11p/harness.hpp"

using namespace dot11p;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitModel = 3;

std::vector<double> parse_snr_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw config_error("empty --snr list");
    return out;
}

struct CommonOverrides {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string snr;
    int frames = 0;
    std::string estimators;
    std::string out;
    int threads = 0;

    void attach(CLI::App* cmd, bool with_estimators = true) {
        cmd->add_option("--config", config_path, "simulation config (JSON)");
        cmd->add_option("--seed", seed, "master seed override")->each([this](std::string) {
            seed_set = true;
        });
        cmd->add_option("--snr", snr, "comma-separated SNR grid override (dB)");
        cmd->add_option("--frames", frames, "frames per SNR point override");
        if (with_estimators)
            cmd->add_option("--estimators", estimators,
                            "comma-separated estimator list override");
        cmd->add_option("--out", out, "output path override");
        cmd->add_option("--threads", threads, "worker thread count");
    }

    SimConfig resolve() const {
        SimConfig cfg =
            config_path.empty() ? SimConfig{} : SimConfig::from_file(config_path);
        if (seed_set) cfg.seed = seed;
        if (!snr.empty()) cfg.snr_db = parse_snr_list(snr);
        if (frames > 0) cfg.frames = frames;
        if (threads > 0) cfg.threads = threads;
        if (!out.empty()) cfg.out = out;
        if (!estimators.empty()) {
            std::vector<EstimatorSpec> specs;
            std::stringstream ss(estimators);
            std::string name;
            while (std::getline(ss, name, ','))
                if (!name.empty()) {
                    // keep per-estimator settings from the config file when
                    // the same name appears there
                    EstimatorSpec spec;
                    spec.name = name;
                    for (const auto& e : cfg.estimators)
                        if (e.name == name) spec = e;
                    specs.push_back(std::move(spec));
                }
            if (specs.empty()) throw config_error("empty --estimators list");
            cfg.estimators = std::move(specs);
        }
        return cfg;
    }
};

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write: " + path);
    os << content;
}

int cmd_sweep(const CommonOverrides& common) {
    SimConfig cfg = common.resolve();
    LoadedModels models = load_models(cfg);
    auto records = run_sweep(cfg, models);
    write_text_file(cfg.out, report(records));
    print_summary(std::cout, records);
    std::cout << "wrote " << cfg.out << "\n";
    return 0;
}

int cmd_gen_data(const CommonOverrides& common, const std::string& kind_name, double snr_db,
                 int frames, const std::string& out_bin, const std::string& out_csv) {
    SimConfig cfg = common.resolve();
    DatasetKind kind = dataset_kind_from_name(kind_name);
    const FrameLayout layout = cfg.layout();
    SeqDataset data;
    if (kind == DatasetKind::sta_dnn || kind == DatasetKind::trfi_dnn) {
        FlatDataset flat =
            gen_flat_dataset(kind, frames, snr_db, cfg.dataset_sim(), layout, cfg.seed);
        for (std::size_t i = 0; i < flat.size(); ++i) {
            data.inputs.push_back({flat.inputs[i]});
            data.targets.push_back({flat.targets[i]});
        }
    } else {
        data = gen_seq_dataset(kind, frames, snr_db, cfg.dataset_sim(), layout, cfg.seed);
    }
    save_dataset(out_bin, data, kind);
    if (!out_csv.empty()) {
        std::ofstream os(out_csv);
        dump_dataset_csv(os, data);
    }
    std::cout << "wrote " << data.size() << " sequences to " << out_bin << "\n";
    return 0;
}

int cmd_train(const CommonOverrides& common, TrainOptions opt, const std::string& kind_name) {
    SimConfig cfg = common.resolve();
    opt.kind = dataset_kind_from_name(kind_name);
    if (common.seed_set) opt.tc.seed = common.seed;
    if (!common.out.empty()) opt.model_out = common.out;
    TrainSummary s = train_command(cfg, opt);
    std::cout << "trained " << kind_name << ": epochs=" << s.loss.size();
    if (!s.loss.empty())
        std::cout << " first-mse=" << s.loss.front() << " last-mse=" << s.loss.back();
    std::cout << "\nwrote " << s.model_path << "\n";
    return 0;
}

int cmd_eval(const CommonOverrides& common, const std::string& model_path,
             const std::string& trace_csv, const std::string& grid_csv,
             const std::string& channel_csv, const std::string& payload_file) {
    SimConfig cfg = common.resolve();
    if (!model_path.empty())
        for (auto& e : cfg.estimators)
            if (e.needs_model() && e.model_path.empty()) e.model_path = model_path;
    LoadedModels models = load_models(cfg);

    if (!trace_csv.empty() || !grid_csv.empty() || !channel_csv.empty()) {
        // one representative frame, the first trial of the first SNR point
        const FrameLayout layout = cfg.layout();
        const Constellation c = cfg.constellation();
        bitvec payload;
        if (!payload_file.empty())
            payload = bits_from_file(payload_file, payload_bit_count(layout, c, cfg.coding));
        else {
            Rng rng(derive_seed(cfg.seed, 0, 0, 1));
            payload = random_bits(payload_bit_count(layout, c, cfg.coding), rng);
        }
        FrameGrid tx = build_frame(payload, layout, c, cfg.coding);
        MobilityConfig mob{cfg.doppler_hz, cfg.symbol_duration_s, cfg.sinusoids,
                           derive_seed(cfg.seed, 0, 0, 2)};
        ChannelRealization ch = gen_realization(cfg.profile, mob, layout);
        Rng noise(derive_seed(cfg.seed, 0, 0, 3));
        FrameGrid rx = apply_channel(tx, ch, cfg.snr_db.front(), layout, noise);
        if (!grid_csv.empty()) {
            std::ofstream os(grid_csv);
            dump_grid_csv(os, rx, layout, GridPlane::rx);
        }
        if (!channel_csv.empty()) {
            std::ofstream os(channel_csv);
            dump_realization_csv(os, ch, layout);
        }
        if (!trace_csv.empty()) {
            std::ofstream os(trace_csv);
            bool first = true;
            for (const auto& spec : cfg.estimators) {
                EstimateTrace t = detail::run_estimator(spec, rx, ch, models, c, layout);
                dump_trace_csv(os, t, ch, layout, first);
                first = false;
            }
        }
    }

    auto records = run_sweep(cfg, models);
    write_text_file(cfg.out, report(records));
    print_summary(std::cout, records);
    std::cout << "wrote " << cfg.out << "\n";
    return 0;
}

int cmd_complexity(const std::string& csv_path) {
    if (csv_path.empty()) {
        complexity_table(std::cout, false);
    } else {
        std::ofstream os(csv_path);
        complexity_table(os, true);
        std::cout << "wrote " << csv_path << "\n";
    }
    return 0;
}

int cmd_ta_ratio(int max_q, const std::string& csv_path) {
    std::ostringstream os;
    os << "q,numerator,denominator,value\n";
    for (int q = 1; q <= max_q; ++q) {
        rational r = ta_noise_ratio(q);
        char buf[64];
        std::snprintf(buf, sizeof(buf), ",%.17g\n", ta_noise_ratio_d(q));
        os << q << ',' << boost::multiprecision::numerator(r) << ','
           << boost::multiprecision::denominator(r) << buf;
    }
    if (csv_path.empty()) {
        std::cout << os.str();
    } else {
        write_text_file(csv_path, os.str());
        std::cout << "wrote " << csv_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IEEE 802.11p channel-estimation simulator and benchmark harness"};
    app.require_subcommand(1);

    CommonOverrides sweep_common;
    auto* sweep = app.add_subcommand("sweep", "Monte-Carlo BER/NMSE sweep over the SNR grid");
    sweep_common.attach(sweep);

    CommonOverrides gen_common;
    std::string gen_kind = "lstm-dpa-ta", gen_out = "dataset.bin", gen_csv;
    double gen_snr = 40.0;
    int gen_frames = 320;
    auto* gen = app.add_subcommand("gen-data", "generate a training dataset");
    gen_common.attach(gen, false);
    gen->add_option("--kind", gen_kind, "lstm-dpa-ta|lstm-dnn-dpa|sta-dnn|trfi-dnn");
    gen->add_option("--data-snr", gen_snr, "dataset SNR in dB (default 40)");
    gen->add_option("--data-frames", gen_frames, "number of simulated frames");
    gen->add_option("--data-out", gen_out, "output dataset file");
    gen->add_option("--csv", gen_csv, "also dump the dataset as CSV");

    CommonOverrides train_common;
    TrainOptions train_opt;
    std::string train_kind = "lstm-dpa-ta";
    auto* train = app.add_subcommand("train", "train an estimator model");
    train_common.attach(train, false);
    train->add_option("--kind", train_kind, "lstm-dpa-ta|lstm-dnn-dpa|sta-dnn|trfi-dnn");
    train->add_option("--data", train_opt.dataset_path, "pre-generated dataset file");
    train->add_option("--train-frames", train_opt.frames,
                      "training frames when generating inline (0: samples/I)");
    train->add_option("--hidden", train_opt.hidden, "LSTM hidden size P");
    train->add_option("--epochs", train_opt.tc.epochs, "training epochs");
    train->add_option("--batch", train_opt.tc.batch, "mini-batch size");
    train->add_option("--lr", train_opt.tc.lr, "learning rate");
    train->add_option("--train-snr", train_opt.tc.train_snr_db, "training SNR in dB");
    train->add_option("--samples", train_opt.tc.samples, "training samples (symbols)");
    train->add_option("--resume", train_opt.resume_path, "continue from an existing model");
    train->add_option("--model-out", train_opt.model_out, "output model file");
    train->add_option("--loss-log", train_opt.loss_csv, "per-epoch MSE CSV");

    CommonOverrides eval_common;
    std::string eval_model, eval_trace, eval_grid, eval_channel, eval_payload;
    auto* eval = app.add_subcommand("eval", "evaluate estimators; optional trace/grid dumps");
    eval_common.attach(eval);
    eval->add_option("--model", eval_model, "model file for learned estimators lacking one");
    eval->add_option("--dump-trace", eval_trace, "write per-symbol estimate trace CSV");
    eval->add_option("--dump-grid", eval_grid, "write the received frame grid CSV");
    eval->add_option("--dump-channel", eval_channel, "write the true channel realization CSV");
    eval->add_option("--payload-file", eval_payload, "payload bits for the dumped frame");

    std::string cx_csv;
    auto* cx = app.add_subcommand("complexity", "operation-count table per estimator");
    cx->add_option("--csv", cx_csv, "write CSV instead of text");

    int ta_max_q = 51;
    std::string ta_csv;
    auto* ta = app.add_subcommand("ta-ratio", "temporal-averaging noise-power ratio table");
    ta->add_option("--max-q", ta_max_q, "largest symbol index (>= 1)");
    ta->add_option("--csv", ta_csv, "write CSV instead of text");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) return cmd_sweep(sweep_common);
        if (gen->parsed())
            return cmd_gen_data(gen_common, gen_kind, gen_snr, gen_frames, gen_out, gen_csv);
        if (train->parsed()) return cmd_train(train_common, train_opt, train_kind);
        if (eval->parsed())
            return cmd_eval(eval_common, eval_model, eval_trace, eval_grid, eval_channel,
                            eval_payload);
        if (cx->parsed()) return cmd_complexity(cx_csv);
        if (ta->parsed()) return cmd_ta_ratio(ta_max_q, ta_csv);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const missing_model_error& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kExitModel;
    } catch (const model_error& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kExitModel;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

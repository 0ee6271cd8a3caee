#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dot11p/neural.hpp"
#include "dot11p/rng.hpp"

using namespace dot11p;

namespace {

LstmModel tiny_lstm(int hidden, int input, int out, std::uint64_t seed,
                    std::vector<int> head_hidden = {}) {
    Rng rng(seed);
    return LstmModel::make(hidden, input, out, std::move(head_hidden), rng);
}

LstmModel hand_cell_model() {
    // fixed 2x3 cell used by the hand-evaluated oracle below
    LstmModel m;
    m.cell.hidden = 2;
    m.cell.input = 3;
    auto mat = [](std::initializer_list<double> v, int r, int c) {
        Mat w(r, c);
        std::copy(v.begin(), v.end(), w.a.begin());
        return w;
    };
    m.cell.w_in[0] = mat({0.1, -0.2, 0.3, 0.0, 0.25, -0.15}, 2, 3);
    m.cell.w_in[1] = mat({0.2, 0.1, 0.0, -0.3, 0.2, 0.1}, 2, 3);
    m.cell.w_in[2] = mat({0.5, -0.5, 0.25, 0.1, 0.2, 0.3}, 2, 3);
    m.cell.w_in[3] = mat({-0.1, 0.4, 0.2, 0.3, -0.2, 0.1}, 2, 3);
    m.cell.w_rec[0] = mat({0.1, 0.2, -0.1, 0.3}, 2, 2);
    m.cell.w_rec[1] = mat({0.05, -0.05, 0.2, 0.1}, 2, 2);
    m.cell.w_rec[2] = mat({0.3, 0.1, -0.2, 0.25}, 2, 2);
    m.cell.w_rec[3] = mat({0.15, 0.05, 0.1, -0.3}, 2, 2);
    m.cell.bias[0] = {0.1, -0.1};
    m.cell.bias[1] = {0.05, 0.2};
    m.cell.bias[2] = {-0.2, 0.3};
    m.cell.bias[3] = {0.0, 0.1};
    Rng rng(1);
    m.head = Mlp::make({2, 2}, rng);
    return m;
}

SeqDataset toy_seq_dataset(int n_seq, int steps, int in_dim, int out_dim, std::uint64_t seed) {
    Rng rng(seed);
    SeqDataset d;
    for (int s = 0; s < n_seq; ++s) {
        std::vector<Vec> in, out;
        for (int t = 0; t < steps; ++t) {
            Vec x(in_dim), y(out_dim);
            for (auto& v : x) v = rng.gauss();
            for (auto& v : y) v = 0.5 * rng.gauss();
            in.push_back(std::move(x));
            out.push_back(std::move(y));
        }
        d.inputs.push_back(std::move(in));
        d.targets.push_back(std::move(out));
    }
    return d;
}

}  // namespace

TEST(LstmCell, AllZeroParametersGiveZeroOutput) {
    LstmModel m = tiny_lstm(3, 4, 2, 5);
    for (auto span : param_views(m))
        for (auto& v : span) v = 0.0;
    LstmState s(3);
    Vec h = lstm_cell(m.cell, Vec(4, 0.7), s);
    for (double v : h) EXPECT_DOUBLE_EQ(v, 0.0);
    for (double v : s.c) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(LstmCell, SaturatedGatesPreserveTheCellState) {
    LstmModel m = tiny_lstm(3, 4, 2, 5);
    for (auto span : param_views(m))
        for (auto& v : span) v = 0.0;
    m.cell.bias[0].assign(3, 30.0);   // forget ~ 1
    m.cell.bias[1].assign(3, -30.0);  // input ~ 0
    LstmState s(3);
    s.c = {0.4, -0.9, 1.5};
    lstm_cell(m.cell, Vec(4, 0.3), s);
    EXPECT_NEAR(s.c[0], 0.4, 1e-9);
    EXPECT_NEAR(s.c[1], -0.9, 1e-9);
    EXPECT_NEAR(s.c[2], 1.5, 1e-9);
}

TEST(LstmCell, MatchesHandEvaluatedOracle) {
    LstmModel m = hand_cell_model();
    LstmState s(2);
    s.h = {0.5, -0.25};
    s.c = {0.3, 0.6};
    LstmStepCache cache;
    Vec h = lstm_cell(m.cell, {1.0, -0.5, 0.25}, s, &cache);
    // step-by-step scalar evaluation, frozen at double precision
    EXPECT_NEAR(cache.f[0], 0.59266659995406967, 1e-15);
    EXPECT_NEAR(cache.f[1], 0.40431926939215279, 1e-15);
    EXPECT_NEAR(cache.i[0], 0.55909747190239301, 1e-15);
    EXPECT_NEAR(cache.i[1], 0.47502081252105999, 1e-15);
    EXPECT_NEAR(cache.g[0], 0.62763234419698288, 1e-15);
    EXPECT_NEAR(cache.g[1], 0.20935816942801871, 1e-15);
    EXPECT_NEAR(cache.o[0], 0.45326184801538616, 1e-15);
    EXPECT_NEAR(cache.o[1], 0.65701046267349883, 1e-15);
    EXPECT_NEAR(s.c[0], 0.52870763691092659, 1e-15);
    EXPECT_NEAR(s.c[1], 0.34204104938491087, 1e-15);
    EXPECT_NEAR(h[0], 0.21955667688860328, 1e-15);
    EXPECT_NEAR(h[1], 0.21635245437052816, 1e-15);
}

TEST(LstmCell, RejectsDimensionMismatch) {
    LstmModel m = tiny_lstm(3, 4, 2, 5);
    LstmState s(3);
    EXPECT_THROW(lstm_cell(m.cell, Vec(5, 0.0), s), std::invalid_argument);
    LstmState bad(2);
    EXPECT_THROW(lstm_cell(m.cell, Vec(4, 0.0), bad), std::invalid_argument);
}

TEST(LstmCell, GateOutputsStayInOpenUnitInterval) {
    LstmModel m = tiny_lstm(8, 5, 3, 17);
    LstmState s(8);
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        Vec x(5);
        for (auto& v : x) v = 3.0 * rng.gauss();
        LstmStepCache cache;
        lstm_cell(m.cell, x, s, &cache);
        for (int r = 0; r < 8; ++r) {
            for (double v : {cache.f[r], cache.i[r], cache.o[r]}) {
                EXPECT_GT(v, 0.0);
                EXPECT_LT(v, 1.0);
            }
            EXPECT_LE(std::abs(cache.g[r]), 1.0);
        }
    }
}

TEST(LstmForwardSeq, SingleStepEqualsCellPlusReadout) {
    LstmModel m = tiny_lstm(4, 3, 2, 21);
    Vec x = {0.3, -0.8, 1.1};
    auto out = lstm_forward_seq(m, {x});
    LstmState s(4);
    Vec h = lstm_cell(m.cell, x, s);
    Vec expected = mlp_forward(m.head, h);
    ASSERT_EQ(out.size(), 1u);
    for (std::size_t d = 0; d < expected.size(); ++d) EXPECT_DOUBLE_EQ(out[0][d], expected[d]);
}

TEST(LstmForwardSeq, RepeatedInputConvergesToAFixedPoint) {
    LstmModel m = tiny_lstm(6, 4, 2, 23);
    std::vector<Vec> inputs(200, Vec{0.4, -0.2, 0.9, 0.1});
    std::vector<LstmStepCache> caches;
    auto out = lstm_forward_seq(m, inputs, &caches);
    double d_early = 0.0, d_late = 0.0;
    for (int r = 0; r < 6; ++r) {
        d_early += std::abs(caches[5].c[r] - caches[4].c[r]);
        d_late += std::abs(caches[199].c[r] - caches[198].c[r]);
    }
    EXPECT_LT(d_late, 1e-8);
    EXPECT_LT(d_late, d_early + 1e-12);
    for (const auto& cache : caches)
        for (double v : cache.tanh_c) EXPECT_LE(std::abs(v), 1.0);
}

TEST(LstmForwardSeq, ProposedDimensionsProduce96Outputs) {
    // 2*Kon = 104 inputs, P = 128 hidden, 2*Kd = 96 outputs over I = 50 steps
    LstmModel m = tiny_lstm(128, 104, 96, 29);
    std::vector<Vec> inputs(50, Vec(104, 0.1));
    auto out = lstm_forward_seq(m, inputs);
    ASSERT_EQ(out.size(), 50u);
    for (const auto& y : out) EXPECT_EQ(y.size(), 96u);
}

TEST(LstmForwardSeq, DeterministicGivenParametersAndInput) {
    LstmModel m = tiny_lstm(16, 10, 4, 31);
    std::vector<Vec> inputs(20, Vec(10));
    Rng rng(7);
    for (auto& x : inputs)
        for (auto& v : x) v = rng.gauss();
    auto a = lstm_forward_seq(m, inputs);
    auto b = lstm_forward_seq(m, inputs);
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t d = 0; d < a[t].size(); ++d) ASSERT_EQ(a[t][d], b[t][d]);
}

TEST(MlpForward, IdentityNetworkPassesInputThrough) {
    Rng rng(2);
    Mlp m = Mlp::make({3, 3}, rng);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m.w[0](r, c) = r == c ? 1.0 : 0.0;
    m.b[0] = {0.0, 0.0, 0.0};
    Vec x = {1.5, -2.0, 0.25};
    Vec y = mlp_forward(m, x);
    for (int d = 0; d < 3; ++d) EXPECT_DOUBLE_EQ(y[d], x[d]);
}

TEST(MlpForward, ThreeHiddenLayersOf15) {
    Rng rng(3);
    Mlp m = Mlp::make({104, 15, 15, 15, 104}, rng);
    EXPECT_EQ(m.n_layers(), 4);
    EXPECT_EQ(mlp_forward(m, Vec(104, 0.1)).size(), 104u);
    EXPECT_EQ(m.act[0], Activation::relu);
    EXPECT_EQ(m.act[3], Activation::linear);
}

TEST(MlpForward, TwoLayerHandExample) {
    Rng rng(4);
    Mlp m = Mlp::make({2, 2, 1}, rng);
    m.w[0](0, 0) = 1.0;
    m.w[0](0, 1) = -2.0;
    m.w[0](1, 0) = 0.5;
    m.w[0](1, 1) = 0.5;
    m.b[0] = {0.25, -1.0};
    m.w[1](0, 0) = 2.0;
    m.w[1](0, 1) = 3.0;
    m.b[1] = {0.1};
    // x = (1, 0.5): pre1 = (1 - 1 + 0.25, 0.5 + 0.25 - 1) = (0.25, -0.25)
    // relu -> (0.25, 0); out = 2*0.25 + 3*0 + 0.1 = 0.6
    Vec y = mlp_forward(m, {1.0, 0.5});
    ASSERT_EQ(y.size(), 1u);
    EXPECT_NEAR(y[0], 0.6, 1e-15);
    EXPECT_THROW(mlp_forward(m, Vec(3, 0.0)), std::invalid_argument);
}

TEST(Train, DefaultRecipeMatchesTheTrainingTable) {
    TrainConfig cfg;
    EXPECT_EQ(cfg.epochs, 500);
    EXPECT_EQ(cfg.batch, 128);
    EXPECT_DOUBLE_EQ(cfg.lr, 1e-3);
    EXPECT_DOUBLE_EQ(cfg.train_snr_db, 40.0);
    EXPECT_EQ(cfg.samples, 16000);
    EXPECT_DOUBLE_EQ(cfg.beta1, 0.9);
    EXPECT_DOUBLE_EQ(cfg.beta2, 0.999);
    EXPECT_DOUBLE_EQ(cfg.eps, 1e-8);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
    LstmModel m = tiny_lstm(4, 3, 2, 37);
    LstmModel before = m;
    SeqDataset d = toy_seq_dataset(4, 5, 3, 2, 11);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch = 2;
    cfg.lr = 0.0;
    train(m, d, cfg);
    auto va = param_views(m), vb = param_views(before);
    for (std::size_t s = 0; s < va.size(); ++s)
        for (std::size_t j = 0; j < va[s].size(); ++j) ASSERT_EQ(va[s][j], vb[s][j]);
}

TEST(Train, OverfitsAToyDataset) {
    LstmModel m = tiny_lstm(12, 4, 3, 41);
    SeqDataset d = toy_seq_dataset(4, 6, 4, 3, 13);
    TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.batch = 4;
    cfg.lr = 5e-3;
    cfg.seed = 2;
    auto history = train(m, d, cfg);
    EXPECT_LT(history.back(), 1e-4);
}

TEST(Train, LossIsMostlyNonIncreasingOnAMemorizationTask) {
    Rng rng(5);
    Mlp m = Mlp::make({6, 20, 4}, rng);
    FlatDataset d;
    for (int s = 0; s < 16; ++s) {
        Vec x(6), y(4);
        for (auto& v : x) v = rng.gauss();
        for (auto& v : y) v = rng.gauss();
        d.inputs.push_back(x);
        d.targets.push_back(y);
    }
    TrainConfig cfg;
    cfg.epochs = 400;
    cfg.batch = 16;
    cfg.lr = 3e-3;
    auto history = train(m, d, cfg);
    int violations = 0;
    for (std::size_t e = 1; e < history.size(); ++e)
        if (history[e] > history[e - 1] * (1.0 + 1e-12)) ++violations;
    EXPECT_LT(violations, static_cast<int>(history.size()) / 20);  // < 5% transients
    EXPECT_LT(history.back(), history.front());
}

TEST(GradCheck, LinearMlpGradientsAreExact) {
    Rng rng(6);
    Mlp m = Mlp::make({5, 4}, rng);
    Vec x(5), t(4);
    for (auto& v : x) v = rng.gauss();
    for (auto& v : t) v = rng.gauss();
    auto report = grad_check(m, x, t, 1000);
    EXPECT_EQ(report.checked, param_count(m));
    EXPECT_LT(report.max_rel_error, 1e-8);
}

TEST(GradCheck, SmallLstmBpttMatchesFiniteDifferences) {
    LstmModel m = tiny_lstm(4, 6, 3, 43);
    Rng rng(7);
    std::vector<Vec> in(3, Vec(6)), tg(3, Vec(3));
    for (auto& x : in)
        for (auto& v : x) v = rng.gauss();
    for (auto& y : tg)
        for (auto& v : y) v = rng.gauss();
    auto report = grad_check(m, in, tg, 1000);
    EXPECT_EQ(report.checked, param_count(m));
    EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(GradCheck, MlpWithReluHiddenLayers) {
    Rng rng(8);
    Mlp m = Mlp::make({6, 15, 15, 15, 4}, rng);
    Vec x(6), t(4);
    for (auto& v : x) v = rng.gauss();
    for (auto& v : t) v = rng.gauss();
    auto report = grad_check(m, x, t, 400);
    EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(GradCheck, ZeroInputKillsInputWeightGradients) {
    LstmModel m = tiny_lstm(4, 6, 3, 47);
    LstmModel grad = LstmModel::zeros_like(m);
    std::vector<Vec> in(3, Vec(6, 0.0)), tg(3, Vec(3, 1.0));
    lstm_bptt(m, in, tg, grad);
    for (int g = 0; g < 4; ++g)
        for (double v : grad.cell.w_in[g].a) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Serialization, RoundTripIsByteIdentical) {
    std::string p1 = testing::TempDir() + "m1.bin";
    std::string p2 = testing::TempDir() + "m2.bin";
    LstmModel m = tiny_lstm(5, 7, 3, 51, {4});
    ModelMeta meta{12, 8, 1e-3, 40.0, 99};
    save_model(p1, m, meta);
    ModelMeta back;
    LstmModel loaded = load_lstm_model(p1, &back);
    EXPECT_EQ(back.epochs, 12u);
    EXPECT_EQ(back.seed, 99u);
    save_model(p2, loaded, back);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    EXPECT_EQ(b1, b2);
    EXPECT_FALSE(b1.empty());
}

TEST(Serialization, LoadedModelForwardsIdentically) {
    std::string path = testing::TempDir() + "m3.bin";
    LstmModel m = tiny_lstm(6, 5, 4, 53);
    save_model(path, m);
    LstmModel loaded = load_lstm_model(path);
    Rng rng(9);
    std::vector<Vec> in(8, Vec(5));
    for (auto& x : in)
        for (auto& v : x) v = rng.gauss();
    auto a = lstm_forward_seq(m, in), b = lstm_forward_seq(loaded, in);
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t d = 0; d < a[t].size(); ++d) ASSERT_EQ(a[t][d], b[t][d]);
}

TEST(Serialization, DetectsTruncationAndKindMismatch) {
    std::string path = testing::TempDir() + "m4.bin";
    LstmModel m = tiny_lstm(5, 7, 3, 57);
    save_model(path, m);
    // truncate
    std::string trunc = testing::TempDir() + "m4_trunc.bin";
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(trunc, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    EXPECT_THROW(load_lstm_model(trunc), std::runtime_error);
    EXPECT_THROW(load_mlp_model(path), std::runtime_error);  // kind mismatch
    // bad magic
    std::string bad = testing::TempDir() + "m4_bad.bin";
    {
        std::ofstream out(bad, std::ios::binary);
        out.write("NOPE", 4);
    }
    EXPECT_THROW(peek_model_kind(bad), std::runtime_error);
}

TEST(Train, NonFiniteLossAbortsWithDiagnostic) {
    Rng rng(10);
    Mlp m = Mlp::make({4, 8, 2}, rng);
    FlatDataset d;
    for (int s = 0; s < 8; ++s) {
        d.inputs.push_back(Vec(4, 1.0));
        d.targets.push_back(Vec(2, 0.5));
    }
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch = 8;
    cfg.lr = 1e280;  // guaranteed blow-up
    try {
        train(m, d, cfg);
        FAIL() << "expected non-finite loss to abort";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
    }
}

TEST(Serialization, CreatesParentDirectories) {
    std::string path = testing::TempDir() + "nested/dirs/model.bin";
    LstmModel m = tiny_lstm(3, 4, 2, 61);
    save_model(path, m);
    LstmModel back = load_lstm_model(path);
    EXPECT_EQ(back.hidden(), 3);
}

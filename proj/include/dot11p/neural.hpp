#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dot11p/rng.hpp"
#include "dot11p/types.hpp"

namespace dot11p {

using Vec = std::vector<double>;

struct Mat {
    int rows = 0, cols = 0;
    Vec a;
    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

namespace nn {

// y (+)= W x
inline void gemv(const Mat& w, const Vec& x, Vec& y, bool accumulate) {
    if (!accumulate) y.assign(w.rows, 0.0);
    for (int r = 0; r < w.rows; ++r) {
        const double* row = &w.a[static_cast<std::size_t>(r) * w.cols];
        double acc = 0.0;
        for (int c = 0; c < w.cols; ++c) acc += row[c] * x[c];
        y[r] += acc;
    }
}

// dW += dy x^T
inline void outer_acc(Mat& dw, const Vec& dy, const Vec& x) {
    for (int r = 0; r < dw.rows; ++r) {
        double* row = &dw.a[static_cast<std::size_t>(r) * dw.cols];
        const double g = dy[r];
        for (int c = 0; c < dw.cols; ++c) row[c] += g * x[c];
    }
}

// dx += W^T dy
inline void gemv_t_acc(const Mat& w, const Vec& dy, Vec& dx) {
    for (int r = 0; r < w.rows; ++r) {
        const double* row = &w.a[static_cast<std::size_t>(r) * w.cols];
        const double g = dy[r];
        for (int c = 0; c < w.cols; ++c) dx[c] += row[c] * g;
    }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace nn

enum class Activation : std::uint8_t { relu = 0, linear = 1 };

/// Fully connected network. Hidden layers default to ReLU, the output layer
/// to linear.
struct Mlp {
    std::vector<int> sizes;  // N_0 .. N_{L+1}
    std::vector<Mat> w;      // w[l]: sizes[l+1] x sizes[l]
    std::vector<Vec> b;
    std::vector<Activation> act;  // per non-input layer

    int in_dim() const { return sizes.front(); }
    int out_dim() const { return sizes.back(); }
    int n_layers() const { return static_cast<int>(w.size()); }

    static Mlp make(const std::vector<int>& sizes, Rng& rng) {
        if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least two layer sizes");
        Mlp m;
        m.sizes = sizes;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            Mat wl(sizes[l + 1], sizes[l]);
            double r = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
            for (auto& v : wl.a) v = r * (2.0 * rng.uniform() - 1.0);
            m.w.push_back(std::move(wl));
            m.b.emplace_back(sizes[l + 1], 0.0);
            m.act.push_back(l + 2 < sizes.size() ? Activation::relu : Activation::linear);
        }
        return m;
    }

    static Mlp zeros_like(const Mlp& other) {
        Mlp g;
        g.sizes = other.sizes;
        g.act = other.act;
        for (int l = 0; l < other.n_layers(); ++l) {
            g.w.emplace_back(other.w[l].rows, other.w[l].cols);
            g.b.emplace_back(other.b[l].size(), 0.0);
        }
        return g;
    }
};

struct MlpCache {
    std::vector<Vec> post;  // post[0] = input, post[l+1] = activation output of layer l
    std::vector<Vec> pre;   // pre-activation per layer
};

inline Vec mlp_forward(const Mlp& m, const Vec& x, MlpCache* cache = nullptr) {
    if (static_cast<int>(x.size()) != m.in_dim())
        throw std::invalid_argument("mlp_forward: input dimension mismatch");
    Vec cur = x;
    if (cache) {
        cache->post.clear();
        cache->pre.clear();
        cache->post.push_back(cur);
    }
    for (int l = 0; l < m.n_layers(); ++l) {
        Vec z;
        nn::gemv(m.w[l], cur, z, false);
        for (std::size_t r = 0; r < z.size(); ++r) z[r] += m.b[l][r];
        if (cache) cache->pre.push_back(z);
        if (m.act[l] == Activation::relu)
            for (auto& v : z) v = v > 0.0 ? v : 0.0;
        cur = std::move(z);
        if (cache) cache->post.push_back(cur);
    }
    return cur;
}

/// Backpropagates dL/dy, accumulating into `grad` (same shape as `m`);
/// returns dL/dx.
inline Vec mlp_backward(const Mlp& m, const MlpCache& cache, const Vec& dy, Mlp& grad) {
    Vec delta = dy;
    for (int l = m.n_layers() - 1; l >= 0; --l) {
        if (m.act[l] == Activation::relu)
            for (std::size_t r = 0; r < delta.size(); ++r)
                if (cache.pre[l][r] <= 0.0) delta[r] = 0.0;
        nn::outer_acc(grad.w[l], delta, cache.post[l]);
        for (std::size_t r = 0; r < delta.size(); ++r) grad.b[l][r] += delta[r];
        Vec dx(m.w[l].cols, 0.0);
        nn::gemv_t_acc(m.w[l], delta, dx);
        delta = std::move(dx);
    }
    return delta;
}

/// Classical LSTM cell parameters, gate order f, i, g (candidate), o.
struct LstmParams {
    int hidden = 0;  // P
    int input = 0;   // K_in
    std::array<Mat, 4> w_in;
    std::array<Mat, 4> w_rec;
    std::array<Vec, 4> bias;
};

struct LstmState {
    Vec h, c;
    explicit LstmState(int hidden = 0) : h(hidden, 0.0), c(hidden, 0.0) {}
};

/// LSTM unit plus a fully connected head (a bare affine readout when the
/// head has no hidden layers). The readout maps the P-dim hidden state to
/// the output width.
struct LstmModel {
    LstmParams cell;
    Mlp head;

    int hidden() const { return cell.hidden; }
    int in_dim() const { return cell.input; }
    int out_dim() const { return head.out_dim(); }

    /// head_sizes spans the readout chain from P to out_dim, e.g. {} for a
    /// plain affine readout or {40} for one hidden layer of 40.
    static LstmModel make(int hidden, int input, int out_dim, std::vector<int> head_hidden,
                          Rng& rng) {
        LstmModel m;
        m.cell.hidden = hidden;
        m.cell.input = input;
        double ri = 1.0 / std::sqrt(static_cast<double>(input));
        double rh = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (int g = 0; g < 4; ++g) {
            m.cell.w_in[g] = Mat(hidden, input);
            for (auto& v : m.cell.w_in[g].a) v = ri * (2.0 * rng.uniform() - 1.0);
            m.cell.w_rec[g] = Mat(hidden, hidden);
            for (auto& v : m.cell.w_rec[g].a) v = rh * (2.0 * rng.uniform() - 1.0);
            m.cell.bias[g].assign(hidden, g == 0 ? 1.0 : 0.0);  // forget gate open at init
        }
        std::vector<int> sizes = {hidden};
        sizes.insert(sizes.end(), head_hidden.begin(), head_hidden.end());
        sizes.push_back(out_dim);
        m.head = Mlp::make(sizes, rng);
        return m;
    }

    static LstmModel zeros_like(const LstmModel& other) {
        LstmModel g;
        g.cell.hidden = other.cell.hidden;
        g.cell.input = other.cell.input;
        for (int i = 0; i < 4; ++i) {
            g.cell.w_in[i] = Mat(other.cell.w_in[i].rows, other.cell.w_in[i].cols);
            g.cell.w_rec[i] = Mat(other.cell.w_rec[i].rows, other.cell.w_rec[i].cols);
            g.cell.bias[i].assign(other.cell.bias[i].size(), 0.0);
        }
        g.head = Mlp::zeros_like(other.head);
        return g;
    }
};

struct LstmStepCache {
    Vec x, h_prev, c_prev;
    Vec f, i, g, o, c, tanh_c;
    MlpCache head;
};

/// One cell update: gates from the input and previous hidden state, cell
/// c_t = f * c_{t-1} + i * g, output h_t = o * tanh(c_t).
inline Vec lstm_cell(const LstmParams& p, const Vec& x, LstmState& state,
                     LstmStepCache* cache = nullptr) {
    if (static_cast<int>(x.size()) != p.input)
        throw std::invalid_argument("lstm_cell: input dimension mismatch");
    if (static_cast<int>(state.h.size()) != p.hidden)
        throw std::invalid_argument("lstm_cell: state dimension mismatch");

    std::array<Vec, 4> z;
    for (int g = 0; g < 4; ++g) {
        nn::gemv(p.w_in[g], x, z[g], false);
        nn::gemv(p.w_rec[g], state.h, z[g], true);
        for (int r = 0; r < p.hidden; ++r) z[g][r] += p.bias[g][r];
    }
    Vec f(p.hidden), in(p.hidden), g_(p.hidden), o(p.hidden), c(p.hidden), tc(p.hidden),
        h(p.hidden);
    for (int r = 0; r < p.hidden; ++r) {
        f[r] = nn::sigmoid(z[0][r]);
        in[r] = nn::sigmoid(z[1][r]);
        g_[r] = std::tanh(z[2][r]);
        o[r] = nn::sigmoid(z[3][r]);
        c[r] = f[r] * state.c[r] + in[r] * g_[r];
        tc[r] = std::tanh(c[r]);
        h[r] = o[r] * tc[r];
    }
    if (cache) {
        cache->x = x;
        cache->h_prev = state.h;
        cache->c_prev = state.c;
        cache->f = f;
        cache->i = in;
        cache->g = g_;
        cache->o = o;
        cache->c = c;
        cache->tanh_c = tc;
    }
    state.c = std::move(c);
    state.h = h;
    return h;
}

/// Runs the cell over a sequence from a zero state and applies the readout
/// per step.
inline std::vector<Vec> lstm_forward_seq(const LstmModel& m, const std::vector<Vec>& inputs,
                                         std::vector<LstmStepCache>* caches = nullptr) {
    if (inputs.empty()) throw std::invalid_argument("lstm_forward_seq: empty sequence");
    LstmState state(m.hidden());
    std::vector<Vec> outputs;
    outputs.reserve(inputs.size());
    if (caches) caches->assign(inputs.size(), {});
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        LstmStepCache* cache = caches ? &(*caches)[t] : nullptr;
        Vec h = lstm_cell(m.cell, inputs[t], state, cache);
        outputs.push_back(mlp_forward(m.head, h, cache ? &cache->head : nullptr));
    }
    return outputs;
}

/// Sequence MSE: mean over steps and output dims.
inline double seq_mse(const std::vector<Vec>& outputs, const std::vector<Vec>& targets) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < outputs.size(); ++t)
        for (std::size_t d = 0; d < outputs[t].size(); ++d) {
            double e = outputs[t][d] - targets[t][d];
            acc += e * e;
            ++n;
        }
    return acc / static_cast<double>(n);
}

/// Full backpropagation through time for one sequence under MSE; accumulates
/// parameter gradients into `grad` and returns the sequence loss.
inline double lstm_bptt(const LstmModel& m, const std::vector<Vec>& inputs,
                        const std::vector<Vec>& targets, LstmModel& grad) {
    std::vector<LstmStepCache> caches;
    std::vector<Vec> outputs = lstm_forward_seq(m, inputs, &caches);
    const double loss = seq_mse(outputs, targets);
    const std::size_t steps = inputs.size();
    const double scale = 2.0 / (static_cast<double>(steps) * m.out_dim());

    const int P = m.hidden();
    Vec dh_next(P, 0.0), dc_next(P, 0.0);
    Vec dzf(P), dzi(P), dzg(P), dzo(P);
    for (std::size_t t = steps; t-- > 0;) {
        const LstmStepCache& s = caches[t];
        Vec dy(m.out_dim());
        for (int d = 0; d < m.out_dim(); ++d) dy[d] = scale * (outputs[t][d] - targets[t][d]);
        Vec dh = mlp_backward(m.head, s.head, dy, grad.head);
        for (int r = 0; r < P; ++r) dh[r] += dh_next[r];

        for (int r = 0; r < P; ++r) {
            double dov = dh[r] * s.tanh_c[r];
            dzo[r] = dov * s.o[r] * (1.0 - s.o[r]);
            double dc = dh[r] * s.o[r] * (1.0 - s.tanh_c[r] * s.tanh_c[r]) + dc_next[r];
            dzf[r] = dc * s.c_prev[r] * s.f[r] * (1.0 - s.f[r]);
            dzi[r] = dc * s.g[r] * s.i[r] * (1.0 - s.i[r]);
            dzg[r] = dc * s.i[r] * (1.0 - s.g[r] * s.g[r]);
            dc_next[r] = dc * s.f[r];
        }
        const std::array<const Vec*, 4> dz = {&dzf, &dzi, &dzg, &dzo};
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        for (int g = 0; g < 4; ++g) {
            nn::outer_acc(grad.cell.w_in[g], *dz[g], s.x);
            nn::outer_acc(grad.cell.w_rec[g], *dz[g], s.h_prev);
            for (int r = 0; r < P; ++r) grad.cell.bias[g][r] += (*dz[g])[r];
            nn::gemv_t_acc(m.cell.w_rec[g], *dz[g], dh_next);
        }
    }
    return loss;
}

// ---------------------------------------------------------------------------
// parameter views and the optimizer

inline std::vector<std::span<double>> param_views(Mlp& m) {
    std::vector<std::span<double>> v;
    for (auto& w : m.w) v.emplace_back(w.a);
    for (auto& b : m.b) v.emplace_back(b);
    return v;
}

inline std::vector<std::span<double>> param_views(LstmModel& m) {
    std::vector<std::span<double>> v;
    for (int g = 0; g < 4; ++g) {
        v.emplace_back(m.cell.w_in[g].a);
        v.emplace_back(m.cell.w_rec[g].a);
        v.emplace_back(m.cell.bias[g]);
    }
    auto head = param_views(m.head);
    v.insert(v.end(), head.begin(), head.end());
    return v;
}

struct TrainConfig {
    int epochs = 500;
    int batch = 128;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double train_snr_db = 40.0;
    int samples = 16000;  // symbols; frames = samples / I
    std::uint64_t seed = 1;
};

class Adam {
public:
    Adam(std::size_t n_params, const TrainConfig& cfg) : cfg_(cfg), m_(n_params, 0.0),
                                                         v_(n_params, 0.0) {}

    template <typename Model>
    void step(Model& model, const Model& grad_model) {
        Model& g = const_cast<Model&>(grad_model);
        auto params = param_views(model);
        auto grads = param_views(g);
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        std::size_t k = 0;
        for (std::size_t s = 0; s < params.size(); ++s)
            for (std::size_t j = 0; j < params[s].size(); ++j, ++k) {
                double gr = grads[s][j];
                m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * gr;
                v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * gr * gr;
                params[s][j] -= cfg_.lr * (m_[k] / bc1) / (std::sqrt(v_[k] / bc2) + cfg_.eps);
            }
    }

private:
    TrainConfig cfg_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

template <typename Model>
std::size_t param_count(Model& m) {
    std::size_t n = 0;
    for (auto s : param_views(m)) n += s.size();
    return n;
}

// ---------------------------------------------------------------------------
// training

struct SeqDataset {
    std::vector<std::vector<Vec>> inputs;   // [sequence][step][dim]
    std::vector<std::vector<Vec>> targets;
    std::size_t size() const { return inputs.size(); }
};

struct FlatDataset {
    std::vector<Vec> inputs;
    std::vector<Vec> targets;
    std::size_t size() const { return inputs.size(); }
};

namespace nn {

template <typename Model>
void scale_grads(Model& grad, double s) {
    for (auto span : param_views(grad))
        for (auto& v : span) v *= s;
}

template <typename Model>
void zero_grads(Model& grad) {
    for (auto span : param_views(grad))
        for (auto& v : span) v = 0.0;
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(static_cast<std::uint32_t>(i))]);
    return idx;
}

}  // namespace nn

/// Mini-batch ADAM on MSE with gradients from full BPTT. Returns the
/// per-epoch training loss. Throws if the loss goes non-finite.
inline std::vector<double> train(LstmModel& model, const SeqDataset& data,
                                 const TrainConfig& cfg) {
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    Rng rng(cfg.seed);
    Adam opt(param_count(model), cfg);
    LstmModel grad = LstmModel::zeros_like(model);
    std::vector<double> history;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = nn::shuffled_indices(data.size(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            nn::zero_grads(grad);
            for (std::size_t b = start; b < end; ++b) {
                std::size_t s = order[b];
                epoch_loss += lstm_bptt(model, data.inputs[s], data.targets[s], grad);
            }
            nn::scale_grads(grad, 1.0 / static_cast<double>(end - start));
            opt.step(model, grad);
            start = end;
        }
        epoch_loss /= static_cast<double>(data.size());
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
        history.push_back(epoch_loss);
    }
    return history;
}

/// Plain backprop counterpart for the fully connected networks.
inline std::vector<double> train(Mlp& model, const FlatDataset& data, const TrainConfig& cfg) {
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    Rng rng(cfg.seed);
    Adam opt(param_count(model), cfg);
    Mlp grad = Mlp::zeros_like(model);
    std::vector<double> history;
    MlpCache cache;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = nn::shuffled_indices(data.size(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            nn::zero_grads(grad);
            for (std::size_t b = start; b < end; ++b) {
                std::size_t s = order[b];
                Vec y = mlp_forward(model, data.inputs[s], &cache);
                Vec dy(y.size());
                double scale = 2.0 / static_cast<double>(y.size());
                for (std::size_t d = 0; d < y.size(); ++d) {
                    double e = y[d] - data.targets[s][d];
                    epoch_loss += e * e / static_cast<double>(y.size());
                    dy[d] = scale * e;
                }
                mlp_backward(model, cache, dy, grad);
            }
            nn::scale_grads(grad, 1.0 / static_cast<double>(end - start));
            opt.step(model, grad);
            start = end;
        }
        epoch_loss /= static_cast<double>(data.size());
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
        history.push_back(epoch_loss);
    }
    return history;
}

// ---------------------------------------------------------------------------
// gradient verification

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

namespace nn {

template <typename Model, typename LossFn, typename GradFn>
GradCheckReport grad_check_impl(Model& model, LossFn&& loss_fn, GradFn&& grad_fn,
                                std::size_t max_checks, Rng& rng) {
    Model grad = Model::zeros_like(model);
    grad_fn(model, grad);
    auto params = param_views(model);
    auto grads = param_views(grad);
    std::size_t total = 0;
    for (auto s : params) total += s.size();
    const double h = 1e-6;
    GradCheckReport report;
    std::size_t n_checks = std::min(max_checks, total);
    for (std::size_t chk = 0; chk < n_checks; ++chk) {
        std::size_t flat = n_checks == total ? chk : rng.next_u64() % total;
        std::size_t s = 0, j = flat;
        while (j >= params[s].size()) j -= params[s++].size();
        double saved = params[s][j];
        params[s][j] = saved + h;
        double lp = loss_fn(model);
        params[s][j] = saved - h;
        double lm = loss_fn(model);
        params[s][j] = saved;
        double numeric = (lp - lm) / (2.0 * h);
        double analytic = grads[s][j];
        double rel = std::abs(analytic - numeric) /
                     std::max({1.0, std::abs(analytic), std::abs(numeric)});
        report.max_rel_error = std::max(report.max_rel_error, rel);
        ++report.checked;
    }
    return report;
}

}  // namespace nn

/// Central-difference check (step 1e-6) of the BPTT gradients on one
/// sequence sample; reports the max relative error over a parameter subset.
inline GradCheckReport grad_check(LstmModel& model, const std::vector<Vec>& inputs,
                                  const std::vector<Vec>& targets, std::size_t max_checks = 400,
                                  std::uint64_t seed = 1) {
    Rng rng(seed);
    return nn::grad_check_impl(
        model,
        [&](LstmModel& m) { return seq_mse(lstm_forward_seq(m, inputs), targets); },
        [&](const LstmModel& m, LstmModel& g) { lstm_bptt(m, inputs, targets, g); }, max_checks,
        rng);
}

inline GradCheckReport grad_check(Mlp& model, const Vec& input, const Vec& target,
                                  std::size_t max_checks = 400, std::uint64_t seed = 1) {
    Rng rng(seed);
    auto loss = [&](Mlp& m) {
        Vec y = mlp_forward(m, input);
        double acc = 0.0;
        for (std::size_t d = 0; d < y.size(); ++d) {
            double e = y[d] - target[d];
            acc += e * e;
        }
        return acc / static_cast<double>(y.size());
    };
    auto grad = [&](const Mlp& m, Mlp& g) {
        MlpCache cache;
        Vec y = mlp_forward(m, input, &cache);
        Vec dy(y.size());
        for (std::size_t d = 0; d < y.size(); ++d)
            dy[d] = 2.0 * (y[d] - target[d]) / static_cast<double>(y.size());
        mlp_backward(m, cache, dy, g);
    };
    return nn::grad_check_impl(model, loss, grad, max_checks, rng);
}

// ---------------------------------------------------------------------------
// serialization: little-endian binary, magic + version + kind + dims +
// row-major f64 weight blocks

struct model_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelMeta {
    std::uint32_t epochs = 0;
    std::uint32_t batch = 0;
    double lr = 0.0;
    double train_snr_db = 0.0;
    std::uint64_t seed = 0;
};

namespace nn {

constexpr char kMagic[4] = {'D', '1', '1', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kKindMlp = 0;
constexpr std::uint8_t kKindLstm = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw model_error("model file truncated");
    return v;
}

inline void write_vec(std::ostream& os, const Vec& v) {
    write_pod<std::uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline Vec read_vec(std::istream& is) {
    auto n = read_pod<std::uint64_t>(is);
    Vec v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw model_error("model file truncated");
    return v;
}

inline void write_meta(std::ostream& os, const ModelMeta& m) {
    write_pod(os, m.epochs);
    write_pod(os, m.batch);
    write_pod(os, m.lr);
    write_pod(os, m.train_snr_db);
    write_pod(os, m.seed);
}

inline ModelMeta read_meta(std::istream& is) {
    ModelMeta m;
    m.epochs = read_pod<std::uint32_t>(is);
    m.batch = read_pod<std::uint32_t>(is);
    m.lr = read_pod<double>(is);
    m.train_snr_db = read_pod<double>(is);
    m.seed = read_pod<std::uint64_t>(is);
    return m;
}

inline void write_mlp_body(std::ostream& os, const Mlp& m) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(m.sizes.size()));
    for (int s : m.sizes) write_pod<std::int32_t>(os, s);
    for (auto a : m.act) write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(a));
    for (int l = 0; l < m.n_layers(); ++l) {
        write_vec(os, m.w[l].a);
        write_vec(os, m.b[l]);
    }
}

inline Mlp read_mlp_body(std::istream& is) {
    Mlp m;
    auto n = read_pod<std::uint32_t>(is);
    if (n < 2 || n > 64) throw model_error("corrupt model file: bad layer count");
    m.sizes.resize(n);
    for (auto& s : m.sizes) s = read_pod<std::int32_t>(is);
    m.act.resize(n - 1);
    for (auto& a : m.act) a = static_cast<Activation>(read_pod<std::uint8_t>(is));
    for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
        Mat w(m.sizes[l + 1], m.sizes[l]);
        w.a = read_vec(is);
        if (w.a.size() != static_cast<std::size_t>(w.rows) * w.cols)
            throw model_error("corrupt model file: weight block size");
        m.w.push_back(std::move(w));
        Vec b = read_vec(is);
        if (b.size() != static_cast<std::size_t>(m.sizes[l + 1]))
            throw model_error("corrupt model file: bias block size");
        m.b.push_back(std::move(b));
    }
    return m;
}

}  // namespace nn

namespace nn {

inline void ensure_parent_dir(const std::string& path) {
    std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace nn

inline void save_model(const std::string& path, const Mlp& m, const ModelMeta& meta = {}) {
    nn::ensure_parent_dir(path);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw model_error("cannot write model: " + path);
    os.write(nn::kMagic, 4);
    nn::write_pod(os, nn::kVersion);
    nn::write_pod(os, nn::kKindMlp);
    nn::write_meta(os, meta);
    nn::write_mlp_body(os, m);
    if (!os) throw model_error("model write failed: " + path);
}

inline void save_model(const std::string& path, const LstmModel& m, const ModelMeta& meta = {}) {
    nn::ensure_parent_dir(path);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw model_error("cannot write model: " + path);
    os.write(nn::kMagic, 4);
    nn::write_pod(os, nn::kVersion);
    nn::write_pod(os, nn::kKindLstm);
    nn::write_meta(os, meta);
    nn::write_pod<std::int32_t>(os, m.cell.hidden);
    nn::write_pod<std::int32_t>(os, m.cell.input);
    for (int g = 0; g < 4; ++g) {
        nn::write_vec(os, m.cell.w_in[g].a);
        nn::write_vec(os, m.cell.w_rec[g].a);
        nn::write_vec(os, m.cell.bias[g]);
    }
    nn::write_mlp_body(os, m.head);
    if (!os) throw model_error("model write failed: " + path);
}

namespace nn {

inline std::uint8_t open_model(std::ifstream& is, const std::string& path, ModelMeta& meta) {
    if (!is) throw model_error("cannot open model: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw model_error("corrupt model file: bad magic in " + path);
    auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion)
        throw model_error("model version mismatch in " + path + ": " +
                          std::to_string(version));
    auto kind = read_pod<std::uint8_t>(is);
    meta = read_meta(is);
    return kind;
}

}  // namespace nn

inline std::uint8_t peek_model_kind(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    ModelMeta meta;
    return nn::open_model(is, path, meta);
}

inline Mlp load_mlp_model(const std::string& path, ModelMeta* meta_out = nullptr) {
    std::ifstream is(path, std::ios::binary);
    ModelMeta meta;
    if (nn::open_model(is, path, meta) != nn::kKindMlp)
        throw model_error("model kind mismatch: expected mlp in " + path);
    if (meta_out) *meta_out = meta;
    return nn::read_mlp_body(is);
}

inline LstmModel load_lstm_model(const std::string& path, ModelMeta* meta_out = nullptr) {
    std::ifstream is(path, std::ios::binary);
    ModelMeta meta;
    if (nn::open_model(is, path, meta) != nn::kKindLstm)
        throw model_error("model kind mismatch: expected lstm in " + path);
    if (meta_out) *meta_out = meta;
    LstmModel m;
    m.cell.hidden = nn::read_pod<std::int32_t>(is);
    m.cell.input = nn::read_pod<std::int32_t>(is);
    if (m.cell.hidden <= 0 || m.cell.input <= 0)
        throw model_error("corrupt model file: bad dims in " + path);
    for (int g = 0; g < 4; ++g) {
        m.cell.w_in[g] = Mat(m.cell.hidden, m.cell.input);
        m.cell.w_in[g].a = nn::read_vec(is);
        m.cell.w_rec[g] = Mat(m.cell.hidden, m.cell.hidden);
        m.cell.w_rec[g].a = nn::read_vec(is);
        m.cell.bias[g] = nn::read_vec(is);
        if (m.cell.w_in[g].a.size() !=
                static_cast<std::size_t>(m.cell.hidden) * m.cell.input ||
            m.cell.w_rec[g].a.size() !=
                static_cast<std::size_t>(m.cell.hidden) * m.cell.hidden ||
            m.cell.bias[g].size() != static_cast<std::size_t>(m.cell.hidden))
            throw model_error("corrupt model file: gate block size in " + path);
    }
    m.head = nn::read_mlp_body(is);
    return m;
}

}  // namespace dot11p

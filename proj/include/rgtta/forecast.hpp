#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rgtta/core.hpp"
#include "rgtta/detail/rng.hpp"

namespace rgtta {

enum class Arch { DLinear, GruSmall };

inline const char* arch_name(Arch a) { return a == Arch::DLinear ? "dlinear" : "gru_small"; }

inline Arch arch_from_name(const std::string& s) {
    if (s == "dlinear") return Arch::DLinear;
    if (s == "gru_small") return Arch::GruSmall;
    throw std::invalid_argument("unknown architecture: " + s);
}

/// Flat parameter store, split into a frozen backbone segment and a trainable
/// head segment. DLinear is all head (its decomposition is parameter-free);
/// GruSmall keeps both GRU layers in the backbone and the MLP head trainable.
struct ModelWeights {
    Arch arch = Arch::DLinear;
    int seq_len = 96;
    int horizon = 96;
    int hidden = 64;
    int layers = 2;
    std::size_t head_offset = 0;
    std::vector<double> params;

    std::span<double> backbone() { return {params.data(), head_offset}; }
    std::span<const double> backbone() const { return {params.data(), head_offset}; }
    std::span<double> head() { return {params.data() + head_offset, params.size() - head_offset}; }
    std::span<const double> head() const {
        return {params.data() + head_offset, params.size() - head_offset};
    }
};

/// Adaptive-moment optimizer state for one parameter segment.
struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit OptimizerState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

struct LossReport {
    double value = 0.0;
    std::vector<double> history;
};

// ---------------------------------------------------------------------------
// SmoothL1
// ---------------------------------------------------------------------------

inline double smooth_l1(std::span<const double> pred, std::span<const double> target,
                        double delta = 1.0) {
    if (pred.size() != target.size()) throw std::invalid_argument("smooth_l1: length mismatch");
    if (!(delta > 0.0)) throw std::invalid_argument("smooth_l1: delta must be positive");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = std::abs(pred[i] - target[i]);
        acc += e < delta ? 0.5 * e * e / delta : e - 0.5 * delta;
    }
    return acc / static_cast<double>(pred.size());
}

/// dLoss/dpred for the element-mean SmoothL1.
inline void smooth_l1_grad(std::span<const double> pred, std::span<const double> target,
                           double delta, std::span<double> dpred) {
    const double inv = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        dpred[i] = (std::abs(e) < delta ? e / delta : (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0))) * inv;
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

inline void optimizer_step(std::span<double> params, std::span<const double> grad,
                           OptimizerState& st, double alpha) {
    if (params.size() != grad.size() || st.m.size() != params.size())
        throw std::invalid_argument("optimizer_step: shape mismatch");
    if (!(alpha > 0.0)) throw std::invalid_argument("optimizer_step: alpha must be positive");
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        params[i] -= alpha * mhat / (std::sqrt(vhat) + st.eps);
    }
}

// ---------------------------------------------------------------------------
// DLinear
// ---------------------------------------------------------------------------

namespace dlinear {

inline constexpr int kTrendKernel = 25;

/// Centered moving average, kernel 25, edge-replicated padding.
inline void trend_of(std::span<const double> x, std::span<double> trend) {
    const int n = static_cast<int>(x.size());
    const int half = kTrendKernel / 2;
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int d = -half; d <= half; ++d) {
            const int j = std::clamp(i + d, 0, n - 1);
            acc += x[static_cast<std::size_t>(j)];
        }
        trend[static_cast<std::size_t>(i)] = acc / kTrendKernel;
    }
}

// Head layout: W_seas (H x L), b_seas (H), W_trend (H x L), b_trend (H).
struct HeadView {
    const double* w_seas;
    const double* b_seas;
    const double* w_trend;
    const double* b_trend;
    int L;
    int H;
};

inline HeadView head_view(const ModelWeights& w) {
    const int L = w.seq_len, H = w.horizon;
    const double* p = w.params.data() + w.head_offset;
    return {p, p + static_cast<std::size_t>(H) * L, p + static_cast<std::size_t>(H) * L + H,
            p + 2 * static_cast<std::size_t>(H) * L + H, L, H};
}

inline std::size_t head_size(int L, int H) {
    return 2 * (static_cast<std::size_t>(H) * L + H);
}

/// Backbone output is the decomposition [trend; seasonal] (length 2L).
inline std::vector<double> backbone_out(const ModelWeights& w, std::span<const double> input) {
    const int L = w.seq_len;
    std::vector<double> out(2 * static_cast<std::size_t>(L));
    std::span<double> trend(out.data(), static_cast<std::size_t>(L));
    trend_of(input, trend);
    for (int i = 0; i < L; ++i)
        out[static_cast<std::size_t>(L + i)] = input[static_cast<std::size_t>(i)] - out[static_cast<std::size_t>(i)];
    return out;
}

inline void head_forward(const ModelWeights& w, std::span<const double> bout,
                         std::span<double> pred) {
    const auto hv = head_view(w);
    const double* trend = bout.data();
    const double* seas = bout.data() + hv.L;
    for (int o = 0; o < hv.H; ++o) {
        double acc = hv.b_seas[o] + hv.b_trend[o];
        const double* ws = hv.w_seas + static_cast<std::size_t>(o) * hv.L;
        const double* wt = hv.w_trend + static_cast<std::size_t>(o) * hv.L;
        for (int i = 0; i < hv.L; ++i) acc += ws[i] * seas[i] + wt[i] * trend[i];
        pred[static_cast<std::size_t>(o)] = acc;
    }
}

/// Accumulates head gradient for one window given dLoss/dpred.
inline void head_backward(const ModelWeights& w, std::span<const double> bout,
                          std::span<const double> dpred, std::span<double> ghead) {
    const auto hv = head_view(w);
    const double* trend = bout.data();
    const double* seas = bout.data() + hv.L;
    double* gw_seas = ghead.data();
    double* gb_seas = ghead.data() + static_cast<std::size_t>(hv.H) * hv.L;
    double* gw_trend = gb_seas + hv.H;
    double* gb_trend = gw_trend + static_cast<std::size_t>(hv.H) * hv.L;
    for (int o = 0; o < hv.H; ++o) {
        const double d = dpred[static_cast<std::size_t>(o)];
        gb_seas[o] += d;
        gb_trend[o] += d;
        double* gs = gw_seas + static_cast<std::size_t>(o) * hv.L;
        double* gt = gw_trend + static_cast<std::size_t>(o) * hv.L;
        for (int i = 0; i < hv.L; ++i) {
            gs[i] += d * seas[i];
            gt[i] += d * trend[i];
        }
    }
}

} // namespace dlinear

// ---------------------------------------------------------------------------
// GruSmall: 2-layer GRU over the scalar input sequence + MLP head
// (hidden -> hidden, tanh, hidden -> horizon). Gate order (r, z, n) with
// separate input/recurrent biases, so n-gate input and recurrent parts keep
// distinct gradients.
// ---------------------------------------------------------------------------

namespace gru {

struct LayerView {
    const double* w_ih; // 3h x in
    const double* w_hh; // 3h x h
    const double* b_ih; // 3h
    const double* b_hh; // 3h
    int in;
    int h;
};

inline std::size_t layer_size(int in, int h) {
    return static_cast<std::size_t>(3 * h) * in + static_cast<std::size_t>(3 * h) * h + 6 * static_cast<std::size_t>(h);
}

inline std::size_t backbone_size(int h, int layers) {
    std::size_t total = 0;
    for (int l = 0; l < layers; ++l) total += layer_size(l == 0 ? 1 : h, h);
    return total;
}

inline std::size_t head_size(int h, int H) {
    return static_cast<std::size_t>(h) * h + h + static_cast<std::size_t>(H) * h + H;
}

inline LayerView layer_view(const ModelWeights& w, int layer) {
    const int h = w.hidden;
    const double* p = w.params.data();
    for (int l = 0; l < layer; ++l) p += layer_size(l == 0 ? 1 : h, h);
    const int in = layer == 0 ? 1 : h;
    LayerView v;
    v.w_ih = p;
    v.w_hh = p + static_cast<std::size_t>(3 * h) * in;
    v.b_ih = v.w_hh + static_cast<std::size_t>(3 * h) * h;
    v.b_hh = v.b_ih + 3 * static_cast<std::size_t>(h);
    v.in = in;
    v.h = h;
    return v;
}

struct HeadView {
    const double* w1; // h x h
    const double* b1; // h
    const double* w2; // H x h
    const double* b2; // H
    int h;
    int H;
};

inline HeadView head_view(const ModelWeights& w) {
    const int h = w.hidden, H = w.horizon;
    const double* p = w.params.data() + w.head_offset;
    HeadView v;
    v.w1 = p;
    v.b1 = p + static_cast<std::size_t>(h) * h;
    v.w2 = v.b1 + h;
    v.b2 = v.w2 + static_cast<std::size_t>(H) * h;
    v.h = h;
    v.H = H;
    return v;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Per-window intermediate states kept for backpropagation through time.
struct Workspace {
    // [layer][t] blocks of size h for r, z, n, hh, h_state.
    std::vector<double> r, z, n, hh, h_state;
    std::vector<double> x1; // layer-1 inputs = layer-0 hidden states (L x h)
    int L = 0, h = 0;

    void resize(int L_, int h_) {
        L = L_;
        h = h_;
        const std::size_t sz = 2 * static_cast<std::size_t>(L) * h;
        r.assign(sz, 0.0);
        z.assign(sz, 0.0);
        n.assign(sz, 0.0);
        hh.assign(sz, 0.0);
        h_state.assign(sz, 0.0);
        x1.assign(static_cast<std::size_t>(L) * h, 0.0);
    }

    std::size_t at(int layer, int t) const {
        return (static_cast<std::size_t>(layer) * L + t) * h;
    }
};

inline void cell_forward(const LayerView& lv, const double* x, const double* hprev, double* r,
                         double* z, double* n, double* hh, double* hout) {
    const int h = lv.h, in = lv.in;
    for (int j = 0; j < h; ++j) {
        double ar = lv.b_ih[j] + lv.b_hh[j];
        double az = lv.b_ih[h + j] + lv.b_hh[h + j];
        double an = lv.b_ih[2 * h + j];
        double ahh = lv.b_hh[2 * h + j];
        const double* wr = lv.w_ih + static_cast<std::size_t>(j) * in;
        const double* wz = lv.w_ih + static_cast<std::size_t>(h + j) * in;
        const double* wn = lv.w_ih + static_cast<std::size_t>(2 * h + j) * in;
        for (int i = 0; i < in; ++i) {
            ar += wr[i] * x[i];
            az += wz[i] * x[i];
            an += wn[i] * x[i];
        }
        const double* ur = lv.w_hh + static_cast<std::size_t>(j) * h;
        const double* uz = lv.w_hh + static_cast<std::size_t>(h + j) * h;
        const double* un = lv.w_hh + static_cast<std::size_t>(2 * h + j) * h;
        for (int k = 0; k < h; ++k) {
            ar += ur[k] * hprev[k];
            az += uz[k] * hprev[k];
            ahh += un[k] * hprev[k];
        }
        r[j] = sigmoid(ar);
        z[j] = sigmoid(az);
        hh[j] = ahh;
        n[j] = std::tanh(an + r[j] * ahh);
        hout[j] = (1.0 - z[j]) * n[j] + z[j] * hprev[j];
    }
}

/// Runs both layers over the input sequence; returns the final layer-2 hidden
/// state (the embedding). `ws` keeps everything needed for BPTT.
inline void backbone_forward(const ModelWeights& w, std::span<const double> input, Workspace& ws) {
    const int L = w.seq_len, h = w.hidden;
    ws.resize(L, h);
    const LayerView l0 = layer_view(w, 0);
    const LayerView l1 = layer_view(w, 1);
    std::vector<double> zero(static_cast<std::size_t>(h), 0.0);
    const double* h0prev = zero.data();
    const double* h1prev = zero.data();
    for (int t = 0; t < L; ++t) {
        const std::size_t o0 = ws.at(0, t);
        const std::size_t o1 = ws.at(1, t);
        const double xt = input[static_cast<std::size_t>(t)];
        cell_forward(l0, &xt, h0prev, &ws.r[o0], &ws.z[o0], &ws.n[o0], &ws.hh[o0], &ws.h_state[o0]);
        std::memcpy(&ws.x1[static_cast<std::size_t>(t) * h], &ws.h_state[o0],
                    sizeof(double) * static_cast<std::size_t>(h));
        cell_forward(l1, &ws.h_state[o0], h1prev, &ws.r[o1], &ws.z[o1], &ws.n[o1], &ws.hh[o1],
                     &ws.h_state[o1]);
        h0prev = &ws.h_state[o0];
        h1prev = &ws.h_state[o1];
    }
}

inline std::vector<double> backbone_out(const ModelWeights& w, std::span<const double> input) {
    Workspace ws;
    backbone_forward(w, input, ws);
    const std::size_t last = ws.at(1, w.seq_len - 1);
    return std::vector<double>(ws.h_state.begin() + static_cast<std::ptrdiff_t>(last),
                               ws.h_state.begin() + static_cast<std::ptrdiff_t>(last + w.hidden));
}

inline void head_forward(const ModelWeights& w, std::span<const double> embedding,
                         std::span<double> pred) {
    const auto hv = head_view(w);
    std::vector<double> z1(static_cast<std::size_t>(hv.h));
    for (int j = 0; j < hv.h; ++j) {
        double acc = hv.b1[j];
        const double* row = hv.w1 + static_cast<std::size_t>(j) * hv.h;
        for (int k = 0; k < hv.h; ++k) acc += row[k] * embedding[static_cast<std::size_t>(k)];
        z1[static_cast<std::size_t>(j)] = std::tanh(acc);
    }
    for (int o = 0; o < hv.H; ++o) {
        double acc = hv.b2[o];
        const double* row = hv.w2 + static_cast<std::size_t>(o) * hv.h;
        for (int k = 0; k < hv.h; ++k) acc += row[k] * z1[static_cast<std::size_t>(k)];
        pred[static_cast<std::size_t>(o)] = acc;
    }
}

/// Head gradient for one window; optionally also emits dLoss/dembedding for
/// the full BPTT pass.
inline void head_backward(const ModelWeights& w, std::span<const double> embedding,
                          std::span<const double> dpred, std::span<double> ghead,
                          double* dembedding = nullptr) {
    const auto hv = head_view(w);
    std::vector<double> z1(static_cast<std::size_t>(hv.h));
    for (int j = 0; j < hv.h; ++j) {
        double acc = hv.b1[j];
        const double* row = hv.w1 + static_cast<std::size_t>(j) * hv.h;
        for (int k = 0; k < hv.h; ++k) acc += row[k] * embedding[static_cast<std::size_t>(k)];
        z1[static_cast<std::size_t>(j)] = std::tanh(acc);
    }
    double* gw1 = ghead.data();
    double* gb1 = gw1 + static_cast<std::size_t>(hv.h) * hv.h;
    double* gw2 = gb1 + hv.h;
    double* gb2 = gw2 + static_cast<std::size_t>(hv.H) * hv.h;

    std::vector<double> dz1(static_cast<std::size_t>(hv.h), 0.0);
    for (int o = 0; o < hv.H; ++o) {
        const double d = dpred[static_cast<std::size_t>(o)];
        gb2[o] += d;
        double* row = gw2 + static_cast<std::size_t>(o) * hv.h;
        const double* w2row = hv.w2 + static_cast<std::size_t>(o) * hv.h;
        for (int k = 0; k < hv.h; ++k) {
            row[k] += d * z1[static_cast<std::size_t>(k)];
            dz1[static_cast<std::size_t>(k)] += d * w2row[k];
        }
    }
    for (int j = 0; j < hv.h; ++j) {
        const double da1 = dz1[static_cast<std::size_t>(j)] *
                           (1.0 - z1[static_cast<std::size_t>(j)] * z1[static_cast<std::size_t>(j)]);
        gb1[j] += da1;
        double* row = gw1 + static_cast<std::size_t>(j) * hv.h;
        const double* w1row = hv.w1 + static_cast<std::size_t>(j) * hv.h;
        for (int k = 0; k < hv.h; ++k) {
            row[k] += da1 * embedding[static_cast<std::size_t>(k)];
            if (dembedding) dembedding[k] += da1 * w1row[k];
        }
    }
}

struct LayerGradView {
    double* w_ih;
    double* w_hh;
    double* b_ih;
    double* b_hh;
};

inline LayerGradView layer_grad_view(const ModelWeights& w, std::span<double> gfull, int layer) {
    const int h = w.hidden;
    double* p = gfull.data();
    for (int l = 0; l < layer; ++l) p += layer_size(l == 0 ? 1 : h, h);
    const int in = layer == 0 ? 1 : h;
    LayerGradView v;
    v.w_ih = p;
    v.w_hh = p + static_cast<std::size_t>(3 * h) * in;
    v.b_ih = v.w_hh + static_cast<std::size_t>(3 * h) * h;
    v.b_hh = v.b_ih + 3 * static_cast<std::size_t>(h);
    return v;
}

inline void cell_backward(const LayerView& lv, const LayerGradView& gv, const double* x,
                          const double* hprev, const double* r, const double* z, const double* n,
                          const double* hh, const double* dh, double* dhprev, double* dx) {
    const int h = lv.h, in = lv.in;
    for (int k = 0; k < h; ++k) dhprev[k] = dh[k] * z[k];
    if (dx)
        for (int i = 0; i < in; ++i) dx[i] = 0.0;
    for (int j = 0; j < h; ++j) {
        const double dzj = dh[j] * (hprev[j] - n[j]);
        const double daz = dzj * z[j] * (1.0 - z[j]);
        const double dnj = dh[j] * (1.0 - z[j]);
        const double dan = dnj * (1.0 - n[j] * n[j]);
        const double drj = dan * hh[j];
        const double dar = drj * r[j] * (1.0 - r[j]);
        const double dhh = dan * r[j];

        gv.b_ih[j] += dar;
        gv.b_ih[h + j] += daz;
        gv.b_ih[2 * h + j] += dan;
        gv.b_hh[j] += dar;
        gv.b_hh[h + j] += daz;
        gv.b_hh[2 * h + j] += dhh;

        double* gwr = gv.w_ih + static_cast<std::size_t>(j) * in;
        double* gwz = gv.w_ih + static_cast<std::size_t>(h + j) * in;
        double* gwn = gv.w_ih + static_cast<std::size_t>(2 * h + j) * in;
        const double* wr = lv.w_ih + static_cast<std::size_t>(j) * in;
        const double* wz = lv.w_ih + static_cast<std::size_t>(h + j) * in;
        const double* wn = lv.w_ih + static_cast<std::size_t>(2 * h + j) * in;
        for (int i = 0; i < in; ++i) {
            gwr[i] += dar * x[i];
            gwz[i] += daz * x[i];
            gwn[i] += dan * x[i];
            if (dx) dx[i] += dar * wr[i] + daz * wz[i] + dan * wn[i];
        }

        double* gur = gv.w_hh + static_cast<std::size_t>(j) * h;
        double* guz = gv.w_hh + static_cast<std::size_t>(h + j) * h;
        double* gun = gv.w_hh + static_cast<std::size_t>(2 * h + j) * h;
        const double* ur = lv.w_hh + static_cast<std::size_t>(j) * h;
        const double* uz = lv.w_hh + static_cast<std::size_t>(h + j) * h;
        const double* un = lv.w_hh + static_cast<std::size_t>(2 * h + j) * h;
        for (int k = 0; k < h; ++k) {
            gur[k] += dar * hprev[k];
            guz[k] += daz * hprev[k];
            gun[k] += dhh * hprev[k];
            dhprev[k] += dar * ur[k] + daz * uz[k] + dhh * un[k];
        }
    }
}

/// Full BPTT for one window: accumulates into gfull ([backbone | head]) given
/// dLoss/dpred. Exact over the whole unrolled sequence.
inline void window_backward(const ModelWeights& w, std::span<const double> input,
                            const Workspace& ws, std::span<const double> dpred,
                            std::span<double> gfull) {
    const int L = w.seq_len, h = w.hidden;
    const LayerView l0 = layer_view(w, 0);
    const LayerView l1 = layer_view(w, 1);
    const LayerGradView g0 = layer_grad_view(w, gfull, 0);
    const LayerGradView g1 = layer_grad_view(w, gfull, 1);

    const std::size_t emb_at = ws.at(1, L - 1);
    std::span<const double> embedding(&ws.h_state[emb_at], static_cast<std::size_t>(h));
    std::vector<double> demb(static_cast<std::size_t>(h), 0.0);
    head_backward(w, embedding, dpred, gfull.subspan(w.head_offset), demb.data());

    std::vector<double> carry1(demb);                              // dL/dh1_t
    std::vector<double> carry0(static_cast<std::size_t>(h), 0.0);  // dL/dh0_t
    std::vector<double> dx1(static_cast<std::size_t>(h), 0.0);
    std::vector<double> dh0(static_cast<std::size_t>(h), 0.0);
    std::vector<double> dhprev(static_cast<std::size_t>(h), 0.0);
    std::vector<double> zero(static_cast<std::size_t>(h), 0.0);

    for (int t = L - 1; t >= 0; --t) {
        const std::size_t o0 = ws.at(0, t);
        const std::size_t o1 = ws.at(1, t);
        const double* h1prev = t > 0 ? &ws.h_state[ws.at(1, t - 1)] : zero.data();
        const double* h0prev = t > 0 ? &ws.h_state[ws.at(0, t - 1)] : zero.data();
        cell_backward(l1, g1, &ws.x1[static_cast<std::size_t>(t) * h], h1prev, &ws.r[o1],
                      &ws.z[o1], &ws.n[o1], &ws.hh[o1], carry1.data(), dhprev.data(), dx1.data());
        carry1 = dhprev;
        for (int k = 0; k < h; ++k) dh0[static_cast<std::size_t>(k)] = carry0[static_cast<std::size_t>(k)] + dx1[static_cast<std::size_t>(k)];
        const double xt = input[static_cast<std::size_t>(t)];
        double dxt = 0.0;
        cell_backward(l0, g0, &xt, h0prev, &ws.r[o0], &ws.z[o0], &ws.n[o0], &ws.hh[o0], dh0.data(),
                      dhprev.data(), &dxt);
        carry0 = dhprev;
    }
}

} // namespace gru

// ---------------------------------------------------------------------------
// Architecture dispatch
// ---------------------------------------------------------------------------

inline std::size_t head_size(const ModelWeights& w) { return w.params.size() - w.head_offset; }

/// Fresh weights with seeded uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline ModelWeights init_weights(Arch arch, int L, int H, int hidden, std::uint64_t seed) {
    ModelWeights w;
    w.arch = arch;
    w.seq_len = L;
    w.horizon = H;
    w.hidden = hidden;
    w.layers = 2;
    auto rng = detail::make_rng(detail::mix(seed, static_cast<std::uint64_t>(arch) + 0xA1CE));
    if (arch == Arch::DLinear) {
        w.head_offset = 0;
        w.params.assign(dlinear::head_size(L, H), 0.0);
        const double k = 1.0 / std::sqrt(static_cast<double>(L));
        for (auto& p : w.params) p = (2.0 * detail::uniform01(rng) - 1.0) * k;
    } else {
        w.head_offset = gru::backbone_size(hidden, w.layers);
        w.params.assign(w.head_offset + gru::head_size(hidden, H), 0.0);
        const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (auto& p : w.params) p = (2.0 * detail::uniform01(rng) - 1.0) * k;
    }
    return w;
}

/// Backbone representation of a window: [trend; seasonal] for DLinear, the
/// final layer-2 hidden state for GruSmall. Constant during head adaptation.
inline std::vector<double> backbone_transform(const ModelWeights& w, std::span<const double> input) {
    if (static_cast<int>(input.size()) != w.seq_len)
        throw std::invalid_argument("backbone_transform: wrong input length");
    return w.arch == Arch::DLinear ? dlinear::backbone_out(w, input) : gru::backbone_out(w, input);
}

inline void head_forward(const ModelWeights& w, std::span<const double> bout,
                         std::span<double> pred) {
    if (w.arch == Arch::DLinear)
        dlinear::head_forward(w, bout, pred);
    else
        gru::head_forward(w, bout, pred);
}

inline std::vector<double> forward(const ModelWeights& w, std::span<const double> input) {
    const auto bout = backbone_transform(w, input);
    std::vector<double> pred(static_cast<std::size_t>(w.horizon));
    head_forward(w, bout, pred);
    return pred;
}

inline std::vector<double> dlinear_forward(const ModelWeights& w, std::span<const double> input) {
    if (w.arch != Arch::DLinear) throw std::invalid_argument("dlinear_forward: wrong arch");
    return forward(w, input);
}

struct GruOutput {
    std::vector<double> forecast;
    std::vector<double> embedding;
};

inline GruOutput gru_forward(const ModelWeights& w, std::span<const double> input) {
    if (w.arch != Arch::GruSmall) throw std::invalid_argument("gru_forward: wrong arch");
    GruOutput out;
    out.embedding = gru::backbone_out(w, input);
    out.forecast.resize(static_cast<std::size_t>(w.horizon));
    gru::head_forward(w, out.embedding, out.forecast);
    return out;
}

/// Memoized backbone outputs keyed by window origin; valid while weights'
/// backbone and the active scaler stay fixed.
using BackboneCache = std::unordered_map<int, std::vector<double>>;

inline const std::vector<double>& backbone_out_cached(const ModelWeights& w, const WindowPair& win,
                                                      BackboneCache& cache) {
    auto it = cache.find(win.origin_index);
    if (it != cache.end()) return it->second;
    auto [ins, ok] = cache.emplace(win.origin_index, backbone_transform(w, win.input));
    return ins->second;
}

/// Mean SmoothL1 over a minibatch of scaled windows.
inline double minibatch_loss(const ModelWeights& w, std::span<const WindowPair> windows,
                             double delta = 1.0) {
    if (windows.empty()) throw std::invalid_argument("minibatch_loss: empty minibatch");
    double acc = 0.0;
    for (const auto& win : windows) acc += smooth_l1(forward(w, win.input), win.target, delta);
    return acc / static_cast<double>(windows.size());
}

/// Exact analytic gradient of the minibatch-mean SmoothL1 w.r.t. head
/// parameters only; backbone outputs are treated as constants.
inline std::vector<double> head_gradient(const ModelWeights& w,
                                         std::span<const WindowPair> windows, double delta,
                                         BackboneCache* cache = nullptr) {
    if (windows.empty()) throw std::invalid_argument("head_gradient: empty minibatch");
    std::vector<double> grad(head_size(w), 0.0);
    std::vector<double> pred(static_cast<std::size_t>(w.horizon));
    std::vector<double> dpred(static_cast<std::size_t>(w.horizon));
    BackboneCache local;
    BackboneCache& c = cache ? *cache : local;
    for (const auto& win : windows) {
        const auto& bout = backbone_out_cached(w, win, c);
        head_forward(w, bout, pred);
        smooth_l1_grad(pred, win.target, delta, dpred);
        if (w.arch == Arch::DLinear)
            dlinear::head_backward(w, bout, dpred, grad);
        else
            gru::head_backward(w, bout, dpred, grad);
    }
    const double inv = 1.0 / static_cast<double>(windows.size());
    for (auto& g : grad) g *= inv;
    return grad;
}

/// Full-model gradient (backbone + head). DLinear has an empty backbone, so
/// this coincides with the head gradient; GruSmall backpropagates through the
/// whole unrolled sequence.
inline std::vector<double> full_gradient(const ModelWeights& w,
                                         std::span<const WindowPair> windows, double delta = 1.0) {
    if (windows.empty()) throw std::invalid_argument("full_gradient: empty minibatch");
    std::vector<double> grad(w.params.size(), 0.0);
    std::vector<double> pred(static_cast<std::size_t>(w.horizon));
    std::vector<double> dpred(static_cast<std::size_t>(w.horizon));
    if (w.arch == Arch::DLinear) {
        for (const auto& win : windows) {
            const auto bout = dlinear::backbone_out(w, win.input);
            dlinear::head_forward(w, bout, pred);
            smooth_l1_grad(pred, win.target, delta, dpred);
            dlinear::head_backward(w, bout, dpred, grad);
        }
    } else {
        gru::Workspace ws;
        for (const auto& win : windows) {
            gru::backbone_forward(w, win.input, ws);
            const std::size_t emb_at = ws.at(1, w.seq_len - 1);
            gru::head_forward(w, {&ws.h_state[emb_at], static_cast<std::size_t>(w.hidden)}, pred);
            smooth_l1_grad(pred, win.target, delta, dpred);
            gru::window_backward(w, win.input, ws, dpred, grad);
        }
    }
    const double inv = 1.0 / static_cast<double>(windows.size());
    for (auto& g : grad) g *= inv;
    return grad;
}

// ---------------------------------------------------------------------------
// Full training
// ---------------------------------------------------------------------------

struct TrainOptions {
    int epochs = 50;
    double lr = 1e-3;
    int minibatch = 32;
    double halt_rel_improvement = 0.001;
    int halt_patience = 3;
    double delta = 1.0;
};

/// Trains all parameters (backbone + head) with Adam over shuffled
/// minibatches. Halts early once the epoch loss stops improving.
inline LossReport train_full(ModelWeights& w, std::span<const WindowPair> windows,
                             const TrainOptions& opts, std::uint64_t seed) {
    LossReport report;
    if (opts.epochs <= 0 || windows.empty()) {
        report.value = windows.empty() ? 0.0 : minibatch_loss(w, windows, opts.delta);
        return report;
    }
    auto rng = detail::make_rng(detail::mix(seed, 0x7EA1));
    OptimizerState opt(w.params.size());
    std::vector<int> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::vector<WindowPair> mb;
    int stall = 0;
    double prev_epoch_loss = 0.0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        // Fisher-Yates shuffle with the run rng.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = detail::bounded(rng, i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(opts.minibatch)) {
            mb.clear();
            for (std::size_t k = at; k < std::min(order.size(), at + static_cast<std::size_t>(opts.minibatch)); ++k)
                mb.push_back(windows[static_cast<std::size_t>(order[k])]);
            const auto grad = full_gradient(w, mb, opts.delta);
            optimizer_step(w.params, grad, opt, opts.lr);
            const double loss = minibatch_loss(w, mb, opts.delta);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_full: non-finite loss at epoch " +
                                         std::to_string(epoch));
            epoch_loss += loss;
            ++batches;
        }
        epoch_loss /= static_cast<double>(batches);
        report.history.push_back(epoch_loss);
        if (epoch > 0) {
            const double rel = (prev_epoch_loss - epoch_loss) / std::max(std::abs(prev_epoch_loss), 1e-12);
            stall = rel < opts.halt_rel_improvement ? stall + 1 : 0;
            if (stall >= opts.halt_patience) break;
        }
        prev_epoch_loss = epoch_loss;
    }
    report.value = report.history.empty() ? 0.0 : report.history.back();
    return report;
}

// ---------------------------------------------------------------------------
// Serialization: self-describing binary, bit-exact round trip.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::uint32_t kWeightsMagic = 0x52475754; // "RGWT"
inline constexpr std::uint32_t kWeightsVersion = 1;

template <typename T>
void put(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& at) {
    if (at + sizeof(T) > in.size()) throw std::runtime_error("weights blob truncated");
    T v;
    std::memcpy(&v, in.data() + at, sizeof(T));
    at += sizeof(T);
    return v;
}

} // namespace detail

inline std::string serialize_weights(const ModelWeights& w) {
    std::string out;
    detail::put(out, detail::kWeightsMagic);
    detail::put(out, detail::kWeightsVersion);
    detail::put(out, static_cast<std::uint32_t>(w.arch));
    detail::put(out, static_cast<std::int32_t>(w.seq_len));
    detail::put(out, static_cast<std::int32_t>(w.horizon));
    detail::put(out, static_cast<std::int32_t>(w.hidden));
    detail::put(out, static_cast<std::int32_t>(w.layers));
    detail::put(out, static_cast<std::uint64_t>(w.head_offset));
    detail::put(out, static_cast<std::uint64_t>(w.params.size()));
    out.append(reinterpret_cast<const char*>(w.params.data()), w.params.size() * sizeof(double));
    return out;
}

inline ModelWeights deserialize_weights(const std::string& blob) {
    std::size_t at = 0;
    if (detail::take<std::uint32_t>(blob, at) != detail::kWeightsMagic)
        throw std::runtime_error("weights blob: bad magic");
    if (detail::take<std::uint32_t>(blob, at) != detail::kWeightsVersion)
        throw std::runtime_error("weights blob: unsupported version");
    ModelWeights w;
    w.arch = static_cast<Arch>(detail::take<std::uint32_t>(blob, at));
    w.seq_len = detail::take<std::int32_t>(blob, at);
    w.horizon = detail::take<std::int32_t>(blob, at);
    w.hidden = detail::take<std::int32_t>(blob, at);
    w.layers = detail::take<std::int32_t>(blob, at);
    w.head_offset = static_cast<std::size_t>(detail::take<std::uint64_t>(blob, at));
    const auto n = static_cast<std::size_t>(detail::take<std::uint64_t>(blob, at));
    if (w.head_offset > n) throw std::runtime_error("weights blob: bad head offset");
    if (at + n * sizeof(double) > blob.size()) throw std::runtime_error("weights blob truncated");
    w.params.resize(n);
    std::memcpy(w.params.data(), blob.data() + at, n * sizeof(double));
    return w;
}

inline void save_weights(const ModelWeights& w, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_weights: cannot open " + path);
    const auto blob = serialize_weights(w);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("save_weights: write failed for " + path);
}

inline ModelWeights load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_weights: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_weights(ss.str());
}

} // namespace rgtta

/*
Copyright 2026 The trilobyte authors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
you may obtain a copy of the License at

                http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "common.hpp"
#include "model.hpp"
#include "tokenizer.hpp"

namespace trlb {

// Decoder-only causal transformer at desk scale: learned token and position
// embeddings, pre-norm blocks with multi-head self-attention and a 4x GELU
// feed-forward, untied output projection. All math is 64-bit and every
// nonlinearity uses the deterministic exp, so identical weights give
// bit-identical probabilities everywhere.
struct TransformerConfig {
    uint32_t vocab = 256;
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int context_len = 512;

    int batch_size = 16;
    double learning_rate = 3e-4;
    double mask_dropout_p = 0.0; // transfer training only; needs vocab 257

    int d_ff() const { return 4 * d_model; }
    int d_head() const { return d_model / n_heads; }
    int stride() const { return std::max(1, context_len / 2); }

    void validate() const
    {
        require(vocab >= 2, "vocabulary too small");
        require(d_model >= 2 && n_heads >= 1 && d_model % n_heads == 0,
                "d_model must be a positive multiple of n_heads");
        require(n_layers >= 1 && context_len >= 2, "need at least one layer and context 2");
        require(mask_dropout_p >= 0.0 && mask_dropout_p <= 1.0, "bad dropout probability");
    }
};

namespace detail {

struct ParamLayout {
    struct Layer {
        size_t ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o;
        size_t ln2_g, ln2_b, w1, b1, w2, b2;
    };
    size_t tok_emb = 0, pos_emb = 0;
    std::vector<Layer> layer;
    size_t ln_f_g = 0, ln_f_b = 0, w_out = 0, b_out = 0;
    size_t total = 0;

    explicit ParamLayout(const TransformerConfig& c)
    {
        size_t d = size_t(c.d_model), ff = size_t(c.d_ff());
        size_t at = 0;
        auto alloc = [&](size_t n) { size_t o = at; at += n; return o; };
        tok_emb = alloc(size_t(c.vocab) * d);
        pos_emb = alloc(size_t(c.context_len) * d);
        layer.resize(size_t(c.n_layers));
        for (auto& l : layer) {
            l.ln1_g = alloc(d);
            l.ln1_b = alloc(d);
            l.w_qkv = alloc(d * 3 * d);
            l.b_qkv = alloc(3 * d);
            l.w_o = alloc(d * d);
            l.b_o = alloc(d);
            l.ln2_g = alloc(d);
            l.ln2_b = alloc(d);
            l.w1 = alloc(d * ff);
            l.b1 = alloc(ff);
            l.w2 = alloc(ff * d);
            l.b2 = alloc(d);
        }
        ln_f_g = alloc(d);
        ln_f_b = alloc(d);
        w_out = alloc(d * size_t(c.vocab));
        b_out = alloc(size_t(c.vocab));
        total = at;
    }
};

constexpr double kLnEps = 1e-5;

inline double gelu(double x)
{
    constexpr double c = 0.7978845608028653558798921198687; // sqrt(2/pi)
    double u = c * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + det_tanh(u));
}

inline double gelu_grad(double x)
{
    constexpr double c = 0.7978845608028653558798921198687;
    double u = c * (x + 0.044715 * x * x * x);
    double t = det_tanh(u);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x);
}

// y[T x out] = x[T x in] * W[in x out] + b
inline void linear_fwd(const double* x, const double* w, const double* b, double* y,
                       size_t T, size_t in, size_t out)
{
    for (size_t t = 0; t < T; t++) {
        double* yt = y + t * out;
        for (size_t o = 0; o < out; o++)
            yt[o] = b[o];
        const double* xt = x + t * in;
        for (size_t i = 0; i < in; i++) {
            double xv = xt[i];
            if (xv == 0.0)
                continue;
            const double* wr = w + i * out;
            for (size_t o = 0; o < out; o++)
                yt[o] += xv * wr[o];
        }
    }
}

inline void linear_bwd(const double* x, const double* w, const double* dy,
                       double* dx, double* dw, double* db,
                       size_t T, size_t in, size_t out)
{
    for (size_t t = 0; t < T; t++) {
        const double* dyt = dy + t * out;
        const double* xt = x + t * in;
        for (size_t o = 0; o < out; o++)
            db[o] += dyt[o];
        for (size_t i = 0; i < in; i++) {
            const double* wr = w + i * out;
            double* dwr = dw + i * out;
            double acc = 0.0;
            double xv = xt[i];
            for (size_t o = 0; o < out; o++) {
                acc += dyt[o] * wr[o];
                dwr[o] += xv * dyt[o];
            }
            if (dx != nullptr)
                dx[t * in + i] += acc;
        }
    }
}

inline void layernorm_fwd(const double* x, const double* g, const double* b,
                          double* xh, double* rstd, double* y, size_t T, size_t d)
{
    for (size_t t = 0; t < T; t++) {
        const double* xt = x + t * d;
        double mean = 0.0;
        for (size_t i = 0; i < d; i++)
            mean += xt[i];
        mean /= double(d);
        double var = 0.0;
        for (size_t i = 0; i < d; i++) {
            double c = xt[i] - mean;
            var += c * c;
        }
        var /= double(d);
        double rs = 1.0 / std::sqrt(var + kLnEps);
        rstd[t] = rs;
        for (size_t i = 0; i < d; i++) {
            double h = (xt[i] - mean) * rs;
            xh[t * d + i] = h;
            y[t * d + i] = h * g[i] + b[i];
        }
    }
}

inline void layernorm_bwd(const double* xh, const double* rstd, const double* g,
                          const double* dy, double* dx, double* dg, double* db,
                          size_t T, size_t d)
{
    for (size_t t = 0; t < T; t++) {
        const double* xht = xh + t * d;
        const double* dyt = dy + t * d;
        double mean_dxh = 0.0, mean_dxh_xh = 0.0;
        for (size_t i = 0; i < d; i++) {
            double dxh = dyt[i] * g[i];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xht[i];
            dg[i] += dyt[i] * xht[i];
            db[i] += dyt[i];
        }
        mean_dxh /= double(d);
        mean_dxh_xh /= double(d);
        for (size_t i = 0; i < d; i++) {
            double dxh = dyt[i] * g[i];
            dx[t * d + i] += rstd[t] * (dxh - mean_dxh - xht[i] * mean_dxh_xh);
        }
    }
}

} // namespace detail

// ---------------------------------------------------------------------------

class TinyTransformer {
public:
    TransformerConfig config;
    std::vector<double> params;

    static TinyTransformer zero_init(const TransformerConfig& cfg)
    {
        cfg.validate();
        TinyTransformer m;
        m.config = cfg;
        detail::ParamLayout lay(cfg);
        m.params.assign(lay.total, 0.0);
        return m;
    }

    static TinyTransformer random_init(const TransformerConfig& cfg, uint64_t seed)
    {
        TinyTransformer m = zero_init(cfg);
        detail::ParamLayout lay(cfg);
        Rng rng(seed);
        size_t d = size_t(cfg.d_model), ff = size_t(cfg.d_ff());
        auto fill = [&](size_t off, size_t n) {
            for (size_t i = 0; i < n; i++)
                m.params[off + i] = 0.02 * rng.normal();
        };
        fill(lay.tok_emb, size_t(cfg.vocab) * d);
        fill(lay.pos_emb, size_t(cfg.context_len) * d);
        for (auto& l : lay.layer) {
            fill(l.w_qkv, d * 3 * d);
            fill(l.w_o, d * d);
            fill(l.w1, d * ff);
            fill(l.w2, ff * d);
            std::fill_n(m.params.begin() + long(l.ln1_g), d, 1.0);
            std::fill_n(m.params.begin() + long(l.ln2_g), d, 1.0);
        }
        fill(lay.w_out, d * size_t(cfg.vocab));
        std::fill_n(m.params.begin() + long(lay.ln_f_g), d, 1.0);
        return m;
    }

    uint64_t weights_digest() const
    {
        uint64_t h = kFnv64Offset;
        h = fnv1a64_u32(h, config.vocab);
        h = fnv1a64_u32(h, uint32_t(config.d_model));
        h = fnv1a64_u32(h, uint32_t(config.n_layers));
        h = fnv1a64_u32(h, uint32_t(config.n_heads));
        h = fnv1a64_u32(h, uint32_t(config.context_len));
        h = fnv1a64(h, params.data(), params.size() * sizeof(double));
        return h;
    }

    // Full-window forward. Returns per-position next-token distributions
    // (row t predicts the token following position t).
    std::vector<std::vector<double>> forward_probs(std::span<const uint32_t> window) const
    {
        Workspace ws;
        forward(window, ws);
        std::vector<std::vector<double>> out(window.size());
        for (size_t t = 0; t < window.size(); t++)
            out[t].assign(ws.probs.begin() + long(t * config.vocab),
                          ws.probs.begin() + long((t + 1) * config.vocab));
        return out;
    }

    // Mean cross-entropy (nats) of targets given inputs; positions whose
    // target equals exclude_token (if any) are left out of the objective.
    double loss(std::span<const uint32_t> inputs, std::span<const uint32_t> targets,
                std::optional<uint32_t> exclude_token = std::nullopt) const
    {
        Workspace ws;
        forward(inputs, ws);
        return loss_from_probs(ws, targets, exclude_token);
    }

    // Same, but also accumulates parameter gradients (dL/dtheta) into grads.
    double loss_and_grad(std::span<const uint32_t> inputs, std::span<const uint32_t> targets,
                         std::vector<double>& grads,
                         std::optional<uint32_t> exclude_token = std::nullopt) const
    {
        Workspace ws;
        forward(inputs, ws);
        double l = loss_from_probs(ws, targets, exclude_token);
        backward(inputs, targets, ws, grads, exclude_token);
        return l;
    }

private:
    struct Workspace {
        size_t T = 0;
        std::vector<double> x0;
        struct LayerTape {
            std::vector<double> xh1, rstd1, ln1;
            std::vector<double> qkv;
            std::vector<double> ao;
            std::vector<double> x1;
            std::vector<double> xh2, rstd2, ln2;
            std::vector<double> ff1, gl;
            std::vector<double> x2;
        };
        std::vector<LayerTape> layer;
        std::vector<double> xhf, rstdf, lnf;
        std::vector<double> probs;
    };

    void forward(std::span<const uint32_t> window, Workspace& ws) const
    {
        size_t T = window.size();
        require(T >= 1 && T <= size_t(config.context_len), "window length exceeds the context");
        size_t d = size_t(config.d_model), ff = size_t(config.d_ff());
        size_t nh = size_t(config.n_heads), dh = size_t(config.d_head());
        detail::ParamLayout lay(config);
        const double* P = params.data();

        ws.T = T;
        ws.x0.assign(T * d, 0.0);
        for (size_t t = 0; t < T; t++) {
            require(window[t] < config.vocab, "token outside vocabulary");
            const double* te = P + lay.tok_emb + size_t(window[t]) * d;
            const double* pe = P + lay.pos_emb + t * d;
            for (size_t i = 0; i < d; i++)
                ws.x0[t * d + i] = te[i] + pe[i];
        }

        ws.layer.resize(size_t(config.n_layers));
        const std::vector<double>* xin = &ws.x0;
        double scale = 1.0 / std::sqrt(double(dh));
        for (int l = 0; l < config.n_layers; l++) {
            auto& lp = lay.layer[size_t(l)];
            auto& tape = ws.layer[size_t(l)];
            tape.xh1.assign(T * d, 0.0);
            tape.rstd1.assign(T, 0.0);
            tape.ln1.assign(T * d, 0.0);
            detail::layernorm_fwd(xin->data(), P + lp.ln1_g, P + lp.ln1_b,
                                  tape.xh1.data(), tape.rstd1.data(), tape.ln1.data(), T, d);

            tape.qkv.assign(T * 3 * d, 0.0);
            detail::linear_fwd(tape.ln1.data(), P + lp.w_qkv, P + lp.b_qkv, tape.qkv.data(), T, d, 3 * d);

            tape.ao.assign(T * d, 0.0);
            std::vector<double> prow(T);
            for (size_t h = 0; h < nh; h++) {
                size_t qo = h * dh, ko = d + h * dh, vo = 2 * d + h * dh;
                for (size_t t = 0; t < T; t++) {
                    const double* q = tape.qkv.data() + t * 3 * d + qo;
                    double mx = -1e300;
                    for (size_t j = 0; j <= t; j++) {
                        const double* k = tape.qkv.data() + j * 3 * d + ko;
                        double s = 0.0;
                        for (size_t i = 0; i < dh; i++)
                            s += q[i] * k[i];
                        prow[j] = s * scale;
                        mx = std::max(mx, prow[j]);
                    }
                    double Z = 0.0;
                    for (size_t j = 0; j <= t; j++) {
                        prow[j] = det_exp(prow[j] - mx);
                        Z += prow[j];
                    }
                    double* at = tape.ao.data() + t * d + h * dh;
                    for (size_t j = 0; j <= t; j++) {
                        double p = prow[j] / Z;
                        const double* v = tape.qkv.data() + j * 3 * d + vo;
                        for (size_t i = 0; i < dh; i++)
                            at[i] += p * v[i];
                    }
                }
            }

            tape.x1.assign(T * d, 0.0);
            detail::linear_fwd(tape.ao.data(), P + lp.w_o, P + lp.b_o, tape.x1.data(), T, d, d);
            for (size_t i = 0; i < T * d; i++)
                tape.x1[i] += (*xin)[i];

            tape.xh2.assign(T * d, 0.0);
            tape.rstd2.assign(T, 0.0);
            tape.ln2.assign(T * d, 0.0);
            detail::layernorm_fwd(tape.x1.data(), P + lp.ln2_g, P + lp.ln2_b,
                                  tape.xh2.data(), tape.rstd2.data(), tape.ln2.data(), T, d);

            tape.ff1.assign(T * ff, 0.0);
            detail::linear_fwd(tape.ln2.data(), P + lp.w1, P + lp.b1, tape.ff1.data(), T, d, ff);
            tape.gl.assign(T * ff, 0.0);
            for (size_t i = 0; i < T * ff; i++)
                tape.gl[i] = detail::gelu(tape.ff1[i]);

            tape.x2.assign(T * d, 0.0);
            detail::linear_fwd(tape.gl.data(), P + lp.w2, P + lp.b2, tape.x2.data(), T, ff, d);
            for (size_t i = 0; i < T * d; i++)
                tape.x2[i] += tape.x1[i];

            xin = &tape.x2;
        }

        ws.xhf.assign(T * d, 0.0);
        ws.rstdf.assign(T, 0.0);
        ws.lnf.assign(T * d, 0.0);
        detail::layernorm_fwd(xin->data(), P + lay.ln_f_g, P + lay.ln_f_b,
                              ws.xhf.data(), ws.rstdf.data(), ws.lnf.data(), T, d);

        ws.probs.assign(T * size_t(config.vocab), 0.0);
        detail::linear_fwd(ws.lnf.data(), P + lay.w_out, P + lay.b_out, ws.probs.data(), T, d, config.vocab);
        for (size_t t = 0; t < T; t++) {
            double* row = ws.probs.data() + t * config.vocab;
            double mx = row[0];
            for (size_t s = 1; s < config.vocab; s++)
                mx = std::max(mx, row[s]);
            double Z = 0.0;
            for (size_t s = 0; s < config.vocab; s++) {
                row[s] = det_exp(row[s] - mx);
                Z += row[s];
            }
            for (size_t s = 0; s < config.vocab; s++)
                row[s] /= Z;
        }
    }

    static double loss_from_probs(const Workspace& ws, std::span<const uint32_t> targets,
                                  std::optional<uint32_t> exclude_token)
    {
        size_t vocab = ws.probs.size() / std::max<size_t>(ws.T, 1);
        require(targets.size() == ws.T, "targets must align with inputs");
        double total = 0.0;
        size_t n = 0;
        for (size_t t = 0; t < ws.T; t++) {
            if (exclude_token && targets[t] == *exclude_token)
                continue;
            total += -std::log(ws.probs[t * vocab + targets[t]]);
            n++;
        }
        return n == 0 ? 0.0 : total / double(n);
    }

    void backward(std::span<const uint32_t> window, std::span<const uint32_t> targets,
                  const Workspace& ws, std::vector<double>& grads,
                  std::optional<uint32_t> exclude_token) const
    {
        size_t T = ws.T;
        size_t d = size_t(config.d_model), ff = size_t(config.d_ff());
        size_t nh = size_t(config.n_heads), dh = size_t(config.d_head());
        detail::ParamLayout lay(config);
        const double* P = params.data();
        grads.resize(params.size(), 0.0);
        double* G = grads.data();

        size_t n_inc = 0;
        for (size_t t = 0; t < T; t++)
            if (!exclude_token || targets[t] != *exclude_token)
                n_inc++;
        if (n_inc == 0)
            return;

        std::vector<double> dlogits(T * size_t(config.vocab), 0.0);
        for (size_t t = 0; t < T; t++) {
            if (exclude_token && targets[t] == *exclude_token)
                continue;
            const double* row = ws.probs.data() + t * config.vocab;
            double* dr = dlogits.data() + t * config.vocab;
            for (size_t s = 0; s < config.vocab; s++)
                dr[s] = row[s] / double(n_inc);
            dr[targets[t]] -= 1.0 / double(n_inc);
        }

        std::vector<double> dlnf(T * d, 0.0);
        detail::linear_bwd(ws.lnf.data(), P + lay.w_out, dlogits.data(),
                           dlnf.data(), G + lay.w_out, G + lay.b_out, T, d, config.vocab);

        std::vector<double> dx(T * d, 0.0);
        detail::layernorm_bwd(ws.xhf.data(), ws.rstdf.data(), P + lay.ln_f_g,
                              dlnf.data(), dx.data(), G + lay.ln_f_g, G + lay.ln_f_b, T, d);

        double scale = 1.0 / std::sqrt(double(dh));
        for (int l = config.n_layers - 1; l >= 0; l--) {
            auto& lp = lay.layer[size_t(l)];
            auto& tape = ws.layer[size_t(l)];

            // dx currently holds dL/dx2
            std::vector<double> dgl(T * ff, 0.0);
            std::vector<double> dln2(T * d, 0.0);
            detail::linear_bwd(tape.gl.data(), P + lp.w2, dx.data(),
                               dgl.data(), G + lp.w2, G + lp.b2, T, ff, d);
            std::vector<double> dff1(T * ff, 0.0);
            for (size_t i = 0; i < T * ff; i++)
                dff1[i] = dgl[i] * detail::gelu_grad(tape.ff1[i]);
            detail::linear_bwd(tape.ln2.data(), P + lp.w1, dff1.data(),
                               dln2.data(), G + lp.w1, G + lp.b1, T, d, ff);

            std::vector<double> dx1(T * d, 0.0);
            detail::layernorm_bwd(tape.xh2.data(), tape.rstd2.data(), P + lp.ln2_g,
                                  dln2.data(), dx1.data(), G + lp.ln2_g, G + lp.ln2_b, T, d);
            for (size_t i = 0; i < T * d; i++)
                dx1[i] += dx[i]; // residual skip around the MLP

            std::vector<double> dao(T * d, 0.0);
            std::vector<double> dx_res(T * d, 0.0);
            detail::linear_bwd(tape.ao.data(), P + lp.w_o, dx1.data(),
                               dao.data(), G + lp.w_o, G + lp.b_o, T, d, d);

            // attention backward; probabilities recomputed per row
            std::vector<double> dqkv(T * 3 * d, 0.0);
            std::vector<double> prow(T), dprow(T);
            for (size_t h = 0; h < nh; h++) {
                size_t qo = h * dh, ko = d + h * dh, vo = 2 * d + h * dh;
                for (size_t t = 0; t < T; t++) {
                    const double* q = tape.qkv.data() + t * 3 * d + qo;
                    double mx = -1e300;
                    for (size_t j = 0; j <= t; j++) {
                        const double* k = tape.qkv.data() + j * 3 * d + ko;
                        double s = 0.0;
                        for (size_t i = 0; i < dh; i++)
                            s += q[i] * k[i];
                        prow[j] = s * scale;
                        mx = std::max(mx, prow[j]);
                    }
                    double Z = 0.0;
                    for (size_t j = 0; j <= t; j++) {
                        prow[j] = det_exp(prow[j] - mx);
                        Z += prow[j];
                    }
                    const double* dat = dao.data() + t * d + h * dh;
                    double dot = 0.0;
                    for (size_t j = 0; j <= t; j++) {
                        prow[j] /= Z;
                        const double* v = tape.qkv.data() + j * 3 * d + vo;
                        double dp = 0.0;
                        for (size_t i = 0; i < dh; i++)
                            dp += dat[i] * v[i];
                        dprow[j] = dp;
                        dot += prow[j] * dp;
                        double* dv = dqkv.data() + j * 3 * d + vo;
                        for (size_t i = 0; i < dh; i++)
                            dv[i] += prow[j] * dat[i];
                    }
                    double* dq = dqkv.data() + t * 3 * d + qo;
                    for (size_t j = 0; j <= t; j++) {
                        double ds = prow[j] * (dprow[j] - dot) * scale;
                        const double* k = tape.qkv.data() + j * 3 * d + ko;
                        double* dk = dqkv.data() + j * 3 * d + ko;
                        for (size_t i = 0; i < dh; i++) {
                            dq[i] += ds * k[i];
                            dk[i] += ds * q[i];
                        }
                    }
                }
            }

            std::vector<double> dln1(T * d, 0.0);
            detail::linear_bwd(tape.ln1.data(), P + lp.w_qkv, dqkv.data(),
                               dln1.data(), G + lp.w_qkv, G + lp.b_qkv, T, d, 3 * d);
            detail::layernorm_bwd(tape.xh1.data(), tape.rstd1.data(), P + lp.ln1_g,
                                  dln1.data(), dx_res.data(), G + lp.ln1_g, G + lp.ln1_b, T, d);
            for (size_t i = 0; i < T * d; i++)
                dx_res[i] += dx1[i]; // residual skip around attention

            dx = std::move(dx_res);
        }

        // dx is now dL/dx0: scatter into token and position embeddings
        for (size_t t = 0; t < T; t++) {
            double* gte = G + lay.tok_emb + size_t(window[t]) * d;
            double* gpe = G + lay.pos_emb + t * d;
            for (size_t i = 0; i < d; i++) {
                gte[i] += dx[t * d + i];
                gpe[i] += dx[t * d + i];
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Adam optimizer (adaptive moment estimates, bias-corrected).

class AdamOptimizer {
public:
    AdamOptimizer(size_t n_params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr)
        , beta1_(beta1)
        , beta2_(beta2)
        , eps_(eps)
        , m_(n_params, 0.0)
        , v_(n_params, 0.0)
    {
    }

    void step(std::vector<double>& params, const std::vector<double>& grads)
    {
        t_++;
        double bc1 = 1.0 - std::pow(beta1_, double(t_));
        double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (size_t i = 0; i < params.size(); i++) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
            params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    uint64_t t_ = 0;
    std::vector<double> m_, v_;
};

// ---------------------------------------------------------------------------
// Training. Windows of context_len+1 tokens are drawn uniformly over
// (stream, sample-aligned offset) pairs; when mask dropout is on, each
// window passes through apply_training_dropout and positions whose target is
// the mask token drop out of the objective.

struct TrainStepLog {
    int step = 0;
    double loss_nats = 0.0;
    double bits_per_token = 0.0;
};

struct TrainResult {
    TinyTransformer model;
    std::vector<TrainStepLog> log;
};

inline TrainResult transformer_train(const std::vector<TokenStream>& corpus,
                                     const TransformerConfig& cfg, int steps, uint64_t seed)
{
    cfg.validate();
    require(!corpus.empty(), "training corpus is empty");
    bool use_dropout = cfg.mask_dropout_p > 0.0;
    if (use_dropout)
        require(cfg.vocab >= 257, "mask dropout requires the 257-token transfer vocabulary");

    struct Slot {
        const TokenStream* stream;
        uint64_t positions; // sample-aligned window starts
    };
    std::vector<Slot> slots;
    uint64_t total_positions = 0;
    size_t want = size_t(cfg.context_len) + 1;
    for (const auto& ts : corpus) {
        require(ts.scheme == Scheme::Trilobyte || !use_dropout,
                "mask dropout needs trilobyte streams");
        for (uint32_t tok : ts.tokens)
            require(tok < cfg.vocab, "corpus token outside the configured vocabulary");
        if (ts.tokens.size() < 2)
            continue;
        size_t usable = ts.tokens.size() >= want ? ts.tokens.size() - want + 1 : 1;
        size_t align = ts.scheme == Scheme::Trilobyte ? size_t(ts.bytes_per_sample) : 1;
        uint64_t aligned = (usable + align - 1) / align;
        slots.push_back({&ts, aligned});
        total_positions += aligned;
    }
    require(total_positions > 0, "no usable training windows (streams too short)");

    TrainResult out;
    out.model = TinyTransformer::random_init(cfg, seed);
    AdamOptimizer opt(out.model.params.size(), cfg.learning_rate);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<double> grads(out.model.params.size(), 0.0);
    std::vector<double> acc(out.model.params.size(), 0.0);
    for (int step = 0; step < steps; step++) {
        std::fill(acc.begin(), acc.end(), 0.0);
        double loss_sum = 0.0;
        for (int b = 0; b < cfg.batch_size; b++) {
            uint64_t pick = rng.below(total_positions);
            const TokenStream* ts = nullptr;
            uint64_t local = 0;
            for (const auto& s : slots) {
                if (pick < s.positions) {
                    ts = s.stream;
                    local = pick;
                    break;
                }
                pick -= s.positions;
            }
            size_t align = ts->scheme == Scheme::Trilobyte ? size_t(ts->bytes_per_sample) : 1;
            size_t start = size_t(local) * align;
            size_t len = std::min(want, ts->tokens.size() - start);
            std::vector<uint32_t> window(ts->tokens.begin() + long(start),
                                         ts->tokens.begin() + long(start + len));
            if (use_dropout) {
                TokenStream chunk;
                chunk.scheme = Scheme::Trilobyte;
                chunk.bit_depth = ts->bit_depth;
                chunk.vocab_size = 257;
                chunk.mask_token_id = kMaskToken;
                chunk.bytes_per_sample = ts->bytes_per_sample;
                chunk.tokens = window;
                Rng drop_rng(rng.next());
                window = apply_training_dropout(chunk, cfg.mask_dropout_p, drop_rng).tokens;
            }
            std::span<const uint32_t> inputs(window.data(), window.size() - 1);
            std::span<const uint32_t> targets(window.data() + 1, window.size() - 1);
            std::fill(grads.begin(), grads.end(), 0.0);
            double l = out.model.loss_and_grad(inputs, targets, grads,
                                               use_dropout ? std::optional<uint32_t>(kMaskToken)
                                                           : std::nullopt);
            loss_sum += l;
            for (size_t i = 0; i < grads.size(); i++)
                acc[i] += grads[i] / double(cfg.batch_size);
        }
        opt.step(out.model.params, acc);
        double mean_loss = loss_sum / double(cfg.batch_size);
        out.log.push_back({step, mean_loss, mean_loss * 1.4426950408889634});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Streaming adapter: drives the transformer as a PredictiveModel with a
// sliding context window (stride = context_len/2) and per-layer key/value
// caches. The first token of a stream is predicted uniformly (no context).

class TransformerPredictor final : public PredictiveModel {
public:
    explicit TransformerPredictor(std::shared_ptr<const TinyTransformer> model)
        : model_(std::move(model))
        , lay_(model_->config)
    {
        weights_digest_ = model_->weights_digest();
        reset();
    }

    uint32_t vocab_size() const override { return model_->config.vocab; }

    void predict(std::span<double> out) override
    {
        if (!have_probs_) {
            std::fill(out.begin(), out.end(), 1.0 / double(model_->config.vocab));
            return;
        }
        std::copy(last_probs_.begin(), last_probs_.end(), out.begin());
    }

    void update(uint32_t symbol) override
    {
        require(symbol < model_->config.vocab, "symbol outside vocabulary");
        const auto& cfg = model_->config;
        if (cache_len_ == size_t(cfg.context_len)) {
            size_t keep = size_t(cfg.context_len) - size_t(cfg.stride());
            std::vector<uint32_t> tail(history_.end() - long(keep), history_.end());
            cache_len_ = 0;
            for (size_t laylen = 0; laylen < kv_.size(); laylen++) {
                kv_[laylen].k.clear();
                kv_[laylen].v.clear();
            }
            for (uint32_t t : tail)
                append(t, false);
        }
        append(symbol, true);
        history_.push_back(symbol);
        if (history_.size() > size_t(cfg.context_len))
            history_.erase(history_.begin());
        digest_ = fnv1a64_u32(digest_, symbol);
    }

    void reset() override
    {
        const auto& cfg = model_->config;
        history_.clear();
        cache_len_ = 0;
        have_probs_ = false;
        kv_.assign(size_t(cfg.n_layers), {});
        last_probs_.assign(cfg.vocab, 0.0);
        digest_ = weights_digest_;
    }

    uint64_t state_digest() const override { return digest_; }

    std::unique_ptr<PredictiveModel> clone() const override
    {
        return std::make_unique<TransformerPredictor>(*this);
    }

private:
    struct KvCache {
        std::vector<double> k; // cache_len x d
        std::vector<double> v;
    };

    // Run one token through the stack at window position cache_len_.
    void append(uint32_t symbol, bool want_probs)
    {
        const auto& cfg = model_->config;
        size_t d = size_t(cfg.d_model), ff = size_t(cfg.d_ff());
        size_t nh = size_t(cfg.n_heads), dh = size_t(cfg.d_head());
        const double* P = model_->params.data();
        size_t t = cache_len_;

        std::vector<double> x(d);
        const double* te = P + lay_.tok_emb + size_t(symbol) * d;
        const double* pe = P + lay_.pos_emb + t * d;
        for (size_t i = 0; i < d; i++)
            x[i] = te[i] + pe[i];

        std::vector<double> xh(d), ln(d), qkv(3 * d), attn(d), tmp(std::max(ff, d));
        double rstd;
        double scale = 1.0 / std::sqrt(double(dh));
        for (int l = 0; l < cfg.n_layers; l++) {
            auto& lp = lay_.layer[size_t(l)];
            layernorm_one(x.data(), P + lp.ln1_g, P + lp.ln1_b, xh.data(), ln.data(), rstd, d);
            linear_one(ln.data(), P + lp.w_qkv, P + lp.b_qkv, qkv.data(), d, 3 * d);

            auto& cache = kv_[size_t(l)];
            cache.k.insert(cache.k.end(), qkv.begin() + long(d), qkv.begin() + long(2 * d));
            cache.v.insert(cache.v.end(), qkv.begin() + long(2 * d), qkv.begin() + long(3 * d));
            size_t n = t + 1;

            std::fill(attn.begin(), attn.end(), 0.0);
            std::vector<double> prow(n);
            for (size_t h = 0; h < nh; h++) {
                const double* q = qkv.data() + h * dh;
                double mx = -1e300;
                for (size_t j = 0; j < n; j++) {
                    const double* k = cache.k.data() + j * d + h * dh;
                    double s = 0.0;
                    for (size_t i = 0; i < dh; i++)
                        s += q[i] * k[i];
                    prow[j] = s * scale;
                    mx = std::max(mx, prow[j]);
                }
                double Z = 0.0;
                for (size_t j = 0; j < n; j++) {
                    prow[j] = det_exp(prow[j] - mx);
                    Z += prow[j];
                }
                double* at = attn.data() + h * dh;
                for (size_t j = 0; j < n; j++) {
                    double p = prow[j] / Z;
                    const double* v = cache.v.data() + j * d + h * dh;
                    for (size_t i = 0; i < dh; i++)
                        at[i] += p * v[i];
                }
            }
            linear_one(attn.data(), P + lp.w_o, P + lp.b_o, tmp.data(), d, d);
            for (size_t i = 0; i < d; i++)
                x[i] += tmp[i];

            layernorm_one(x.data(), P + lp.ln2_g, P + lp.ln2_b, xh.data(), ln.data(), rstd, d);
            std::vector<double> f1(ff);
            linear_one(ln.data(), P + lp.w1, P + lp.b1, f1.data(), d, ff);
            for (size_t i = 0; i < ff; i++)
                f1[i] = detail::gelu(f1[i]);
            linear_one(f1.data(), P + lp.w2, P + lp.b2, tmp.data(), ff, d);
            for (size_t i = 0; i < d; i++)
                x[i] += tmp[i];
        }
        cache_len_++;

        if (!want_probs)
            return;
        layernorm_one(x.data(), P + lay_.ln_f_g, P + lay_.ln_f_b, xh.data(), ln.data(), rstd, d);
        std::vector<double> logits(cfg.vocab);
        linear_one(ln.data(), P + lay_.w_out, P + lay_.b_out, logits.data(), d, cfg.vocab);
        double mx = logits[0];
        for (double v : logits)
            mx = std::max(mx, v);
        double Z = 0.0;
        for (size_t s = 0; s < cfg.vocab; s++) {
            last_probs_[s] = det_exp(logits[s] - mx);
            Z += last_probs_[s];
        }
        for (double& p : last_probs_)
            p /= Z;
        have_probs_ = true;
    }

    static void layernorm_one(const double* x, const double* g, const double* b,
                              double* xh, double* y, double& rstd, size_t d)
    {
        double mean = 0.0;
        for (size_t i = 0; i < d; i++)
            mean += x[i];
        mean /= double(d);
        double var = 0.0;
        for (size_t i = 0; i < d; i++) {
            double c = x[i] - mean;
            var += c * c;
        }
        var /= double(d);
        rstd = 1.0 / std::sqrt(var + detail::kLnEps);
        for (size_t i = 0; i < d; i++) {
            xh[i] = (x[i] - mean) * rstd;
            y[i] = xh[i] * g[i] + b[i];
        }
    }

    static void linear_one(const double* x, const double* w, const double* b, double* y,
                           size_t in, size_t out)
    {
        for (size_t o = 0; o < out; o++)
            y[o] = b[o];
        for (size_t i = 0; i < in; i++) {
            double xv = x[i];
            if (xv == 0.0)
                continue;
            const double* wr = w + i * out;
            for (size_t o = 0; o < out; o++)
                y[o] += xv * wr[o];
        }
    }

    std::shared_ptr<const TinyTransformer> model_;
    detail::ParamLayout lay_;
    std::vector<uint32_t> history_;
    std::vector<KvCache> kv_;
    std::vector<double> last_probs_;
    size_t cache_len_ = 0;
    bool have_probs_ = false;
    uint64_t weights_digest_ = 0;
    uint64_t digest_ = 0;
};

} // namespace trlb

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "l1pc/config.hpp"
#include "l1pc/errors.hpp"
#include "l1pc/meter.hpp"
#include "l1pc/numerics.hpp"
#include "l1pc/rng.hpp"

namespace l1pc {

// ---------------------------------------------------------------------------
// Weight containers
// ---------------------------------------------------------------------------

struct NormParams {
    std::vector<float> gain;
    std::vector<float> bias;  // empty for rmsnorm

    bool empty() const { return gain.empty(); }
};

struct FfnWeights {
    Tensor2 up;    // [d x hidden]
    Tensor2 down;  // [hidden x d]
    Tensor2 gate;  // [d x hidden], swiglu only

    bool empty() const { return up.empty(); }
};

struct MoeFfn {
    Tensor2 router;                   // [d x n_experts], empty when n_experts == 1
    std::vector<FfnWeights> experts;  // size n_experts

    bool empty() const { return experts.empty(); }
};

struct LayerWeights {
    NormParams norm1;  // pre-attention norm; in parallel layout the one shared norm
    Tensor2 wq;        // [d x d]
    Tensor2 wk;        // [d x e]
    Tensor2 wv;        // [d x e]
    Tensor2 wp;        // [d x d]
    NormParams norm2;  // pre-FFN norm, serial layout only
    MoeFfn ffn;
};

struct ModelWeights {
    Tensor2 input_embeddings;  // [vocab x d]
    std::vector<LayerWeights> layers;
    NormParams final_norm;
    Tensor2 output_embeddings;  // [d x vocab]
};

struct Model {
    ModelConfig config;
    ModelWeights weights;
};

// ---------------------------------------------------------------------------
// KV cache
// ---------------------------------------------------------------------------

struct LayerKV {
    Tensor2 keys;    // [max_seq_len x e], rotated
    Tensor2 values;  // [max_seq_len x e]
};

// One autoregressive session. All layers share the same length; it grows by
// exactly 1 per decode step.
struct KVCache {
    size_t length = 0;
    std::vector<LayerKV> layers;

    KVCache() = default;
    explicit KVCache(const ModelConfig& c) {
        size_t e = static_cast<size_t>(kv_dim(c));
        size_t max_len = static_cast<size_t>(c.max_seq_len);
        layers.assign(static_cast<size_t>(c.n_layers),
                      LayerKV{Tensor2(max_len, e), Tensor2(max_len, e)});
    }
};

// ---------------------------------------------------------------------------
// Kernels with metering hooks
// ---------------------------------------------------------------------------

// matvec against a parameter matrix; the meter (when non-null) charges one
// multiply and one add per weight scalar.
inline std::vector<float> param_matvec(std::span<const float> x, const Tensor2& w, Meter* m) {
    if (m != nullptr) m->flops_layer1 += 2ull * w.rows * w.cols;
    return matvec(x, w);
}

inline std::vector<float> apply_norm(NormKind kind, const NormParams& p,
                                     std::span<const float> x) {
    if (kind == NormKind::rmsnorm) return rmsnorm(x, p.gain, kNormEps);
    return layernorm(x, p.gain, p.bias, kNormEps);
}

inline float activation(Activation act, float x) {
    return act == Activation::silu ? silu(x) : gelu(x);
}

// Row lookup in the input-embedding table. A metered fetch reads d scalars.
inline std::vector<float> embed(const Model& m, int32_t token, Meter* meter = nullptr) {
    if (token < 0 || token >= m.config.vocab_size) {
        throw InputError("embed: token id " + std::to_string(token) + " out of range [0, " +
                         std::to_string(m.config.vocab_size) + ")");
    }
    if (meter != nullptr) meter->fetch_reads += static_cast<uint64_t>(m.config.dim);
    auto row = m.weights.input_embeddings.row(static_cast<size_t>(token));
    return {row.begin(), row.end()};
}

namespace detail {

inline void rotate_heads(std::span<float> x, int64_t n_heads, size_t position, float base) {
    size_t hd = x.size() / static_cast<size_t>(n_heads);
    for (int64_t h = 0; h < n_heads; ++h) {
        rope_rotate_inplace(x.subspan(static_cast<size_t>(h) * hd, hd), position, base);
    }
}

inline void append_kv(LayerKV& kv, size_t position, std::span<const float> k,
                      std::span<const float> v) {
    std::copy(k.begin(), k.end(), kv.keys.row(position).begin());
    std::copy(v.begin(), v.end(), kv.values.row(position).begin());
}

// Causal scaled dot-product attention for one query over cache rows
// [0, position], with grouped-query head sharing. Returns the concatenated
// head outputs (width d), before the output projection.
inline std::vector<float> attend(const ModelConfig& cfg, std::span<const float> q,
                                 const LayerKV& kv, size_t position) {
    const size_t hd = static_cast<size_t>(cfg.head_dim());
    const size_t group = static_cast<size_t>(cfg.n_heads / cfg.n_kv_heads);
    const size_t n_ctx = position + 1;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

    std::vector<float> out(static_cast<size_t>(cfg.dim));
    std::vector<float> scores(n_ctx);
    for (size_t h = 0; h < static_cast<size_t>(cfg.n_heads); ++h) {
        const size_t q_off = h * hd;
        const size_t kv_off = (h / group) * hd;
        for (size_t t = 0; t < n_ctx; ++t) {
            const float* krow = kv.keys.row(t).data() + kv_off;
            float acc = 0.0f;
            for (size_t j = 0; j < hd; ++j) acc += q[q_off + j] * krow[j];
            scores[t] = acc * scale;
        }
        softmax_row_inplace(scores);
        for (size_t j = 0; j < hd; ++j) {
            float acc = 0.0f;
            for (size_t t = 0; t < n_ctx; ++t) acc += scores[t] * kv.values.at(t, kv_off + j);
            out[q_off + j] = acc;
        }
    }
    return out;
}

// Rotate q/k (rope models), extend the cache, attend and project through wp.
inline std::vector<float> attention_core(const ModelConfig& cfg, const Tensor2& wp,
                                         std::vector<float> q, std::vector<float> k,
                                         std::vector<float> v, size_t position, LayerKV& kv,
                                         Meter* m) {
    if (cfg.pos_encoding == PosEncoding::rope) {
        rotate_heads(q, cfg.n_heads, position, cfg.rope_base);
        rotate_heads(k, cfg.n_kv_heads, position, cfg.rope_base);
    }
    append_kv(kv, position, k, v);
    std::vector<float> attn = attend(cfg, q, kv, position);
    return param_matvec(attn, wp, m);
}

}  // namespace detail

// Attention with runtime Q/K/V projection (baseline path).
inline std::vector<float> attention_block(const ModelConfig& cfg, const LayerWeights& lw,
                                          std::span<const float> normed_x, size_t position,
                                          LayerKV& kv, Meter* m = nullptr) {
    std::vector<float> q = param_matvec(normed_x, lw.wq, m);
    std::vector<float> k = param_matvec(normed_x, lw.wk, m);
    std::vector<float> v = param_matvec(normed_x, lw.wv, m);
    return detail::attention_core(cfg, lw.wp, std::move(q), std::move(k), std::move(v), position,
                                  kv, m);
}

// Attention fed from precomputed pre-rotation q/k/v rows.
inline std::vector<float> attention_block_precomputed(const ModelConfig& cfg, const Tensor2& wp,
                                                      std::span<const float> q_pre,
                                                      std::span<const float> k_pre,
                                                      std::span<const float> v_pre,
                                                      size_t position, LayerKV& kv,
                                                      Meter* m = nullptr) {
    return detail::attention_core(cfg, wp, {q_pre.begin(), q_pre.end()},
                                  {k_pre.begin(), k_pre.end()}, {v_pre.begin(), v_pre.end()},
                                  position, kv, m);
}

namespace detail {

inline std::vector<float> ffn_single(const ModelConfig& cfg, const FfnWeights& fw,
                                     std::span<const float> x, Meter* m) {
    if (cfg.ffn_kind == FfnKind::mlp2) {
        std::vector<float> h = param_matvec(x, fw.up, m);
        for (float& v : h) v = activation(cfg.activation, v);
        return param_matvec(h, fw.down, m);
    }
    std::vector<float> g = param_matvec(x, fw.gate, m);
    std::vector<float> u = param_matvec(x, fw.up, m);
    for (size_t i = 0; i < g.size(); ++i) g[i] = silu(g[i]) * u[i];
    return param_matvec(g, fw.down, m);
}

}  // namespace detail

// FFN block: plain two-layer MLP / SwiGLU, or a top-k routed mixture when
// the layer has several experts. Router scores are softmaxed over all
// experts; the selected top-k scores are renormalized to sum to 1.
inline std::vector<float> ffn_block(const ModelConfig& cfg, const LayerWeights& lw,
                                    std::span<const float> normed_x, Meter* m = nullptr) {
    const MoeFfn& ffn = lw.ffn;
    if (cfg.n_experts == 1) {
        return detail::ffn_single(cfg, ffn.experts[0], normed_x, m);
    }
    std::vector<float> scores = param_matvec(normed_x, ffn.router, m);
    std::vector<float> probs = softmax_row(scores);

    std::vector<size_t> order(probs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return probs[a] > probs[b]; });
    order.resize(static_cast<size_t>(cfg.experts_top_k));
    std::sort(order.begin(), order.end());  // accumulate experts in index order

    float selected_sum = 0.0f;
    for (size_t idx : order) selected_sum += probs[idx];

    std::vector<float> out(static_cast<size_t>(cfg.dim), 0.0f);
    for (size_t idx : order) {
        float w = probs[idx] / selected_sum;
        std::vector<float> e_out = detail::ffn_single(cfg, ffn.experts[idx], normed_x, m);
        for (size_t i = 0; i < out.size(); ++i) out[i] += w * e_out[i];
    }
    return out;
}

namespace detail {

// One full baseline transformer layer. The parallel layout feeds a single
// pre-norm into both branches and combines as (x + ffn) + attn; the
// precomputed path bakes (x + ffn) into its skip rows, so the association
// must not change.
inline std::vector<float> baseline_layer(const ModelConfig& cfg, const LayerWeights& lw,
                                         std::vector<float> x, size_t position, LayerKV& kv,
                                         Meter* m) {
    std::vector<float> n1 = apply_norm(cfg.norm_kind, lw.norm1, x);
    if (cfg.layout == Layout::parallel) {
        std::vector<float> f = ffn_block(cfg, lw, n1, m);
        std::vector<float> a = attention_block(cfg, lw, n1, position, kv, m);
        for (size_t i = 0; i < x.size(); ++i) x[i] = (x[i] + f[i]) + a[i];
        return x;
    }
    std::vector<float> a = attention_block(cfg, lw, n1, position, kv, m);
    for (size_t i = 0; i < x.size(); ++i) x[i] = x[i] + a[i];
    std::vector<float> n2 = apply_norm(cfg.norm_kind, lw.norm2, x);
    std::vector<float> f = ffn_block(cfg, lw, n2, m);
    for (size_t i = 0; i < x.size(); ++i) x[i] = x[i] + f[i];
    return x;
}

inline std::vector<float> project_logits(const ModelConfig& cfg, const NormParams& final_norm,
                                         const Tensor2& output_embeddings,
                                         std::span<const float> x) {
    std::vector<float> n = apply_norm(cfg.norm_kind, final_norm, x);
    return matvec(n, output_embeddings);
}

inline size_t next_position(const ModelConfig& cfg, const KVCache& cache) {
    if (cache.length >= static_cast<size_t>(cfg.max_seq_len)) {
        throw InputError("KV cache full: max_seq_len = " + std::to_string(cfg.max_seq_len));
    }
    return cache.length;
}

}  // namespace detail

// Single decode step: runs `token` at position cache.length and extends the
// cache by one. The meter (if any) sees the embedding fetch and the
// first layer's parameter flops.
inline std::vector<float> forward_decode(const Model& m, int32_t token, KVCache& cache,
                                         Meter* meter = nullptr) {
    const ModelConfig& cfg = m.config;
    const size_t position = detail::next_position(cfg, cache);

    std::vector<float> x = embed(m, token, meter);
    if (cfg.pos_encoding == PosEncoding::absolute) {
        std::vector<float> pe =
            sinusoidal_pe(position, static_cast<size_t>(cfg.dim), cfg.rope_base);
        for (size_t i = 0; i < x.size(); ++i) x[i] += pe[i];
    }
    for (size_t l = 0; l < m.weights.layers.size(); ++l) {
        Meter* layer_meter = (l == 0) ? meter : nullptr;
        x = detail::baseline_layer(cfg, m.weights.layers[l], std::move(x), position,
                                   cache.layers[l], layer_meter);
    }
    cache.length += 1;
    return detail::project_logits(cfg, m.weights.final_norm, m.weights.output_embeddings, x);
}

// Prompt processing: runs the tokens in order through a fresh cache and
// returns the logits for every position, row-major [seq x vocab_size].
inline Tensor2 forward_prefill(const Model& m, std::span<const int32_t> tokens, KVCache& cache,
                               Meter* meter = nullptr) {
    if (tokens.empty()) throw InputError("prefill: empty token list");
    if (tokens.size() > static_cast<size_t>(m.config.max_seq_len)) {
        throw InputError("prefill: sequence longer than max_seq_len");
    }
    if (cache.length != 0) throw InputError("prefill: cache must be empty");

    Tensor2 logits(tokens.size(), static_cast<size_t>(m.config.vocab_size));
    for (size_t i = 0; i < tokens.size(); ++i) {
        std::vector<float> row = forward_decode(m, tokens[i], cache, meter);
        std::copy(row.begin(), row.end(), logits.row(i).begin());
    }
    return logits;
}

inline int32_t greedy_argmax(std::span<const float> logits) {
    return static_cast<int32_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
}

// ---------------------------------------------------------------------------
// Weight counting (reference-model accounting: two matrices per FFN, no
// biases, no norm parameters)
// ---------------------------------------------------------------------------

struct WeightCount {
    uint64_t qp_per_layer = 0;   // 2 * dim * dim
    uint64_t kv_per_layer = 0;   // 2 * dim * dim / n_heads * n_kv_heads
    uint64_t ffn_per_layer = 0;  // 2 * dim * hidden_dim * n_experts
    uint64_t embed_total = 0;    // 2 * dim * vocab_size (untied)
    uint64_t total = 0;
};

inline WeightCount count_weights(const ModelConfig& c) {
    const uint64_t d = static_cast<uint64_t>(c.dim);
    const uint64_t e = static_cast<uint64_t>(kv_dim(c));
    WeightCount w;
    w.qp_per_layer = 2 * d * d;
    w.kv_per_layer = 2 * d * e;
    w.ffn_per_layer = 2 * d * static_cast<uint64_t>(c.hidden_dim) *
                      static_cast<uint64_t>(c.n_experts);
    w.embed_total = 2 * d * static_cast<uint64_t>(c.vocab_size);
    w.total = w.embed_total + static_cast<uint64_t>(c.n_layers) *
                                  (w.qp_per_layer + w.kv_per_layer + w.ffn_per_layer);
    return w;
}

// ---------------------------------------------------------------------------
// Seeded toy models
// ---------------------------------------------------------------------------

namespace detail {

inline void fill_uniform(Tensor2& t, SplitMix64& rng) {
    for (float& v : t.data) v = rng.next_uniform(-0.05f, 0.05f);
}

inline NormParams identity_norm(const ModelConfig& c, size_t width) {
    NormParams p;
    p.gain.assign(width, 1.0f);
    if (c.norm_kind == NormKind::layernorm) p.bias.assign(width, 0.0f);
    return p;
}

}  // namespace detail

// Deterministic toy weights: matrices and embeddings are uniform in
// [-0.05, 0.05] from one splitmix64 stream (fill order: input embeddings,
// then per layer wq/wk/wv/wp/router/experts, then output embeddings);
// norm gains start at 1 and biases at 0.
inline Model make_toy_model(const ModelConfig& cfg, uint64_t seed) {
    validate(cfg);
    const size_t d = static_cast<size_t>(cfg.dim);
    const size_t e = static_cast<size_t>(kv_dim(cfg));
    const size_t hidden = static_cast<size_t>(cfg.hidden_dim);

    SplitMix64 rng(seed);
    Model m;
    m.config = cfg;
    m.weights.input_embeddings = Tensor2(static_cast<size_t>(cfg.vocab_size), d);
    detail::fill_uniform(m.weights.input_embeddings, rng);

    m.weights.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (LayerWeights& lw : m.weights.layers) {
        lw.norm1 = detail::identity_norm(cfg, d);
        lw.wq = Tensor2(d, d);
        lw.wk = Tensor2(d, e);
        lw.wv = Tensor2(d, e);
        lw.wp = Tensor2(d, d);
        detail::fill_uniform(lw.wq, rng);
        detail::fill_uniform(lw.wk, rng);
        detail::fill_uniform(lw.wv, rng);
        detail::fill_uniform(lw.wp, rng);
        if (cfg.layout == Layout::serial) lw.norm2 = detail::identity_norm(cfg, d);
        if (cfg.n_experts > 1) {
            lw.ffn.router = Tensor2(d, static_cast<size_t>(cfg.n_experts));
            detail::fill_uniform(lw.ffn.router, rng);
        }
        lw.ffn.experts.resize(static_cast<size_t>(cfg.n_experts));
        for (FfnWeights& fw : lw.ffn.experts) {
            fw.up = Tensor2(d, hidden);
            fw.down = Tensor2(hidden, d);
            detail::fill_uniform(fw.up, rng);
            detail::fill_uniform(fw.down, rng);
            if (cfg.ffn_kind == FfnKind::swiglu) {
                fw.gate = Tensor2(d, hidden);
                detail::fill_uniform(fw.gate, rng);
            }
        }
    }
    m.weights.final_norm = detail::identity_norm(cfg, d);
    m.weights.output_embeddings = Tensor2(d, static_cast<size_t>(cfg.vocab_size));
    detail::fill_uniform(m.weights.output_embeddings, rng);
    return m;
}

}  // namespace l1pc

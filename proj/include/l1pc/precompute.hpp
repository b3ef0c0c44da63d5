#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "l1pc/analyzer.hpp"
#include "l1pc/errors.hpp"
#include "l1pc/meter.hpp"
#include "l1pc/model.hpp"
#include "l1pc/rng.hpp"

namespace l1pc {

// ---------------------------------------------------------------------------
// Precompute table
// ---------------------------------------------------------------------------

// Per-vocabulary-token first-layer rows, replacing the input embeddings.
// Row layout: [q_pre(d) | k_pre(e) | v_pre(e) | skip_pre(d)], width 2(d+e).
// q_pre/k_pre are PRE-rotation; rope is applied at runtime with the actual
// position. skip_pre is the raw embedding (serial layout) or
// embedding + FFN(norm1(embedding)) (parallel layout).
struct PrecomputeTable {
    int64_t vocab_size = 0;
    int64_t dim = 0;
    int64_t e_dim = 0;
    std::vector<float> data;  // row-major [vocab_size x 2(d+e)]

    size_t row_width() const { return 2 * static_cast<size_t>(dim + e_dim); }

    std::span<const float> row(int32_t token) const {
        return {data.data() + static_cast<size_t>(token) * row_width(), row_width()};
    }
    std::span<float> row(int32_t token) {
        return {data.data() + static_cast<size_t>(token) * row_width(), row_width()};
    }

    std::span<const float> q_pre(int32_t t) const { return row(t).subspan(0, dim); }
    std::span<const float> k_pre(int32_t t) const { return row(t).subspan(dim, e_dim); }
    std::span<const float> v_pre(int32_t t) const { return row(t).subspan(dim + e_dim, e_dim); }
    std::span<const float> skip_pre(int32_t t) const {
        return row(t).subspan(dim + 2 * e_dim, dim);
    }
};

// A model whose first layer runs from the table: the input embeddings,
// layer-1 Q/K/V, its pre-attention norm and (parallel layout) its FFN and
// router are gone. Layer-1 W_P stays, as do the serial layout's
// post-attention norm and FFN.
struct TransformedModel {
    ModelConfig config;  // precomputed = true
    PrecomputeTable table;
    std::vector<LayerWeights> layers;  // layer 0 holds only the retained pieces
    NormParams final_norm;
    Tensor2 output_embeddings;
};

inline void require_precompute_eligible(const ModelConfig& cfg) {
    if (cfg.pos_encoding != PosEncoding::rope) {
        throw IneligibleArchitecture(
            "absolute positional encoding sits between the embedding and the first "
            "layer, so the first layer depends on position and cannot be precomputed; "
            "only rope models are eligible");
    }
}

// ---------------------------------------------------------------------------
// Offline table construction
// ---------------------------------------------------------------------------

// For every vocabulary token: x = embed(t), n = norm1(x), then
// q_pre = n*W_Q, k_pre = n*W_K, v_pre = n*W_V, and the layout's skip row.
// Uses the same kernels as the runtime path, so rows match the baseline
// engine's first-layer intermediates bit for bit.
inline PrecomputeTable build_table(const Model& m) {
    require_precompute_eligible(m.config);
    validate(m.config);

    const ModelConfig& cfg = m.config;
    const LayerWeights& l0 = m.weights.layers[0];
    PrecomputeTable table;
    table.vocab_size = cfg.vocab_size;
    table.dim = cfg.dim;
    table.e_dim = kv_dim(cfg);
    table.data.resize(static_cast<size_t>(cfg.vocab_size) * table.row_width());

    for (int32_t t = 0; t < cfg.vocab_size; ++t) {
        std::vector<float> x = embed(m, t);
        std::vector<float> n1 = apply_norm(cfg.norm_kind, l0.norm1, x);
        std::vector<float> q = matvec(n1, l0.wq);
        std::vector<float> k = matvec(n1, l0.wk);
        std::vector<float> v = matvec(n1, l0.wv);

        std::span<float> row = table.row(t);
        std::copy(q.begin(), q.end(), row.begin());
        std::copy(k.begin(), k.end(), row.begin() + cfg.dim);
        std::copy(v.begin(), v.end(), row.begin() + cfg.dim + table.e_dim);
        std::span<float> skip = row.subspan(cfg.dim + 2 * table.e_dim, cfg.dim);
        if (cfg.layout == Layout::parallel) {
            std::vector<float> f = ffn_block(cfg, l0, n1);
            for (size_t i = 0; i < skip.size(); ++i) skip[i] = x[i] + f[i];
        } else {
            std::copy(x.begin(), x.end(), skip.begin());
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Model transformation
// ---------------------------------------------------------------------------

struct EliminationCounts {
    // Q + K + V (+ FFN matrices for parallel layouts), by the two-matrix
    // FFN accounting used everywhere in the cost model
    uint64_t by_formula = 0;
    // every scalar actually deleted: adds the folded norm parameters and,
    // for parallel layouts, the router and any gate matrices
    uint64_t actual = 0;
};

inline EliminationCounts elimination_counts(const ModelConfig& cfg) {
    require_precompute_eligible(cfg);
    const uint64_t d = static_cast<uint64_t>(cfg.dim);
    const uint64_t e = static_cast<uint64_t>(kv_dim(cfg));
    const uint64_t h = static_cast<uint64_t>(cfg.hidden_dim);
    const uint64_t n_exp = static_cast<uint64_t>(cfg.n_experts);

    EliminationCounts c;
    c.by_formula = eliminated_weights(cfg);

    c.actual = d * d + 2 * d * e;                             // wq, wk, wv
    c.actual += (cfg.norm_kind == NormKind::layernorm ? 2 : 1) * d;  // folded norm1
    if (cfg.layout == Layout::parallel) {
        const uint64_t mats = (cfg.ffn_kind == FfnKind::swiglu ? 3 : 2);
        c.actual += mats * d * h * n_exp;
        if (cfg.n_experts > 1) c.actual += d * n_exp;  // router
    }
    return c;
}

// Builds the table and drops the replaced weights. Offline, done once.
inline TransformedModel transform_model(const Model& m) {
    if (m.config.precomputed) {
        throw ConfigError("transform: model is already precomputed");
    }
    require_precompute_eligible(m.config);

    TransformedModel tm;
    tm.config = m.config;
    tm.config.precomputed = true;
    tm.table = build_table(m);
    tm.layers = m.weights.layers;
    tm.final_norm = m.weights.final_norm;
    tm.output_embeddings = m.weights.output_embeddings;

    LayerWeights& l0 = tm.layers[0];
    l0.norm1 = NormParams{};
    l0.wq = Tensor2{};
    l0.wk = Tensor2{};
    l0.wv = Tensor2{};
    if (m.config.layout == Layout::parallel) {
        l0.ffn = MoeFfn{};
    }
    return tm;
}

// ---------------------------------------------------------------------------
// Fast forward path
// ---------------------------------------------------------------------------

// Decode step where layer 1 fetches the token's table row instead of
// computing norm1/Q/K/V (and, in parallel layout, the FFN). Layers >= 2 and
// the head run unchanged.
inline std::vector<float> forward_decode(const TransformedModel& tm, int32_t token,
                                         KVCache& cache, Meter* meter = nullptr) {
    const ModelConfig& cfg = tm.config;
    if (token < 0 || token >= cfg.vocab_size) {
        throw InputError("decode: token id " + std::to_string(token) + " out of range [0, " +
                         std::to_string(cfg.vocab_size) + ")");
    }
    const size_t position = detail::next_position(cfg, cache);
    if (meter != nullptr) meter->fetch_reads += tm.table.row_width();

    std::span<const float> skip = tm.table.skip_pre(token);
    std::vector<float> a = attention_block_precomputed(
        cfg, tm.layers[0].wp, tm.table.q_pre(token), tm.table.k_pre(token),
        tm.table.v_pre(token), position, cache.layers[0], meter);

    std::vector<float> x(static_cast<size_t>(cfg.dim));
    for (size_t i = 0; i < x.size(); ++i) x[i] = skip[i] + a[i];
    if (cfg.layout == Layout::serial) {
        std::vector<float> n2 = apply_norm(cfg.norm_kind, tm.layers[0].norm2, x);
        std::vector<float> f = ffn_block(cfg, tm.layers[0], n2, meter);
        for (size_t i = 0; i < x.size(); ++i) x[i] = x[i] + f[i];
    }
    for (size_t l = 1; l < tm.layers.size(); ++l) {
        x = detail::baseline_layer(cfg, tm.layers[l], std::move(x), position, cache.layers[l],
                                   nullptr);
    }
    cache.length += 1;
    return detail::project_logits(cfg, tm.final_norm, tm.output_embeddings, x);
}

inline Tensor2 forward_prefill(const TransformedModel& tm, std::span<const int32_t> tokens,
                               KVCache& cache, Meter* meter = nullptr) {
    if (tokens.empty()) throw InputError("prefill: empty token list");
    if (tokens.size() > static_cast<size_t>(tm.config.max_seq_len)) {
        throw InputError("prefill: sequence longer than max_seq_len");
    }
    if (cache.length != 0) throw InputError("prefill: cache must be empty");

    Tensor2 logits(tokens.size(), static_cast<size_t>(tm.config.vocab_size));
    for (size_t i = 0; i < tokens.size(); ++i) {
        std::vector<float> row = forward_decode(tm, tokens[i], cache, meter);
        std::copy(row.begin(), row.end(), logits.row(i).begin());
    }
    return logits;
}

// ---------------------------------------------------------------------------
// Equivalence verifier
// ---------------------------------------------------------------------------

struct EquivalenceReport {
    float max_abs_diff = 0.0f;
    float max_rel_diff = 0.0f;      // |delta| / (1 + |baseline|), per element
    float max_abs_baseline = 0.0f;
    uint64_t values_compared = 0;
    bool pass = false;
};

namespace detail {

inline void compare_logits(const Tensor2& base, const Tensor2& fast, EquivalenceReport& r) {
    for (size_t i = 0; i < base.data.size(); ++i) {
        float b = base.data[i];
        float d = std::abs(b - fast.data[i]);
        r.max_abs_diff = std::max(r.max_abs_diff, d);
        r.max_abs_baseline = std::max(r.max_abs_baseline, std::abs(b));
        r.max_rel_diff = std::max(r.max_rel_diff, d / (1.0f + std::abs(b)));
    }
    r.values_compared += base.data.size();
}

}  // namespace detail

// Runs both paths over seeded random prompts (lengths in [1, seq_len]),
// prefill and step-by-step decode, and compares every logit.
// Passes iff max |delta| <= tol * (1 + max |baseline|).
inline EquivalenceReport verify_equivalence(const Model& m, const TransformedModel& tm,
                                            int n_prompts, int seq_len, uint64_t seed,
                                            float tol) {
    if (m.config.vocab_size != tm.config.vocab_size || m.config.dim != tm.config.dim) {
        throw ConfigError("verify: baseline and transformed configs do not match");
    }
    if (n_prompts < 1 || seq_len < 1 || seq_len > m.config.max_seq_len) {
        throw InputError("verify: need at least one prompt and 1 <= seq_len <= max_seq_len");
    }
    if (!(tol > 0.0f)) throw InputError("verify: tolerance must be positive");
    SplitMix64 rng(seed);
    EquivalenceReport report;
    for (int p = 0; p < n_prompts; ++p) {
        size_t len = 1 + static_cast<size_t>(rng.next_below(static_cast<uint64_t>(seq_len)));
        std::vector<int32_t> tokens(len);
        for (int32_t& t : tokens) {
            t = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(m.config.vocab_size)));
        }

        KVCache base_cache(m.config), fast_cache(tm.config);
        Tensor2 base = forward_prefill(m, tokens, base_cache);
        Tensor2 fast = forward_prefill(tm, tokens, fast_cache);
        detail::compare_logits(base, fast, report);

        KVCache base_dec(m.config), fast_dec(tm.config);
        for (int32_t t : tokens) {
            std::vector<float> lb = forward_decode(m, t, base_dec);
            std::vector<float> lf = forward_decode(tm, t, fast_dec);
            Tensor2 rb(1, lb.size()), rf(1, lf.size());
            rb.data = std::move(lb);
            rf.data = std::move(lf);
            detail::compare_logits(rb, rf, report);
        }
    }
    report.pass = report.max_abs_diff <= tol * (1.0f + report.max_abs_baseline);
    return report;
}

}  // namespace l1pc

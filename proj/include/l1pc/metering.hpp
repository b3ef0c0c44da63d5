#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <vector>

#include "l1pc/analyzer.hpp"
#include "l1pc/meter.hpp"
#include "l1pc/model.hpp"
#include "l1pc/precompute.hpp"
#include "l1pc/rng.hpp"

namespace l1pc {

struct MeterReport {
    uint64_t fetch_scalar_reads = 0;        // embedding (B*d) or table (B*2(d+e)) reads
    uint64_t region_weight_reads = 0;       // one pass over the replaceable weights per batch
    uint64_t flops_layer1 = 0;              // first-layer parameter flops, metered steps only
    uint64_t warmup_ns = 0;                 // context-building decode steps
    uint64_t metered_ns = 0;                // the B metered decode steps
};

namespace detail {

inline uint64_t now_ns() {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                     std::chrono::steady_clock::now().time_since_epoch())
                                     .count());
}

inline void touch_tensor(const Tensor2& t, Meter& meter, float& sink) {
    for (float v : t.data) sink += v;
    meter.region_weight_reads += t.size();
}

}  // namespace detail

// One pass over the weights the precompute would delete, counting each
// scalar fetched. Matches the two-matrix FFN accounting: per expert only
// up and down are walked; gate and router stay out of the count.
inline void traverse_eliminated_region(const Model& m, Meter& meter) {
    const LayerWeights& l0 = m.weights.layers[0];
    float sink = 0.0f;
    detail::touch_tensor(l0.wq, meter, sink);
    detail::touch_tensor(l0.wk, meter, sink);
    detail::touch_tensor(l0.wv, meter, sink);
    if (m.config.layout == Layout::parallel) {
        for (const FfnWeights& fw : l0.ffn.experts) {
            detail::touch_tensor(fw.up, meter, sink);
            detail::touch_tensor(fw.down, meter, sink);
        }
    }
    volatile float keep = sink;
    (void)keep;
}

namespace detail {

// B independent sequences: each prefills seq_len-1 seeded tokens unmetered,
// then runs one metered decode step. `traverse` models the batch's single
// pass over the weight region (weights amortize across a batch).
template <typename Engine>
MeterReport run_metered(const Engine& engine, const ModelConfig& cfg, uint64_t batch,
                        int64_t seq_len, uint64_t seed, const Model* region_source) {
    if (seq_len < 1 || seq_len > cfg.max_seq_len) {
        throw InputError("metered_forward: seq_len must be in [1, max_seq_len]");
    }
    Meter meter;
    MeterReport report;
    if (region_source != nullptr) {
        traverse_eliminated_region(*region_source, meter);
    }
    SplitMix64 rng(seed);
    for (uint64_t b = 0; b < batch; ++b) {
        KVCache cache(cfg);
        std::vector<int32_t> tokens(static_cast<size_t>(seq_len));
        for (int32_t& t : tokens) {
            t = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(cfg.vocab_size)));
        }
        uint64_t t0 = now_ns();
        for (size_t i = 0; i + 1 < tokens.size(); ++i) {
            forward_decode(engine, tokens[i], cache, nullptr);
        }
        uint64_t t1 = now_ns();
        forward_decode(engine, tokens.back(), cache, &meter);
        uint64_t t2 = now_ns();
        report.warmup_ns += t1 - t0;
        report.metered_ns += t2 - t1;
    }
    report.fetch_scalar_reads = meter.fetch_reads;
    report.region_weight_reads = meter.region_weight_reads;
    report.flops_layer1 = meter.flops_layer1;
    return report;
}

}  // namespace detail

inline MeterReport metered_forward(const Model& m, uint64_t batch, int64_t seq_len,
                                   uint64_t seed) {
    return detail::run_metered(m, m.config, batch, seq_len, seed, &m);
}

inline MeterReport metered_forward(const TransformedModel& tm, uint64_t batch, int64_t seq_len,
                                   uint64_t seed) {
    return detail::run_metered(tm, tm.config, batch, seq_len, seed, nullptr);
}

// ---------------------------------------------------------------------------
// Wall-clock micro-benchmark (informational; desk-scale timing is noisy)
// ---------------------------------------------------------------------------

struct BenchResult {
    int steps = 0;
    double baseline_step_ns_median = 0.0;
    double precomputed_step_ns_median = 0.0;
    MeterReport baseline_meter;
    MeterReport precomputed_meter;
};

namespace detail {

template <typename Engine>
double median_step_ns(const Engine& engine, const ModelConfig& cfg, int steps, uint64_t seed) {
    SplitMix64 rng(seed);
    KVCache cache(cfg);
    std::vector<double> samples;
    samples.reserve(static_cast<size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        int32_t t = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(cfg.vocab_size)));
        uint64_t t0 = now_ns();
        forward_decode(engine, t, cache, nullptr);
        samples.push_back(static_cast<double>(now_ns() - t0));
    }
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
}

}  // namespace detail

inline BenchResult bench(const Model& m, const TransformedModel& tm, int steps, uint64_t batch,
                         uint64_t seed) {
    if (steps < 1 || steps > m.config.max_seq_len) {
        throw InputError("bench: steps must be in [1, max_seq_len]");
    }
    BenchResult r;
    r.steps = steps;
    r.baseline_step_ns_median = detail::median_step_ns(m, m.config, steps, seed);
    r.precomputed_step_ns_median = detail::median_step_ns(tm, tm.config, steps, seed);
    r.baseline_meter = metered_forward(m, batch, 1, seed);
    r.precomputed_meter = metered_forward(tm, batch, 1, seed);
    return r;
}

}  // namespace l1pc

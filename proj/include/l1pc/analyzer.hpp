#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "l1pc/config.hpp"
#include "l1pc/errors.hpp"
#include "l1pc/model.hpp"

namespace l1pc {

// Analytical read/size model for the first-layer precompute. Pure functions
// of the config; no weights involved. All counts are scalar parameter reads,
// following the reference accounting: an FFN is two matrices regardless of
// ffn_kind, biases and norm parameters are ignored, and a batch reads the
// weight region once.

// round-to-nearest integer, ties away from zero; den > 0
inline uint64_t round_ratio(uint64_t num, uint64_t den) {
    return (2 * num + den) / (2 * den);
}

inline int64_t round_ratio_signed(int64_t num, int64_t den) {
    const bool negative = (num < 0) != (den < 0);
    const uint64_t n = static_cast<uint64_t>(num < 0 ? -num : num);
    const uint64_t d = static_cast<uint64_t>(den < 0 ? -den : den);
    const uint64_t r = round_ratio(n, d);
    return negative ? -static_cast<int64_t>(r) : static_cast<int64_t>(r);
}

struct Fraction {
    uint64_t num = 0;
    uint64_t den = 1;

    Fraction reduced() const {
        uint64_t g = std::gcd(num, den);
        return {num / g, den / g};
    }
};

// Layer-1 weights removable by the precompute: Q, K+V, and for parallel
// layouts the FFN of every expert.
inline uint64_t eliminated_weights(const ModelConfig& c) {
    if (c.pos_encoding != PosEncoding::rope) {
        throw IneligibleArchitecture(
            "cost model: no precompute applies to absolute-PE models");
    }
    const uint64_t d = static_cast<uint64_t>(c.dim);
    const uint64_t e = static_cast<uint64_t>(kv_dim(c));
    uint64_t n = d * d + 2 * d * e;
    if (c.layout == Layout::parallel) {
        n += 2 * d * static_cast<uint64_t>(c.hidden_dim) * static_cast<uint64_t>(c.n_experts);
    }
    return n;
}

struct ReadCounts {
    uint64_t without_precompute = 0;  // B*d embedding reads + one weight pass
    uint64_t with_precompute = 0;     // B*2(d+e) table reads
};

inline ReadCounts reads(const ModelConfig& c, uint64_t batch) {
    const uint64_t d = static_cast<uint64_t>(c.dim);
    const uint64_t e = static_cast<uint64_t>(kv_dim(c));
    ReadCounts r;
    r.without_precompute = batch * d + eliminated_weights(c);
    r.with_precompute = batch * 2 * (d + e);
    return r;
}

struct ReductionFactor {
    Fraction exact;
    uint64_t rounded = 0;
};

inline ReductionFactor reduction_factor(const ModelConfig& c, uint64_t batch) {
    ReadCounts r = reads(c, batch);
    ReductionFactor f;
    f.exact = Fraction{r.without_precompute, r.with_precompute}.reduced();
    f.rounded = round_ratio(r.without_precompute, r.with_precompute);
    return f;
}

struct MemoryDelta {
    uint64_t embed_increase = 0;  // (d + 2e) * vocab_size
    int64_t abs_delta = 0;        // embed_increase - eliminated_weights
    int64_t rel_delta_pct = 0;    // vs total weights, nearest percent
};

inline MemoryDelta memory_delta(const ModelConfig& c) {
    const int64_t d = c.dim;
    const int64_t e = kv_dim(c);
    MemoryDelta m;
    m.embed_increase = static_cast<uint64_t>(d + 2 * e) * static_cast<uint64_t>(c.vocab_size);
    m.abs_delta = static_cast<int64_t>(m.embed_increase) -
                  static_cast<int64_t>(eliminated_weights(c));
    m.rel_delta_pct =
        round_ratio_signed(100 * m.abs_delta, static_cast<int64_t>(count_weights(c).total));
    return m;
}

// ---------------------------------------------------------------------------
// Built-in presets
// ---------------------------------------------------------------------------

inline std::vector<ModelConfig> builtin_presets() {
    ModelConfig pythia;
    pythia.name = "pythia-6.9b";
    pythia.dim = 4096;
    pythia.n_layers = 32;
    pythia.n_heads = 32;
    pythia.n_kv_heads = 32;
    pythia.hidden_dim = 16384;
    pythia.n_experts = 1;
    pythia.experts_top_k = 1;
    pythia.vocab_size = 50400;
    pythia.max_seq_len = 2048;
    pythia.layout = Layout::parallel;
    pythia.pos_encoding = PosEncoding::rope;
    pythia.norm_kind = NormKind::layernorm;
    pythia.ffn_kind = FfnKind::mlp2;
    pythia.activation = Activation::gelu;

    ModelConfig mistral;
    mistral.name = "mistral-7b";
    mistral.dim = 4096;
    mistral.n_layers = 32;
    mistral.n_heads = 32;
    mistral.n_kv_heads = 8;
    mistral.hidden_dim = 14336;
    mistral.n_experts = 1;
    mistral.experts_top_k = 1;
    mistral.vocab_size = 32000;
    mistral.max_seq_len = 8192;
    mistral.layout = Layout::serial;
    mistral.pos_encoding = PosEncoding::rope;
    mistral.norm_kind = NormKind::rmsnorm;
    mistral.ffn_kind = FfnKind::swiglu;
    mistral.activation = Activation::silu;

    ModelConfig mixtral = mistral;
    mixtral.name = "mixtral-8x7b";
    mixtral.n_experts = 8;
    mixtral.experts_top_k = 2;
    mixtral.max_seq_len = 32768;

    ModelConfig mixtral_parallel = mixtral;
    mixtral_parallel.name = "mixtral-8x7b-parallel";
    mixtral_parallel.layout = Layout::parallel;

    return {pythia, mistral, mixtral, mixtral_parallel};
}

inline ModelConfig preset_by_name(const std::string& name) {
    for (const ModelConfig& c : builtin_presets()) {
        if (c.name == name) return c;
    }
    throw ConfigError("unknown preset '" + name + "' (use pythia-6.9b, mistral-7b, "
                      "mixtral-8x7b or mixtral-8x7b-parallel)");
}

// ---------------------------------------------------------------------------
// Cost report + rendering
// ---------------------------------------------------------------------------

struct BatchCost {
    uint64_t batch = 0;
    uint64_t reads_without = 0;
    uint64_t reads_with = 0;
    Fraction factor_exact;
    uint64_t factor_rounded = 0;
};

struct CostReport {
    std::string config_name;
    int64_t dim = 0;
    int64_t e = 0;
    uint64_t eliminated_weights = 0;
    uint64_t total_weights = 0;
    uint64_t embed_mem_increase = 0;
    int64_t mem_delta_abs = 0;
    int64_t mem_delta_rel_pct = 0;
    std::vector<BatchCost> batches;
};

inline CostReport cost_report(const ModelConfig& c, std::span<const uint64_t> batch_sizes) {
    validate(c);
    CostReport rep;
    rep.config_name = c.name.empty() ? "(unnamed)" : c.name;
    rep.dim = c.dim;
    rep.e = kv_dim(c);
    rep.eliminated_weights = eliminated_weights(c);
    rep.total_weights = count_weights(c).total;
    MemoryDelta md = memory_delta(c);
    rep.embed_mem_increase = md.embed_increase;
    rep.mem_delta_abs = md.abs_delta;
    rep.mem_delta_rel_pct = md.rel_delta_pct;
    for (uint64_t b : batch_sizes) {
        ReadCounts rc = reads(c, b);
        ReductionFactor f = reduction_factor(c, b);
        rep.batches.push_back({b, rc.without_precompute, rc.with_precompute, f.exact,
                               f.rounded});
    }
    return rep;
}

// 1234567 -> "1,234,567"
inline std::string format_thousands(uint64_t v) {
    std::string s = std::to_string(v);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) {
        s.insert(static_cast<size_t>(i), ",");
    }
    return s;
}

inline std::string format_thousands_signed(int64_t v) {
    std::string s = format_thousands(static_cast<uint64_t>(v < 0 ? -v : v));
    return (v < 0 ? "-" : "+") + s;
}

inline std::string render_text(const CostReport& r) {
    auto pad = [](const std::string& s, size_t width) {
        return s + std::string(s.size() < width ? width - s.size() : 1, ' ');
    };
    std::ostringstream os;
    os << "config                     " << r.config_name << "\n";
    os << "d                          " << format_thousands(static_cast<uint64_t>(r.dim))
       << "\n";
    os << "e                          " << format_thousands(static_cast<uint64_t>(r.e)) << "\n";
    os << "total weights              " << format_thousands(r.total_weights) << "\n";
    os << "eliminated weights         " << format_thousands(r.eliminated_weights) << "\n";
    os << "embedding memory increase  " << format_thousands(r.embed_mem_increase) << "\n";
    os << "total memory delta         " << format_thousands_signed(r.mem_delta_abs) << " ("
       << (r.mem_delta_rel_pct >= 0 ? "+" : "") << r.mem_delta_rel_pct << "%)\n";
    os << "\n";
    os << "batch      reads w/o precompute    reads w/ precompute    reduction\n";
    for (const BatchCost& b : r.batches) {
        os << pad(format_thousands(b.batch), 11);
        os << pad(format_thousands(b.reads_without), 25);
        os << pad(format_thousands(b.reads_with), 23);
        os << format_thousands(b.factor_rounded) << "x\n";
    }
    return os.str();
}

inline std::string render_csv(const CostReport& r) {
    std::ostringstream os;
    os << "config,batch,reads_without,reads_with,factor_exact_num,factor_exact_den,"
          "factor_rounded\n";
    for (const BatchCost& b : r.batches) {
        os << r.config_name << "," << b.batch << "," << b.reads_without << "," << b.reads_with
           << "," << b.factor_exact.num << "," << b.factor_exact.den << "," << b.factor_rounded
           << "\n";
    }
    return os.str();
}

inline nlohmann::json report_to_json(const CostReport& r) {
    nlohmann::json j;
    j["config_name"] = r.config_name;
    j["dim"] = r.dim;
    j["e"] = r.e;
    j["eliminated_weights"] = r.eliminated_weights;
    j["total_weights"] = r.total_weights;
    j["embed_mem_increase"] = r.embed_mem_increase;
    j["mem_delta_abs"] = r.mem_delta_abs;
    j["mem_delta_rel_pct"] = r.mem_delta_rel_pct;
    j["batches"] = nlohmann::json::array();
    for (const BatchCost& b : r.batches) {
        j["batches"].push_back({{"batch", b.batch},
                                {"reads_without", b.reads_without},
                                {"reads_with", b.reads_with},
                                {"factor_exact_num", b.factor_exact.num},
                                {"factor_exact_den", b.factor_exact.den},
                                {"factor_rounded", b.factor_rounded}});
    }
    return j;
}

inline std::string render_json(const CostReport& r) { return report_to_json(r).dump(2) + "\n"; }

}  // namespace l1pc

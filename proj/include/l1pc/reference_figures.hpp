#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "l1pc/analyzer.hpp"
#include "l1pc/model.hpp"

namespace l1pc {

// Expected analyzer outputs for the built-in presets. This table is the
// single source of truth for `analyze --paper-check` and for the acceptance
// suite; every cell must be reproduced exactly (integers; percents to the
// nearest point).

struct ReferenceCost {
    uint64_t eliminated = 0;
    uint64_t reads_without_b1 = 0;
    uint64_t reads_with_b1 = 0;
    // reduction factors at batch sizes 1, 16, 256, 1024
    std::array<uint64_t, 4> factors{};
    uint64_t embed_increase = 0;
    int64_t mem_delta_abs = 0;
    int64_t mem_delta_rel_pct = 0;
};

struct ReferenceFigures {
    std::string preset;
    uint64_t qp_per_layer = 0;
    uint64_t kv_per_layer = 0;
    uint64_t ffn_per_layer = 0;
    uint64_t embed_total = 0;
    uint64_t total_weights = 0;
    // cost figures are published for pythia-6.9b, mistral-7b and the
    // hypothetical parallel mixtral only
    std::optional<ReferenceCost> cost;
};

inline constexpr std::array<uint64_t, 4> kReferenceBatches{1, 16, 256, 1024};

inline std::vector<ReferenceFigures> reference_figures() {
    std::vector<ReferenceFigures> figs;

    figs.push_back({"pythia-6.9b", 33'554'432, 33'554'432, 134'217'728, 412'876'800,
                    6'855'327'744,
                    ReferenceCost{184'549'376,
                                  184'553'472,
                                  16'384,
                                  {11'264, 704, 44, 11},
                                  619'315'200,
                                  434'765'824,
                                  6}});
    figs.push_back({"mistral-7b", 33'554'432, 8'388'608, 117'440'512, 262'144'000,
                    5'362'417'664,
                    ReferenceCost{25'165'824,
                                  25'169'920,
                                  10'240,
                                  {2'458, 154, 10, 3},
                                  196'608'000,
                                  171'442'176,
                                  3}});
    figs.push_back({"mixtral-8x7b", 33'554'432, 8'388'608, 939'524'096, 262'144'000,
                    31'669'092'352, std::nullopt});
    figs.push_back({"mixtral-8x7b-parallel", 33'554'432, 8'388'608, 939'524'096, 262'144'000,
                    31'669'092'352,
                    ReferenceCost{964'689'920,
                                  964'694'016,
                                  10'240,
                                  {94'208, 5'888, 368, 92},
                                  196'608'000,
                                  -768'081'920,
                                  -2}});
    return figs;
}

// Recomputes every reference cell from the preset's config and returns a
// description of each mismatch; empty means everything reproduced exactly.
inline std::vector<std::string> check_reference_figures(const std::string& preset_name) {
    const ModelConfig cfg = preset_by_name(preset_name);
    std::vector<std::string> mismatches;
    auto expect = [&](const std::string& what, auto got, auto want) {
        if (static_cast<int64_t>(got) != static_cast<int64_t>(want)) {
            mismatches.push_back(preset_name + ": " + what + " = " + std::to_string(got) +
                                 ", expected " + std::to_string(want));
        }
    };

    for (const ReferenceFigures& fig : reference_figures()) {
        if (fig.preset != preset_name) continue;
        WeightCount wc = count_weights(cfg);
        expect("qp_per_layer", wc.qp_per_layer, fig.qp_per_layer);
        expect("kv_per_layer", wc.kv_per_layer, fig.kv_per_layer);
        expect("ffn_per_layer", wc.ffn_per_layer, fig.ffn_per_layer);
        expect("embed_total", wc.embed_total, fig.embed_total);
        expect("total_weights", wc.total, fig.total_weights);
        if (fig.cost.has_value()) {
            const ReferenceCost& rc = *fig.cost;
            expect("eliminated_weights", eliminated_weights(cfg), rc.eliminated);
            ReadCounts r1 = reads(cfg, 1);
            expect("reads_without(B=1)", r1.without_precompute, rc.reads_without_b1);
            expect("reads_with(B=1)", r1.with_precompute, rc.reads_with_b1);
            for (size_t i = 0; i < kReferenceBatches.size(); ++i) {
                expect("reduction_factor(B=" + std::to_string(kReferenceBatches[i]) + ")",
                       reduction_factor(cfg, kReferenceBatches[i]).rounded, rc.factors[i]);
            }
            MemoryDelta md = memory_delta(cfg);
            expect("embed_mem_increase", md.embed_increase, rc.embed_increase);
            expect("mem_delta_abs", md.abs_delta, rc.mem_delta_abs);
            expect("mem_delta_rel_pct", md.rel_delta_pct, rc.mem_delta_rel_pct);
        }
        return mismatches;
    }
    mismatches.push_back("no reference figures for preset '" + preset_name + "'");
    return mismatches;
}

}  // namespace l1pc

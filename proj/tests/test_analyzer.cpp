#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include <json.hpp>

#include "l1pc/analyzer.hpp"
#include "l1pc/reference_figures.hpp"

using namespace l1pc;

TEST_CASE("presets: four configurations with the published parameters", "[analyzer]") {
    std::vector<ModelConfig> presets = builtin_presets();
    REQUIRE(presets.size() == 4);

    ModelConfig pythia = preset_by_name("pythia-6.9b");
    REQUIRE(pythia.dim == 4096);
    REQUIRE(pythia.n_layers == 32);
    REQUIRE(pythia.n_heads == 32);
    REQUIRE(pythia.n_kv_heads == 32);
    REQUIRE(pythia.hidden_dim == 16384);
    REQUIRE(pythia.n_experts == 1);
    REQUIRE(pythia.vocab_size == 50400);
    REQUIRE(pythia.layout == Layout::parallel);
    REQUIRE(kv_dim(pythia) == 4096);

    ModelConfig mistral = preset_by_name("mistral-7b");
    REQUIRE(mistral.n_kv_heads == 8);
    REQUIRE(mistral.hidden_dim == 14336);
    REQUIRE(mistral.vocab_size == 32000);
    REQUIRE(mistral.layout == Layout::serial);
    REQUIRE(kv_dim(mistral) == 1024);

    ModelConfig mixtral = preset_by_name("mixtral-8x7b");
    REQUIRE(mixtral.n_experts == 8);
    REQUIRE(mixtral.experts_top_k == 2);
    REQUIRE(mixtral.layout == Layout::serial);

    ModelConfig hyp = preset_by_name("mixtral-8x7b-parallel");
    REQUIRE(hyp.layout == Layout::parallel);
    REQUIRE(hyp.n_experts == 8);

    REQUIRE_THROWS_AS(preset_by_name("nope"), ConfigError);
}

TEST_CASE("presets: round-trip through config JSON", "[analyzer]") {
    for (const ModelConfig& c : builtin_presets()) {
        ModelConfig back = config_from_json(config_to_json(c));
        REQUIRE(back == c);
    }
}

TEST_CASE("config json: routed mixtures default to top-2", "[analyzer]") {
    nlohmann::json j = config_to_json(preset_by_name("mixtral-8x7b"));
    j.erase("experts_top_k");
    REQUIRE(config_from_json(j).experts_top_k == 2);
    j = config_to_json(preset_by_name("mistral-7b"));
    j.erase("experts_top_k");
    REQUIRE(config_from_json(j).experts_top_k == 1);
}

TEST_CASE("eliminated weights per preset", "[analyzer]") {
    REQUIRE(eliminated_weights(preset_by_name("pythia-6.9b")) == 184'549'376);
    REQUIRE(eliminated_weights(preset_by_name("mistral-7b")) == 25'165'824);
    // serial mixtral keeps its FFN, so it eliminates the same set as mistral
    REQUIRE(eliminated_weights(preset_by_name("mixtral-8x7b")) == 25'165'824);
    REQUIRE(eliminated_weights(preset_by_name("mixtral-8x7b-parallel")) == 964'689'920);
}

TEST_CASE("reads per batch", "[analyzer]") {
    ModelConfig pythia = preset_by_name("pythia-6.9b");
    ReadCounts r = reads(pythia, 1);
    REQUIRE(r.without_precompute == 184'553'472);
    REQUIRE(r.with_precompute == 16'384);

    ModelConfig mistral = preset_by_name("mistral-7b");
    r = reads(mistral, 1);
    REQUIRE(r.without_precompute == 25'169'920);
    REQUIRE(r.with_precompute == 10'240);

    ModelConfig hyp = preset_by_name("mixtral-8x7b-parallel");
    r = reads(hyp, 1);
    REQUIRE(r.without_precompute == 964'694'016);
    REQUIRE(r.with_precompute == 10'240);

    r = reads(mistral, 16);
    REQUIRE(r.without_precompute == 16 * 4096 + 25'165'824);
    REQUIRE(r.with_precompute == 16 * 10'240);
}

TEST_CASE("reduction factors at the published batch sizes", "[analyzer]") {
    auto factors = [](const std::string& preset) {
        std::vector<uint64_t> out;
        for (uint64_t b : {1, 16, 256, 1024}) {
            out.push_back(reduction_factor(preset_by_name(preset), b).rounded);
        }
        return out;
    };
    REQUIRE(factors("pythia-6.9b") == std::vector<uint64_t>{11'264, 704, 44, 11});
    REQUIRE(factors("mistral-7b") == std::vector<uint64_t>{2'458, 154, 10, 3});
    REQUIRE(factors("mixtral-8x7b-parallel") == std::vector<uint64_t>{94'208, 5'888, 368, 92});

    // mistral at B=1024 is exactly 2.8; nearest-integer rounding gives 3
    ReductionFactor f = reduction_factor(preset_by_name("mistral-7b"), 1024);
    REQUIRE(f.exact.num == 14);
    REQUIRE(f.exact.den == 5);
    REQUIRE(f.rounded == 3);

    // pythia at B=1 is 11264.25; nearest is 11264
    f = reduction_factor(preset_by_name("pythia-6.9b"), 1);
    REQUIRE(f.exact.num == 45'057);
    REQUIRE(f.exact.den == 4);
}

TEST_CASE("rounding: nearest integer, ties away from zero", "[analyzer]") {
    REQUIRE(round_ratio(28, 10) == 3);   // 2.8
    REQUIRE(round_ratio(7, 2) == 4);     // 3.5 tie
    REQUIRE(round_ratio(45057, 4) == 11264);  // x.25 rounds down
    REQUIRE(round_ratio(5, 1) == 5);
    REQUIRE(round_ratio_signed(-28, 10) == -3);
    REQUIRE(round_ratio_signed(-7, 2) == -4);
    REQUIRE(round_ratio_signed(-1, 3) == 0);
}

TEST_CASE("memory deltas per preset", "[analyzer]") {
    MemoryDelta d = memory_delta(preset_by_name("pythia-6.9b"));
    REQUIRE(d.embed_increase == 619'315'200);
    REQUIRE(d.abs_delta == 434'765'824);
    REQUIRE(d.rel_delta_pct == 6);

    d = memory_delta(preset_by_name("mistral-7b"));
    REQUIRE(d.embed_increase == 196'608'000);
    REQUIRE(d.abs_delta == 171'442'176);
    REQUIRE(d.rel_delta_pct == 3);

    d = memory_delta(preset_by_name("mixtral-8x7b-parallel"));
    REQUIRE(d.embed_increase == 196'608'000);
    REQUIRE(d.abs_delta == -768'081'920);
    REQUIRE(d.rel_delta_pct == -2);
}

TEST_CASE("memory delta sign flips when elimination beats the table growth", "[analyzer]") {
    // parallel, d=4, 1 head, e=4, hidden=12: eliminated = 16+32+96 = 144;
    // the table grows the embedding region by 12 per vocab entry
    ModelConfig c;
    c.dim = 4;
    c.n_layers = 1;
    c.n_heads = 1;
    c.n_kv_heads = 1;
    c.hidden_dim = 12;
    c.vocab_size = 12;
    c.max_seq_len = 8;
    c.layout = Layout::parallel;

    REQUIRE(eliminated_weights(c) == 144);
    REQUIRE(memory_delta(c).abs_delta == 0);  // 12*12 == 144

    c.vocab_size = 13;
    REQUIRE(memory_delta(c).abs_delta == 12);
    c.vocab_size = 11;
    REQUIRE(memory_delta(c).abs_delta == -12);
}

TEST_CASE("reduction factor strictly decreases with batch size", "[analyzer]") {
    for (const ModelConfig& preset : builtin_presets()) {
        uint64_t prev_num = 0, prev_den = 0;
        for (uint64_t b = 1; b <= (1ull << 20); b *= 2) {
            ReadCounts r = reads(preset, b);
            if (prev_den != 0) {
                // prev_num/prev_den > num/den, cross-multiplied in 128 bits
                REQUIRE(static_cast<__int128>(prev_num) * r.with_precompute >
                        static_cast<__int128>(r.without_precompute) * prev_den);
            }
            prev_num = r.without_precompute;
            prev_den = r.with_precompute;
        }
    }
}

TEST_CASE("analyzer refuses absolute-PE configs", "[analyzer]") {
    ModelConfig c = preset_by_name("mistral-7b");
    c.pos_encoding = PosEncoding::absolute;
    REQUIRE_THROWS_AS(eliminated_weights(c), IneligibleArchitecture);
    REQUIRE_THROWS_AS(reads(c, 1), IneligibleArchitecture);
    REQUIRE_THROWS_AS(memory_delta(c), IneligibleArchitecture);
}

TEST_CASE("report rendering: csv, json, text", "[analyzer]") {
    ModelConfig mistral = preset_by_name("mistral-7b");
    std::vector<uint64_t> batches{1, 16};
    CostReport rep = cost_report(mistral, batches);

    std::string csv = render_csv(rep);
    REQUIRE(csv.starts_with("config,batch,reads_without,reads_with,factor_exact_num,"
                            "factor_exact_den,factor_rounded\n"));
    REQUIRE(csv.find("mistral-7b,1,25169920,10240,") != std::string::npos);

    nlohmann::json j = nlohmann::json::parse(render_json(rep));
    REQUIRE(j["config_name"] == "mistral-7b");
    REQUIRE(j["e"] == 1024);
    REQUIRE(j["eliminated_weights"] == 25'165'824);
    REQUIRE(j["total_weights"] == 5'362'417'664);
    REQUIRE(j["mem_delta_rel_pct"] == 3);
    REQUIRE(j["batches"].size() == 2);
    REQUIRE(j["batches"][0]["factor_rounded"] == 2458);

    std::string text = render_text(rep);
    REQUIRE(text.find("25,165,824") != std::string::npos);   // thousands separators
    REQUIRE(text.find("171,442,176") != std::string::npos);
    REQUIRE(text.find("2,458x") != std::string::npos);

    // report generation is deterministic
    REQUIRE(render_text(rep) == render_text(cost_report(mistral, batches)));
}

TEST_CASE("reference figures reproduce exactly for all presets", "[analyzer]") {
    for (const ModelConfig& preset : builtin_presets()) {
        std::vector<std::string> mismatches = check_reference_figures(preset.name);
        for (const std::string& m : mismatches) {
            FAIL_CHECK(m);
        }
        REQUIRE(mismatches.empty());
    }
}

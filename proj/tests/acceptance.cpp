// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. argv[1] must point at the l1pc CLI binary.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "l1pc/checkpoint.hpp"
#include "l1pc/metering.hpp"
#include "l1pc/model.hpp"
#include "l1pc/numerics.hpp"
#include "l1pc/precompute.hpp"
#include "l1pc/reference_figures.hpp"
#include "l1pc/rng.hpp"

namespace fs = std::filesystem;
using namespace l1pc;

namespace {

std::string g_cli;
fs::path g_dir;
int g_failures = 0;

void report(int criterion, bool ok, const std::string& what) {
    std::cout << "criterion " << criterion << " " << (ok ? "PASS" : "FAIL") << "  " << what
              << "\n";
    if (!ok) ++g_failures;
}

int run_cli(const std::string& args) {
    std::string cmd = g_cli + " " + args + " > " + (g_dir / "cli_out.txt").string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelConfig suite_config(Layout layout, NormKind norm, FfnKind ffn, int64_t n_experts = 1) {
    ModelConfig cfg;
    cfg.name = "acceptance-toy";
    cfg.dim = 64;
    cfg.n_layers = 3;
    cfg.n_heads = 4;
    cfg.n_kv_heads = 2;
    cfg.hidden_dim = 128;
    cfg.n_experts = n_experts;
    cfg.experts_top_k = n_experts > 1 ? 2 : 1;
    cfg.vocab_size = 97;
    cfg.max_seq_len = 64;
    cfg.layout = layout;
    cfg.norm_kind = norm;
    cfg.ffn_kind = ffn;
    return cfg;
}

// 1. exact reproduction of the published cost tables via analyze --paper-check
void criterion_table_reproduction() {
    auto t0 = std::chrono::steady_clock::now();
    bool cli_ok = run_cli("analyze --paper-check") == 0;
    double elapsed = seconds_since(t0);

    bool lib_ok = true;
    for (const ModelConfig& preset : builtin_presets()) {
        lib_ok = lib_ok && check_reference_figures(preset.name).empty();
    }
    std::ostringstream what;
    what << "table reproduction: analyze --paper-check over four presets, every cell exact ("
         << elapsed << " s)";
    report(1, cli_ok && lib_ok && elapsed < 1.0, what.str());
}

// 2. exact weight-count rows
void criterion_weight_counts() {
    bool ok = true;
    WeightCount pythia = count_weights(preset_by_name("pythia-6.9b"));
    ok = ok && pythia.qp_per_layer == 33'554'432 && pythia.kv_per_layer == 33'554'432 &&
         pythia.ffn_per_layer == 134'217'728 && pythia.embed_total == 412'876'800 &&
         pythia.total == 6'855'327'744;
    WeightCount mistral = count_weights(preset_by_name("mistral-7b"));
    ok = ok && mistral.qp_per_layer == 33'554'432 && mistral.kv_per_layer == 8'388'608 &&
         mistral.ffn_per_layer == 117'440'512 && mistral.embed_total == 262'144'000 &&
         mistral.total == 5'362'417'664;
    WeightCount mixtral = count_weights(preset_by_name("mixtral-8x7b"));
    ok = ok && mixtral.ffn_per_layer == 939'524'096 && mixtral.total == 31'669'092'352;
    report(2, ok, "weight counts: every published row matches with integer equality");
}

// 3. baseline/precomputed equivalence over 100 seeded prompts per toy config
void criterion_equivalence() {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    float worst = 0.0f;
    struct Case {
        Layout layout;
        NormKind norm;
        FfnKind ffn;
        int64_t experts;
    };
    for (const Case& c : {Case{Layout::serial, NormKind::rmsnorm, FfnKind::swiglu, 1},
                          Case{Layout::parallel, NormKind::layernorm, FfnKind::mlp2, 1},
                          Case{Layout::parallel, NormKind::rmsnorm, FfnKind::swiglu, 4}}) {
        Model m = make_toy_model(suite_config(c.layout, c.norm, c.ffn, c.experts), 20240811);
        TransformedModel tm = transform_model(m);
        EquivalenceReport rep = verify_equivalence(m, tm, 100, 32, 7, 1e-4f);
        ok = ok && rep.pass && rep.max_rel_diff <= 1e-4f;
        worst = std::max(worst, rep.max_rel_diff);
    }
    double elapsed = seconds_since(t0);
    ok = ok && elapsed < 60.0;
    std::ostringstream what;
    what << "equivalence: serial/parallel/moe toys, 100 prompts each, prefill + decode, "
            "max rel diff "
         << worst << " <= 1e-4 (" << elapsed << " s)";
    report(3, ok, what.str());
}

// 4. metered reads equal the analytical formulas exactly
void criterion_metering() {
    bool ok = true;
    for (Layout layout : {Layout::serial, Layout::parallel}) {
        ModelConfig cfg = suite_config(layout, NormKind::rmsnorm, FfnKind::mlp2);
        Model m = make_toy_model(cfg, 99);
        TransformedModel tm = transform_model(m);
        const uint64_t d = 64, e = 32;
        for (uint64_t batch : {1, 2, 8, 16}) {
            MeterReport base = metered_forward(m, batch, 4, 5);
            MeterReport fast = metered_forward(tm, batch, 4, 5);
            ok = ok && fast.fetch_scalar_reads == batch * 2 * (d + e);
            ok = ok && base.fetch_scalar_reads == batch * d;
            ok = ok && base.region_weight_reads == eliminated_weights(cfg);
            ok = ok && base.fetch_scalar_reads + base.region_weight_reads ==
                           eliminated_weights(cfg) + batch * d;
        }
    }
    report(4, ok,
           "metering: table reads = B*2(d+e), baseline region reads = eliminated + B*d for "
           "B in {1,2,8,16}");
}

// 5. absolute-PE models refuse the transform but still run
void criterion_eligibility() {
    ModelConfig cfg = suite_config(Layout::serial, NormKind::rmsnorm, FfnKind::mlp2);
    cfg.pos_encoding = PosEncoding::absolute;
    Model m = make_toy_model(cfg, 3);

    bool threw = false;
    try {
        transform_model(m);
    } catch (const IneligibleArchitecture&) {
        threw = true;
    }

    bool forward_runs = true;
    KVCache cache(cfg);
    std::vector<int32_t> tokens{1, 2, 3};
    Tensor2 logits = forward_prefill(m, tokens, cache);
    for (float v : logits.data) forward_runs = forward_runs && std::isfinite(v);

    fs::path ckpt = g_dir / "abs.l1pc";
    save_checkpoint(m, ckpt.string());
    int exit_code =
        run_cli("transform --in " + ckpt.string() + " --out " + (g_dir / "abs.out").string());

    report(5, threw && forward_runs && exit_code == 2,
           "eligibility: absolute-PE transform raises IneligibleArchitecture (cli exit 2), "
           "baseline forward still runs");
}

// 6. bitwise checkpoint round-trips
void criterion_roundtrip() {
    bool ok = true;
    for (Layout layout : {Layout::serial, Layout::parallel}) {
        ModelConfig cfg = suite_config(layout, NormKind::layernorm, FfnKind::swiglu);
        Model m = make_toy_model(cfg, 4);
        TransformedModel tm = transform_model(m);

        fs::path base_path = g_dir / "rt_base.l1pc";
        fs::path fast_path = g_dir / "rt_fast.l1pc";
        save_checkpoint(m, base_path.string());
        save_checkpoint(tm, fast_path.string());

        Model m2 = load_model(base_path.string());
        ok = ok && m2.weights.input_embeddings.data == m.weights.input_embeddings.data &&
             m2.weights.layers[1].wq.data == m.weights.layers[1].wq.data &&
             m2.weights.output_embeddings.data == m.weights.output_embeddings.data;

        TransformedModel tm2 = load_transformed(fast_path.string());
        ok = ok && tm2.table.data == tm.table.data;

        KVCache mem_cache(tm.config), file_cache(tm2.config);
        SplitMix64 rng(6);
        for (int i = 0; i < 8; ++i) {
            int32_t t = static_cast<int32_t>(rng.next_below(97));
            std::vector<float> a = forward_decode(tm, t, mem_cache);
            std::vector<float> b = forward_decode(tm2, t, file_cache);
            ok = ok && std::memcmp(a.data(), b.data(), a.size() * 4) == 0;
        }
    }
    report(6, ok,
           "round-trip: save/load bitwise for baseline and transformed; file-loaded forward "
           "bitwise equal");
}

// 7. prefill/decode agreement, causality, rope identities
void criterion_consistency() {
    bool ok = true;

    for (Layout layout : {Layout::serial, Layout::parallel}) {
        ModelConfig cfg = suite_config(layout, NormKind::rmsnorm, FfnKind::mlp2);
        Model m = make_toy_model(cfg, 8);
        SplitMix64 rng(9);
        std::vector<int32_t> tokens(24);
        for (int32_t& t : tokens) t = static_cast<int32_t>(rng.next_below(97));

        KVCache prefill_cache(cfg);
        Tensor2 prefill = forward_prefill(m, tokens, prefill_cache);
        KVCache decode_cache(cfg);
        for (size_t i = 0; i < tokens.size(); ++i) {
            std::vector<float> step = forward_decode(m, tokens[i], decode_cache);
            for (size_t j = 0; j < step.size(); ++j) {
                ok = ok && std::abs(step[j] - prefill.at(i, j)) <= 1e-5f;
            }
        }

        // causality: edits after position i leave rows <= i bit-identical
        std::vector<int32_t> edited = tokens;
        for (size_t i = 12; i < edited.size(); ++i) edited[i] = (edited[i] + 31) % 97;
        KVCache edited_cache(cfg);
        Tensor2 edited_logits = forward_prefill(m, edited, edited_cache);
        for (size_t i = 0; i < 12; ++i) {
            ok = ok && std::memcmp(prefill.row(i).data(), edited_logits.row(i).data(),
                                   prefill.cols * 4) == 0;
        }
    }

    SplitMix64 rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<float> x(16);
        for (float& v : x) v = rng.next_uniform(-2.0f, 2.0f);
        ok = ok && rope_rotate(x, 0, 10000.0f) == x;  // position 0 identity
        std::vector<float> y =
            rope_rotate(x, 1 + static_cast<size_t>(rng.next_below(1000)), 10000.0f);
        for (size_t i = 0; i < x.size() / 2; ++i) {
            double nx = std::hypot(x[2 * i], x[2 * i + 1]);
            double ny = std::hypot(y[2 * i], y[2 * i + 1]);
            ok = ok && std::abs(nx - ny) <= 1e-6;
        }
    }

    report(7, ok,
           "consistency: prefill/decode <= 1e-5, causality bitwise, rope position-0 identity "
           "and pair norms <= 1e-6");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: l1pc_acceptance <path-to-l1pc-cli>\n";
        return 2;
    }
    g_cli = argv[1];
    g_dir = fs::temp_directory_path() / ("l1pc_acceptance_" + std::to_string(getpid()));
    fs::create_directories(g_dir);

    criterion_table_reproduction();
    criterion_weight_counts();
    criterion_equivalence();
    criterion_metering();
    criterion_eligibility();
    criterion_roundtrip();
    criterion_consistency();

    fs::remove_all(g_dir);
    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) FAILED\n";
        return 1;
    }
    std::cout << "all acceptance criteria passed\n";
    return 0;
}

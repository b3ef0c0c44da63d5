// l1pc: first-layer precompute toolkit for rope transformer checkpoints.
//
// Subcommands: analyze, gen-toy, transform, verify, run, bench.
// Exit codes: 0 success, 1 verification failure, 2 usage/config error,
// 3 I/O error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "l1pc/analyzer.hpp"
#include "l1pc/checkpoint.hpp"
#include "l1pc/metering.hpp"
#include "l1pc/model.hpp"
#include "l1pc/precompute.hpp"
#include "l1pc/reference_figures.hpp"

namespace {

using namespace l1pc;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

std::vector<uint64_t> parse_uint_list(const std::string& s, const char* what) {
    std::vector<uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t pos = 0;
            uint64_t v = std::stoull(item, &pos);
            if (pos != item.size() || v == 0) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError(std::string{what} + ": bad entry '" + item + "' in '" + s + "'");
        }
    }
    if (out.empty()) throw ConfigError(std::string{what} + ": empty list");
    return out;
}

std::vector<int32_t> parse_token_list(const std::string& s) {
    std::vector<int32_t> out;
    for (uint64_t v : parse_uint_list(s, "--tokens")) {
        out.push_back(static_cast<int32_t>(v));
    }
    return out;
}

ModelConfig config_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw CheckpointError(CheckpointError::Kind::open_failed,
                              "cannot open config '" + path + "'");
    }
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    ModelConfig cfg = config_from_json(j);
    if (cfg.name.empty()) {
        size_t slash = path.find_last_of('/');
        cfg.name = path.substr(slash == std::string::npos ? 0 : slash + 1);
    }
    return cfg;
}

// --- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
    std::string preset;
    std::string config_path;
    std::string batches = "1,16,256,1024";
    std::string format = "text";
    bool paper_check = false;
};

int run_analyze(const AnalyzeArgs& args) {
    if (args.paper_check && !args.config_path.empty()) {
        std::cerr << "--paper-check applies to presets only\n";
        return kExitUsage;
    }
    if (!args.preset.empty() && !args.config_path.empty()) {
        std::cerr << "use either --preset or --config, not both\n";
        return kExitUsage;
    }
    std::vector<ModelConfig> configs;
    if (!args.preset.empty()) {
        configs.push_back(preset_by_name(args.preset));
    } else if (!args.config_path.empty()) {
        configs.push_back(config_from_file(args.config_path));
    } else if (args.paper_check) {
        configs = builtin_presets();  // bare --paper-check sweeps all presets
    } else {
        std::cerr << "analyze needs --preset or --config\n";
        return kExitUsage;
    }

    std::vector<uint64_t> batches = parse_uint_list(args.batches, "--batches");
    bool all_ok = true;
    for (const ModelConfig& cfg : configs) {
        CostReport rep = cost_report(cfg, batches);
        if (args.format == "csv") {
            std::cout << render_csv(rep);
        } else if (args.format == "json") {
            std::cout << render_json(rep);
        } else {
            std::cout << render_text(rep);
        }
        if (args.paper_check) {
            std::vector<std::string> mismatches = check_reference_figures(cfg.name);
            if (mismatches.empty()) {
                std::cout << cfg.name << ": all reference figures reproduced\n";
            } else {
                all_ok = false;
                for (const std::string& m : mismatches) std::cout << "MISMATCH " << m << "\n";
            }
        }
        if (configs.size() > 1) std::cout << "\n";
    }
    return all_ok ? kExitOk : kExitVerifyFailed;
}

// --- gen-toy ---------------------------------------------------------------

struct GenToyArgs {
    std::string out;
    uint64_t seed = 0;
    int64_t dim = 64, layers = 3, heads = 4, kv_heads = 2, hidden = 128;
    int64_t experts = 1, top_k = 0, vocab = 97, max_seq = 256;  // top_k 0 = auto
    std::string layout = "serial", pos = "rope", norm = "rmsnorm", ffn = "mlp2", act = "gelu";
    float rope_base = 10000.0f;
    std::string name;
};

ModelConfig toy_config(const GenToyArgs& a) {
    ModelConfig cfg;
    cfg.name = a.name;
    cfg.dim = a.dim;
    cfg.n_layers = a.layers;
    cfg.n_heads = a.heads;
    cfg.n_kv_heads = a.kv_heads;
    cfg.hidden_dim = a.hidden;
    cfg.n_experts = a.experts;
    cfg.experts_top_k = a.top_k != 0 ? a.top_k : (a.experts > 1 ? 2 : 1);
    cfg.vocab_size = a.vocab;
    cfg.max_seq_len = a.max_seq;
    cfg.layout = detail::parse_enum<Layout>(a.layout, "--layout");
    cfg.pos_encoding = detail::parse_enum<PosEncoding>(a.pos, "--pos");
    cfg.norm_kind = detail::parse_enum<NormKind>(a.norm, "--norm");
    cfg.ffn_kind = detail::parse_enum<FfnKind>(a.ffn, "--ffn");
    cfg.activation = detail::parse_enum<Activation>(a.act, "--act");
    cfg.rope_base = a.rope_base;
    validate(cfg);
    return cfg;
}

int run_gen_toy(const GenToyArgs& args) {
    ModelConfig cfg = toy_config(args);
    Model m = make_toy_model(cfg, args.seed);
    save_checkpoint(m, args.out);
    std::cout << "wrote " << args.out << " (" << detail::layout_str(cfg.layout) << ", d=" << cfg.dim
              << ", e=" << kv_dim(cfg) << ", layers=" << cfg.n_layers << ", vocab="
              << cfg.vocab_size << ", seed=" << args.seed << ")\n";
    return kExitOk;
}

// --- transform ---------------------------------------------------------------

int run_transform(const std::string& in, const std::string& out) {
    Checkpoint ckpt = load_checkpoint(in);
    if (std::holds_alternative<TransformedModel>(ckpt)) {
        throw ConfigError("'" + in + "' is already precomputed");
    }
    const Model& m = std::get<Model>(ckpt);
    TransformedModel tm = transform_model(m);
    save_checkpoint(tm, out);
    EliminationCounts counts = elimination_counts(m.config);
    std::cout << "wrote " << out << "\n";
    std::cout << "eliminated weights (formula)  " << format_thousands(counts.by_formula) << "\n";
    std::cout << "eliminated scalars (actual)   " << format_thousands(counts.actual) << "\n";
    std::cout << "table  " << tm.table.vocab_size << " rows x " << tm.table.row_width()
              << " values (" << format_thousands(tm.table.data.size() * 4) << " bytes)\n";
    return kExitOk;
}

// --- verify ------------------------------------------------------------------

struct VerifyArgs {
    std::string baseline;
    std::string transformed;
    int prompts = 8;
    int len = 16;
    float tol = 1e-4f;
    uint64_t seed = 1;
    std::string format = "text";
};

int run_verify(const VerifyArgs& args) {
    Model m = load_model(args.baseline);
    TransformedModel tm = load_transformed(args.transformed);
    ModelConfig expect = m.config;
    expect.precomputed = true;
    if (!(expect == tm.config)) {
        throw ConfigError("baseline and transformed checkpoints have different configs");
    }
    EquivalenceReport rep =
        verify_equivalence(m, tm, args.prompts, args.len, args.seed, args.tol);
    if (args.format == "json") {
        nlohmann::json j;
        j["max_abs_diff"] = rep.max_abs_diff;
        j["max_rel_diff"] = rep.max_rel_diff;
        j["max_abs_baseline"] = rep.max_abs_baseline;
        j["values_compared"] = rep.values_compared;
        j["pass"] = rep.pass;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "prompts " << args.prompts << ", max len " << args.len << ", seed "
                  << args.seed << ", tol " << args.tol << "\n";
        std::cout << "values compared   " << format_thousands(rep.values_compared) << "\n";
        std::cout << "max abs diff      " << rep.max_abs_diff << "\n";
        std::cout << "max rel diff      " << rep.max_rel_diff << "\n";
        std::cout << "max abs baseline  " << rep.max_abs_baseline << "\n";
        std::cout << (rep.pass ? "PASS" : "FAIL") << "\n";
    }
    return rep.pass ? kExitOk : kExitVerifyFailed;
}

// --- run ---------------------------------------------------------------------

struct RunArgs {
    std::string ckpt;
    std::string tokens;
    int steps = 8;
    bool meter = false;
};

int run_generate(const RunArgs& args) {
    Checkpoint ckpt = load_checkpoint(args.ckpt);
    std::vector<int32_t> prompt = parse_token_list(args.tokens);

    auto generate = [&](const auto& engine) {
        const ModelConfig& cfg = engine.config;
        KVCache cache(cfg);
        Meter meter;
        Meter* mp = args.meter ? &meter : nullptr;

        std::cout << "prompt:";
        for (int32_t t : prompt) std::cout << " " << t;
        std::cout << "\n";

        Tensor2 prompt_logits = forward_prefill(engine, prompt, cache, mp);
        if (args.meter) {
            std::cout << "prefill reads: " << meter.fetch_reads << " ("
                      << prompt.size() << " tokens)\n";
        }
        int32_t next = greedy_argmax(prompt_logits.row(prompt_logits.rows - 1));
        std::cout << "generated:";
        for (int step = 0; step < args.steps; ++step) {
            std::cout << " " << next << std::flush;
            if (step + 1 == args.steps) break;
            uint64_t before = meter.fetch_reads;
            std::vector<float> logits = forward_decode(engine, next, cache, mp);
            if (args.meter) {
                std::cout << " [reads " << (meter.fetch_reads - before) << "]";
            }
            next = greedy_argmax(logits);
        }
        std::cout << "\n";
    };
    std::visit(generate, ckpt);
    return kExitOk;
}

// --- bench ---------------------------------------------------------------------

struct BenchArgs {
    std::string baseline;
    std::string transformed;
    int steps = 64;
    uint64_t batch = 1;
    uint64_t seed = 1;
};

int run_bench(const BenchArgs& args) {
    Model m = load_model(args.baseline);
    TransformedModel tm = load_transformed(args.transformed);
    BenchResult r = bench(m, tm, args.steps, args.batch, args.seed);
    std::cout << "decode steps per variant: " << r.steps << ", metered batch " << args.batch
              << "\n\n";
    std::cout << "variant      median step (us)   fetch reads   region weight reads\n";
    auto row = [](const char* name, double ns, const MeterReport& rep) {
        std::ostringstream os;
        os << name << std::string(13 - std::string(name).size(), ' ');
        std::string us = std::to_string(ns / 1000.0);
        os << us << std::string(us.size() < 19 ? 19 - us.size() : 1, ' ');
        std::string fetch = format_thousands(rep.fetch_scalar_reads);
        os << fetch << std::string(fetch.size() < 14 ? 14 - fetch.size() : 1, ' ');
        os << format_thousands(rep.region_weight_reads);
        return os.str();
    };
    std::cout << row("baseline", r.baseline_step_ns_median, r.baseline_meter) << "\n";
    std::cout << row("precomputed", r.precomputed_step_ns_median, r.precomputed_meter) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"first-layer precompute toolkit for rope transformer checkpoints"};
    app.require_subcommand(1);

    AnalyzeArgs analyze_args;
    CLI::App* analyze = app.add_subcommand("analyze", "print the read/memory cost model");
    analyze->add_option("--preset", analyze_args.preset,
                        "built-in config: pythia-6.9b, mistral-7b, mixtral-8x7b, "
                        "mixtral-8x7b-parallel");
    analyze->add_option("--config", analyze_args.config_path, "model config JSON file");
    analyze->add_option("--batches", analyze_args.batches, "comma-separated batch sizes");
    analyze->add_option("--format", analyze_args.format, "text, csv or json")
        ->check(CLI::IsMember({"text", "csv", "json"}));
    analyze->add_flag("--paper-check", analyze_args.paper_check,
                      "check outputs against the published figures for the presets");

    GenToyArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen-toy", "write a seeded random toy checkpoint");
    gen->add_option("--out", gen_args.out)->required();
    gen->add_option("--seed", gen_args.seed, "weight seed (default 0)");
    gen->add_option("--dim", gen_args.dim);
    gen->add_option("--layers", gen_args.layers);
    gen->add_option("--heads", gen_args.heads);
    gen->add_option("--kv-heads", gen_args.kv_heads);
    gen->add_option("--hidden", gen_args.hidden);
    gen->add_option("--experts", gen_args.experts);
    gen->add_option("--top-k", gen_args.top_k, "routed experts per token (default 2 for MoE)");
    gen->add_option("--vocab", gen_args.vocab);
    gen->add_option("--max-seq", gen_args.max_seq);
    gen->add_option("--layout", gen_args.layout, "serial or parallel");
    gen->add_option("--pos", gen_args.pos, "rope or absolute");
    gen->add_option("--norm", gen_args.norm, "rmsnorm or layernorm");
    gen->add_option("--ffn", gen_args.ffn, "mlp2 or swiglu");
    gen->add_option("--act", gen_args.act, "gelu or silu (mlp2 hidden activation)");
    gen->add_option("--rope-base", gen_args.rope_base);
    gen->add_option("--name", gen_args.name);

    std::string transform_in, transform_out;
    CLI::App* transform = app.add_subcommand(
        "transform", "precompute the first layer of a baseline checkpoint");
    transform->add_option("--in", transform_in)->required();
    transform->add_option("--out", transform_out)->required();

    VerifyArgs verify_args;
    CLI::App* verify = app.add_subcommand(
        "verify", "compare baseline and precomputed outputs on seeded prompts");
    verify->add_option("--baseline", verify_args.baseline)->required();
    verify->add_option("--transformed", verify_args.transformed)->required();
    verify->add_option("--prompts", verify_args.prompts);
    verify->add_option("--len", verify_args.len, "max prompt length");
    verify->add_option("--tol", verify_args.tol);
    verify->add_option("--seed", verify_args.seed);
    verify->add_option("--format", verify_args.format)
        ->check(CLI::IsMember({"text", "json"}));

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "greedy decode from a checkpoint");
    run->add_option("--ckpt", run_args.ckpt)->required();
    run->add_option("--tokens", run_args.tokens, "comma-separated prompt token ids")->required();
    run->add_option("--steps", run_args.steps, "tokens to generate");
    run->add_flag("--meter", run_args.meter, "print per-step metered reads");

    BenchArgs bench_args;
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "wall-time and metered-read comparison");
    bench_cmd->add_option("--baseline", bench_args.baseline)->required();
    bench_cmd->add_option("--transformed", bench_args.transformed)->required();
    bench_cmd->add_option("--steps", bench_args.steps);
    bench_cmd->add_option("--batch", bench_args.batch);
    bench_cmd->add_option("--seed", bench_args.seed);

    try {
        app.parse(argc, argv);
        if (*analyze) return run_analyze(analyze_args);
        if (*gen) return run_gen_toy(gen_args);
        if (*transform) return run_transform(transform_in, transform_out);
        if (*verify) return run_verify(verify_args);
        if (*run) return run_generate(run_args);
        if (*bench_cmd) return run_bench(bench_args);
        return kExitUsage;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const IneligibleArchitecture& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "l1pc/errors.hpp"

namespace l1pc {

enum class Layout { parallel, serial };
enum class PosEncoding { rope, absolute };
enum class NormKind { rmsnorm, layernorm };
enum class FfnKind { mlp2, swiglu };
enum class Activation { silu, gelu };

// Norm epsilon is fixed; it is part of the arithmetic contract between the
// baseline and precomputed paths, not a tunable.
inline constexpr float kNormEps = 1e-5f;

struct ModelConfig {
    std::string name;  // optional label, used in reports and file stems

    int64_t dim = 0;
    int64_t n_layers = 0;
    int64_t n_heads = 0;
    int64_t n_kv_heads = 0;
    int64_t hidden_dim = 0;
    int64_t n_experts = 1;
    int64_t experts_top_k = 1;
    int64_t vocab_size = 0;
    int64_t max_seq_len = 0;

    Layout layout = Layout::serial;
    PosEncoding pos_encoding = PosEncoding::rope;
    NormKind norm_kind = NormKind::rmsnorm;
    FfnKind ffn_kind = FfnKind::mlp2;
    Activation activation = Activation::gelu;  // hidden activation for mlp2

    float rope_base = 10000.0f;
    bool precomputed = false;

    int64_t head_dim() const { return dim / n_heads; }

    bool operator==(const ModelConfig&) const = default;
};

// Combined K (or V) projection width: e = d for MHA, d/n_heads for MQA,
// d*n_kv_heads/n_heads for GQA.
inline int64_t kv_dim(const ModelConfig& c) {
    if (c.n_heads <= 0 || c.n_kv_heads <= 0 || c.dim <= 0) {
        throw ConfigError("kv_dim: dim and head counts must be positive");
    }
    if (c.dim % c.n_heads != 0) {
        throw ConfigError("kv_dim: dim must be divisible by n_heads");
    }
    if (c.n_heads % c.n_kv_heads != 0) {
        throw ConfigError("kv_dim: n_heads must be divisible by n_kv_heads");
    }
    return c.dim / c.n_heads * c.n_kv_heads;
}

inline void validate(const ModelConfig& c) {
    if (c.dim < 1 || c.n_layers < 1 || c.hidden_dim < 1 || c.vocab_size < 1 ||
        c.max_seq_len < 1) {
        throw ConfigError("config: dim, n_layers, hidden_dim, vocab_size and max_seq_len "
                          "must all be at least 1");
    }
    kv_dim(c);  // head divisibility rules
    if (c.n_experts < 1) {
        throw ConfigError("config: n_experts must be at least 1");
    }
    if (c.experts_top_k < 1 || c.experts_top_k > c.n_experts) {
        throw ConfigError("config: experts_top_k must be in [1, n_experts]");
    }
    if (c.rope_base <= 0.0f) {
        throw ConfigError("config: rope_base must be positive");
    }
    if (c.pos_encoding == PosEncoding::rope && c.head_dim() % 2 != 0) {
        throw ConfigError("config: rope requires an even head dimension");
    }
    if (c.pos_encoding == PosEncoding::absolute && c.dim % 2 != 0) {
        throw ConfigError("config: sinusoidal encoding requires an even dim");
    }
}

namespace detail {

inline std::string layout_str(Layout v) { return v == Layout::parallel ? "parallel" : "serial"; }
inline std::string pos_str(PosEncoding v) { return v == PosEncoding::rope ? "rope" : "absolute"; }
inline std::string norm_str(NormKind v) { return v == NormKind::rmsnorm ? "rmsnorm" : "layernorm"; }
inline std::string ffn_str(FfnKind v) { return v == FfnKind::mlp2 ? "mlp2" : "swiglu"; }
inline std::string act_str(Activation v) { return v == Activation::silu ? "silu" : "gelu"; }

template <typename T>
T parse_enum(const std::string& s, const std::string& field) {
    if constexpr (std::is_same_v<T, Layout>) {
        if (s == "parallel") return Layout::parallel;
        if (s == "serial") return Layout::serial;
    } else if constexpr (std::is_same_v<T, PosEncoding>) {
        if (s == "rope") return PosEncoding::rope;
        if (s == "absolute") return PosEncoding::absolute;
    } else if constexpr (std::is_same_v<T, NormKind>) {
        if (s == "rmsnorm") return NormKind::rmsnorm;
        if (s == "layernorm") return NormKind::layernorm;
    } else if constexpr (std::is_same_v<T, FfnKind>) {
        if (s == "mlp2") return FfnKind::mlp2;
        if (s == "swiglu") return FfnKind::swiglu;
    } else if constexpr (std::is_same_v<T, Activation>) {
        if (s == "silu") return Activation::silu;
        if (s == "gelu") return Activation::gelu;
    }
    throw ConfigError("config: bad value '" + s + "' for field '" + field + "'");
}

}  // namespace detail

inline nlohmann::json config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["dim"] = c.dim;
    j["n_layers"] = c.n_layers;
    j["n_heads"] = c.n_heads;
    j["n_kv_heads"] = c.n_kv_heads;
    j["hidden_dim"] = c.hidden_dim;
    j["n_experts"] = c.n_experts;
    j["experts_top_k"] = c.experts_top_k;
    j["vocab_size"] = c.vocab_size;
    j["max_seq_len"] = c.max_seq_len;
    j["layout"] = detail::layout_str(c.layout);
    j["pos_encoding"] = detail::pos_str(c.pos_encoding);
    j["norm_kind"] = detail::norm_str(c.norm_kind);
    j["ffn_kind"] = detail::ffn_str(c.ffn_kind);
    j["activation"] = detail::act_str(c.activation);
    j["rope_base"] = c.rope_base;
    j["precomputed"] = c.precomputed;
    return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.name = j.value("name", std::string{});
        c.dim = j.at("dim").get<int64_t>();
        c.n_layers = j.at("n_layers").get<int64_t>();
        c.n_heads = j.at("n_heads").get<int64_t>();
        c.n_kv_heads = j.at("n_kv_heads").get<int64_t>();
        c.hidden_dim = j.at("hidden_dim").get<int64_t>();
        c.n_experts = j.value("n_experts", int64_t{1});
        // routed mixtures default to top-2
        c.experts_top_k = j.value("experts_top_k", c.n_experts > 1 ? int64_t{2} : int64_t{1});
        c.vocab_size = j.at("vocab_size").get<int64_t>();
        c.max_seq_len = j.at("max_seq_len").get<int64_t>();
        c.layout = detail::parse_enum<Layout>(j.at("layout").get<std::string>(), "layout");
        c.pos_encoding = detail::parse_enum<PosEncoding>(
            j.at("pos_encoding").get<std::string>(), "pos_encoding");
        c.norm_kind =
            detail::parse_enum<NormKind>(j.at("norm_kind").get<std::string>(), "norm_kind");
        c.ffn_kind = detail::parse_enum<FfnKind>(j.at("ffn_kind").get<std::string>(), "ffn_kind");
        c.activation = detail::parse_enum<Activation>(j.value("activation", std::string{"gelu"}),
                                                      "activation");
        c.rope_base = j.value("rope_base", 10000.0f);
        c.precomputed = j.value("precomputed", false);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string{"config: malformed JSON: "} + e.what());
    }
    validate(c);
    return c;
}

}  // namespace l1pc

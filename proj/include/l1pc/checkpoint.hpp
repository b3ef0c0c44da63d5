#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "l1pc/config.hpp"
#include "l1pc/errors.hpp"
#include "l1pc/model.hpp"
#include "l1pc/precompute.hpp"

namespace l1pc {

// Checkpoint container, all little-endian:
//
//   magic "L1PC" | version u32 | config u64 length + UTF-8 JSON |
//   tensor entries until EOF, each:
//     name u32 length + UTF-8 name | dtype u8 (0 = IEEE-754 f32) |
//     rank u8 | dims u64[rank] | payload (row-major f32)
//
// Tensor names are unique, every tensor required by the config is present,
// and the file ends exactly after the last tensor. Saving is deterministic:
// the same model always produces the same bytes.

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[4] = {'L', '1', 'P', 'C'};
inline constexpr uint32_t kCheckpointVersion = 1;

using Checkpoint = std::variant<Model, TransformedModel>;

namespace ckpt_detail {

struct ByteWriter {
    std::vector<uint8_t> out;

    void put_u8(uint8_t v) { out.push_back(v); }
    void put_u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void put_u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void put_bytes(const void* p, size_t n) {
        const uint8_t* b = static_cast<const uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
};

struct ByteReader {
    std::span<const uint8_t> in;
    size_t pos = 0;

    bool done() const { return pos == in.size(); }

    void need(size_t n, const char* what) {
        if (in.size() - pos < n) {
            throw CheckpointError(CheckpointError::Kind::truncated,
                                  std::string{"checkpoint truncated while reading "} + what);
        }
    }
    uint8_t get_u8(const char* what) {
        need(1, what);
        return in[pos++];
    }
    uint32_t get_u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(in[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t get_u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(in[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    std::string get_string(size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(in.data() + pos), n);
        pos += n;
        return s;
    }
    std::vector<float> get_floats(size_t count, const char* what) {
        need(count * 4, what);
        std::vector<float> v(count);
        std::memcpy(v.data(), in.data() + pos, count * 4);
        pos += count * 4;
        return v;
    }
};

inline void write_tensor(ByteWriter& w, const std::string& name, uint8_t rank, uint64_t d0,
                         uint64_t d1, std::span<const float> data) {
    w.put_u32(static_cast<uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put_u8(0);  // dtype f32
    w.put_u8(rank);
    w.put_u64(d0);
    if (rank == 2) w.put_u64(d1);
    w.put_bytes(data.data(), data.size() * 4);
}

inline void write_matrix(ByteWriter& w, const std::string& name, const Tensor2& t) {
    write_tensor(w, name, 2, t.rows, t.cols, t.data);
}

// rmsnorm: rank-1 [d] gain. layernorm: rank-2 [2 x d], row 0 gain, row 1 bias.
inline void write_norm(ByteWriter& w, const std::string& name, const ModelConfig& cfg,
                       const NormParams& p) {
    if (cfg.norm_kind == NormKind::rmsnorm) {
        write_tensor(w, name, 1, p.gain.size(), 0, p.gain);
    } else {
        std::vector<float> packed(p.gain);
        packed.insert(packed.end(), p.bias.begin(), p.bias.end());
        write_tensor(w, name, 2, 2, p.gain.size(), packed);
    }
}

inline void write_ffn(ByteWriter& w, const std::string& prefix, const ModelConfig& cfg,
                      const MoeFfn& ffn) {
    if (cfg.n_experts == 1) {
        write_matrix(w, prefix + ".up", ffn.experts[0].up);
        write_matrix(w, prefix + ".down", ffn.experts[0].down);
        if (cfg.ffn_kind == FfnKind::swiglu) write_matrix(w, prefix + ".gate", ffn.experts[0].gate);
        return;
    }
    write_matrix(w, prefix + ".router", ffn.router);
    for (size_t j = 0; j < ffn.experts.size(); ++j) {
        std::string ep = prefix + ".expert" + std::to_string(j);
        write_matrix(w, ep + ".up", ffn.experts[j].up);
        write_matrix(w, ep + ".down", ffn.experts[j].down);
        if (cfg.ffn_kind == FfnKind::swiglu) write_matrix(w, ep + ".gate", ffn.experts[j].gate);
    }
}

inline void write_header(ByteWriter& w, const ModelConfig& cfg) {
    w.put_bytes(kCheckpointMagic, 4);
    w.put_u32(kCheckpointVersion);
    std::string cfg_json = config_to_json(cfg).dump();
    w.put_u64(cfg_json.size());
    w.put_bytes(cfg_json.data(), cfg_json.size());
}

inline void write_layer_rest(ByteWriter& w, const ModelConfig& cfg, const LayerWeights& lw,
                             const std::string& prefix) {
    write_matrix(w, prefix + ".wp", lw.wp);
    if (cfg.layout == Layout::serial) write_norm(w, prefix + ".norm2", cfg, lw.norm2);
}

// ---------------------------------------------------------------------------
// Parsed tensor set
// ---------------------------------------------------------------------------

struct ParsedTensor {
    uint8_t rank = 0;
    uint64_t d0 = 0;
    uint64_t d1 = 0;
    std::vector<float> data;
};

struct TensorSet {
    std::map<std::string, ParsedTensor> tensors;

    ParsedTensor pull(const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end()) {
            throw CheckpointError(CheckpointError::Kind::inconsistent,
                                  "checkpoint is missing tensor '" + name + "'");
        }
        ParsedTensor t = std::move(it->second);
        tensors.erase(it);
        return t;
    }

    std::vector<float> take1(const std::string& name, uint64_t len) {
        ParsedTensor t = pull(name);
        if (t.rank != 1 || t.d0 != len) {
            throw CheckpointError(CheckpointError::Kind::inconsistent,
                                  "tensor '" + name + "' has the wrong shape");
        }
        return std::move(t.data);
    }

    Tensor2 take2(const std::string& name, uint64_t rows, uint64_t cols) {
        ParsedTensor t = pull(name);
        if (t.rank != 2 || t.d0 != rows || t.d1 != cols) {
            throw CheckpointError(CheckpointError::Kind::inconsistent,
                                  "tensor '" + name + "' has the wrong shape");
        }
        Tensor2 m(rows, cols);
        m.data = std::move(t.data);
        return m;
    }

    void expect_empty() const {
        if (!tensors.empty()) {
            throw CheckpointError(CheckpointError::Kind::inconsistent,
                                  "checkpoint has unexpected tensor '" +
                                      tensors.begin()->first + "'");
        }
    }
};

inline NormParams read_norm(TensorSet& set, const std::string& name, const ModelConfig& cfg,
                            uint64_t width) {
    NormParams p;
    if (cfg.norm_kind == NormKind::rmsnorm) {
        p.gain = set.take1(name, width);
    } else {
        Tensor2 packed = set.take2(name, 2, width);
        p.gain.assign(packed.row(0).begin(), packed.row(0).end());
        p.bias.assign(packed.row(1).begin(), packed.row(1).end());
    }
    return p;
}

inline MoeFfn read_ffn(TensorSet& set, const std::string& prefix, const ModelConfig& cfg) {
    const uint64_t d = static_cast<uint64_t>(cfg.dim);
    const uint64_t h = static_cast<uint64_t>(cfg.hidden_dim);
    MoeFfn ffn;
    auto read_expert = [&](const std::string& ep) {
        FfnWeights fw;
        fw.up = set.take2(ep + ".up", d, h);
        fw.down = set.take2(ep + ".down", h, d);
        if (cfg.ffn_kind == FfnKind::swiglu) fw.gate = set.take2(ep + ".gate", d, h);
        return fw;
    };
    if (cfg.n_experts == 1) {
        ffn.experts.push_back(read_expert(prefix));
        return ffn;
    }
    ffn.router = set.take2(prefix + ".router", d, static_cast<uint64_t>(cfg.n_experts));
    for (int64_t j = 0; j < cfg.n_experts; ++j) {
        ffn.experts.push_back(read_expert(prefix + ".expert" + std::to_string(j)));
    }
    return ffn;
}

}  // namespace ckpt_detail

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::vector<uint8_t> checkpoint_bytes(const Model& m) {
    if (m.config.precomputed) {
        throw ConfigError("save: baseline model flagged precomputed");
    }
    ckpt_detail::ByteWriter w;
    ckpt_detail::write_header(w, m.config);
    ckpt_detail::write_matrix(w, "embed.in", m.weights.input_embeddings);
    for (size_t i = 0; i < m.weights.layers.size(); ++i) {
        const LayerWeights& lw = m.weights.layers[i];
        std::string prefix = "layer" + std::to_string(i);
        ckpt_detail::write_norm(w, prefix + ".norm1", m.config, lw.norm1);
        ckpt_detail::write_matrix(w, prefix + ".wq", lw.wq);
        ckpt_detail::write_matrix(w, prefix + ".wk", lw.wk);
        ckpt_detail::write_matrix(w, prefix + ".wv", lw.wv);
        ckpt_detail::write_layer_rest(w, m.config, lw, prefix);
        ckpt_detail::write_ffn(w, prefix + ".ffn", m.config, lw.ffn);
    }
    ckpt_detail::write_norm(w, "norm.final", m.config, m.weights.final_norm);
    ckpt_detail::write_matrix(w, "embed.out", m.weights.output_embeddings);
    return std::move(w.out);
}

inline std::vector<uint8_t> checkpoint_bytes(const TransformedModel& tm) {
    if (!tm.config.precomputed) {
        throw ConfigError("save: transformed model not flagged precomputed");
    }
    ckpt_detail::ByteWriter w;
    ckpt_detail::write_header(w, tm.config);
    ckpt_detail::write_tensor(w, "layer0.precompute", 2,
                              static_cast<uint64_t>(tm.table.vocab_size), tm.table.row_width(),
                              tm.table.data);
    ckpt_detail::write_layer_rest(w, tm.config, tm.layers[0], "layer0");
    if (tm.config.layout == Layout::serial) {
        ckpt_detail::write_ffn(w, "layer0.ffn", tm.config, tm.layers[0].ffn);
    }
    for (size_t i = 1; i < tm.layers.size(); ++i) {
        const LayerWeights& lw = tm.layers[i];
        std::string prefix = "layer" + std::to_string(i);
        ckpt_detail::write_norm(w, prefix + ".norm1", tm.config, lw.norm1);
        ckpt_detail::write_matrix(w, prefix + ".wq", lw.wq);
        ckpt_detail::write_matrix(w, prefix + ".wk", lw.wk);
        ckpt_detail::write_matrix(w, prefix + ".wv", lw.wv);
        ckpt_detail::write_layer_rest(w, tm.config, lw, prefix);
        ckpt_detail::write_ffn(w, prefix + ".ffn", tm.config, lw.ffn);
    }
    ckpt_detail::write_norm(w, "norm.final", tm.config, tm.final_norm);
    ckpt_detail::write_matrix(w, "embed.out", tm.output_embeddings);
    return std::move(w.out);
}

// ---------------------------------------------------------------------------
// Deserialization
// ---------------------------------------------------------------------------

inline Checkpoint load_checkpoint_bytes(std::span<const uint8_t> bytes) {
    ckpt_detail::ByteReader r{bytes};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw CheckpointError(CheckpointError::Kind::bad_magic, "not a checkpoint (bad magic)");
    }
    r.pos += 4;
    uint32_t version = r.get_u32("version");
    if (version != kCheckpointVersion) {
        throw CheckpointError(CheckpointError::Kind::version_mismatch,
                              "unsupported checkpoint version " + std::to_string(version));
    }
    uint64_t cfg_len = r.get_u64("config length");
    std::string cfg_json = r.get_string(cfg_len, "config");
    ModelConfig cfg;
    try {
        cfg = config_from_json(nlohmann::json::parse(cfg_json));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::inconsistent,
                              std::string{"bad config JSON: "} + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError(CheckpointError::Kind::inconsistent, e.what());
    }

    ckpt_detail::TensorSet set;
    while (!r.done()) {
        uint32_t name_len = r.get_u32("tensor name length");
        if (name_len == 0 || name_len > 4096) {
            throw CheckpointError(CheckpointError::Kind::inconsistent,
                                  "unreasonable tensor name length");
        }
        std::string name = r.get_string(name_len, "tensor name");
        uint8_t dtype = r.get_u8("dtype");
        if (dtype != 0) {
            throw CheckpointError(CheckpointError::Kind::inconsistent,
                                  "tensor '" + name + "' has unsupported dtype tag");
        }
        uint8_t rank = r.get_u8("rank");
        if (rank != 1 && rank != 2) {
            throw CheckpointError(CheckpointError::Kind::inconsistent,
                                  "tensor '" + name + "' has unsupported rank");
        }
        ckpt_detail::ParsedTensor t;
        t.rank = rank;
        t.d0 = r.get_u64("dims");
        t.d1 = rank == 2 ? r.get_u64("dims") : 0;
        uint64_t count = rank == 2 ? t.d0 * t.d1 : t.d0;
        if (t.d0 > (1ull << 32) || t.d1 > (1ull << 32) || count > (1ull << 36)) {
            throw CheckpointError(CheckpointError::Kind::inconsistent,
                                  "tensor '" + name + "' has unreasonable dimensions");
        }
        t.data = r.get_floats(count, name.c_str());
        if (!set.tensors.emplace(name, std::move(t)).second) {
            throw CheckpointError(CheckpointError::Kind::duplicate_tensor,
                                  "duplicate tensor '" + name + "'");
        }
    }

    const uint64_t d = static_cast<uint64_t>(cfg.dim);
    const uint64_t e = static_cast<uint64_t>(kv_dim(cfg));
    const uint64_t vocab = static_cast<uint64_t>(cfg.vocab_size);

    auto read_full_layer = [&](size_t i) {
        LayerWeights lw;
        std::string prefix = "layer" + std::to_string(i);
        lw.norm1 = ckpt_detail::read_norm(set, prefix + ".norm1", cfg, d);
        lw.wq = set.take2(prefix + ".wq", d, d);
        lw.wk = set.take2(prefix + ".wk", d, e);
        lw.wv = set.take2(prefix + ".wv", d, e);
        lw.wp = set.take2(prefix + ".wp", d, d);
        if (cfg.layout == Layout::serial) {
            lw.norm2 = ckpt_detail::read_norm(set, prefix + ".norm2", cfg, d);
        }
        lw.ffn = ckpt_detail::read_ffn(set, prefix + ".ffn", cfg);
        return lw;
    };

    if (!cfg.precomputed) {
        Model m;
        m.config = cfg;
        m.weights.input_embeddings = set.take2("embed.in", vocab, d);
        for (int64_t i = 0; i < cfg.n_layers; ++i) {
            m.weights.layers.push_back(read_full_layer(static_cast<size_t>(i)));
        }
        m.weights.final_norm = ckpt_detail::read_norm(set, "norm.final", cfg, d);
        m.weights.output_embeddings = set.take2("embed.out", d, vocab);
        set.expect_empty();
        return m;
    }

    TransformedModel tm;
    tm.config = cfg;
    tm.table.vocab_size = cfg.vocab_size;
    tm.table.dim = cfg.dim;
    tm.table.e_dim = static_cast<int64_t>(e);
    Tensor2 table = set.take2("layer0.precompute", vocab, 2 * (d + e));
    tm.table.data = std::move(table.data);

    LayerWeights l0;
    l0.wp = set.take2("layer0.wp", d, d);
    if (cfg.layout == Layout::serial) {
        l0.norm2 = ckpt_detail::read_norm(set, "layer0.norm2", cfg, d);
        l0.ffn = ckpt_detail::read_ffn(set, "layer0.ffn", cfg);
    }
    tm.layers.push_back(std::move(l0));
    for (int64_t i = 1; i < cfg.n_layers; ++i) {
        tm.layers.push_back(read_full_layer(static_cast<size_t>(i)));
    }
    tm.final_norm = ckpt_detail::read_norm(set, "norm.final", cfg, d);
    tm.output_embeddings = set.take2("embed.out", d, vocab);
    set.expect_empty();
    return tm;
}

// ---------------------------------------------------------------------------
// File wrappers
// ---------------------------------------------------------------------------

namespace ckpt_detail {

inline void write_file(const std::string& path, std::span<const uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw CheckpointError(CheckpointError::Kind::open_failed,
                              "cannot open '" + path + "' for writing");
    }
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw CheckpointError(CheckpointError::Kind::open_failed,
                              "failed writing '" + path + "'");
    }
}

inline std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) {
        throw CheckpointError(CheckpointError::Kind::open_failed,
                              "cannot open '" + path + "'");
    }
    std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) {
        throw CheckpointError(CheckpointError::Kind::open_failed,
                              "failed reading '" + path + "'");
    }
    return bytes;
}

}  // namespace ckpt_detail

inline void save_checkpoint(const Model& m, const std::string& path) {
    ckpt_detail::write_file(path, checkpoint_bytes(m));
}

inline void save_checkpoint(const TransformedModel& tm, const std::string& path) {
    ckpt_detail::write_file(path, checkpoint_bytes(tm));
}

inline Checkpoint load_checkpoint(const std::string& path) {
    return load_checkpoint_bytes(ckpt_detail::read_file(path));
}

inline Model load_model(const std::string& path) {
    Checkpoint c = load_checkpoint(path);
    if (!std::holds_alternative<Model>(c)) {
        throw CheckpointError(CheckpointError::Kind::inconsistent,
                              "'" + path + "' holds a precomputed model, expected a baseline");
    }
    return std::move(std::get<Model>(c));
}

inline TransformedModel load_transformed(const std::string& path) {
    Checkpoint c = load_checkpoint(path);
    if (!std::holds_alternative<TransformedModel>(c)) {
        throw CheckpointError(CheckpointError::Kind::inconsistent,
                              "'" + path + "' holds a baseline model, expected a precomputed one");
    }
    return std::move(std::get<TransformedModel>(c));
}

}  // namespace l1pc

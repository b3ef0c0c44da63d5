#pragma once

#include <stdexcept>
#include <string>

namespace l1pc {

// Dimension mismatch in a math kernel (matmul shapes, odd rope width, ...).
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inconsistent or unsupported model configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad runtime input: out-of-range token id, empty prompt, cache overflow.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// The first-layer precompute only applies to rotary-PE models; absolute
// positional encoding sits between the embedding and layer 1 and blocks it.
struct IneligibleArchitecture : std::runtime_error {
    explicit IneligibleArchitecture(const std::string& msg) : std::runtime_error(msg) {}
};

struct CheckpointError : std::runtime_error {
    enum class Kind {
        open_failed,
        bad_magic,
        version_mismatch,
        truncated,
        inconsistent,  // tensor set / shape / dtype does not match the config
        duplicate_tensor,
    };

    CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}

    Kind kind;
};

}  // namespace l1pc

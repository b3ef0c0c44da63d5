#pragma once

#include <cstdint>

namespace l1pc {

// Read/flop counters for the region of the model the precompute replaces.
// A Meter is passed explicitly into the engine; a null meter costs nothing.
// Counters increment at each scalar fetch, so they are exact and
// deterministic across runs.
struct Meter {
    // scalar reads from the input-embedding table (baseline) or the
    // precompute table (transformed): d or 2(d+e) per token
    uint64_t fetch_reads = 0;

    // scalar reads from the first layer's replaceable weight region,
    // counted once per batch by the traversal in metered_forward
    uint64_t region_weight_reads = 0;

    // multiply-accumulate flops (2 per MAC) of first-layer parameter
    // matmuls: Q, K, V, P, FFN and router
    uint64_t flops_layer1 = 0;
};

}  // namespace l1pc

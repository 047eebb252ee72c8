#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sifted/encoder.hpp"
#include "sifted/tensor.hpp"

namespace sifted {

// Sigmoid gate over the shared features. The dense form learns a full
// D x D matrix over the flattened sequence (D = l * d_model); the factorized
// form applies one shared d_model x d_model gate to every token row, which is
// the only tractable option at production scale.
struct GateCell {
    Tensor w;
    Tensor b;
    bool factorized = false;
    std::size_t seq_len = 0;
    std::size_t d_model = 0;

    static GateCell init(std::size_t seq_len, std::size_t d_model, bool factorized,
                         std::uint64_t seed, const std::string& name);
    // h_shared: l x d_model. Returns {g, G}, both flattened to 1 x D.
    std::pair<Tensor, Tensor> forward(const Tensor& h_shared) const;
    void collect(const std::string& prefix,
                 std::vector<std::pair<std::string, Tensor>>& out) const;
};

// Cross-attention where the task's input embeddings query the shared
// features; keys and values are projections of the shared features.
struct AttentionCell {
    MultiHeadAttention mha;

    static AttentionCell init(std::size_t d_model, std::size_t heads, std::uint64_t seed,
                              const std::string& name);
    Tensor forward(const Tensor& e_task, const Tensor& h_shared,
                   const std::vector<std::uint8_t>& mask,
                   std::vector<Tensor>* attn_out = nullptr) const;
    void collect(const std::string& prefix,
                 std::vector<std::pair<std::string, Tensor>>& out) const;
};

// [G; |G-A|; G.A; A] of width 4D.
Tensor fuse(const Tensor& gated, const Tensor& attended_flat);

}  // namespace sifted

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sifted/tensor.hpp"

namespace sifted {

struct EncoderConfig {
    std::size_t d_model = 300;
    std::size_t heads = 6;
    std::size_t blocks = 2;
    double attention_dropout = 0.7;
    std::size_t ffn_inner = 0;  // 0 means 2 * d_model

    std::size_t head_dim() const { return d_model / heads; }
    std::size_t ffn_width() const { return ffn_inner ? ffn_inner : 2 * d_model; }
    void validate() const;
};

// softmax(Q K^T / sqrt(width)) V with key masking. Weights for masked keys
// are exactly zero; a row with every key masked yields a zero output row.
// `weights_out`, when given, receives the post-softmax attention matrix.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const std::vector<std::uint8_t>& key_mask,
                            Tensor* weights_out = nullptr);

struct MultiHeadAttention {
    std::vector<Tensor> wq, wk, wv;  // per head, d_model x d_k
    Tensor wo;                       // d_model x d_model
    std::size_t heads = 0;
    std::size_t d_k = 0;
    double attn_dropout = 0.0;

    static MultiHeadAttention init(std::size_t d_model, std::size_t heads, double attn_dropout,
                                   std::uint64_t seed, const std::string& name);
    // Queries projected from q_src, keys and values from kv_src. Set
    // `attn_out` to collect per-head attention matrices (pre-dropout).
    Tensor forward(const Tensor& q_src, const Tensor& kv_src,
                   const std::vector<std::uint8_t>& key_mask, bool training,
                   std::mt19937_64& rng, std::vector<Tensor>* attn_out = nullptr) const;
    void collect(const std::string& prefix,
                 std::vector<std::pair<std::string, Tensor>>& out) const;
};

struct EncoderBlock {
    MultiHeadAttention attn;
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;

    static EncoderBlock init(const EncoderConfig& cfg, std::uint64_t seed,
                             const std::string& name);
    Tensor forward(const Tensor& x, const std::vector<std::uint8_t>& mask, bool training,
                   std::mt19937_64& rng) const;
    void collect(const std::string& prefix,
                 std::vector<std::pair<std::string, Tensor>>& out) const;
};

// Stack of self-attention blocks; an empty stack is the identity.
struct Encoder {
    EncoderConfig config;
    std::vector<EncoderBlock> blocks;

    static Encoder init(const EncoderConfig& cfg, std::uint64_t seed, const std::string& name);
    Tensor forward(const Tensor& e, const std::vector<std::uint8_t>& mask, bool training,
                   std::mt19937_64& rng) const;
    void collect(const std::string& prefix,
                 std::vector<std::pair<std::string, Tensor>>& out) const;
};

}  // namespace sifted

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sifted/tensor.hpp"

namespace sifted {

// Token-to-vector lookup built either from a pretrained word-vector file or
// from seeded random draws. Unknown tokens map to a single learned
// out-of-vocabulary slot appended to the embedding table.
class Vocabulary {
public:
    static Vocabulary load(const std::string& path, std::size_t expected_dim);
    // Per-token N(0, 0.1) vectors; each token's draw is seeded from the token
    // itself, so the result does not depend on insertion order.
    static Vocabulary random_init(const std::vector<std::string>& tokens, std::size_t dim,
                                  std::uint64_t seed);
    // Tokens only, no initial vectors (checkpoint restore).
    static Vocabulary from_tokens(std::vector<std::string> tokens, std::size_t dim);

    std::size_t size() const { return tokens_.size(); }
    std::size_t dim() const { return dim_; }
    std::size_t oov_id() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    bool contains(const std::string& token) const { return index_.count(token) > 0; }
    // Table row for a token; unknown tokens get the OOV row.
    std::size_t id_of(const std::string& token) const;
    const std::vector<double>& initial_vector(std::size_t id) const { return vectors_[id]; }

    // Trainable table of size (|V|+1) x dim; the extra row is the learned OOV
    // vector, initialised N(0, 0.01).
    Tensor make_table(std::uint64_t seed, bool trainable = true) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<double>> vectors_;  // empty when restored from checkpoint
    std::size_t dim_ = 0;
};

// A tokenised text turned into the model input matrix: word-vector block in
// the first d_w columns, one-hot position block in the last d_p columns.
// Padding rows are all zero and masked out.
struct EmbeddedSequence {
    Tensor matrix;                    // l x (d_w + d_p)
    std::vector<std::uint8_t> mask;   // 1 = real token
    std::size_t length = 0;           // tokens kept before padding
    std::vector<long> token_ids;      // table row per position, -1 for padding
    std::vector<std::string> tokens;  // the kept tokens
};

EmbeddedSequence embed(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                       const Tensor& table, std::size_t max_len, std::size_t d_pos);

}  // namespace sifted

#include "sifted/embeddings.hpp"

#include <fstream>
#include <sstream>

#include "sifted/errors.hpp"
#include "sifted/rng.hpp"

namespace sifted {

Vocabulary Vocabulary::load(const std::string& path, std::size_t expected_dim) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open word-vector file: " + path);
    Vocabulary v;
    v.dim_ = expected_dim;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<double> vec;
        vec.reserve(expected_dim);
        double x;
        while (ls >> x) vec.push_back(x);
        if (vec.size() != expected_dim)
            throw ParseError("word-vector file " + path + " line " + std::to_string(line_no) +
                             ": token '" + token + "' has " + std::to_string(vec.size()) +
                             " values, expected " + std::to_string(expected_dim));
        if (v.index_.count(token)) continue;  // first occurrence wins
        v.index_.emplace(token, v.tokens_.size());
        v.tokens_.push_back(token);
        v.vectors_.push_back(std::move(vec));
    }
    if (v.tokens_.empty()) throw ParseError("word-vector file is empty: " + path);
    return v;
}

Vocabulary Vocabulary::random_init(const std::vector<std::string>& tokens, std::size_t dim,
                                   std::uint64_t seed) {
    Vocabulary v;
    v.dim_ = dim;
    for (const auto& t : tokens) {
        if (v.index_.count(t)) continue;
        auto rng = seeded_rng(seed, "wordvec." + t);
        std::normal_distribution<double> dist(0.0, 0.1);
        std::vector<double> vec(dim);
        for (auto& x : vec) x = dist(rng);
        v.index_.emplace(t, v.tokens_.size());
        v.tokens_.push_back(t);
        v.vectors_.push_back(std::move(vec));
    }
    return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, std::size_t dim) {
    Vocabulary v;
    v.dim_ = dim;
    for (auto& t : tokens) {
        if (v.index_.count(t)) continue;
        v.index_.emplace(t, v.tokens_.size());
        v.tokens_.push_back(std::move(t));
    }
    return v;
}

std::size_t Vocabulary::id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? oov_id() : it->second;
}

Tensor Vocabulary::make_table(std::uint64_t seed, bool trainable) const {
    std::vector<double> data((size() + 1) * dim_, 0.0);
    for (std::size_t i = 0; i < vectors_.size(); ++i)
        std::copy(vectors_[i].begin(), vectors_[i].end(), data.begin() + i * dim_);
    auto rng = seeded_rng(seed, "embeddings.oov");
    std::normal_distribution<double> dist(0.0, 0.01);
    for (std::size_t j = 0; j < dim_; ++j) data[size() * dim_ + j] = dist(rng);
    return Tensor::from_data({size() + 1, dim_}, std::move(data), trainable);
}

EmbeddedSequence embed(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                       const Tensor& table, std::size_t max_len, std::size_t d_pos) {
    if (max_len > d_pos)
        throw ConfigError("max_len " + std::to_string(max_len) +
                          " exceeds position dimension " + std::to_string(d_pos));
    std::size_t d_word = vocab.dim();
    if (table.shape() != Shape{vocab.size() + 1, d_word})
        throw ShapeError("embedding table " + shape_str(table.shape()) + " does not match vocabulary of " +
                         std::to_string(vocab.size()) + " tokens, dim " + std::to_string(d_word));

    EmbeddedSequence seq;
    seq.length = std::min(tokens.size(), max_len);
    seq.mask.assign(max_len, 0);
    seq.token_ids.assign(max_len, -1);
    for (std::size_t i = 0; i < seq.length; ++i) {
        seq.mask[i] = 1;
        seq.token_ids[i] = static_cast<long>(vocab.id_of(tokens[i]));
        seq.tokens.push_back(tokens[i]);
    }

    Tensor words = gather_rows(table, seq.token_ids);  // l x d_word, zero rows for padding
    std::vector<double> pos(max_len * d_pos, 0.0);
    for (std::size_t i = 0; i < seq.length; ++i) pos[i * d_pos + i] = 1.0;
    Tensor positions = Tensor::from_data({max_len, d_pos}, std::move(pos));
    seq.matrix = concat({words, positions}, 1);
    return seq;
}

}  // namespace sifted

#include "sifted/encoder.hpp"

#include <cmath>

#include "sifted/errors.hpp"
#include "sifted/rng.hpp"

namespace sifted {

void EncoderConfig::validate() const {
    if (heads == 0 || d_model % heads != 0)
        throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by " +
                          std::to_string(heads) + " heads");
    if (blocks == 0) throw ConfigError("encoder needs at least one block");
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const std::vector<std::uint8_t>& key_mask, Tensor* weights_out) {
    if (q.cols() != k.cols())
        throw ShapeError("attention: query width " + shape_str(q.shape()) +
                         " vs key width " + shape_str(k.shape()));
    if (k.rows() != v.rows())
        throw ShapeError("attention: " + std::to_string(k.rows()) + " keys vs " +
                         std::to_string(v.rows()) + " value rows");
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
    Tensor weights = masked_softmax_rows(scores, key_mask);
    if (weights_out) *weights_out = weights;
    return matmul(weights, v);
}

MultiHeadAttention MultiHeadAttention::init(std::size_t d_model, std::size_t heads,
                                            double attn_dropout, std::uint64_t seed,
                                            const std::string& name) {
    if (heads == 0 || d_model % heads != 0)
        throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by " +
                          std::to_string(heads) + " heads");
    MultiHeadAttention m;
    m.heads = heads;
    m.d_k = d_model / heads;
    m.attn_dropout = attn_dropout;
    for (std::size_t h = 0; h < heads; ++h) {
        std::string hn = name + ".head" + std::to_string(h);
        auto rq = seeded_rng(seed, hn + ".wq");
        auto rk = seeded_rng(seed, hn + ".wk");
        auto rv = seeded_rng(seed, hn + ".wv");
        m.wq.push_back(Tensor::xavier_uniform({d_model, m.d_k}, rq));
        m.wk.push_back(Tensor::xavier_uniform({d_model, m.d_k}, rk));
        m.wv.push_back(Tensor::xavier_uniform({d_model, m.d_k}, rv));
    }
    auto ro = seeded_rng(seed, name + ".wo");
    m.wo = Tensor::xavier_uniform({d_model, d_model}, ro);
    return m;
}

Tensor MultiHeadAttention::forward(const Tensor& q_src, const Tensor& kv_src,
                                   const std::vector<std::uint8_t>& key_mask, bool training,
                                   std::mt19937_64& rng, std::vector<Tensor>* attn_out) const {
    if (q_src.cols() != wq[0].rows() || kv_src.cols() != wk[0].rows())
        throw ShapeError("multi_head: input width " + shape_str(q_src.shape()) + " / " +
                         shape_str(kv_src.shape()) + " vs projection " +
                         shape_str(wq[0].shape()));
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor qh = matmul(q_src, wq[h]);
        Tensor kh = matmul(kv_src, wk[h]);
        Tensor vh = matmul(kv_src, wv[h]);
        double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d_k));
        Tensor weights = masked_softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_d),
                                             key_mask);
        if (attn_out) attn_out->push_back(weights);
        weights = dropout(weights, attn_dropout, training, rng);
        outs.push_back(matmul(weights, vh));
    }
    return matmul(concat(outs, 1), wo);
}

void MultiHeadAttention::collect(const std::string& prefix,
                                 std::vector<std::pair<std::string, Tensor>>& out) const {
    for (std::size_t h = 0; h < heads; ++h) {
        std::string hn = prefix + ".head" + std::to_string(h);
        out.emplace_back(hn + ".wq", wq[h]);
        out.emplace_back(hn + ".wk", wk[h]);
        out.emplace_back(hn + ".wv", wv[h]);
    }
    out.emplace_back(prefix + ".wo", wo);
}

EncoderBlock EncoderBlock::init(const EncoderConfig& cfg, std::uint64_t seed,
                                const std::string& name) {
    EncoderBlock b;
    b.attn = MultiHeadAttention::init(cfg.d_model, cfg.heads, cfg.attention_dropout, seed,
                                      name + ".attn");
    std::size_t inner = cfg.ffn_width();
    auto r1 = seeded_rng(seed, name + ".ffn.w1");
    auto r2 = seeded_rng(seed, name + ".ffn.w2");
    b.ffn_w1 = Tensor::xavier_uniform({cfg.d_model, inner}, r1);
    b.ffn_b1 = Tensor::zeros({inner}, true);
    b.ffn_w2 = Tensor::xavier_uniform({inner, cfg.d_model}, r2);
    b.ffn_b2 = Tensor::zeros({cfg.d_model}, true);
    b.ln1_gain = Tensor::full({cfg.d_model}, 1.0, true);
    b.ln1_bias = Tensor::zeros({cfg.d_model}, true);
    b.ln2_gain = Tensor::full({cfg.d_model}, 1.0, true);
    b.ln2_bias = Tensor::zeros({cfg.d_model}, true);
    return b;
}

Tensor EncoderBlock::forward(const Tensor& x, const std::vector<std::uint8_t>& mask,
                             bool training, std::mt19937_64& rng) const {
    Tensor attended = attn.forward(x, x, mask, training, rng);
    Tensor x1 = layer_norm_rows(x + attended, ln1_gain, ln1_bias);
    Tensor hidden = relu(add_row_bias(matmul(x1, ffn_w1), ffn_b1));
    Tensor ffn = add_row_bias(matmul(hidden, ffn_w2), ffn_b2);
    return layer_norm_rows(x1 + ffn, ln2_gain, ln2_bias);
}

void EncoderBlock::collect(const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor>>& out) const {
    attn.collect(prefix + ".attn", out);
    out.emplace_back(prefix + ".ffn.w1", ffn_w1);
    out.emplace_back(prefix + ".ffn.b1", ffn_b1);
    out.emplace_back(prefix + ".ffn.w2", ffn_w2);
    out.emplace_back(prefix + ".ffn.b2", ffn_b2);
    out.emplace_back(prefix + ".ln1.gain", ln1_gain);
    out.emplace_back(prefix + ".ln1.bias", ln1_bias);
    out.emplace_back(prefix + ".ln2.gain", ln2_gain);
    out.emplace_back(prefix + ".ln2.bias", ln2_bias);
}

Encoder Encoder::init(const EncoderConfig& cfg, std::uint64_t seed, const std::string& name) {
    cfg.validate();
    Encoder e;
    e.config = cfg;
    for (std::size_t i = 0; i < cfg.blocks; ++i)
        e.blocks.push_back(EncoderBlock::init(cfg, seed, name + ".block" + std::to_string(i)));
    return e;
}

Tensor Encoder::forward(const Tensor& e, const std::vector<std::uint8_t>& mask, bool training,
                        std::mt19937_64& rng) const {
    Tensor x = e;
    for (const auto& block : blocks) x = block.forward(x, mask, training, rng);
    return x;
}

void Encoder::collect(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>& out) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
        blocks[i].collect(prefix + ".block" + std::to_string(i), out);
}

}  // namespace sifted

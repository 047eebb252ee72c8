#include "sifted/selected_sharing.hpp"

#include "sifted/errors.hpp"
#include "sifted/rng.hpp"

namespace sifted {

GateCell GateCell::init(std::size_t seq_len, std::size_t d_model, bool factorized,
                        std::uint64_t seed, const std::string& name) {
    GateCell g;
    g.factorized = factorized;
    g.seq_len = seq_len;
    g.d_model = d_model;
    std::size_t width = factorized ? d_model : seq_len * d_model;
    auto rw = seeded_rng(seed, name + ".w");
    g.w = Tensor::xavier_uniform({width, width}, rw);
    g.b = Tensor::zeros({width}, true);
    return g;
}

std::pair<Tensor, Tensor> GateCell::forward(const Tensor& h_shared) const {
    if (h_shared.rows() != seq_len || h_shared.cols() != d_model)
        throw ShapeError("gate: shared features " + shape_str(h_shared.shape()) +
                         " vs configured " + std::to_string(seq_len) + "x" +
                         std::to_string(d_model));
    if (factorized) {
        // same gate applied to every token row
        Tensor g_mat = sigmoid(add_row_bias(matmul(h_shared, w), b));
        Tensor gated = mul(g_mat, h_shared);
        return {flatten_row(g_mat), flatten_row(gated)};
    }
    Tensor flat = flatten_row(h_shared);
    Tensor g = sigmoid(add_row_bias(matmul(flat, w), b));
    return {g, mul(g, flat)};
}

void GateCell::collect(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor>>& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
}

AttentionCell AttentionCell::init(std::size_t d_model, std::size_t heads, std::uint64_t seed,
                                  const std::string& name) {
    AttentionCell c;
    c.mha = MultiHeadAttention::init(d_model, heads, 0.0, seed, name);
    return c;
}

Tensor AttentionCell::forward(const Tensor& e_task, const Tensor& h_shared,
                              const std::vector<std::uint8_t>& mask,
                              std::vector<Tensor>* attn_out) const {
    if (e_task.rows() != h_shared.rows())
        throw ShapeError("attention cell: " + std::to_string(e_task.rows()) +
                         " query rows vs " + std::to_string(h_shared.rows()) + " shared rows");
    // no dropout inside the selected sharing layer
    std::mt19937_64 unused(0);
    return mha.forward(e_task, h_shared, mask, false, unused, attn_out);
}

void AttentionCell::collect(const std::string& prefix,
                            std::vector<std::pair<std::string, Tensor>>& out) const {
    mha.collect(prefix, out);
}

Tensor fuse(const Tensor& gated, const Tensor& attended_flat) {
    if (gated.size() != attended_flat.size())
        throw ShapeError("fuse: gated " + shape_str(gated.shape()) + " vs attended " +
                         shape_str(attended_flat.shape()));
    return concat({gated, abs_diff(gated, attended_flat), mul(gated, attended_flat),
                   attended_flat},
                  1);
}

}  // namespace sifted

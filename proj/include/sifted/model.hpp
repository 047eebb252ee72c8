#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sifted/config.hpp"
#include "sifted/embeddings.hpp"
#include "sifted/encoder.hpp"
#include "sifted/selected_sharing.hpp"
#include "sifted/tensor.hpp"

namespace sifted {

struct LossWeights {
    double fake = 0.6;
    double stance = 0.4;

    static LossWeights from_lambda_fake(double lambda_fake) {
        return {lambda_fake, 1.0 - lambda_fake};
    }
};

// Mean categorical cross-entropy piece for one prediction; probabilities are
// clamped to [1e-12, 1] before the log.
Tensor cross_entropy(const Tensor& probs, std::size_t label);

// Intermediate tensors of one forward pass, for wiring tests and inspection.
struct ForwardTrace {
    Tensor embedded;         // E, l x d_model
    Tensor h_private;        // l x d_model
    Tensor h_shared;         // l x d_model (multi-task variants)
    Tensor gate_activations; // g, 1 x D (gate variants)
    Tensor gated;            // G, 1 x D
    Tensor attended_matrix;  // l x d_model (attention variants)
    Tensor attended;         // A, 1 x D
    Tensor ssl;              // selected-sharing block fed to the head
    Tensor features;         // F = [flat(H_private); ssl]
    Tensor probs;            // 1 x C
    std::vector<Tensor> cell_attention;  // per-head weights of the attention cell
};

using LabeledSequence = std::pair<EmbeddedSequence, std::size_t>;

// Two task networks over a shared trunk: per-task private encoder, shared
// encoder, per-task selected-sharing layer (gate and/or attention cell per
// variant), per-task softmax head over [private features; selected shared
// features]. The single-task variant keeps only the fake-news network.
class SiftedModel {
public:
    SiftedModel(ModelConfig cfg, Vocabulary vocab, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    const Vocabulary& vocab() const { return vocab_; }
    Tensor embedding_table() const { return table_; }
    std::uint64_t seed() const { return seed_; }

    bool has_task(Task t) const;
    std::size_t feature_width() const;  // width of F fed to each head
    std::size_t ssl_width() const;      // width of the selected-sharing block

    EmbeddedSequence embed_tokens(const std::vector<std::string>& tokens) const;

    Tensor forward(const EmbeddedSequence& x, Task task, bool training,
                   ForwardTrace* trace = nullptr);

    // L = lambda_fake * mean CE(fake batch) + lambda_stance * mean CE(stance batch).
    Tensor loss(const std::vector<LabeledSequence>& fake_batch,
                const std::vector<LabeledSequence>& stance_batch, const LossWeights& weights,
                bool training);

    std::vector<std::pair<std::string, Tensor>> parameters() const;     // trainable only
    std::vector<std::pair<std::string, Tensor>> named_tensors() const;  // all state

    void save(const std::string& path) const;
    static SiftedModel load(const std::string& path);

    std::mt19937_64& dropout_rng() { return dropout_rng_; }
    void reseed_dropout(std::uint64_t seed);

    const Encoder& shared_encoder() const { return shared_; }
    const Encoder& private_encoder(Task t) const;
    const GateCell& gate_cell(Task t) const;
    const AttentionCell& attention_cell(Task t) const;

private:
    struct Head {
        Tensor w;
        Tensor b;
    };

    Tensor head_forward(const Tensor& features, Task task, bool training);

    ModelConfig config_;
    Vocabulary vocab_;
    std::uint64_t seed_ = 0;
    Tensor table_;
    Encoder shared_;
    Encoder private_fake_;
    Encoder private_stance_;
    GateCell gate_fake_, gate_stance_;
    AttentionCell attn_fake_, attn_stance_;
    Head head_fake_, head_stance_;
    std::mt19937_64 dropout_rng_;
};

}  // namespace sifted

#include "sifted/model.hpp"

#include "sifted/errors.hpp"
#include "sifted/rng.hpp"

namespace sifted {

namespace {

bool variant_has_gate(Variant v) { return v == Variant::MT_G || v == Variant::MT_GA; }
bool variant_has_attention(Variant v) { return v == Variant::MT_A || v == Variant::MT_GA; }
bool variant_multi_task(Variant v) { return v != Variant::Single; }

}  // namespace

Tensor cross_entropy(const Tensor& probs, std::size_t label) {
    if (label >= probs.size())
        throw ShapeError("cross_entropy: label " + std::to_string(label) +
                         " out of range for " + shape_str(probs.shape()));
    return scale(pick(log_clamped(probs, 1e-12), label), -1.0);
}

SiftedModel::SiftedModel(ModelConfig cfg, Vocabulary vocab, std::uint64_t seed)
    : config_(std::move(cfg)), vocab_(std::move(vocab)), seed_(seed) {
    config_.validate();
    if (vocab_.dim() != config_.d_word)
        throw ConfigError("vocabulary width " + std::to_string(vocab_.dim()) +
                          " does not match d_word " + std::to_string(config_.d_word));

    table_ = vocab_.make_table(seed, !config_.freeze_embeddings);

    EncoderConfig enc{config_.d_model(), config_.heads, config_.blocks,
                      config_.attention_dropout, config_.ffn_inner};
    private_fake_ = Encoder::init(enc, seed, "encoder.fake");
    Variant v = config_.variant;
    if (variant_multi_task(v)) {
        shared_ = Encoder::init(enc, seed, "encoder.shared");
        private_stance_ = Encoder::init(enc, seed, "encoder.stance");
        bool factorized = config_.gate_factorized_effective();
        if (variant_has_gate(v)) {
            gate_fake_ = GateCell::init(config_.max_len, config_.d_model(), factorized, seed,
                                        "ssl.fake.gate");
            gate_stance_ = GateCell::init(config_.max_len, config_.d_model(), factorized, seed,
                                          "ssl.stance.gate");
        }
        if (variant_has_attention(v)) {
            attn_fake_ = AttentionCell::init(config_.d_model(), config_.ssl_heads, seed,
                                             "ssl.fake.attn");
            attn_stance_ = AttentionCell::init(config_.d_model(), config_.ssl_heads, seed,
                                               "ssl.stance.attn");
        }
    }

    std::size_t fw = feature_width();
    auto rf = seeded_rng(seed, "head.fake.w");
    head_fake_ = {Tensor::xavier_uniform({fw, kFakeClasses}, rf),
                  Tensor::zeros({kFakeClasses}, true)};
    if (variant_multi_task(v)) {
        auto rs = seeded_rng(seed, "head.stance.w");
        head_stance_ = {Tensor::xavier_uniform({fw, kStanceClasses}, rs),
                        Tensor::zeros({kStanceClasses}, true)};
    }
    dropout_rng_ = seeded_rng(seed, "dropout");
}

bool SiftedModel::has_task(Task t) const {
    return t == Task::Fake || variant_multi_task(config_.variant);
}

std::size_t SiftedModel::ssl_width() const {
    std::size_t D = config_.flat_dim();
    switch (config_.variant) {
        case Variant::Single: return 0;
        case Variant::MT: return D;      // raw flattened shared features
        case Variant::MT_G: return D;    // G
        case Variant::MT_A: return D;    // A
        case Variant::MT_GA: return 4 * D;
    }
    return 0;
}

std::size_t SiftedModel::feature_width() const { return config_.flat_dim() + ssl_width(); }

EmbeddedSequence SiftedModel::embed_tokens(const std::vector<std::string>& tokens) const {
    return embed(tokens, vocab_, table_, config_.max_len, config_.d_pos);
}

const Encoder& SiftedModel::private_encoder(Task t) const {
    return t == Task::Fake ? private_fake_ : private_stance_;
}

const GateCell& SiftedModel::gate_cell(Task t) const {
    return t == Task::Fake ? gate_fake_ : gate_stance_;
}

const AttentionCell& SiftedModel::attention_cell(Task t) const {
    return t == Task::Fake ? attn_fake_ : attn_stance_;
}

Tensor SiftedModel::head_forward(const Tensor& features, Task task, bool training) {
    const Head& head = task == Task::Fake ? head_fake_ : head_stance_;
    Tensor dropped = dropout(features, config_.output_dropout, training, dropout_rng_);
    return softmax(add_row_bias(matmul(dropped, head.w), head.b), -1);
}

Tensor SiftedModel::forward(const EmbeddedSequence& x, Task task, bool training,
                            ForwardTrace* trace) {
    if (!has_task(task))
        throw ConfigError("variant " + variant_name(config_.variant) + " has no " +
                          task_name(task) + " network");
    if (x.matrix.rows() != config_.max_len || x.matrix.cols() != config_.d_model())
        throw ShapeError("forward: input " + shape_str(x.matrix.shape()) + " vs configured " +
                         std::to_string(config_.max_len) + "x" +
                         std::to_string(config_.d_model()));

    const Encoder& priv = task == Task::Fake ? private_fake_ : private_stance_;
    Tensor h_private = priv.forward(x.matrix, x.mask, training, dropout_rng_);
    Tensor features;
    ForwardTrace local;
    ForwardTrace& tr = trace ? *trace : local;
    tr.embedded = x.matrix;
    tr.h_private = h_private;

    Variant v = config_.variant;
    if (!variant_multi_task(v)) {
        features = flatten_row(h_private);
    } else {
        Tensor h_shared = shared_.forward(x.matrix, x.mask, training, dropout_rng_);
        tr.h_shared = h_shared;
        Tensor ssl;
        if (v == Variant::MT) {
            ssl = flatten_row(h_shared);
        } else if (v == Variant::MT_G) {
            auto [g, gated] = gate_cell(task).forward(h_shared);
            tr.gate_activations = g;
            tr.gated = gated;
            ssl = gated;
        } else if (v == Variant::MT_A) {
            Tensor a_mat = attention_cell(task).forward(x.matrix, h_shared, x.mask,
                                                        trace ? &tr.cell_attention : nullptr);
            tr.attended_matrix = a_mat;
            Tensor a = flatten_row(a_mat);
            tr.attended = a;
            ssl = a;
        } else {  // MT_GA
            auto [g, gated] = gate_cell(task).forward(h_shared);
            Tensor a_mat = attention_cell(task).forward(x.matrix, h_shared, x.mask,
                                                        trace ? &tr.cell_attention : nullptr);
            tr.gate_activations = g;
            tr.gated = gated;
            tr.attended_matrix = a_mat;
            Tensor a = flatten_row(a_mat);
            tr.attended = a;
            ssl = fuse(gated, a);
        }
        tr.ssl = ssl;
        features = concat({flatten_row(h_private), ssl}, 1);
    }
    tr.features = features;
    Tensor probs = head_forward(features, task, training);
    tr.probs = probs;
    return probs;
}

Tensor SiftedModel::loss(const std::vector<LabeledSequence>& fake_batch,
                         const std::vector<LabeledSequence>& stance_batch,
                         const LossWeights& weights, bool training) {
    if (fake_batch.empty() && stance_batch.empty())
        throw TrainingError("loss: both task batches are empty");
    auto batch_mean = [&](const std::vector<LabeledSequence>& batch, Task task) {
        std::vector<Tensor> terms;
        terms.reserve(batch.size());
        for (const auto& [seq, label] : batch)
            terms.push_back(cross_entropy(forward(seq, task, training), label));
        return scale(add_n(terms), 1.0 / static_cast<double>(batch.size()));
    };
    if (stance_batch.empty()) return scale(batch_mean(fake_batch, Task::Fake), weights.fake);
    if (fake_batch.empty()) return scale(batch_mean(stance_batch, Task::Stance), weights.stance);
    return scale(batch_mean(fake_batch, Task::Fake), weights.fake) +
           scale(batch_mean(stance_batch, Task::Stance), weights.stance);
}

std::vector<std::pair<std::string, Tensor>> SiftedModel::parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (auto& [name, t] : named_tensors())
        if (t.requires_grad()) out.emplace_back(name, t);
    return out;
}

std::vector<std::pair<std::string, Tensor>> SiftedModel::named_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("embeddings.table", table_);
    private_fake_.collect("encoder.fake", out);
    Variant v = config_.variant;
    if (variant_multi_task(v)) {
        shared_.collect("encoder.shared", out);
        private_stance_.collect("encoder.stance", out);
        if (variant_has_gate(v)) {
            gate_fake_.collect("ssl.fake.gate", out);
            gate_stance_.collect("ssl.stance.gate", out);
        }
        if (variant_has_attention(v)) {
            attn_fake_.collect("ssl.fake.attn", out);
            attn_stance_.collect("ssl.stance.attn", out);
        }
    }
    out.emplace_back("head.fake.w", head_fake_.w);
    out.emplace_back("head.fake.b", head_fake_.b);
    if (variant_multi_task(v)) {
        out.emplace_back("head.stance.w", head_stance_.w);
        out.emplace_back("head.stance.b", head_stance_.b);
    }
    return out;
}

void SiftedModel::reseed_dropout(std::uint64_t seed) { dropout_rng_ = seeded_rng(seed, "dropout"); }

}  // namespace sifted

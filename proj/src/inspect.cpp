#include "sifted/inspect.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace sifted {

namespace {

// rank tokens by the largest |feature| in their slice of a token-major block
nlohmann::json top_tokens(const std::vector<std::string>& tokens, const double* block,
                          std::size_t d_model, std::size_t stride_tokens, std::size_t quarters,
                          std::size_t k) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        double best = 0.0;
        for (std::size_t q = 0; q < quarters; ++q)
            for (std::size_t j = 0; j < d_model; ++j)
                best = std::max(best,
                                std::abs(block[q * stride_tokens * d_model + t * d_model + j]));
        scored.push_back({best, t});
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i)
        out.push_back({{"token", tokens[scored[i].second]},
                       {"position", scored[i].second},
                       {"score", scored[i].first}});
    return out;
}

}  // namespace

nlohmann::json inspection_json(SiftedModel& model, const std::vector<TaskInstance>& instances,
                               std::size_t top_k) {
    const ModelConfig& cfg = model.config();
    std::size_t dm = cfg.d_model();
    bool has_gate = cfg.variant == Variant::MT_G || cfg.variant == Variant::MT_GA;
    bool has_attn = cfg.variant == Variant::MT_A || cfg.variant == Variant::MT_GA;

    nlohmann::json out;
    out["variant"] = variant_name(cfg.variant);
    out["instances"] = nlohmann::json::array();
    for (const auto& inst : instances) {
        EmbeddedSequence seq = model.embed_tokens(inst.tokens);
        ForwardTrace trace;
        Tensor probs = model.forward(seq, inst.task, false, &trace);
        std::size_t len = seq.length;

        nlohmann::json j;
        j["thread_id"] = inst.thread_id;
        j["task"] = task_name(inst.task);
        j["label"] = inst.label;
        j["tokens"] = seq.tokens;
        j["probabilities"] = probs.values();

        if (has_gate) {
            const auto& g = trace.gate_activations.values();
            std::vector<double> per_token(len);
            for (std::size_t t = 0; t < len; ++t) {
                double s = 0.0;
                for (std::size_t k = 0; k < dm; ++k) s += g[t * dm + k];
                per_token[t] = s / static_cast<double>(dm);
            }
            j["gate"] = {{"per_token_mean", per_token}};
        }
        if (has_attn) {
            nlohmann::json heads = nlohmann::json::array();
            for (const auto& w : trace.cell_attention) {
                nlohmann::json rows = nlohmann::json::array();
                for (std::size_t i = 0; i < len; ++i) {
                    std::vector<double> row(len);
                    for (std::size_t c = 0; c < len; ++c) row[c] = w.at(i, c);
                    rows.push_back(row);
                }
                heads.push_back(rows);
            }
            j["attention"] = {{"heads", heads}};
        }

        nlohmann::json tops;
        tops["private"] = top_tokens(seq.tokens, trace.h_private.values().data(), dm,
                                     cfg.max_len, 1, top_k);
        if (trace.h_shared.defined())
            tops["shared"] = top_tokens(seq.tokens, trace.h_shared.values().data(), dm,
                                        cfg.max_len, 1, top_k);
        if (trace.ssl.defined()) {
            std::size_t quarters = trace.ssl.size() / cfg.flat_dim();
            tops["selected"] = top_tokens(seq.tokens, trace.ssl.values().data(), dm,
                                          cfg.max_len, quarters, top_k);
        }
        j["top_tokens"] = tops;
        out["instances"].push_back(std::move(j));
    }
    return out;
}

void write_inspection(SiftedModel& model, const std::vector<TaskInstance>& instances,
                      std::ostream& out, std::size_t top_k) {
    out << inspection_json(model, instances, top_k).dump(2) << "\n";
}

}  // namespace sifted

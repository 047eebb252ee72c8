#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

namespace sifted {

enum class Task { Fake, Stance };
enum class Variant { Single, MT, MT_G, MT_A, MT_GA };

constexpr std::size_t kFakeClasses = 2;    // true / false
constexpr std::size_t kStanceClasses = 4;  // support / deny / query / comment

std::string task_name(Task t);
std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    std::size_t max_len = 100;  // l, bounded by d_pos
    std::size_t d_word = 200;
    std::size_t d_pos = 100;
    std::size_t heads = 6;
    std::size_t blocks = 2;
    std::size_t ssl_heads = 2;
    std::size_t ffn_inner = 0;  // 0 means 2 * d_model
    double attention_dropout = 0.7;
    double output_dropout = 0.3;
    bool freeze_embeddings = false;
    // Dense gate is quadratic in l*d_model; unset means dense below the
    // threshold and factorized above it.
    std::optional<bool> gate_factorized;
    Variant variant = Variant::MT_GA;

    std::size_t d_model() const { return d_word + d_pos; }
    std::size_t flat_dim() const { return max_len * d_model(); }
    bool gate_factorized_effective() const {
        return gate_factorized.value_or(flat_dim() >= 4096);
    }
    void validate() const;
};

struct TrainConfig {
    std::size_t batch_size = 64;
    double learning_rate = 0.001;
    double lambda_fake = 0.6;  // stance weight is 1 - lambda_fake
    std::size_t epochs = 100;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
};

struct DataConfig {
    bool concat_replies = true;  // fake-news text = source ++ replies
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DataConfig data;
};

nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const RunConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace sifted

#include "sifted/config.hpp"

#include <fstream>

#include "sifted/errors.hpp"

namespace sifted {

std::string task_name(Task t) { return t == Task::Fake ? "fake" : "stance"; }

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Single: return "single";
        case Variant::MT: return "mt";
        case Variant::MT_G: return "mt-g";
        case Variant::MT_A: return "mt-a";
        case Variant::MT_GA: return "mt-g-a";
    }
    return "mt-g-a";
}

Variant variant_from_name(const std::string& name) {
    if (name == "single") return Variant::Single;
    if (name == "mt") return Variant::MT;
    if (name == "mt-g") return Variant::MT_G;
    if (name == "mt-a") return Variant::MT_A;
    if (name == "mt-g-a") return Variant::MT_GA;
    throw ConfigError("unknown variant '" + name + "' (expected single|mt|mt-g|mt-a|mt-g-a)");
}

void ModelConfig::validate() const {
    if (max_len == 0) throw ConfigError("max_len must be positive");
    if (max_len > d_pos)
        throw ConfigError("max_len " + std::to_string(max_len) +
                          " exceeds position dimension " + std::to_string(d_pos));
    if (heads == 0 || d_model() % heads != 0)
        throw ConfigError("d_model " + std::to_string(d_model()) + " not divisible by " +
                          std::to_string(heads) + " encoder heads");
    if (ssl_heads == 0 || d_model() % ssl_heads != 0)
        throw ConfigError("d_model " + std::to_string(d_model()) + " not divisible by " +
                          std::to_string(ssl_heads) + " sharing-cell heads");
    if (blocks == 0) throw ConfigError("blocks must be at least 1");
    if (attention_dropout < 0.0 || attention_dropout >= 1.0)
        throw ConfigError("attention_dropout must be in [0,1)");
    if (output_dropout < 0.0 || output_dropout >= 1.0)
        throw ConfigError("output_dropout must be in [0,1)");
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (lambda_fake < 0.0 || lambda_fake > 1.0)
        throw ConfigError("lambda_fake must be in [0,1]");
}

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
    nlohmann::json j{
        {"max_len", c.max_len},
        {"d_word", c.d_word},
        {"d_pos", c.d_pos},
        {"heads", c.heads},
        {"blocks", c.blocks},
        {"ssl_heads", c.ssl_heads},
        {"ffn_inner", c.ffn_inner},
        {"attention_dropout", c.attention_dropout},
        {"output_dropout", c.output_dropout},
        {"freeze_embeddings", c.freeze_embeddings},
        {"variant", variant_name(c.variant)},
    };
    if (c.gate_factorized.has_value())
        j["gate_factorized"] = *c.gate_factorized;
    else
        j["gate_factorized"] = nullptr;
    return j;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"lambda_fake", c.lambda_fake},
        {"epochs", c.epochs},
        {"patience", c.patience},
        {"seed", c.seed},
        {"adam_beta1", c.adam_beta1},
        {"adam_beta2", c.adam_beta2},
        {"adam_epsilon", c.adam_epsilon},
    };
}

nlohmann::json to_json(const RunConfig& c) {
    return {
        {"model", to_json(c.model)},
        {"train", to_json(c.train)},
        {"data", {{"concat_replies", c.data.concat_replies}}},
    };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    read_field(j, "max_len", c.max_len);
    read_field(j, "d_word", c.d_word);
    read_field(j, "d_pos", c.d_pos);
    read_field(j, "heads", c.heads);
    read_field(j, "blocks", c.blocks);
    read_field(j, "ssl_heads", c.ssl_heads);
    read_field(j, "ffn_inner", c.ffn_inner);
    read_field(j, "attention_dropout", c.attention_dropout);
    read_field(j, "output_dropout", c.output_dropout);
    read_field(j, "freeze_embeddings", c.freeze_embeddings);
    if (j.contains("gate_factorized") && !j.at("gate_factorized").is_null())
        c.gate_factorized = j.at("gate_factorized").get<bool>();
    if (j.contains("variant")) c.variant = variant_from_name(j.at("variant").get<std::string>());
    c.validate();
    return c;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    read_field(j, "batch_size", c.batch_size);
    read_field(j, "learning_rate", c.learning_rate);
    read_field(j, "lambda_fake", c.lambda_fake);
    read_field(j, "epochs", c.epochs);
    read_field(j, "patience", c.patience);
    read_field(j, "seed", c.seed);
    read_field(j, "adam_beta1", c.adam_beta1);
    read_field(j, "adam_beta2", c.adam_beta2);
    read_field(j, "adam_epsilon", c.adam_epsilon);
    c.validate();
    return c;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("data") && j.at("data").contains("concat_replies"))
        c.data.concat_replies = j.at("data").at("concat_replies").get<bool>();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    try {
        return run_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
}

}  // namespace sifted

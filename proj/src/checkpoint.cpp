#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sifted/errors.hpp"
#include "sifted/model.hpp"

// Checkpoint layout: 8-byte magic, u64 header length, JSON header (config,
// seed, vocabulary tokens, tensor directory), then raw little-endian f64
// payloads in directory order. The file is self-describing: loading needs no
// external config.

namespace sifted {

namespace {

constexpr char kMagic[8] = {'S', 'I', 'F', 'T', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void SiftedModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);

    nlohmann::json header;
    header["format_version"] = 1;
    header["model"] = to_json(config_);
    header["seed"] = seed_;
    header["vocab"] = vocab_.tokens();
    nlohmann::json dir = nlohmann::json::array();
    auto tensors = named_tensors();
    for (auto& [name, t] : tensors)
        dir.push_back({{"name", name}, {"shape", t.shape()}});
    header["tensors"] = dir;

    std::string hs = header.dump();
    out.write(kMagic, sizeof(kMagic));
    write_u64(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (auto& [name, t] : tensors)
        out.write(reinterpret_cast<const char*>(t.values().data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!out) throw CheckpointError("short write to checkpoint: " + path);
}

SiftedModel SiftedModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("not a checkpoint file: " + path);
    std::uint64_t hlen = read_u64(in);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw CheckpointError("truncated checkpoint header: " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("corrupt checkpoint header: " + std::string(e.what()));
    }
    if (header.value("format_version", 0) != 1)
        throw CheckpointError("unsupported checkpoint format version");

    ModelConfig cfg = model_config_from_json(header.at("model"));
    std::uint64_t seed = header.at("seed").get<std::uint64_t>();
    Vocabulary vocab =
        Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>(), cfg.d_word);
    SiftedModel model(cfg, std::move(vocab), seed);

    auto tensors = model.named_tensors();
    const auto& dir = header.at("tensors");
    if (dir.size() != tensors.size())
        throw CheckpointError("checkpoint lists " + std::to_string(dir.size()) +
                              " tensors, model has " + std::to_string(tensors.size()));
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto& [name, t] = tensors[i];
        std::string stored_name = dir[i].at("name").get<std::string>();
        Shape stored_shape = dir[i].at("shape").get<Shape>();
        if (stored_name != name)
            throw CheckpointError("checkpoint tensor '" + stored_name +
                                  "' does not match expected '" + name + "'");
        if (stored_shape != t.shape())
            throw ShapeError("checkpoint tensor '" + name + "': stored shape " +
                             shape_str(stored_shape) + " vs model shape " +
                             shape_str(t.shape()));
        in.read(reinterpret_cast<char*>(t.values_mut().data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw CheckpointError("truncated checkpoint payload at tensor '" + name + "'");
    }
    return model;
}

}  // namespace sifted

#include "sifted/convert.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sifted/data.hpp"
#include "sifted/errors.hpp"

namespace fs = std::filesystem;

namespace sifted {

namespace {

nlohmann::json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ParseError("cannot open " + p.string());
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(p.string() + ": invalid JSON: " + e.what());
    }
}

std::string tweet_id(const nlohmann::json& j, const fs::path& p) {
    if (j.contains("id_str") && j.at("id_str").is_string()) return j.at("id_str");
    if (j.contains("id")) {
        const auto& id = j.at("id");
        if (id.is_string()) return id.get<std::string>();
        if (id.is_number_integer()) return std::to_string(id.get<long long>());
    }
    return p.stem().string();
}

// PHEME annotations encode veracity as misinformation/true flags; converted
// sets sometimes carry a plain "veracity" string. Accept both.
std::string veracity_of(const nlohmann::json& ann) {
    if (ann.contains("veracity") && ann.at("veracity").is_string())
        return ann.at("veracity").get<std::string>();
    auto flag = [&](const char* key) {
        if (!ann.contains(key)) return false;
        const auto& v = ann.at(key);
        if (v.is_string()) return v.get<std::string>() == "1";
        if (v.is_number()) return v.get<int>() == 1;
        if (v.is_boolean()) return v.get<bool>();
        return false;
    };
    if (flag("true")) return "true";
    if (flag("misinformation")) return "false";
    return "unverified";
}

}  // namespace

std::size_t convert_native_corpus(const std::string& root, const std::string& out_path) {
    fs::path root_path(root);
    if (!fs::is_directory(root_path))
        throw ParseError("native corpus root is not a directory: " + root);

    // optional tweet_id -> stance map
    nlohmann::json stances = nlohmann::json::object();
    if (fs::exists(root_path / "stances.json"))
        stances = read_json_file(root_path / "stances.json");
    auto stance_of = [&](const std::string& id) -> nlohmann::json {
        if (stances.contains(id) && stances.at(id).is_string()) return stances.at(id);
        return nullptr;
    };

    std::vector<fs::path> thread_dirs;
    for (const auto& entry : fs::directory_iterator(root_path))
        if (entry.is_directory()) thread_dirs.push_back(entry.path());
    std::sort(thread_dirs.begin(), thread_dirs.end());

    std::ofstream out(out_path);
    if (!out) throw ParseError("cannot open output file: " + out_path);

    std::size_t written = 0;
    for (const auto& dir : thread_dirs) {
        fs::path src_dir = dir / "source-tweets";
        if (!fs::is_directory(src_dir)) continue;

        std::vector<fs::path> sources;
        for (const auto& e : fs::directory_iterator(src_dir))
            if (e.path().extension() == ".json") sources.push_back(e.path());
        if (sources.empty())
            throw ParseError("thread " + dir.string() + " has no source tweet");
        std::sort(sources.begin(), sources.end());
        nlohmann::json src = read_json_file(sources.front());
        std::string src_id = tweet_id(src, sources.front());

        nlohmann::json thread;
        thread["id"] = dir.filename().string();
        thread["source"] = {{"id", src_id},
                            {"text", src.value("text", "")},
                            {"stance", stance_of(src_id)}};

        nlohmann::json replies = nlohmann::json::array();
        fs::path react_dir = dir / "reactions";
        if (fs::is_directory(react_dir)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(react_dir))
                if (e.path().extension() == ".json") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            std::vector<std::string> known{src_id};
            for (const auto& f : files) {
                nlohmann::json r = read_json_file(f);
                std::string rid = tweet_id(r, f);
                std::string parent = src_id;
                if (r.contains("in_reply_to_status_id_str") &&
                    r.at("in_reply_to_status_id_str").is_string()) {
                    std::string p = r.at("in_reply_to_status_id_str");
                    if (std::find(known.begin(), known.end(), p) != known.end()) parent = p;
                }
                replies.push_back({{"id", rid},
                                   {"reply_to", parent},
                                   {"text", r.value("text", "")},
                                   {"stance", stance_of(rid)}});
                known.push_back(rid);
            }
        }
        thread["replies"] = replies;

        std::string veracity = "unverified";
        if (fs::exists(dir / "annotation.json"))
            veracity = veracity_of(read_json_file(dir / "annotation.json"));
        thread["veracity"] = veracity;

        out << thread.dump() << "\n";
        ++written;
    }
    if (written == 0) throw ParseError("no thread directories found under " + root);
    return written;
}

}  // namespace sifted

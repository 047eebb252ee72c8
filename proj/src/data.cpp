#include "sifted/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "sifted/errors.hpp"
#include "sifted/rng.hpp"

namespace sifted {

Veracity veracity_from_name(const std::string& s) {
    if (s == "true") return Veracity::True;
    if (s == "false") return Veracity::False;
    if (s == "unverified") return Veracity::Unverified;
    throw ParseError("unknown veracity label '" + s + "'");
}

std::string veracity_name(Veracity v) {
    switch (v) {
        case Veracity::True: return "true";
        case Veracity::False: return "false";
        case Veracity::Unverified: return "unverified";
    }
    return "unverified";
}

StanceLabel stance_from_name(const std::string& s) {
    if (s == "support") return StanceLabel::Support;
    if (s == "deny") return StanceLabel::Deny;
    if (s == "query") return StanceLabel::Query;
    if (s == "comment") return StanceLabel::Comment;
    throw ParseError("unknown stance label '" + s + "'");
}

std::string stance_name(StanceLabel s) {
    switch (s) {
        case StanceLabel::Support: return "support";
        case StanceLabel::Deny: return "deny";
        case StanceLabel::Query: return "query";
        case StanceLabel::Comment: return "comment";
    }
    return "comment";
}

namespace {

std::optional<StanceLabel> read_stance(const nlohmann::json& j, const char* key,
                                       std::size_t line, const std::string& ctx) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_string())
        throw ParseError("line " + std::to_string(line) + ": " + ctx + ".stance must be a string or null");
    try {
        return stance_from_name(j.at(key).get<std::string>());
    } catch (const ParseError& e) {
        throw ParseError("line " + std::to_string(line) + ": " + ctx + ": " + e.what());
    }
}

std::string require_string(const nlohmann::json& j, const char* key, std::size_t line,
                           const std::string& ctx) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw ParseError("line " + std::to_string(line) + ": missing or non-string field '" +
                         ctx + "." + key + "'");
    return j.at(key).get<std::string>();
}

Thread parse_thread_line(const std::string& line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    Thread t;
    t.id = require_string(j, "id", line_no, "thread");
    if (!j.contains("source") || !j.at("source").is_object())
        throw ParseError("line " + std::to_string(line_no) + ": missing object field 'thread.source'");
    const auto& src = j.at("source");
    t.source.id = require_string(src, "id", line_no, "source");
    t.source.text = require_string(src, "text", line_no, "source");
    t.source.stance = read_stance(src, "stance", line_no, "source");
    try {
        t.veracity = veracity_from_name(require_string(j, "veracity", line_no, "thread"));
    } catch (const ParseError& e) {
        throw ParseError("line " + std::to_string(line_no) + ": field 'veracity': " + e.what());
    }

    std::unordered_set<std::string> ids{t.source.id};
    if (j.contains("replies")) {
        if (!j.at("replies").is_array())
            throw ParseError("line " + std::to_string(line_no) + ": field 'replies' must be an array");
        for (const auto& rj : j.at("replies")) {
            Reply r;
            r.id = require_string(rj, "id", line_no, "reply");
            r.reply_to = require_string(rj, "reply_to", line_no, "reply");
            r.text = require_string(rj, "text", line_no, "reply");
            r.stance = read_stance(rj, "stance", line_no, "reply");
            if (!ids.count(r.reply_to))
                throw ParseError("line " + std::to_string(line_no) + ": reply '" + r.id +
                                 "' answers unknown id '" + r.reply_to + "'");
            if (!ids.insert(r.id).second)
                throw ParseError("line " + std::to_string(line_no) + ": duplicate post id '" +
                                 r.id + "'");
            t.replies.push_back(std::move(r));
        }
    }
    return t;
}

}  // namespace

std::vector<Thread> parse_corpus_stream(std::istream& in, const std::string& origin) {
    std::vector<Thread> threads;
    std::unordered_set<std::string> thread_ids;
    std::vector<std::string> errors;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            Thread t = parse_thread_line(line, line_no);
            if (!thread_ids.insert(t.id).second)
                throw ParseError("line " + std::to_string(line_no) + ": duplicate thread id '" +
                                 t.id + "'");
            threads.push_back(std::move(t));
        } catch (const ParseError& e) {
            errors.push_back(e.what());
            if (errors.size() >= 20) {
                errors.push_back("... further errors suppressed");
                break;
            }
        }
    }
    if (!errors.empty()) {
        std::string msg = origin + ": " + std::to_string(errors.size()) + " invalid line(s):";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ParseError(msg);
    }
    return threads;
}

std::vector<Thread> parse_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open corpus file: " + path);
    return parse_corpus_stream(in, path);
}

std::vector<std::string> preprocess(const std::string& text) {
    // remove website links first: http/https/www prefixes up to whitespace
    std::string no_urls;
    no_urls.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        bool at_boundary = i == 0 || std::isspace(static_cast<unsigned char>(text[i - 1]));
        if (at_boundary &&
            (text.compare(i, 7, "http://") == 0 || text.compare(i, 8, "https://") == 0 ||
             text.compare(i, 4, "www.") == 0)) {
            while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
            continue;
        }
        no_urls.push_back(text[i]);
        ++i;
    }
    // non-alphabetic characters become separators; lowercase the rest
    std::vector<std::string> tokens;
    std::string current;
    for (char c : no_urls) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

InstanceSet derive_instances(const std::vector<Thread>& threads, const DataConfig& cfg) {
    InstanceSet out;
    auto push = [&out](Task task, std::vector<std::string> tokens, std::size_t label,
                       const std::string& thread_id) {
        if (tokens.empty()) {
            ++out.dropped_empty;
            return;
        }
        TaskInstance inst{task, std::move(tokens), label, thread_id};
        (task == Task::Fake ? out.fake : out.stance).push_back(std::move(inst));
    };

    for (const auto& t : threads) {
        if (t.veracity != Veracity::Unverified) {
            std::vector<std::string> tokens = preprocess(t.source.text);
            if (cfg.concat_replies)
                for (const auto& r : t.replies) {
                    auto more = preprocess(r.text);
                    tokens.insert(tokens.end(), more.begin(), more.end());
                }
            std::size_t label = t.veracity == Veracity::True ? 0 : 1;
            push(Task::Fake, std::move(tokens), label, t.id);
        }
        if (t.source.stance)
            push(Task::Stance, preprocess(t.source.text),
                 static_cast<std::size_t>(*t.source.stance), t.id);
        for (const auto& r : t.replies)
            if (r.stance)
                push(Task::Stance, preprocess(r.text), static_cast<std::size_t>(*r.stance),
                     t.id);
    }
    return out;
}

SplitPlan make_splits(const std::vector<Thread>& threads, std::uint64_t seed,
                      std::size_t n_folds) {
    if (n_folds < 2) throw ConfigError("need at least 2 folds");
    if (threads.size() < 2 * n_folds)
        throw ConfigError("too few threads (" + std::to_string(threads.size()) +
                          ") for " + std::to_string(n_folds) + "-fold splits");

    // stratify by veracity class
    std::map<Veracity, std::vector<std::string>> groups;
    for (const auto& t : threads) groups[t.veracity].push_back(t.id);

    SplitPlan plan;
    plan.seed = seed;
    plan.folds.assign(n_folds, {});
    std::size_t holdout_target =
        static_cast<std::size_t>(std::llround(0.10 * static_cast<double>(threads.size())));

    // apportion the holdout across classes by largest remainder
    std::vector<std::pair<Veracity, std::vector<std::string>>> classes(groups.begin(),
                                                                       groups.end());
    std::vector<std::size_t> share(classes.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        double exact = 0.10 * static_cast<double>(classes[c].second.size());
        share[c] = static_cast<std::size_t>(exact);
        assigned += share[c];
        remainders.push_back({exact - static_cast<double>(share[c]), c});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < holdout_target && i < remainders.size(); ++i) {
        std::size_t c = remainders[i].second;
        if (share[c] < classes[c].second.size()) {
            ++share[c];
            ++assigned;
        }
    }

    auto rng = seeded_rng(seed, "splits");
    std::size_t next_fold = 0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        auto& ids = classes[c].second;
        std::shuffle(ids.begin(), ids.end(), rng);
        for (std::size_t i = 0; i < share[c]; ++i) plan.holdout.push_back(ids[i]);
        // round-robin the rest across folds, continuing where the previous
        // class stopped so fold sizes stay within one of each other
        for (std::size_t i = share[c]; i < ids.size(); ++i) {
            plan.folds[next_fold].push_back(ids[i]);
            next_fold = (next_fold + 1) % n_folds;
        }
    }
    return plan;
}

}  // namespace sifted

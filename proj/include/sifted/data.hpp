#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sifted/config.hpp"

namespace sifted {

enum class Veracity { True, False, Unverified };
enum class StanceLabel { Support, Deny, Query, Comment };

Veracity veracity_from_name(const std::string& s);
std::string veracity_name(Veracity v);
StanceLabel stance_from_name(const std::string& s);
std::string stance_name(StanceLabel s);

struct Post {
    std::string id;
    std::string text;
    std::optional<StanceLabel> stance;
};

struct Reply {
    std::string id;
    std::string reply_to;
    std::string text;
    std::optional<StanceLabel> stance;
};

// A source post plus its replies; the unit of corpus splitting.
struct Thread {
    std::string id;
    Post source;
    std::vector<Reply> replies;
    Veracity veracity = Veracity::Unverified;
};

// One thread object per JSONL line; schema violations name field and line.
std::vector<Thread> parse_corpus(const std::string& path);
std::vector<Thread> parse_corpus_stream(std::istream& in, const std::string& origin);

// Strip URLs, then non-alphabetic characters, lowercase, whitespace-tokenize.
std::vector<std::string> preprocess(const std::string& text);

struct TaskInstance {
    Task task = Task::Fake;
    std::vector<std::string> tokens;
    std::size_t label = 0;
    std::string thread_id;
};

struct InstanceSet {
    std::vector<TaskInstance> fake;
    std::vector<TaskInstance> stance;
    std::size_t dropped_empty = 0;  // instances with no tokens after preprocessing

    const std::vector<TaskInstance>& of(Task t) const { return t == Task::Fake ? fake : stance; }
};

// Fake-news instances: one per true/false thread (unverified filtered out),
// text = source post, optionally followed by the replies in thread order.
// Stance instances: one per stance-labeled post.
InstanceSet derive_instances(const std::vector<Thread>& threads, const DataConfig& cfg);

// 10% holdout plus disjoint folds covering the rest, split by thread id and
// stratified on veracity.
struct SplitPlan {
    std::vector<std::string> holdout;
    std::vector<std::vector<std::string>> folds;
    std::uint64_t seed = 0;
};

SplitPlan make_splits(const std::vector<Thread>& threads, std::uint64_t seed,
                      std::size_t n_folds = 5);

}  // namespace sifted

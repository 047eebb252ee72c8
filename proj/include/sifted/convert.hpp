#pragma once

#include <string>

namespace sifted {

// Converts a PHEME/RumourEval-style thread directory tree into the thread
// JSONL corpus format. Expected layout, one directory per thread:
//
//   <root>/<thread_id>/source-tweets/<tweet_id>.json   {"id_str"|"id", "text"}
//   <root>/<thread_id>/reactions/<tweet_id>.json       + "in_reply_to_status_id_str"
//   <root>/<thread_id>/annotation.json                 veracity annotation
//
// Veracity is read from annotation.json: either a direct
// {"veracity": "true"|"false"|"unverified"} or the PHEME flags
// {"is_rumour": ..., "misinformation": 0|1, "true": 0|1}. Optional stance
// labels come from <root>/stances.json, a tweet_id -> stance map.
// Returns the number of threads written.
std::size_t convert_native_corpus(const std::string& root, const std::string& out_path);

}  // namespace sifted

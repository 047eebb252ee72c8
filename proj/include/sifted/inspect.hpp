#pragma once

#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "sifted/data.hpp"
#include "sifted/model.hpp"

namespace sifted {

// Per-instance dump of what the selected sharing layer is doing: mean gate
// value per token, per-head attention matrices of the attention sharing cell,
// and the top-k tokens by absolute feature magnitude in the shared, private
// and selected layers.
nlohmann::json inspection_json(SiftedModel& model, const std::vector<TaskInstance>& instances,
                               std::size_t top_k = 5);

void write_inspection(SiftedModel& model, const std::vector<TaskInstance>& instances,
                      std::ostream& out, std::size_t top_k = 5);

}  // namespace sifted

#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

namespace sifted {

// Accuracy plus macro-averaged precision/recall/F1 over the confusion matrix
// (rows = true class, columns = predicted). A class never predicted scores
// zero precision; a class never seen scores zero recall.
struct TaskMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<std::vector<std::size_t>> confusion;
    std::size_t count = 0;
};

TaskMetrics metrics_from_confusion(const std::vector<std::vector<std::size_t>>& confusion);

TaskMetrics metrics_from_predictions(const std::vector<std::size_t>& truth,
                                     const std::vector<std::size_t>& predicted,
                                     std::size_t n_classes);

nlohmann::json to_json(const TaskMetrics& m);

}  // namespace sifted

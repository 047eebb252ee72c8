#include "sifted/metrics.hpp"

#include <stdexcept>

namespace sifted {

TaskMetrics metrics_from_confusion(const std::vector<std::vector<std::size_t>>& confusion) {
    std::size_t n = confusion.size();
    if (n == 0) throw std::invalid_argument("metrics: empty confusion matrix");
    TaskMetrics m;
    m.confusion = confusion;
    std::size_t total = 0, correct = 0;
    std::vector<std::size_t> row_sum(n, 0), col_sum(n, 0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t p = 0; p < n; ++p) {
            total += confusion[t][p];
            row_sum[t] += confusion[t][p];
            col_sum[p] += confusion[t][p];
            if (t == p) correct += confusion[t][p];
        }
    if (total == 0) throw std::invalid_argument("metrics: no predictions");
    m.count = total;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
    double psum = 0.0, rsum = 0.0, fsum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        double p = col_sum[c] ? static_cast<double>(confusion[c][c]) / static_cast<double>(col_sum[c])
                              : 0.0;
        double r = row_sum[c] ? static_cast<double>(confusion[c][c]) / static_cast<double>(row_sum[c])
                              : 0.0;
        double f = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        psum += p;
        rsum += r;
        fsum += f;
    }
    m.precision = psum / static_cast<double>(n);
    m.recall = rsum / static_cast<double>(n);
    m.f1 = fsum / static_cast<double>(n);
    return m;
}

TaskMetrics metrics_from_predictions(const std::vector<std::size_t>& truth,
                                     const std::vector<std::size_t>& predicted,
                                     std::size_t n_classes) {
    if (truth.size() != predicted.size())
        throw std::invalid_argument("metrics: truth/prediction size mismatch");
    if (truth.empty()) throw std::invalid_argument("metrics: empty prediction list");
    std::vector<std::vector<std::size_t>> confusion(n_classes,
                                                    std::vector<std::size_t>(n_classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) ++confusion[truth[i]][predicted[i]];
    return metrics_from_confusion(confusion);
}

nlohmann::json to_json(const TaskMetrics& m) {
    return {
        {"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
        {"f1", m.f1},             {"confusion", m.confusion}, {"count", m.count},
    };
}

}  // namespace sifted

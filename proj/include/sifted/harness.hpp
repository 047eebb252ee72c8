#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sifted/data.hpp"
#include "sifted/metrics.hpp"
#include "sifted/model.hpp"

namespace sifted {

struct EpochRecord {
    std::size_t epoch = 0;
    double fake_loss = 0.0;
    double stance_loss = 0.0;
    std::optional<double> val_fake_f1;
    std::optional<double> val_stance_f1;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;      // epoch whose weights the model carries
    double best_val_f1 = 0.0;
    std::size_t epochs_run = 0;
};

// Alternating per-task mini-batches, Adam steps with lambda-scaled losses,
// early stopping on validation fake-news F1 (patience from config). The model
// ends up with the best-validation weights. Optional per-epoch JSONL log.
TrainResult train(SiftedModel& model, const InstanceSet& train_set,
                  const InstanceSet& val_set, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

TaskMetrics evaluate(SiftedModel& model, const std::vector<TaskInstance>& instances);

struct FoldReport {
    std::size_t fold = 0;
    std::optional<TaskMetrics> fake;
    std::optional<TaskMetrics> stance;
};

struct CvReport {
    std::vector<FoldReport> folds;
    std::optional<TaskMetrics> aggregate_fake;    // mean over folds
    std::optional<TaskMetrics> aggregate_stance;
    RunConfig config;
};

CvReport cross_validate(const std::vector<Thread>& corpus, const RunConfig& cfg,
                        const Vocabulary& vocab, std::size_t n_folds = 5,
                        std::ostream* log = nullptr);

struct AblationRow {
    std::string variant;
    CvReport report;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    RunConfig config;
};

// Runs single, mt, mt-g, mt-a and mt-g-a under identical seeds and splits.
AblationReport ablate(const std::vector<Thread>& corpus, const RunConfig& cfg,
                      const Vocabulary& vocab, std::size_t n_folds = 5,
                      std::ostream* log = nullptr);

nlohmann::json to_json(const CvReport& r);
nlohmann::json to_json(const AblationReport& r);
std::string cv_table_text(const CvReport& r);
std::string ablation_table_text(const AblationReport& r);

// Builds a vocabulary for a corpus: pretrained vectors when a path is given,
// otherwise seeded random vectors over every source and reply token.
Vocabulary build_vocabulary(const std::vector<Thread>& corpus, std::size_t d_word,
                            std::uint64_t seed,
                            const std::optional<std::string>& vectors_path);

// Number of worker threads for fold-level parallelism: the smaller of the
// fold count, hardware concurrency, and the SIFTED_MTL_THREADS cap.
std::size_t fold_parallelism(std::size_t n_folds);

}  // namespace sifted

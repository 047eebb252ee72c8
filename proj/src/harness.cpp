#include "sifted/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "sifted/errors.hpp"
#include "sifted/optimizer.hpp"
#include "sifted/rng.hpp"

namespace sifted {

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed,
                                          const std::string& label) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    auto rng = seeded_rng(seed, label);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

std::vector<LabeledSequence> make_batch(SiftedModel& model,
                                        const std::vector<TaskInstance>& instances,
                                        const std::vector<std::size_t>& order,
                                        std::size_t begin, std::size_t end) {
    std::vector<LabeledSequence> batch;
    batch.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const TaskInstance& inst = instances[order[i]];
        batch.emplace_back(model.embed_tokens(inst.tokens), inst.label);
    }
    return batch;
}

struct Snapshot {
    std::vector<std::vector<double>> values;
};

Snapshot take_snapshot(const SiftedModel& model) {
    Snapshot s;
    for (auto& [name, t] : model.named_tensors()) s.values.push_back(t.values());
    return s;
}

void restore_snapshot(SiftedModel& model, const Snapshot& s) {
    auto tensors = model.named_tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i)
        tensors[i].second.values_mut() = s.values[i];
}

TaskMetrics mean_metrics(const std::vector<TaskMetrics>& per_fold) {
    TaskMetrics agg;
    if (per_fold.empty()) return agg;
    std::size_t n_classes = per_fold[0].confusion.size();
    agg.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    for (const auto& m : per_fold) {
        agg.accuracy += m.accuracy;
        agg.precision += m.precision;
        agg.recall += m.recall;
        agg.f1 += m.f1;
        agg.count += m.count;
        for (std::size_t t = 0; t < n_classes; ++t)
            for (std::size_t p = 0; p < n_classes; ++p) agg.confusion[t][p] += m.confusion[t][p];
    }
    double n = static_cast<double>(per_fold.size());
    agg.accuracy /= n;
    agg.precision /= n;
    agg.recall /= n;
    agg.f1 /= n;
    return agg;
}

nlohmann::json fold_to_json(const FoldReport& f) {
    nlohmann::json j{{"fold", f.fold}};
    if (f.fake) j["fake"] = to_json(*f.fake);
    if (f.stance) j["stance"] = to_json(*f.stance);
    return j;
}

}  // namespace

std::size_t fold_parallelism(std::size_t n_folds) {
    std::size_t cap = n_folds;
    if (const char* env = std::getenv("SIFTED_MTL_THREADS")) {
        char* end = nullptr;
        unsigned long v = std::strtoul(env, &end, 10);
        if (end && *end == '\0' && v > 0) cap = std::min<std::size_t>(cap, v);
    }
    std::size_t hw = std::thread::hardware_concurrency();
    if (hw > 0) cap = std::min(cap, hw);
    return std::max<std::size_t>(cap, 1);
}

TrainResult train(SiftedModel& model, const InstanceSet& train_set, const InstanceSet& val_set,
                  const TrainConfig& cfg, std::ostream* log) {
    cfg.validate();
    bool stance_enabled = model.has_task(Task::Stance) && !train_set.stance.empty();
    if (train_set.fake.empty() && !stance_enabled)
        throw TrainingError("train: no training instances for any enabled task");

    LossWeights weights = LossWeights::from_lambda_fake(cfg.lambda_fake);
    Adam opt(model.parameters(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
             cfg.adam_epsilon);

    bool can_validate = model.has_task(Task::Fake) && !val_set.fake.empty();
    TrainResult result;
    Snapshot best;
    double best_f1 = -1.0;
    std::size_t best_epoch = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::string tag = "shuffle.epoch" + std::to_string(epoch);
        auto fake_order =
            shuffled_indices(train_set.fake.size(), cfg.seed, tag + ".fake");
        auto stance_order = stance_enabled
                                ? shuffled_indices(train_set.stance.size(), cfg.seed, tag + ".stance")
                                : std::vector<std::size_t>{};

        std::size_t nf = (train_set.fake.size() + cfg.batch_size - 1) / cfg.batch_size;
        std::size_t ns = stance_enabled
                             ? (train_set.stance.size() + cfg.batch_size - 1) / cfg.batch_size
                             : 0;
        double fake_loss_sum = 0.0, stance_loss_sum = 0.0;

        // step groups: one fake batch then one stance batch
        for (std::size_t g = 0; g < std::max(nf, ns); ++g) {
            if (g < nf) {
                std::size_t b = g * cfg.batch_size;
                std::size_t e = std::min(b + cfg.batch_size, train_set.fake.size());
                auto batch = make_batch(model, train_set.fake, fake_order, b, e);
                opt.zero_grad();
                Tensor loss = model.loss(batch, {}, weights, true);
                double lv = loss.value_at(0);
                if (!std::isfinite(lv))
                    throw TrainingError("training diverged: non-finite fake-news loss at epoch " +
                                        std::to_string(epoch) + ", step " + std::to_string(g));
                fake_loss_sum += lv;
                loss.backward();
                opt.step();
            }
            if (g < ns) {
                std::size_t b = g * cfg.batch_size;
                std::size_t e = std::min(b + cfg.batch_size, train_set.stance.size());
                auto batch = make_batch(model, train_set.stance, stance_order, b, e);
                opt.zero_grad();
                Tensor loss = model.loss({}, batch, weights, true);
                double lv = loss.value_at(0);
                if (!std::isfinite(lv))
                    throw TrainingError("training diverged: non-finite stance loss at epoch " +
                                        std::to_string(epoch) + ", step " + std::to_string(g));
                stance_loss_sum += lv;
                loss.backward();
                opt.step();
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.fake_loss = nf ? fake_loss_sum / static_cast<double>(nf) : 0.0;
        rec.stance_loss = ns ? stance_loss_sum / static_cast<double>(ns) : 0.0;
        if (can_validate) rec.val_fake_f1 = evaluate(model, val_set.fake).f1;
        if (model.has_task(Task::Stance) && !val_set.stance.empty())
            rec.val_stance_f1 = evaluate(model, val_set.stance).f1;
        result.history.push_back(rec);
        result.epochs_run = epoch;
        if (log) {
            nlohmann::json j{{"epoch", rec.epoch},
                             {"fake_loss", rec.fake_loss},
                             {"stance_loss", rec.stance_loss}};
            if (rec.val_fake_f1) j["val_fake_f1"] = *rec.val_fake_f1;
            if (rec.val_stance_f1) j["val_stance_f1"] = *rec.val_stance_f1;
            (*log) << j.dump() << "\n";
        }

        if (can_validate) {
            double f1 = *rec.val_fake_f1;
            if (f1 > best_f1) {
                best_f1 = f1;
                best_epoch = epoch;
                best = take_snapshot(model);
            } else if (epoch - best_epoch >= cfg.patience) {
                break;
            }
        }
    }

    if (can_validate && best_f1 >= 0.0) {
        restore_snapshot(model, best);
        result.best_epoch = best_epoch;
        result.best_val_f1 = best_f1;
    } else {
        result.best_epoch = result.epochs_run;
    }
    return result;
}

TaskMetrics evaluate(SiftedModel& model, const std::vector<TaskInstance>& instances) {
    if (instances.empty()) throw TrainingError("evaluate: empty instance list");
    Task task = instances[0].task;
    std::size_t n_classes = task == Task::Fake ? kFakeClasses : kStanceClasses;
    std::vector<std::size_t> truth, pred;
    truth.reserve(instances.size());
    pred.reserve(instances.size());
    for (const auto& inst : instances) {
        if (inst.task != task) throw TrainingError("evaluate: mixed task instances");
        Tensor probs = model.forward(model.embed_tokens(inst.tokens), task, false);
        std::size_t arg = 0;
        for (std::size_t c = 1; c < probs.size(); ++c)
            if (probs.value_at(c) > probs.value_at(arg)) arg = c;
        truth.push_back(inst.label);
        pred.push_back(arg);
    }
    return metrics_from_predictions(truth, pred, n_classes);
}

CvReport cross_validate(const std::vector<Thread>& corpus, const RunConfig& cfg,
                        const Vocabulary& vocab, std::size_t n_folds, std::ostream* log) {
    SplitPlan plan = make_splits(corpus, cfg.train.seed, n_folds);
    std::map<std::string, const Thread*> by_id;
    for (const auto& t : corpus) by_id.emplace(t.id, &t);

    auto threads_of = [&](const std::vector<std::string>& ids) {
        std::vector<Thread> out;
        out.reserve(ids.size());
        for (const auto& id : ids) out.push_back(*by_id.at(id));
        return out;
    };
    InstanceSet val_set = derive_instances(threads_of(plan.holdout), cfg.data);

    CvReport report;
    report.config = cfg;
    report.folds.resize(n_folds);
    std::vector<std::vector<EpochRecord>> histories(n_folds);

    auto run_fold = [&](std::size_t fold) {
        std::vector<Thread> train_threads;
        for (std::size_t f = 0; f < n_folds; ++f)
            if (f != fold)
                for (const auto& id : plan.folds[f]) train_threads.push_back(*by_id.at(id));
        InstanceSet train_set = derive_instances(train_threads, cfg.data);
        InstanceSet test_set = derive_instances(threads_of(plan.folds[fold]), cfg.data);

        SiftedModel model(cfg.model, vocab, cfg.train.seed);
        TrainResult tr = train(model, train_set, val_set, cfg.train, nullptr);
        histories[fold] = tr.history;

        FoldReport fr;
        fr.fold = fold;
        if (!test_set.fake.empty()) fr.fake = evaluate(model, test_set.fake);
        if (model.has_task(Task::Stance) && !test_set.stance.empty())
            fr.stance = evaluate(model, test_set.stance);
        report.folds[fold] = std::move(fr);
    };

    std::size_t workers = fold_parallelism(n_folds);
    if (workers <= 1) {
        for (std::size_t f = 0; f < n_folds; ++f) run_fold(f);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t f = w; f < n_folds; f += workers) run_fold(f);
            });
        for (auto& th : pool) th.join();
    }

    if (log) {
        for (std::size_t f = 0; f < n_folds; ++f)
            for (const auto& rec : histories[f]) {
                nlohmann::json j{{"fold", f},
                                 {"epoch", rec.epoch},
                                 {"fake_loss", rec.fake_loss},
                                 {"stance_loss", rec.stance_loss}};
                if (rec.val_fake_f1) j["val_fake_f1"] = *rec.val_fake_f1;
                if (rec.val_stance_f1) j["val_stance_f1"] = *rec.val_stance_f1;
                (*log) << j.dump() << "\n";
            }
    }

    std::vector<TaskMetrics> fake_metrics, stance_metrics;
    for (const auto& f : report.folds) {
        if (f.fake) fake_metrics.push_back(*f.fake);
        if (f.stance) stance_metrics.push_back(*f.stance);
    }
    if (!fake_metrics.empty()) report.aggregate_fake = mean_metrics(fake_metrics);
    if (!stance_metrics.empty()) report.aggregate_stance = mean_metrics(stance_metrics);
    return report;
}

AblationReport ablate(const std::vector<Thread>& corpus, const RunConfig& cfg,
                      const Vocabulary& vocab, std::size_t n_folds, std::ostream* log) {
    AblationReport report;
    report.config = cfg;
    for (Variant v : {Variant::Single, Variant::MT, Variant::MT_G, Variant::MT_A,
                      Variant::MT_GA}) {
        RunConfig vc = cfg;
        vc.model.variant = v;
        report.rows.push_back({variant_name(v), cross_validate(corpus, vc, vocab, n_folds, log)});
    }
    return report;
}

Vocabulary build_vocabulary(const std::vector<Thread>& corpus, std::size_t d_word,
                            std::uint64_t seed,
                            const std::optional<std::string>& vectors_path) {
    if (vectors_path) return Vocabulary::load(*vectors_path, d_word);
    std::vector<std::string> tokens;
    std::unordered_set<std::string> seen;
    auto add_text = [&](const std::string& text) {
        for (auto& tok : preprocess(text))
            if (seen.insert(tok).second) tokens.push_back(tok);
    };
    for (const auto& t : corpus) {
        add_text(t.source.text);
        for (const auto& r : t.replies) add_text(r.text);
    }
    return Vocabulary::random_init(tokens, d_word, seed);
}

nlohmann::json to_json(const CvReport& r) {
    nlohmann::json j;
    j["config"] = to_json(r.config);
    j["variant"] = variant_name(r.config.model.variant);
    j["folds"] = nlohmann::json::array();
    for (const auto& f : r.folds) j["folds"].push_back(fold_to_json(f));
    nlohmann::json agg;
    if (r.aggregate_fake) agg["fake"] = to_json(*r.aggregate_fake);
    if (r.aggregate_stance) agg["stance"] = to_json(*r.aggregate_stance);
    j["aggregate"] = agg;
    return j;
}

nlohmann::json to_json(const AblationReport& r) {
    nlohmann::json j;
    j["config"] = to_json(r.config);
    j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json rj{{"variant", row.variant}};
        if (row.report.aggregate_fake) rj["fake"] = to_json(*row.report.aggregate_fake);
        if (row.report.aggregate_stance) rj["stance"] = to_json(*row.report.aggregate_stance);
        rj["folds"] = to_json(row.report)["folds"];
        j["rows"].push_back(rj);
    }
    return j;
}

namespace {

void metrics_row(std::ostringstream& os, const std::string& label,
                 const std::optional<TaskMetrics>& fake,
                 const std::optional<TaskMetrics>& stance) {
    os << std::left << std::setw(12) << label << std::right << std::fixed
       << std::setprecision(4);
    auto cell = [&](const std::optional<TaskMetrics>& m) {
        if (m)
            os << std::setw(9) << m->accuracy << std::setw(9) << m->precision << std::setw(9)
               << m->recall << std::setw(9) << m->f1;
        else
            os << std::setw(9) << "-" << std::setw(9) << "-" << std::setw(9) << "-"
               << std::setw(9) << "-";
    };
    cell(fake);
    os << "  |";
    cell(stance);
    os << "\n";
}

void table_header(std::ostringstream& os, const std::string& first) {
    os << std::left << std::setw(12) << first << std::right << std::setw(9) << "A"
       << std::setw(9) << "P" << std::setw(9) << "R" << std::setw(9) << "F1"
       << "  |" << std::setw(9) << "A" << std::setw(9) << "P" << std::setw(9) << "R"
       << std::setw(9) << "F1" << "\n";
    os << std::left << std::setw(12) << "" << std::right << std::setw(24) << "fake news"
       << std::setw(14) << "" << "|" << std::setw(25) << "stance" << "\n";
}

}  // namespace

std::string cv_table_text(const CvReport& r) {
    std::ostringstream os;
    table_header(os, "fold");
    for (const auto& f : r.folds)
        metrics_row(os, std::to_string(f.fold), f.fake, f.stance);
    metrics_row(os, "mean", r.aggregate_fake, r.aggregate_stance);
    return os.str();
}

std::string ablation_table_text(const AblationReport& r) {
    std::ostringstream os;
    table_header(os, "variant");
    for (const auto& row : r.rows)
        metrics_row(os, row.variant, row.report.aggregate_fake, row.report.aggregate_stance);
    return os.str();
}

}  // namespace sifted

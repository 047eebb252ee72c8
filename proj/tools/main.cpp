#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sifted/convert.hpp"
#include "sifted/errors.hpp"
#include "sifted/gradcheck.hpp"
#include "sifted/harness.hpp"
#include "sifted/inspect.hpp"
#include "sifted/model.hpp"

namespace fs = std::filesystem;
using namespace sifted;

namespace {

// exit codes: 0 ok, 1 runtime, 2 usage, 3 config, 4 missing file,
// 5 corpus/parse, 6 checkpoint, 7 shape
enum ExitCode {
    kOk = 0,
    kRuntime = 1,
    kUsage = 2,
    kConfig = 3,
    kMissingFile = 4,
    kParse = 5,
    kCheckpoint = 6,
    kShape = 7,
};

class MissingFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

int fail(const std::string& category, const std::string& message, int code) {
    nlohmann::json j{{"error", category}, {"message", message}};
    std::cerr << j.dump() << "\n";
    return code;
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw MissingFileError(what + " not found: " + path);
}

struct CommonOpts {
    std::string config_path;
    std::string corpus_path;
    std::string out_path;
    std::string vectors_path;
    std::optional<std::uint64_t> seed;
    std::string variant;
    std::size_t folds = 5;
};

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig cfg;
    if (!o.config_path.empty()) {
        require_file(o.config_path, "config file");
        cfg = load_run_config(o.config_path);
    }
    if (o.seed) cfg.train.seed = *o.seed;
    if (!o.variant.empty()) cfg.model.variant = variant_from_name(o.variant);
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

std::vector<Thread> load_corpus(const std::string& path) {
    require_file(path, "corpus file");
    return parse_corpus(path);
}

Vocabulary resolve_vocabulary(const std::vector<Thread>& corpus, const RunConfig& cfg,
                              const std::string& vectors_path) {
    std::optional<std::string> vp;
    if (!vectors_path.empty()) {
        require_file(vectors_path, "word-vector file");
        vp = vectors_path;
    }
    return build_vocabulary(corpus, cfg.model.d_word, cfg.train.seed, vp);
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << contents;
}

int cmd_train(const CommonOpts& o) {
    RunConfig cfg = resolve_config(o);
    auto corpus = load_corpus(o.corpus_path);
    Vocabulary vocab = resolve_vocabulary(corpus, cfg, o.vectors_path);

    fs::create_directories(o.out_path);
    SplitPlan plan = make_splits(corpus, cfg.train.seed, o.folds);

    std::map<std::string, const Thread*> by_id;
    for (const auto& t : corpus) by_id.emplace(t.id, &t);
    std::vector<Thread> train_threads, val_threads;
    for (const auto& fold : plan.folds)
        for (const auto& id : fold) train_threads.push_back(*by_id.at(id));
    for (const auto& id : plan.holdout) val_threads.push_back(*by_id.at(id));

    InstanceSet train_set = derive_instances(train_threads, cfg.data);
    InstanceSet val_set = derive_instances(val_threads, cfg.data);

    SiftedModel model(cfg.model, vocab, cfg.train.seed);
    std::ofstream log(fs::path(o.out_path) / "history.jsonl");
    TrainResult result = train(model, train_set, val_set, cfg.train, &log);

    std::string ckpt = (fs::path(o.out_path) / "model.ckpt").string();
    model.save(ckpt);

    nlohmann::json report;
    report["config"] = to_json(cfg);
    report["train_threads"] = train_threads.size();
    report["validation_threads"] = val_threads.size();
    report["epochs_run"] = result.epochs_run;
    report["best_epoch"] = result.best_epoch;
    if (!val_set.fake.empty()) {
        report["validation"]["fake"] = to_json(evaluate(model, val_set.fake));
        if (model.has_task(Task::Stance) && !val_set.stance.empty())
            report["validation"]["stance"] = to_json(evaluate(model, val_set.stance));
    }
    write_text_file((fs::path(o.out_path) / "report.json").string(), report.dump(2) + "\n");
    std::cout << "checkpoint: " << ckpt << "\n";
    std::cout << "epochs run: " << result.epochs_run << ", best epoch: " << result.best_epoch
              << "\n";
    return kOk;
}

int cmd_eval(const std::string& checkpoint, const CommonOpts& o) {
    require_file(checkpoint, "checkpoint file");
    auto corpus = load_corpus(o.corpus_path);
    SiftedModel model = SiftedModel::load(checkpoint);
    InstanceSet set = derive_instances(corpus, DataConfig{});

    nlohmann::json report;
    report["checkpoint"] = checkpoint;
    report["variant"] = variant_name(model.config().variant);
    if (!set.fake.empty()) report["fake"] = to_json(evaluate(model, set.fake));
    if (model.has_task(Task::Stance) && !set.stance.empty())
        report["stance"] = to_json(evaluate(model, set.stance));
    std::string text = report.dump(2) + "\n";
    if (!o.out_path.empty())
        write_text_file(o.out_path, text);
    else
        std::cout << text;
    return kOk;
}

int cmd_cv(const CommonOpts& o, const std::string& log_path) {
    RunConfig cfg = resolve_config(o);
    auto corpus = load_corpus(o.corpus_path);
    Vocabulary vocab = resolve_vocabulary(corpus, cfg, o.vectors_path);

    std::ofstream log;
    if (!log_path.empty()) log.open(log_path);
    CvReport report =
        cross_validate(corpus, cfg, vocab, o.folds, log_path.empty() ? nullptr : &log);
    std::string json_text = to_json(report).dump(2) + "\n";
    if (!o.out_path.empty()) write_text_file(o.out_path, json_text);
    std::cout << cv_table_text(report);
    if (o.out_path.empty()) std::cout << json_text;
    return kOk;
}

int cmd_ablate(const CommonOpts& o, const std::string& log_path) {
    RunConfig cfg = resolve_config(o);
    auto corpus = load_corpus(o.corpus_path);
    Vocabulary vocab = resolve_vocabulary(corpus, cfg, o.vectors_path);

    std::ofstream log;
    if (!log_path.empty()) log.open(log_path);
    AblationReport report =
        ablate(corpus, cfg, vocab, o.folds, log_path.empty() ? nullptr : &log);
    std::string json_text = to_json(report).dump(2) + "\n";
    if (!o.out_path.empty()) write_text_file(o.out_path, json_text);
    std::cout << ablation_table_text(report);
    return kOk;
}

int cmd_inspect(const std::string& checkpoint, const CommonOpts& o, std::size_t top_k,
                std::size_t max_instances) {
    require_file(checkpoint, "checkpoint file");
    auto corpus = load_corpus(o.corpus_path);
    SiftedModel model = SiftedModel::load(checkpoint);
    InstanceSet set = derive_instances(corpus, DataConfig{});

    std::vector<TaskInstance> sample;
    for (const auto& inst : set.fake) {
        if (sample.size() >= max_instances) break;
        sample.push_back(inst);
    }
    if (model.has_task(Task::Stance))
        for (const auto& inst : set.stance) {
            if (sample.size() >= 2 * max_instances) break;
            sample.push_back(inst);
        }

    nlohmann::json dump = inspection_json(model, sample, top_k);
    std::string text = dump.dump(2) + "\n";
    if (!o.out_path.empty())
        write_text_file(o.out_path, text);
    else
        std::cout << text;
    return kOk;
}

int cmd_gradcheck(std::uint64_t seed, bool verbose) {
    GradCheckResult res = run_gradcheck_suite(seed, verbose);
    std::printf("max relative error: %.6e (worst: %s[%zu])\n", res.max_rel_err,
                res.worst_param.c_str(), res.worst_index);
    return res.max_rel_err <= 1e-4 ? kOk : kRuntime;
}

int cmd_convert(const std::string& in_dir, const std::string& out_path) {
    if (!fs::exists(in_dir)) throw MissingFileError("input directory not found: " + in_dir);
    std::size_t n = convert_native_corpus(in_dir, out_path);
    std::cout << "wrote " << n << " threads to " << out_path << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sifted multi-task fake-news and stance classifier"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string checkpoint, log_path, in_dir;
    std::uint64_t gc_seed = 7;
    bool gc_verbose = false;
    std::size_t top_k = 5, max_instances = 16;
    std::uint64_t seed_val = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "JSON run config");
        cmd->add_option("--corpus", opts.corpus_path, "thread JSONL corpus")->required();
        cmd->add_option("--vectors", opts.vectors_path, "pretrained word-vector file");
        cmd->add_option("--seed", seed_val, "seed override")
            ->each([&](const std::string&) { opts.seed = seed_val; });
        cmd->add_option("--variant", opts.variant, "model variant: single|mt|mt-g|mt-a|mt-g-a");
        cmd->add_option("--folds", opts.folds, "fold count (default 5)");
    };

    auto* c_train = app.add_subcommand("train", "train on all folds, validate on the holdout");
    add_common(c_train);
    c_train->add_option("--out", opts.out_path, "output directory")->required();

    auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    c_eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    c_eval->add_option("--corpus", opts.corpus_path, "thread JSONL corpus")->required();
    c_eval->add_option("--out", opts.out_path, "report path (stdout when omitted)");

    auto* c_cv = app.add_subcommand("cv", "k-fold cross-validation");
    add_common(c_cv);
    c_cv->add_option("--out", opts.out_path, "JSON report path");
    c_cv->add_option("--log", log_path, "per-epoch JSONL log path");

    auto* c_ablate = app.add_subcommand("ablate", "cross-validate every model variant");
    add_common(c_ablate);
    c_ablate->add_option("--out", opts.out_path, "JSON report path");
    c_ablate->add_option("--log", log_path, "per-epoch JSONL log path");

    auto* c_inspect = app.add_subcommand("inspect", "dump gate and attention internals");
    c_inspect->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    c_inspect->add_option("--corpus", opts.corpus_path, "thread JSONL corpus")->required();
    c_inspect->add_option("--out", opts.out_path, "dump path (stdout when omitted)");
    c_inspect->add_option("--top-k", top_k, "tokens per layer (default 5)");
    c_inspect->add_option("--max-instances", max_instances,
                          "instances per task to dump (default 16)");

    auto* c_gradcheck =
        app.add_subcommand("gradcheck", "finite-difference check of every op and the model");
    c_gradcheck->add_option("--seed", gc_seed, "seed (default 7)");
    c_gradcheck->add_flag("--verbose", gc_verbose, "print one line per check");

    auto* c_convert = app.add_subcommand("convert", "native thread directories to JSONL");
    c_convert->add_option("--in", in_dir, "native corpus root directory")->required();
    c_convert->add_option("--out", opts.out_path, "output JSONL path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (c_train->parsed()) return cmd_train(opts);
        if (c_eval->parsed()) return cmd_eval(checkpoint, opts);
        if (c_cv->parsed()) return cmd_cv(opts, log_path);
        if (c_ablate->parsed()) return cmd_ablate(opts, log_path);
        if (c_inspect->parsed()) return cmd_inspect(checkpoint, opts, top_k, max_instances);
        if (c_gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_verbose);
        if (c_convert->parsed()) return cmd_convert(in_dir, opts.out_path);
    } catch (const MissingFileError& e) {
        return fail("missing_file", e.what(), kMissingFile);
    } catch (const ConfigError& e) {
        return fail("config", e.what(), kConfig);
    } catch (const CheckpointError& e) {
        return fail("checkpoint", e.what(), kCheckpoint);
    } catch (const ShapeError& e) {
        return fail("shape", e.what(), kShape);
    } catch (const ParseError& e) {
        return fail("parse", e.what(), kParse);
    } catch (const TrainingError& e) {
        return fail("training", e.what(), kRuntime);
    } catch (const std::exception& e) {
        return fail("runtime", e.what(), kRuntime);
    }
    return kUsage;
}

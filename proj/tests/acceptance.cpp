// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier scenarios reuse the synthetic corpus generators.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sifted/data.hpp"
#include "sifted/gradcheck.hpp"
#include "sifted/harness.hpp"
#include "sifted/inspect.hpp"
#include "sifted/metrics.hpp"
#include "sifted/model.hpp"
#include "sifted/rng.hpp"
#include "support/synthetic.hpp"

using namespace sifted;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelConfig desk_model_config(Variant v) {
    ModelConfig c;
    c.max_len = 12;
    c.d_word = 8;
    c.d_pos = 12;  // d_model = 20
    c.heads = 2;
    c.blocks = 1;
    c.ssl_heads = 2;
    c.attention_dropout = 0.1;
    c.output_dropout = 0.1;
    c.gate_factorized = false;
    c.variant = v;
    return c;
}

// ---- criterion 1: gradient suite under 1e-4 in under 30 s ----------------

void criterion_gradients() {
    auto t0 = std::chrono::steady_clock::now();
    GradCheckResult res = run_gradcheck_suite(7, false);
    double secs = seconds_since(t0);
    std::ostringstream os;
    os << "gradcheck max rel err " << res.max_rel_err << " (worst " << res.worst_param
       << "), " << secs << " s";
    report(1, res.max_rel_err <= 1e-4 && secs < 30.0, os.str());
}

// ---- criterion 2: equation wiring identities ------------------------------

void criterion_wiring() {
    Vocabulary vocab = Vocabulary::random_init({"alpha", "beta", "gamma", "delta"}, 5, 99);
    ModelConfig base;
    base.max_len = 3;
    base.d_word = 5;
    base.d_pos = 3;
    base.heads = 2;
    base.blocks = 1;
    base.ssl_heads = 2;
    base.attention_dropout = 0.0;
    base.output_dropout = 0.0;
    base.gate_factorized = false;
    std::vector<std::string> tokens{"beta", "gamma", "alpha"};

    auto cfg_of = [&](Variant v) {
        ModelConfig c = base;
        c.variant = v;
        return c;
    };
    SiftedModel full(cfg_of(Variant::MT_GA), vocab, 7);
    ForwardTrace full_tr;
    full.forward(full.embed_tokens(tokens), Task::Fake, false, &full_tr);
    std::size_t D = full.config().flat_dim();

    bool ok = full_tr.ssl.size() == 4 * D;
    double worst = 0.0;
    const auto& ssl = full_tr.ssl.values();
    const auto& g = full_tr.gated.values();
    const auto& a = full_tr.attended.values();
    for (std::size_t i = 0; i < D && ok; ++i) {
        worst = std::max(worst, std::abs(ssl[i] - g[i]));
        worst = std::max(worst, std::abs(ssl[D + i] - std::abs(g[i] - a[i])));
        worst = std::max(worst, std::abs(ssl[2 * D + i] - g[i] * a[i]));
        worst = std::max(worst, std::abs(ssl[3 * D + i] - a[i]));
    }
    ok = ok && worst <= 1e-12;

    // variant flags reduce to the ablation wirings exactly
    {
        SiftedModel m(cfg_of(Variant::MT), vocab, 7);
        ForwardTrace tr;
        m.forward(m.embed_tokens(tokens), Task::Fake, false, &tr);
        ok = ok && tr.ssl.values() == flatten_row(full_tr.h_shared).values();
    }
    {
        SiftedModel m(cfg_of(Variant::MT_G), vocab, 7);
        ForwardTrace tr;
        m.forward(m.embed_tokens(tokens), Task::Fake, false, &tr);
        ok = ok && tr.ssl.values() == full_tr.gated.values();
    }
    {
        SiftedModel m(cfg_of(Variant::MT_A), vocab, 7);
        ForwardTrace tr;
        m.forward(m.embed_tokens(tokens), Task::Fake, false, &tr);
        ok = ok && tr.ssl.values() == full_tr.attended.values();
    }
    {
        SiftedModel m(cfg_of(Variant::Single), vocab, 7);
        ForwardTrace tr;
        m.forward(m.embed_tokens(tokens), Task::Fake, false, &tr);
        ok = ok && tr.features.values() == flatten_row(full_tr.h_private).values();
    }
    std::ostringstream os;
    os << "SSL quarter recovery within 1e-12 (worst " << worst
       << ") and variant reductions exact";
    report(2, ok, os.str());
}

// ---- criterion 3: normalization invariants over 1000 random configs -------

void criterion_normalization() {
    auto rng = seeded_rng(123, "acceptance.norm");
    std::uniform_real_distribution<double> val(-3.0, 3.0);
    bool ok = true;
    std::string detail = "softmax sums, gate range, gate attenuation over 1000 configs";
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        std::size_t l = 1 + trial % 5;
        std::size_t d = 4 + 2 * (trial % 3);
        std::vector<double> hv(l * d);
        for (auto& x : hv) x = val(rng);
        Tensor h = Tensor::from_data({l, d}, hv);

        Tensor sm = softmax(h, -1);
        for (std::size_t i = 0; i < l; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                if (sm.at(i, j) < 0.0) ok = false;
                s += sm.at(i, j);
            }
            if (std::abs(s - 1.0) > 1e-9) ok = false;
        }

        GateCell cell = GateCell::init(l, d, trial % 2 == 0, 1000 + trial, "g");
        auto [gate_act, gated] = cell.forward(h);
        for (std::size_t i = 0; i < l * d; ++i) {
            double gi = gate_act.value_at(i);
            if (!(gi > 0.0 && gi < 1.0)) ok = false;
            if (std::abs(gated.value_at(i)) > std::abs(hv[i])) ok = false;
        }
        if (!ok) detail = "violated at trial " + std::to_string(trial);
    }
    report(3, ok, detail);
}

// ---- criterion 4: overfit a planted-signal corpus -------------------------

void criterion_overfit() {
    auto t0 = std::chrono::steady_clock::now();
    auto threads = synthetic::separable_corpus(32, 2, 9);
    InstanceSet all = derive_instances(threads, DataConfig{});
    bool sized = all.fake.size() == 32 && all.stance.size() == 64;

    ModelConfig mc = desk_model_config(Variant::MT_GA);
    Vocabulary vocab = build_vocabulary(threads, mc.d_word, 1, std::nullopt);
    SiftedModel model(mc, vocab, 1);

    TrainConfig tc;
    tc.batch_size = 8;
    tc.learning_rate = 0.01;
    tc.lambda_fake = 0.6;
    tc.patience = 500;
    tc.seed = 1;

    double fake_acc = 0.0, stance_acc = 0.0;
    std::size_t epochs_used = 0;
    InstanceSet no_val;
    while (epochs_used < 500) {
        TrainConfig chunk = tc;
        chunk.epochs = 20;
        train(model, all, no_val, chunk);
        epochs_used += 20;
        fake_acc = evaluate(model, all.fake).accuracy;
        stance_acc = evaluate(model, all.stance).accuracy;
        if (fake_acc >= 0.95 && stance_acc >= 0.95) break;
    }
    double secs = seconds_since(t0);
    std::ostringstream os;
    os << "train accuracy fake " << fake_acc << ", stance " << stance_acc << " after "
       << epochs_used << " epochs, " << secs << " s";
    report(4, sized && fake_acc >= 0.95 && stance_acc >= 0.95 && epochs_used <= 500 &&
                  secs < 300.0,
           os.str());
}

// ---- criterion 5: ablation ordering on the shared+adverse generator -------

void criterion_ablation_ordering() {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> f1_single, f1_mt, f1_ga;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        synthetic::AdverseSpec spec;
        spec.n_threads = 100;
        spec.eval_reliability = 0.9;
        spec.source_marker_p = 0.5;
        spec.eval_replies = 2;
        spec.chatter_replies = 2;
        spec.synonyms_per_class = 10;
        spec.seed = 100 + seed;
        auto threads = synthetic::planted_shared_adverse_corpus(spec);

        RunConfig cfg;
        cfg.model.max_len = 18;  // source (4) + 4 replies x 3 + slack
        cfg.model.d_word = 8;
        cfg.model.d_pos = 18;  // d_model = 26
        cfg.model.heads = 2;
        cfg.model.blocks = 1;
        cfg.model.ssl_heads = 2;
        cfg.model.attention_dropout = 0.1;
        cfg.model.output_dropout = 0.3;
        cfg.model.gate_factorized = true;
        cfg.train.batch_size = 16;
        cfg.train.learning_rate = 0.001;
        cfg.train.lambda_fake = 0.6;
        // the full variant warms up more slowly than the raw-shared one, so
        // the epoch budget is fixed and early stopping is disabled
        cfg.train.epochs = 60;
        cfg.train.patience = 60;
        cfg.train.seed = seed;
        Vocabulary vocab =
            build_vocabulary(threads, cfg.model.d_word, seed, std::nullopt);

        auto run = [&](Variant v) {
            RunConfig vc = cfg;
            vc.model.variant = v;
            CvReport r = cross_validate(threads, vc, vocab, 2);
            return r.aggregate_fake ? r.aggregate_fake->f1 : 0.0;
        };
        f1_single.push_back(run(Variant::Single));
        f1_mt.push_back(run(Variant::MT));
        f1_ga.push_back(run(Variant::MT_GA));
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    double ms = median(f1_single), mm = median(f1_mt), mg = median(f1_ga);
    double secs = seconds_since(t0);
    std::ostringstream os;
    os << "median fake F1: mt-g-a " << mg << " >= mt " << mm << " >= single " << ms << " ("
       << secs << " s)";
    report(5, mg >= mm && mm >= ms, os.str());
}

// ---- criterion 6: metrics oracle ------------------------------------------

void criterion_metrics_oracle() {
    std::vector<std::size_t> truth{0, 0, 1, 1, 1, 2, 2, 3, 3, 3};
    std::vector<std::size_t> pred{0, 1, 1, 1, 2, 2, 2, 3, 0, 3};
    TaskMetrics m = metrics_from_predictions(truth, pred, 4);
    double exp_p = (0.5 + 2.0 / 3.0 + 2.0 / 3.0 + 1.0) / 4.0;
    double exp_r = (0.5 + 2.0 / 3.0 + 1.0 + 2.0 / 3.0) / 4.0;
    double f2 = 2.0 * (2.0 / 3.0) * 1.0 / (2.0 / 3.0 + 1.0);
    double exp_f = (0.5 + 2.0 / 3.0 + f2 + f2) / 4.0;
    bool ok = m.accuracy == 0.7 && m.precision == exp_p && m.recall == exp_r && m.f1 == exp_f;
    std::ostringstream os;
    os << "A=" << m.accuracy << " P=" << m.precision << " R=" << m.recall << " F1=" << m.f1
       << " equal hand-computed values";
    report(6, ok, os.str());
}

// ---- criterion 7: split contract -------------------------------------------

void criterion_splits() {
    std::vector<Thread> threads;
    for (int i = 0; i < 100; ++i) {
        Thread t;
        t.id = "t" + std::to_string(i);
        t.source.id = "s" + std::to_string(i);
        t.source.text = "text";
        t.veracity = i % 2 == 0 ? Veracity::True : Veracity::False;
        threads.push_back(t);
    }
    SplitPlan a = make_splits(threads, 11, 5);
    SplitPlan b = make_splits(threads, 11, 5);
    bool ok = a.holdout.size() == 10;
    std::set<std::string> seen(a.holdout.begin(), a.holdout.end());
    std::size_t total = a.holdout.size();
    for (const auto& fold : a.folds) {
        total += fold.size();
        for (const auto& id : fold) ok = ok && seen.insert(id).second;  // disjoint
    }
    ok = ok && total == 100 && seen.size() == 100;  // coverage
    ok = ok && a.holdout == b.holdout && a.folds == b.folds;  // deterministic
    report(7, ok, "holdout 10/100, folds disjoint and covering, deterministic under seed");
}

// ---- criterion 8: byte-identical cv runs -----------------------------------

void criterion_determinism() {
#ifdef SIFTED_CLI_PATH
    fs::path dir = fs::temp_directory_path() / "sifted_acceptance_det";
    fs::create_directories(dir);
    auto threads = synthetic::separable_corpus(30, 1, 77);
    std::string corpus = (dir / "corpus.jsonl").string();
    synthetic::write_corpus_jsonl(threads, corpus);
    std::string cfg_path = (dir / "config.json").string();
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({"model": {"max_len": 8, "d_word": 6, "d_pos": 8, "heads": 2, "blocks": 1,)"
            << R"( "ssl_heads": 2, "attention_dropout": 0.1, "output_dropout": 0.1,)"
            << R"( "gate_factorized": false},)"
            << R"( "train": {"batch_size": 8, "learning_rate": 0.01, "epochs": 3, "seed": 5}})";
    }
    auto run = [&](const std::string& out) {
        std::string cmd = std::string(SIFTED_CLI_PATH) + " cv --config " + cfg_path +
                          " --corpus " + corpus + " --out " + out + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    std::string out1 = (dir / "r1.json").string(), out2 = (dir / "r2.json").string();
    int rc1 = run(out1), rc2 = run(out2);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    std::string b1 = slurp(out1), b2 = slurp(out2);
    bool ok = rc1 == 0 && rc2 == 0 && !b1.empty() && b1 == b2;
    std::ostringstream os;
    os << "two cv runs, " << b1.size() << " bytes each, byte-identical";
    report(8, ok, os.str());
    fs::remove_all(dir);
#else
    report(8, false, "CLI path not wired into the build");
#endif
}

// ---- criterion 9: conditional full-scale reproduction ----------------------

void criterion_conditional_full_scale() {
    ModelConfig paper;  // defaults carry the production configuration
    paper.variant = Variant::MT_GA;
    const char* env = std::getenv("SIFTED_MTL_CORPUS");
    if (env && *env) {
        auto corpus = parse_corpus(env);
        RunConfig cfg;
        cfg.model = paper;
        cfg.train.seed = 42;
        Vocabulary vocab =
            build_vocabulary(corpus, cfg.model.d_word, 42, std::nullopt);
        CvReport r = cross_validate(corpus, cfg, vocab, 5);
        std::printf("%s", cv_table_text(r).c_str());
        report(9, r.folds.size() == 5 && r.aggregate_fake.has_value(),
               "full pipeline at production config on supplied corpus");
        return;
    }
    // no corpus supplied: verify the production configuration constructs and
    // runs one forward pass per task (factorized gate engages automatically)
    bool ok = paper.d_model() == 300 && paper.heads == 6 && paper.blocks == 2 &&
              paper.gate_factorized_effective();
    std::vector<std::string> toks{"gunmen", "hostages", "sydney", "siege", "live", "coverage"};
    Vocabulary vocab = Vocabulary::random_init(toks, paper.d_word, 4);
    SiftedModel model(paper, vocab, 4);
    for (Task task : {Task::Fake, Task::Stance}) {
        Tensor probs = model.forward(model.embed_tokens(toks), task, false);
        double s = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) s += probs.value_at(i);
        ok = ok && std::abs(s - 1.0) < 1e-9;
    }
    report(9, ok,
           "conditional: no corpus in SIFTED_MTL_CORPUS; production-config model (d=300, "
           "h=6, b=2, factorized gate) builds and runs both task forwards");
}

}  // namespace

int main() {
    criterion_gradients();
    criterion_wiring();
    criterion_normalization();
    criterion_overfit();
    criterion_ablation_ordering();
    criterion_metrics_oracle();
    criterion_splits();
    criterion_determinism();
    criterion_conditional_full_scale();
    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}

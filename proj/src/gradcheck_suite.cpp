#include <cstdio>

#include "sifted/gradcheck.hpp"
#include "sifted/model.hpp"
#include "sifted/rng.hpp"

// The finite-difference suite behind the gradcheck command: every
// differentiable op at small shapes, then the composed model at the tiny
// reference configuration (l=3, d_model=8, 2 heads, 1 block, 2 sharing heads).

namespace sifted {

namespace {

Tensor rand_t(Shape shape, std::mt19937_64& rng, bool requires_grad = true) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

struct Suite {
    std::uint64_t seed;
    bool verbose;
    GradCheckResult worst;

    void record(const std::string& name, const GradCheckResult& r) {
        if (verbose)
            std::printf("  %-28s max rel err %.3e  (%s[%zu])\n", name.c_str(), r.max_rel_err,
                        r.worst_param.c_str(), r.worst_index);
        if (r.max_rel_err > worst.max_rel_err) {
            worst = r;
            worst.worst_param = name + ":" + r.worst_param;
        }
    }
};

void check_ops(Suite& s) {
    auto rng = seeded_rng(s.seed, "gradcheck.ops");

    {
        Tensor a = rand_t({3, 4}, rng), b = rand_t({4, 2}, rng), w = rand_t({3, 2}, rng, false);
        s.record("matmul", check_gradients([&] { return sum_all(mul(matmul(a, b), w)); },
                                           {{"a", a}, {"b", b}}));
    }
    {
        Tensor a = rand_t({2, 5}, rng), w = rand_t({5, 2}, rng, false);
        s.record("transpose", check_gradients([&] { return sum_all(mul(transpose(a), w)); },
                                              {{"a", a}}));
    }
    for (auto [kind, name] : {std::pair{EwKind::Add, "elementwise.add"},
                              std::pair{EwKind::Sub, "elementwise.sub"},
                              std::pair{EwKind::Mul, "elementwise.mul"},
                              std::pair{EwKind::AbsDiff, "elementwise.abs_diff"}}) {
        Tensor a = rand_t({3, 3}, rng), b = rand_t({3, 3}, rng), w = rand_t({3, 3}, rng, false);
        EwKind k = kind;
        s.record(name, check_gradients(
                           [&, k] { return sum_all(mul(elementwise(a, b, k), w)); },
                           {{"a", a}, {"b", b}}));
    }
    {
        Tensor x = rand_t({2, 6}, rng), w = rand_t({2, 6}, rng, false);
        s.record("softmax", check_gradients([&] { return sum_all(mul(softmax(x, -1), w)); },
                                            {{"x", x}}));
    }
    {
        Tensor x = rand_t({3, 4}, rng), w = rand_t({3, 4}, rng, false);
        std::vector<std::uint8_t> mask{1, 0, 1, 1};
        s.record("masked_softmax", check_gradients([&] {
                     return sum_all(mul(masked_softmax_rows(x, mask), w));
                 },
                                                   {{"x", x}}));
    }
    {
        Tensor x = rand_t({4, 3}, rng), w = rand_t({4, 3}, rng, false);
        s.record("sigmoid", check_gradients([&] { return sum_all(mul(sigmoid(x), w)); },
                                            {{"x", x}}));
        s.record("relu", check_gradients([&] { return sum_all(mul(relu(x), w)); }, {{"x", x}}));
    }
    {
        Tensor a = rand_t({2, 3}, rng), b = rand_t({2, 2}, rng), w = rand_t({2, 5}, rng, false);
        s.record("concat", check_gradients(
                               [&] { return sum_all(mul(concat({a, b}, 1), w)); },
                               {{"a", a}, {"b", b}}));
    }
    {
        Tensor x = rand_t({3, 4}, rng), w = rand_t({1, 12}, rng, false);
        s.record("reshape", check_gradients(
                                [&] { return sum_all(mul(flatten_row(x), w)); }, {{"x", x}}));
    }
    {
        Tensor x = rand_t({4, 4}, rng), w = rand_t({4, 4}, rng, false);
        std::uint64_t seed = s.seed;
        s.record("dropout", check_gradients([&, seed] {
                     auto drng = seeded_rng(seed, "gradcheck.dropout.mask");
                     return sum_all(mul(dropout(x, 0.4, true, drng), w));
                 },
                                            {{"x", x}}));
    }
    {
        Tensor m = rand_t({3, 4}, rng), bias = rand_t({4}, rng), w = rand_t({3, 4}, rng, false);
        s.record("add_row_bias", check_gradients([&] {
                     return sum_all(mul(add_row_bias(m, bias), w));
                 },
                                                 {{"m", m}, {"bias", bias}}));
    }
    {
        Tensor x = rand_t({3, 6}, rng), g = rand_t({6}, rng), b = rand_t({6}, rng);
        Tensor w = rand_t({3, 6}, rng, false);
        s.record("layer_norm", check_gradients([&] {
                     return sum_all(mul(layer_norm_rows(x, g, b), w));
                 },
                                               {{"x", x}, {"gain", g}, {"bias", b}}));
    }
    {
        // strictly positive inputs keep log_clamped away from the clamp kink
        Tensor x = Tensor::from_data({4}, {0.3, 1.2, 0.05, 2.4}, true);
        s.record("log_clamped", check_gradients([&] { return sum_all(log_clamped(x, 1e-12)); },
                                                {{"x", x}}));
        s.record("pick+scale", check_gradients([&] { return scale(pick(x, 2), 3.0); },
                                               {{"x", x}}));
    }
    {
        Tensor table = rand_t({5, 3}, rng);
        Tensor w = rand_t({4, 3}, rng, false);
        std::vector<long> ids{2, 0, -1, 2};
        s.record("gather_rows", check_gradients([&] {
                     return sum_all(mul(gather_rows(table, ids), w));
                 },
                                                {{"table", table}}));
    }
    {
        Tensor q = rand_t({3, 4}, rng), k = rand_t({3, 4}, rng), v = rand_t({3, 4}, rng);
        Tensor w = rand_t({3, 4}, rng, false);
        std::vector<std::uint8_t> mask{1, 1, 0};
        s.record("scaled_dot_attention", check_gradients([&] {
                     return sum_all(mul(scaled_dot_attention(q, k, v, mask), w));
                 },
                                                         {{"q", q}, {"k", k}, {"v", v}}));
    }
}

void check_composed_model(Suite& s) {
    ModelConfig cfg;
    cfg.max_len = 3;
    cfg.d_word = 5;
    cfg.d_pos = 3;  // d_model = 8
    cfg.heads = 2;
    cfg.blocks = 1;
    cfg.ssl_heads = 2;
    cfg.attention_dropout = 0.2;
    cfg.output_dropout = 0.1;
    cfg.gate_factorized = false;
    cfg.variant = Variant::MT_GA;
    Vocabulary vocab =
        Vocabulary::random_init({"one", "two", "three", "four"}, cfg.d_word, s.seed);
    SiftedModel model(cfg, vocab, s.seed);
    LossWeights w = LossWeights::from_lambda_fake(0.6);
    std::uint64_t seed = s.seed;

    auto f = [&, seed] {
        model.reseed_dropout(mix_seed(seed, "gradcheck.model.dropout"));
        std::vector<LabeledSequence> fake{{model.embed_tokens({"one", "two", "three"}), 1}};
        std::vector<LabeledSequence> stance{{model.embed_tokens({"four", "one"}), 2}};
        return model.loss(fake, stance, w, true);
    };
    s.record("composed_model", check_gradients(f, model.parameters()));
}

}  // namespace

GradCheckResult run_gradcheck_suite(std::uint64_t seed, bool verbose) {
    Suite s{seed, verbose, {}};
    check_ops(s);
    check_composed_model(s);
    return s.worst;
}

}  // namespace sifted

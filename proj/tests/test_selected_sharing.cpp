#include <doctest.h>

#include <cmath>

#include "sifted/gradcheck.hpp"
#include "sifted/rng.hpp"
#include "sifted/selected_sharing.hpp"
#include "support/reference.hpp"

using namespace sifted;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = false) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

}  // namespace

TEST_CASE("zero gate parameters halve the shared features") {
    GateCell cell = GateCell::init(2, 3, false, 7, "g");
    std::fill(cell.w.values_mut().begin(), cell.w.values_mut().end(), 0.0);
    auto rng = seeded_rng(7, "test.gate.zero");
    Tensor h = random_tensor({2, 3}, rng);
    auto [g, gated] = cell.forward(h);
    CHECK(g.shape() == Shape{1, 6});
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(g.value_at(i) == 0.5);
        CHECK(gated.value_at(i) == doctest::Approx(h.values()[i] / 2.0).epsilon(1e-15));
    }
}

TEST_CASE("strongly negative bias closes the gate") {
    GateCell cell = GateCell::init(2, 3, false, 11, "g");
    std::fill(cell.w.values_mut().begin(), cell.w.values_mut().end(), 0.0);
    std::fill(cell.b.values_mut().begin(), cell.b.values_mut().end(), -30.0);
    auto rng = seeded_rng(11, "test.gate.closed");
    Tensor h = random_tensor({2, 3}, rng);
    auto [g, gated] = cell.forward(h);
    double h_norm = 0.0, g_norm = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        h_norm += std::abs(h.values()[i]);
        g_norm += std::abs(gated.value_at(i));
    }
    CHECK(g_norm < 1e-12 * h_norm);
}

TEST_CASE("dense gate matches per-element loop oracle") {
    std::size_t l = 4, d = 3;  // D = 12
    GateCell cell = GateCell::init(l, d, false, 13, "g");
    auto rng = seeded_rng(13, "test.gate.oracle");
    Tensor h = random_tensor({l, d}, rng);
    auto [g, gated] = cell.forward(h);

    const auto& hf = h.values();  // row-major flatten
    const auto& w = cell.w.values();
    const auto& b = cell.b.values();
    std::size_t D = l * d;
    for (std::size_t i = 0; i < D; ++i) {
        double acc = b[i];
        for (std::size_t j = 0; j < D; ++j) acc += hf[j] * w[j * D + i];
        double gi = 1.0 / (1.0 + std::exp(-acc));
        CHECK(g.value_at(i) == doctest::Approx(gi).epsilon(1e-12));
        CHECK(gated.value_at(i) == doctest::Approx(gi * hf[i]).epsilon(1e-12));
    }
}

TEST_CASE("factorized gate equals block-diagonal dense gate") {
    std::size_t l = 3, d = 4;
    GateCell fact = GateCell::init(l, d, true, 17, "g");
    GateCell dense = GateCell::init(l, d, false, 18, "g2");
    // embed the factorized weight into a block-diagonal dense matrix
    std::size_t D = l * d;
    auto& dw = dense.w.values_mut();
    std::fill(dw.begin(), dw.end(), 0.0);
    for (std::size_t t = 0; t < l; ++t)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                dw[(t * d + i) * D + (t * d + j)] = fact.w.values()[i * d + j];
    auto& db = dense.b.values_mut();
    for (std::size_t t = 0; t < l; ++t)
        for (std::size_t j = 0; j < d; ++j) db[t * d + j] = fact.b.values()[j];

    auto rng = seeded_rng(19, "test.gate.fact");
    Tensor h = random_tensor({l, d}, rng);
    auto [gf, Gf] = fact.forward(h);
    auto [gd, Gd] = dense.forward(h);
    for (std::size_t i = 0; i < D; ++i) {
        CHECK(gf.value_at(i) == doctest::Approx(gd.value_at(i)).epsilon(1e-12));
        CHECK(Gf.value_at(i) == doctest::Approx(Gd.value_at(i)).epsilon(1e-12));
    }
}

TEST_CASE("gate outputs stay strictly inside (0,1) and only attenuate") {
    auto rng = seeded_rng(23, "test.gate.range");
    for (int trial = 0; trial < 20; ++trial) {
        GateCell cell = GateCell::init(3, 4, trial % 2 == 0, 100 + trial, "g");
        Tensor h = random_tensor({3, 4}, rng);
        auto [g, gated] = cell.forward(h);
        for (std::size_t i = 0; i < g.size(); ++i) {
            CHECK(g.value_at(i) > 0.0);
            CHECK(g.value_at(i) < 1.0);
            CHECK(std::abs(gated.value_at(i)) <= std::abs(h.values()[i]));
        }
    }
}

TEST_CASE("attention cell with identity value path copies the shared row") {
    std::size_t d = 4, l = 3;
    AttentionCell cell = AttentionCell::init(d, 1, 29, "a");
    // value projection and output projection set to identity
    cell.mha.wv[0] = Tensor::identity(d, true);
    cell.mha.wo = Tensor::identity(d, true);
    std::vector<double> row{1.0, -2.0, 0.5, 3.0};
    std::vector<double> shared;
    for (std::size_t i = 0; i < l; ++i) shared.insert(shared.end(), row.begin(), row.end());
    Tensor h_shared = Tensor::from_data({l, d}, shared);
    auto rng = seeded_rng(29, "test.attn.identity");
    Tensor e_task = random_tensor({l, d}, rng);
    std::vector<std::uint8_t> mask(l, 1);
    Tensor out = cell.forward(e_task, h_shared, mask);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < d; ++j)
            CHECK(out.at(i, j) == doctest::Approx(row[j]).epsilon(1e-12));
}

TEST_CASE("two heads on 300 dims gives width-150 heads") {
    AttentionCell cell = AttentionCell::init(300, 2, 31, "a");
    CHECK(cell.mha.d_k == 150);
}

TEST_CASE("attention cell matches brute-force cross-attention oracle") {
    std::size_t l = 3, d = 8;
    AttentionCell cell = AttentionCell::init(d, 2, 37, "a");
    auto rng = seeded_rng(37, "test.attncell.oracle");
    Tensor e_task = random_tensor({l, d}, rng);
    Tensor h_shared = random_tensor({l, d}, rng);
    std::vector<std::uint8_t> mask{1, 1, 0};
    Tensor out = cell.forward(e_task, h_shared, mask);

    auto to_mat = [](const Tensor& t) {
        ref::Mat m = ref::make(t.rows(), t.cols());
        for (std::size_t i = 0; i < t.rows(); ++i)
            for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
        return m;
    };
    std::vector<ref::Mat> wq, wk, wv;
    for (std::size_t h = 0; h < 2; ++h) {
        wq.push_back(to_mat(cell.mha.wq[h]));
        wk.push_back(to_mat(cell.mha.wk[h]));
        wv.push_back(to_mat(cell.mha.wv[h]));
    }
    ref::Mat expect = ref::multi_head(to_mat(e_task), to_mat(h_shared), wq, wk, wv,
                                      to_mat(cell.mha.wo), mask);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < d; ++j)
            CHECK(out.at(i, j) == doctest::Approx(expect[i][j]).epsilon(1e-10));
}

TEST_CASE("fuse with equal inputs zeroes the difference block") {
    Tensor g = Tensor::from_data({1, 3}, {0.5, -1.0, 2.0});
    Tensor ssl = fuse(g, g);
    CHECK(ssl.shape() == Shape{1, 12});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(ssl.value_at(i) == g.value_at(i));
        CHECK(ssl.value_at(3 + i) == 0.0);
        CHECK(ssl.value_at(6 + i) == g.value_at(i) * g.value_at(i));
        CHECK(ssl.value_at(9 + i) == g.value_at(i));
    }
}

TEST_CASE("fuse with zero gate keeps only attention blocks") {
    Tensor g = Tensor::zeros({1, 3});
    Tensor a = Tensor::from_data({1, 3}, {1.0, -2.0, 0.5});
    Tensor ssl = fuse(g, a);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(ssl.value_at(i) == 0.0);
        CHECK(ssl.value_at(3 + i) == std::abs(a.value_at(i)));
        CHECK(ssl.value_at(6 + i) == 0.0);
        CHECK(ssl.value_at(9 + i) == a.value_at(i));
    }
}

TEST_CASE("fuse blocks match scripted elementwise oracle and slice back exactly") {
    auto rng = seeded_rng(41, "test.fuse.oracle");
    Tensor g = random_tensor({1, 6}, rng);
    Tensor a = random_tensor({1, 6}, rng);
    Tensor ssl = fuse(g, a);
    CHECK(ssl.shape() == Shape{1, 24});
    for (std::size_t i = 0; i < 6; ++i) {
        double gv = g.value_at(i), av = a.value_at(i);
        CHECK(std::abs(ssl.value_at(i) - gv) <= 1e-12);
        CHECK(std::abs(ssl.value_at(6 + i) - std::abs(gv - av)) <= 1e-12);
        CHECK(std::abs(ssl.value_at(12 + i) - gv * av) <= 1e-12);
        CHECK(std::abs(ssl.value_at(18 + i) - av) <= 1e-12);
    }
}

TEST_CASE("fuse rejects mismatched widths") {
    CHECK_THROWS_AS(fuse(Tensor::zeros({1, 3}), Tensor::zeros({1, 4})), ShapeError);
}

TEST_CASE("selected sharing layer passes composed gradient check") {
    std::size_t l = 3, d = 8;
    GateCell gate = GateCell::init(l, d, false, 43, "g");
    AttentionCell attn = AttentionCell::init(d, 2, 43, "a");
    auto rng = seeded_rng(43, "test.ssl.grad");
    Tensor e_task = random_tensor({l, d}, rng, true);
    Tensor h_shared = random_tensor({l, d}, rng, true);
    std::vector<std::uint8_t> mask{1, 1, 1};

    std::vector<std::pair<std::string, Tensor>> params{{"e", e_task}, {"h", h_shared}};
    gate.collect("gate", params);
    attn.collect("attn", params);
    auto f = [&] {
        auto [g, gated] = gate.forward(h_shared);
        Tensor a = flatten_row(attn.forward(e_task, h_shared, mask));
        return sum_all(fuse(gated, a));
    };
    auto res = check_gradients(f, params);
    CHECK(res.max_rel_err < 1e-4);
}

#include <doctest.h>

#include "oracle.hpp"
#include "poisonlab/errors.hpp"
#include "poisonlab/lstm.hpp"

#include <cmath>

using namespace poisonlab;
using namespace poisonlab::nn;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("zero cell gives zero state") {
    VectorXd x = VectorXd::Constant(3, 0.7), h = VectorXd::Zero(2), c = VectorXd::Zero(2);
    auto [h2, c2] = lstm_cell_forward(x, h, c, MatrixXd::Zero(8, 3), MatrixXd::Zero(8, 2), VectorXd::Zero(8));
    CHECK(h2.isZero(0.0));
    CHECK(c2.isZero(0.0));
}

TEST_CASE("scalar cell with unit input weights") {
    VectorXd x = VectorXd::Ones(1), h = VectorXd::Zero(1), c = VectorXd::Zero(1);
    auto [h2, c2] = lstm_cell_forward(x, h, c, MatrixXd::Ones(4, 1), MatrixXd::Zero(4, 1), VectorXd::Zero(4));
    // Hand evaluation: i = f = o = sigmoid(1), g = tanh(1).
    const double s = 1.0 / (1.0 + std::exp(-1.0));
    const double c_ref = s * std::tanh(1.0);
    const double h_ref = s * std::tanh(c_ref);
    CHECK(c2(0) == doctest::Approx(c_ref).epsilon(1e-14));
    CHECK(h2(0) == doctest::Approx(h_ref).epsilon(1e-14));
    CHECK(c2(0) == doctest::Approx(0.556770).epsilon(1e-6));
    CHECK(h2(0) == doctest::Approx(0.369606).epsilon(1e-6));
}

TEST_CASE("saturated forget gate carries the memory") {
    const double k = 0.8125;
    VectorXd x = VectorXd::Zero(1), h = VectorXd::Zero(1), c = VectorXd::Constant(1, k);
    VectorXd b(4);
    b << -60.0, 60.0, 0.3, 0.0; // i -> 0, f -> 1
    auto [h2, c2] = lstm_cell_forward(x, h, c, MatrixXd::Zero(4, 1), MatrixXd::Zero(4, 1), b);
    CHECK(c2(0) == doctest::Approx(k).epsilon(1e-15));
}

TEST_CASE("cell recurrence audit against scalar gates") {
    std::mt19937_64 eng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int I = 3, H = 4;
        MatrixXd W = MatrixXd::Random(4 * H, I), U = MatrixXd::Random(4 * H, H);
        VectorXd b = VectorXd::Random(4 * H), x = VectorXd::Random(I), h = VectorXd::Random(H),
                 c = VectorXd::Random(H);
        auto [h2, c2] = lstm_cell_forward(x, h, c, W, U, b);
        std::vector<double> hv(h.data(), h.data() + H), cv(c.data(), c.data() + H), xv(x.data(), x.data() + I);
        oracle::cell(xv, hv, cv, oracle::read_mat(W), oracle::read_mat(U), oracle::read_vec(b));
        for (int j = 0; j < H; ++j) {
            CHECK(c2(j) == doctest::Approx(cv[static_cast<std::size_t>(j)]).epsilon(1e-14));
            CHECK(h2(j) == doctest::Approx(hv[static_cast<std::size_t>(j)]).epsilon(1e-14));
        }
    }
}

TEST_CASE("cell rejects inconsistent shapes") {
    VectorXd x = VectorXd::Zero(2), h = VectorXd::Zero(3), c = VectorXd::Zero(3);
    CHECK_THROWS_AS(lstm_cell_forward(x, h, c, MatrixXd::Zero(12, 3), MatrixXd::Zero(12, 3), VectorXd::Zero(12)),
                    DataError);
    CHECK_THROWS_AS(lstm_cell_forward(x, h, c, MatrixXd::Zero(12, 2), MatrixXd::Zero(12, 3), VectorXd::Zero(11)),
                    DataError);
}

TEST_CASE("parameter layout is contiguous and sized for the dims") {
    LstmDims d{2, 128, 8};
    ParameterLayout l(d);
    CHECK(l.w1 == 0);
    CHECK(l.u1 == 4 * 128 * 2);
    CHECK(l.size == 4 * 128 * (2 + 128 + 1) + 4 * 8 * (128 + 8 + 1) + 8 + 1);
    LstmModel m(d);
    CHECK(m.params().size() == static_cast<Eigen::Index>(l.size));
    CHECK(m.W1().rows() == 512);
    CHECK(m.U2().cols() == 8);
    CHECK_THROWS_AS(LstmModel(LstmDims{0, 4, 4}), ConfigError);
}

TEST_CASE("initialization: bounded, forget bias shifted, seeded") {
    LstmDims d{2, 16, 4};
    LstmModel a = LstmModel::initialized(d, 11), b = LstmModel::initialized(d, 11), c = LstmModel::initialized(d, 12);
    CHECK(a.params() == b.params());
    CHECK(a.params() != c.params());
    CHECK(a.W1().cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(2.0));
    CHECK(a.U1().cwiseAbs().maxCoeff() <= 0.25);
    for (int j = 0; j < 16; ++j) {
        CHECK(a.b1()(16 + j) >= 0.75);
        CHECK(a.b1()(16 + j) <= 1.25);
    }
    CHECK(a.b_out() == 0.0);
}

TEST_CASE("zero model predicts the dense bias") {
    LstmModel m(LstmDims{2, 5, 3});
    m.params()(static_cast<Eigen::Index>(m.layout().b_out)) = 0.375;
    MatrixXd w = MatrixXd::Random(2, 7);
    CHECK(forward_sequence(m, w, 7) == 0.375);
}

TEST_CASE("tiny model matches the straight-line oracle") {
    LstmModel m = LstmModel::initialized(LstmDims{2, 3, 2}, 99);
    MatrixXd w(2, 6);
    w << 0.1, 0.5, -0.3, 0.9, 0.0, 0.25, 1.0, -0.2, 0.4, 0.6, 0.8, -1.0;
    const double ref = oracle::forward(m, w);
    CHECK(std::abs(forward_sequence(m, w, 6) - ref) < 1e-12);
}

TEST_CASE("batched forward equals per-window forward") {
    LstmModel m = LstmModel::initialized(LstmDims{3, 6, 2}, 4);
    std::vector<MatrixXd> steps(4, MatrixXd::Random(3, 5));
    for (auto& s : steps) s = MatrixXd::Random(3, 5);
    Eigen::RowVectorXd y = forward_batch(m, steps);
    for (int j = 0; j < 5; ++j) {
        MatrixXd w(3, 4);
        for (int t = 0; t < 4; ++t) w.col(t) = steps[static_cast<std::size_t>(t)].col(j);
        CHECK(std::abs(y(j) - oracle::forward(m, w)) < 1e-12);
    }
}

TEST_CASE("window shape is checked") {
    LstmModel m(LstmDims{2, 3, 2});
    CHECK_THROWS_AS(forward_sequence(m, MatrixXd::Zero(2, 4), 5), DataError);
    CHECK_THROWS_AS(forward_sequence(m, MatrixXd::Zero(3, 5), 5), DataError);
}

TEST_CASE("analytic gradients match central differences on random small models") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        oracle::SmallProblem p = oracle::random_problem(seed);
        LossAndGradient lg = bptt_gradients(p.model, p.batch);
        CHECK(lg.loss == doctest::Approx(oracle::batch_mae(p.model, p.batch)).epsilon(1e-12));
        oracle::GradCheck gc = oracle::gradient_check(p.model, p.batch, lg.gradient);
        CAPTURE(seed);
        CHECK(gc.max_rel < 1e-4);
    }
}

TEST_CASE("zero residual gives a zero gradient") {
    oracle::SmallProblem p = oracle::random_problem(77);
    p.batch.targets = forward_batch(p.model, p.batch.steps);
    LossAndGradient lg = bptt_gradients(p.model, p.batch);
    CHECK(lg.loss == 0.0);
    CHECK(lg.gradient.isZero(0.0));
}

TEST_CASE("an all-zero feature column gets no input-weight gradient") {
    LstmModel m = LstmModel::initialized(LstmDims{3, 5, 2}, 8);
    Batch b;
    b.steps.assign(4, MatrixXd::Random(3, 6));
    for (auto& s : b.steps) {
        s = MatrixXd::Random(3, 6);
        s.row(1).setZero();
    }
    b.targets = Eigen::RowVectorXd::Constant(6, 3.0);
    LossAndGradient lg = bptt_gradients(m, b);
    Eigen::Map<const MatrixXd> gW1(lg.gradient.data() + m.layout().w1, 20, 3);
    CHECK(gW1.col(1).isZero(0.0));
    CHECK_FALSE(gW1.col(0).isZero(0.0));
}

TEST_CASE("Adam: zero gradient leaves parameters and decays moments") {
    VectorXd p = VectorXd::Constant(3, 1.5);
    AdamState s(3);
    s.m = VectorXd::Constant(3, 0.2);
    s.v = VectorXd::Constant(3, 0.04);
    s.step = 5;
    VectorXd before = p;
    AdamConfig cfg;
    VectorXd m_prev = s.m, v_prev = s.v;
    adam_update(p, VectorXd::Zero(3), s, cfg);
    CHECK(s.step == 6);
    CHECK(s.m.isApprox(0.9 * m_prev));
    CHECK(s.v.isApprox(0.999 * v_prev));

    VectorXd q = before;
    AdamState fresh(3);
    adam_update(q, VectorXd::Zero(3), fresh, cfg);
    CHECK(q == before);
}

TEST_CASE("Adam: first step moves by about lr against the gradient") {
    VectorXd p = VectorXd::Zero(1);
    AdamState s(1);
    AdamConfig cfg;
    adam_update(p, VectorXd::Constant(1, 0.1), s, cfg);
    // m_hat = 0.1, v_hat = 0.01: step = lr * 0.1 / (0.1 + eps).
    CHECK(p(0) == doctest::Approx(-0.01 * 0.1 / (0.1 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("Adam: constant gradient settles at an lr-sized step") {
    const double g = 0.37, lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double m = 0, v = 0, last_step = 0;
    for (int k = 1; k <= 1000; ++k) {
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        last_step = lr * (m / (1 - std::pow(b1, k))) / (std::sqrt(v / (1 - std::pow(b2, k))) + eps);
    }
    VectorXd p = VectorXd::Zero(1);
    AdamState s(1);
    double before = 0.0;
    for (int k = 1; k <= 1000; ++k) {
        before = p(0);
        adam_update(p, VectorXd::Constant(1, g), s, AdamConfig{});
    }
    CHECK(before - p(0) == doctest::Approx(last_step).epsilon(1e-9));
    CHECK(last_step == doctest::Approx(lr).epsilon(1e-6));
}

TEST_CASE("global norm clipping") {
    VectorXd g(2);
    g << 3.0, 4.0;
    CHECK(clip_global_norm(g, 10.0) == 5.0);
    CHECK(g(0) == 3.0);
    CHECK(clip_global_norm(g, 1.0) == 5.0);
    CHECK(g.norm() == doctest::Approx(1.0));
}

TEST_CASE("min-max normalization") {
    CHECK(normalize(5, 0, 20) == 0.25);
    CHECK(normalize(25, 0, 20) == 1.25);
    CHECK(normalize(7, 3, 3) == 0.0);
    for (double x : {-4.0, 0.0, 3.3, 19.9, 40.0}) CHECK(std::abs(denormalize(normalize(x, -2, 17), -2, 17) - x) < 1e-12);

    std::vector<std::vector<double>> rows{{1, 10}, {3, 5}, {2, 8}, {100, -100}};
    std::vector<double> t{4, 2, 6, 99};
    NormalizationSpec s = NormalizationSpec::fit(rows, t, 0, 3);
    CHECK(s.feature_min == std::vector<double>{1, 5});
    CHECK(s.feature_max == std::vector<double>{3, 10});
    CHECK(s.target_min == 2);
    CHECK(s.target_max == 6);
    CHECK_THROWS_AS(NormalizationSpec::fit(rows, t, 2, 2), DataError);
}

TEST_CASE("training config validation") {
    TrainingConfig c;
    CHECK_NOTHROW(c.validate());
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.adam.lr = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

namespace {

SequenceDataset toy_dataset(int n, int lookback) {
    SequenceDataset d;
    d.lookback = lookback;
    const int T = n + lookback;
    d.features.resize(2, T);
    d.targets.resize(T);
    for (int t = 0; t < T; ++t) {
        d.features(0, t) = 0.5 + 0.4 * std::sin(0.7 * t);
        d.features(1, t) = 0.5 + 0.4 * std::cos(1.3 * t);
        d.targets(t) = 0.5 + 0.3 * std::sin(0.9 * t + 0.2);
    }
    for (int e = lookback; e < T; ++e) d.ends.push_back(static_cast<std::size_t>(e));
    return d;
}

} // namespace

TEST_CASE("ten-sample toy set is memorized") {
    SequenceDataset d = toy_dataset(10, 4);
    TrainingConfig cfg;
    cfg.epochs = 500;
    cfg.batch_size = 10;
    cfg.lookback = 4;
    LstmModel m = LstmModel::initialized(LstmDims{2, 128, 8}, 7);
    TrainingHistory h = train(m, d, nullptr, cfg);
    REQUIRE(h.train_mae.size() == 500);
    CHECK(dataset_mae(m, d) < 0.01);
    CHECK(h.train_mae.back() < h.train_mae.front());

    // Order sensitivity on the trained model.
    MatrixXd w = d.window(3);
    MatrixXd swapped = w;
    swapped.col(0).swap(swapped.col(2));
    REQUIRE((w.col(0) - w.col(2)).norm() > 1e-3);
    CHECK(forward_sequence(m, w, 4) != forward_sequence(m, swapped, 4));
}

TEST_CASE("training is deterministic for a seed") {
    SequenceDataset d = toy_dataset(60, 5);
    TrainingConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    cfg.lookback = 5;
    auto run = [&](std::uint64_t seed) {
        cfg.seed = seed;
        LstmModel m = LstmModel::initialized(LstmDims{2, 12, 4}, seed);
        TrainingHistory h = train(m, d, &d, cfg);
        return std::pair{m.params(), h.train_mae};
    };
    auto a = run(5), b = run(5), c = run(6);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK(a.first != c.first);
}

TEST_CASE("runaway learning rate is a numeric error") {
    SequenceDataset d = toy_dataset(20, 3);
    d.targets *= 1e300;
    d.targets.array() *= 1e10;
    TrainingConfig cfg;
    cfg.epochs = 3;
    cfg.lookback = 3;
    LstmModel m = LstmModel::initialized(LstmDims{2, 4, 2}, 1);
    CHECK_THROWS_AS(train(m, d, nullptr, cfg), NumericError);
}

TEST_CASE("dataset windows and batches") {
    SequenceDataset d = toy_dataset(8, 3);
    CHECK(d.size() == 8);
    MatrixXd w = d.window(0);
    CHECK(w == d.features.leftCols(3));
    std::vector<std::size_t> which{2, 5};
    Batch b = d.batch(which);
    CHECK(b.steps.size() == 3);
    CHECK(b.steps[0].col(1) == d.features.col(5));
    CHECK(b.targets(0) == d.targets(5));
    CHECK(d.all().size() == 8);
}

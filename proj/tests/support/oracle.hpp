#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Everything here is plain loops over std::vector and <cmath>; none of
// it shares code with the library it checks.

#include "poisonlab/lstm.hpp"
#include "poisonlab/msgplane.hpp"
#include "poisonlab/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline Mat read_mat(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
    return out;
}

inline std::vector<double> read_vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

/// One LSTM step, gate rows stacked i, f, g, o.
inline void cell(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c, const Mat& W,
                 const Mat& U, const std::vector<double>& b) {
    const std::size_t H = h.size();
    std::vector<double> z(4 * H);
    for (std::size_t r = 0; r < 4 * H; ++r) {
        double acc = b[r];
        for (std::size_t k = 0; k < x.size(); ++k) acc += W[r][k] * x[k];
        for (std::size_t k = 0; k < H; ++k) acc += U[r][k] * h[k];
        z[r] = acc;
    }
    for (std::size_t j = 0; j < H; ++j) {
        double i = sigmoid(z[j]);
        double f = sigmoid(z[H + j]);
        double g = std::tanh(z[2 * H + j]);
        double o = sigmoid(z[3 * H + j]);
        c[j] = f * c[j] + i * g;
        h[j] = o * std::tanh(c[j]);
    }
}

/// Two stacked layers and the dense head over one window (columns = steps).
inline double forward(const poisonlab::nn::LstmModel& m, const Eigen::MatrixXd& window) {
    const auto& d = m.dims();
    Mat W1 = read_mat(m.W1()), U1 = read_mat(m.U1()), W2 = read_mat(m.W2()), U2 = read_mat(m.U2());
    std::vector<double> b1 = read_vec(m.b1()), b2 = read_vec(m.b2()), wo = read_vec(m.w_out());
    std::vector<double> h1(static_cast<std::size_t>(d.hidden1), 0.0), c1 = h1;
    std::vector<double> h2(static_cast<std::size_t>(d.hidden2), 0.0), c2 = h2;
    for (Eigen::Index t = 0; t < window.cols(); ++t) {
        std::vector<double> x(static_cast<std::size_t>(window.rows()));
        for (Eigen::Index k = 0; k < window.rows(); ++k) x[static_cast<std::size_t>(k)] = window(k, t);
        cell(x, h1, c1, W1, U1, b1);
        cell(h1, h2, c2, W2, U2, b2);
    }
    double y = m.b_out();
    for (std::size_t k = 0; k < h2.size(); ++k) y += wo[k] * h2[k];
    return y;
}

/// Batch MAE computed window by window with the scalar oracle.
inline double batch_mae(const poisonlab::nn::LstmModel& m, const poisonlab::nn::Batch& b) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        Eigen::MatrixXd w(b.steps.front().rows(), static_cast<Eigen::Index>(b.steps.size()));
        for (std::size_t t = 0; t < b.steps.size(); ++t) w.col(static_cast<Eigen::Index>(t)) = b.steps[t].col(j);
        s += std::abs(forward(m, w) - b.targets(j));
    }
    return s / static_cast<double>(b.size());
}

struct GradCheck {
    double max_rel = 0.0;
    std::size_t checked = 0;
};

/// Central differences of the oracle loss against the analytic gradient.
/// Relative error |a - n| / max(|a|, |n|, floor); the floor keeps parameters
/// whose true gradient is zero from dividing rounding noise by zero.
inline GradCheck gradient_check(poisonlab::nn::LstmModel model, const poisonlab::nn::Batch& batch,
                                const Eigen::VectorXd& analytic, double eps = 1e-5, double floor = 1e-6) {
    GradCheck out;
    Eigen::VectorXd& p = model.params();
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double keep = p(k);
        p(k) = keep + eps;
        const double up = batch_mae(model, batch);
        p(k) = keep - eps;
        const double down = batch_mae(model, batch);
        p(k) = keep;
        const double num = (up - down) / (2.0 * eps);
        const double a = analytic(k);
        const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
        out.max_rel = std::max(out.max_rel, rel);
        ++out.checked;
    }
    return out;
}

/// Random small problem: dims in [1, 4], window length in [1, 5], batch of 3,
/// targets far from the predictions so no residual sits on the MAE kink.
struct SmallProblem {
    poisonlab::nn::LstmModel model{poisonlab::nn::LstmDims{1, 1, 1}};
    poisonlab::nn::Batch batch;
};

inline SmallProblem random_problem(std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    auto pick = [&](int lo, int hi) { return lo + static_cast<int>(eng() % static_cast<std::uint64_t>(hi - lo + 1)); };
    auto unit = [&] { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };
    poisonlab::nn::LstmDims d{pick(1, 4), pick(1, 4), pick(1, 4)};
    SmallProblem p;
    p.model = poisonlab::nn::LstmModel::initialized(d, seed * 7919 + 1);
    // Spread the parameters beyond the init range so saturation regions are exercised.
    for (Eigen::Index k = 0; k < p.model.params().size(); ++k) p.model.params()(k) += 0.5 * (2.0 * unit() - 1.0);
    const int L = pick(1, 5);
    const int B = 3;
    p.batch.steps.assign(static_cast<std::size_t>(L), Eigen::MatrixXd(d.input, B));
    for (auto& s : p.batch.steps)
        for (Eigen::Index r = 0; r < s.rows(); ++r)
            for (Eigen::Index c = 0; c < s.cols(); ++c) s(r, c) = 2.0 * unit() - 1.0;
    p.batch.targets.resize(B);
    for (int j = 0; j < B; ++j) {
        Eigen::MatrixXd w(d.input, L);
        for (int t = 0; t < L; ++t) w.col(t) = p.batch.steps[static_cast<std::size_t>(t)].col(j);
        const double y = forward(p.model, w);
        p.batch.targets(j) = y + ((j % 2) ? 1.0 : -1.0) * (0.5 + unit());
    }
    return p;
}

/// Brute-force per-movement statistics at `node` from one second of BSMs,
/// written against the raw network tables rather than the library helpers.
struct MovementTotals {
    int counts[8] = {};
    double awt[8] = {};
};

inline MovementTotals movement_totals(const std::vector<poisonlab::BsmRecord>& records, const poisonlab::RoadNetwork& net,
                                      poisonlab::NodeId node) {
    MovementTotals out;
    for (const auto& r : records) {
        const poisonlab::Edge& e = net.edges().at(r.edge);
        if (e.to != node || !net.nodes().at(e.to).signalized) continue;
        const int approach = static_cast<int>(e.heading);
        // Right turns share the through movement's slot.
        const int slot = approach * 2 + (r.intent == poisonlab::Turn::Left ? 0 : 1);
        out.counts[slot] += 1;
        out.awt[slot] += r.waiting;
    }
    return out;
}

} // namespace oracle

#include "poisonlab/lstm.hpp"

#include "poisonlab/errors.hpp"
#include "poisonlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace poisonlab::nn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

ParameterLayout::ParameterLayout(const LstmDims& d) {
    const std::size_t I = d.input, H1 = d.hidden1, H2 = d.hidden2;
    std::size_t off = 0;
    w1 = off, off += 4 * H1 * I;
    u1 = off, off += 4 * H1 * H1;
    b1 = off, off += 4 * H1;
    w2 = off, off += 4 * H2 * H1;
    u2 = off, off += 4 * H2 * H2;
    b2 = off, off += 4 * H2;
    w_out = off, off += H2;
    b_out = off, off += 1;
    size = off;
}

LstmModel::LstmModel(const LstmDims& dims) : dims_(dims), layout_(dims) {
    if (dims.input < 1 || dims.hidden1 < 1 || dims.hidden2 < 1) throw ConfigError("LSTM dimensions must be positive");
    params_ = VectorXd::Zero(static_cast<Index>(layout_.size));
}

LstmModel LstmModel::initialized(const LstmDims& dims, std::uint64_t seed) {
    LstmModel m(dims);
    std::mt19937_64 eng(seed);
    double* p = m.params_.data();
    const auto& L = m.layout_;
    auto fill = [&](std::size_t off, std::size_t n, int fan_in) {
        const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < n; ++i) p[off + i] = (2.0 * uniform01(eng) - 1.0) * k;
    };
    const int I = dims.input, H1 = dims.hidden1, H2 = dims.hidden2;
    fill(L.w1, 4 * H1 * I, I);
    fill(L.u1, 4 * H1 * H1, H1);
    fill(L.b1, 4 * H1, H1);
    fill(L.w2, 4 * H2 * H1, H1);
    fill(L.u2, 4 * H2 * H2, H2);
    fill(L.b2, 4 * H2, H2);
    fill(L.w_out, H2, H2);
    p[L.b_out] = 0.0;
    for (int j = 0; j < H1; ++j) p[L.b1 + H1 + j] += 1.0;
    for (int j = 0; j < H2; ++j) p[L.b2 + H2 + j] += 1.0;
    return m;
}

namespace {

// Both activations go through Eigen's packet exp, which is vectorized for
// doubles where tanh is not. Saturation is exact: exp overflow yields 0 or 1.
template <class Derived>
void sigmoid_inplace(Eigen::MatrixBase<Derived>& m) {
    m.derived() = (1.0 + (-m.derived().array()).exp()).inverse().matrix();
}

template <class Derived>
void tanh_inplace(Eigen::MatrixBase<Derived>& m) {
    m.derived() = (1.0 - 2.0 / ((2.0 * m.derived().array()).exp() + 1.0)).matrix();
}

template <class Derived>
void sigmoid_inplace(Eigen::MatrixBase<Derived>&& m) { sigmoid_inplace(m); }

template <class Derived>
void tanh_inplace(Eigen::MatrixBase<Derived>&& m) { tanh_inplace(m); }

MatrixXd tanh_of(const MatrixXd& m) {
    MatrixXd out = m;
    tanh_inplace(out);
    return out;
}

/// Per-step activations of one layer over a batch, kept for the backward pass.
struct LayerTrace {
    std::vector<MatrixXd> gates; // 4H x B after nonlinearity, rows i,f,g,o
    std::vector<MatrixXd> c;     // H x B
    std::vector<MatrixXd> tc;    // tanh(c)
    std::vector<MatrixXd> h;     // H x B
};

template <class W, class U, class Bv>
void layer_forward(const std::vector<MatrixXd>& xs, const W& Wm, const U& Um, const Bv& b, int H, LayerTrace& tr) {
    const Index B = xs.front().cols();
    const std::size_t L = xs.size();
    tr.gates.resize(L);
    tr.c.resize(L);
    tr.tc.resize(L);
    tr.h.resize(L);
    for (std::size_t t = 0; t < L; ++t) {
        MatrixXd& z = tr.gates[t];
        z.resize(4 * H, B);
        if (Wm.cols() <= 8) z.noalias() = Wm.lazyProduct(xs[t]);
        else z.noalias() = Wm * xs[t];
        if (t > 0) z.noalias() += Um * tr.h[t - 1];
        z.colwise() += b;
        sigmoid_inplace(z.topRows(2 * H));
        tanh_inplace(z.middleRows(2 * H, H));
        sigmoid_inplace(z.bottomRows(H));
        MatrixXd& c = tr.c[t];
        c.resize(H, B);
        if (t > 0) c = z.middleRows(H, H).cwiseProduct(tr.c[t - 1]) + z.topRows(H).cwiseProduct(z.middleRows(2 * H, H));
        else c = z.topRows(H).cwiseProduct(z.middleRows(2 * H, H));
        tr.tc[t] = c;
        tanh_inplace(tr.tc[t]);
        tr.h[t] = z.bottomRows(H).cwiseProduct(tr.tc[t]);
    }
}

/// Accumulates dW, dU, db for one layer given dL/dh at every step; returns
/// dL/dx per step when `want_dx`.
template <class W, class U>
std::vector<MatrixXd> layer_backward(const std::vector<MatrixXd>& xs, const LayerTrace& tr,
                                     const std::vector<MatrixXd>& dh_from_above, const W& Wm, const U& Um, int H,
                                     double* dW, double* dU, double* db, bool want_dx) {
    const std::size_t L = xs.size();
    const Index B = xs.front().cols();
    const Index I = xs.front().rows();
    Eigen::Map<MatrixXd> gW(dW, 4 * H, I), gU(dU, 4 * H, H);
    Eigen::Map<VectorXd> gb(db, 4 * H);
    std::vector<MatrixXd> dx(want_dx ? L : 0);
    MatrixXd dh_next = MatrixXd::Zero(H, B), dc_next = MatrixXd::Zero(H, B);
    MatrixXd dz(4 * H, B);
    for (std::size_t s = L; s-- > 0;) {
        const MatrixXd& g = tr.gates[s];
        auto gi = g.topRows(H).array();
        auto gf = g.middleRows(H, H).array();
        auto gg = g.middleRows(2 * H, H).array();
        auto go = g.bottomRows(H).array();
        auto tc = tr.tc[s].array();

        MatrixXd dh = dh_next;
        if (dh_from_above[s].size() > 0) dh += dh_from_above[s];
        auto dha = dh.array();
        MatrixXd dc = dc_next + (dha * go * (1.0 - tc.square())).matrix();
        auto dca = dc.array();

        dz.topRows(H) = (dca * gg * gi * (1.0 - gi)).matrix();
        if (s > 0) dz.middleRows(H, H) = (dca * tr.c[s - 1].array() * gf * (1.0 - gf)).matrix();
        else dz.middleRows(H, H).setZero();
        dz.middleRows(2 * H, H) = (dca * gi * (1.0 - gg.square())).matrix();
        dz.bottomRows(H) = (dha * tc * go * (1.0 - go)).matrix();

        gW.noalias() += dz * xs[s].transpose();
        if (s > 0) gU.noalias() += dz * tr.h[s - 1].transpose();
        gb += dz.rowwise().sum();
        if (want_dx) dx[s].noalias() = Wm.transpose() * dz;
        dh_next.noalias() = Um.transpose() * dz;
        dc_next = (dca * gf).matrix();
    }
    return dx;
}

struct ForwardTrace {
    LayerTrace l1, l2;
    Eigen::RowVectorXd y;
};

void forward_traced(const LstmModel& m, const std::vector<MatrixXd>& steps, ForwardTrace& tr) {
    if (steps.empty()) throw DataError("empty input sequence");
    for (const auto& s : steps) {
        if (s.rows() != m.dims().input || s.cols() != steps.front().cols())
            throw DataError("input step has shape " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                            ", expected " + std::to_string(m.dims().input) + "x" +
                            std::to_string(steps.front().cols()));
    }
    layer_forward(steps, m.W1(), m.U1(), m.b1(), m.dims().hidden1, tr.l1);
    layer_forward(tr.l1.h, m.W2(), m.U2(), m.b2(), m.dims().hidden2, tr.l2);
    tr.y = m.w_out().transpose() * tr.l2.h.back();
    tr.y.array() += m.b_out();
}

} // namespace

std::pair<VectorXd, VectorXd> lstm_cell_forward(const VectorXd& x, const VectorXd& h, const VectorXd& c,
                                                const Eigen::Ref<const MatrixXd>& W,
                                                const Eigen::Ref<const MatrixXd>& U,
                                                const Eigen::Ref<const VectorXd>& b) {
    const Index H = h.size();
    if (W.rows() != 4 * H || U.rows() != 4 * H || U.cols() != H || b.size() != 4 * H || W.cols() != x.size() ||
        c.size() != H)
        throw DataError("lstm_cell_forward: inconsistent shapes");
    MatrixXd z = W * x + U * h + b;
    sigmoid_inplace(z.topRows(2 * H));
    tanh_inplace(z.middleRows(2 * H, H));
    sigmoid_inplace(z.bottomRows(H));
    VectorXd i = z.col(0).segment(0, H);
    VectorXd f = z.col(0).segment(H, H);
    VectorXd g = z.col(0).segment(2 * H, H);
    VectorXd o = z.col(0).segment(3 * H, H);
    VectorXd c2 = f.cwiseProduct(c) + i.cwiseProduct(g);
    VectorXd h2 = o.cwiseProduct(tanh_of(c2));
    return {h2, c2};
}

Eigen::RowVectorXd forward_batch(const LstmModel& model, const std::vector<MatrixXd>& steps) {
    thread_local ForwardTrace tr;
    forward_traced(model, steps, tr);
    return tr.y;
}

double forward_sequence(const LstmModel& model, const MatrixXd& window, int lookback) {
    if (window.rows() != model.dims().input || window.cols() != lookback)
        throw DataError("window has shape " + std::to_string(window.rows()) + "x" + std::to_string(window.cols()) +
                        ", expected " + std::to_string(model.dims().input) + "x" + std::to_string(lookback));
    std::vector<MatrixXd> steps(static_cast<std::size_t>(lookback));
    for (int t = 0; t < lookback; ++t) steps[static_cast<std::size_t>(t)] = window.col(t);
    return forward_batch(model, steps)(0);
}

double mae_loss(const LstmModel& model, const Batch& batch) {
    Eigen::RowVectorXd y = forward_batch(model, batch.steps);
    return (y - batch.targets).cwiseAbs().mean();
}

LossAndGradient bptt_gradients(const LstmModel& model, const Batch& batch) {
    thread_local ForwardTrace tr;
    forward_traced(model, batch.steps, tr);
    const Index B = batch.size();
    if (tr.y.size() != B) throw DataError("batch targets do not match inputs");
    const auto& d = model.dims();
    const auto& lay = model.layout();

    LossAndGradient out;
    Eigen::RowVectorXd r = tr.y - batch.targets;
    out.loss = r.cwiseAbs().mean();
    out.gradient = VectorXd::Zero(static_cast<Index>(lay.size));
    double* g = out.gradient.data();

    Eigen::RowVectorXd dy = r.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }) /
                            static_cast<double>(B);
    Eigen::Map<VectorXd>(g + lay.w_out, d.hidden2) = tr.l2.h.back() * dy.transpose();
    g[lay.b_out] = dy.sum();

    const std::size_t L = batch.steps.size();
    std::vector<MatrixXd> dh2(L);
    dh2[L - 1] = model.w_out() * dy;
    std::vector<MatrixXd> dh1 = layer_backward(tr.l1.h, tr.l2, dh2, model.W2(), model.U2(), d.hidden2, g + lay.w2,
                                               g + lay.u2, g + lay.b2, true);
    layer_backward(batch.steps, tr.l1, dh1, model.W1(), model.U1(), d.hidden1, g + lay.w1, g + lay.u1, g + lay.b1,
                   false);
    return out;
}

void adam_update(VectorXd& params, const VectorXd& grads, AdamState& s, const AdamConfig& cfg) {
    if (s.m.size() != params.size()) s = AdamState(params.size());
    ++s.step;
    s.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * grads;
    s.v = cfg.beta2 * s.v + (1.0 - cfg.beta2) * grads.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
    params.array() -= cfg.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + cfg.eps);
}

double clip_global_norm(VectorXd& g, double max_norm) {
    const double n = g.norm();
    if (max_norm > 0.0 && n > max_norm) g *= max_norm / n;
    return n;
}

double normalize(double x, double min, double max) { return max == min ? 0.0 : (x - min) / (max - min); }

double denormalize(double y, double min, double max) { return min + y * (max - min); }

NormalizationSpec NormalizationSpec::fit(std::span<const std::vector<double>> rows, std::span<const double> targets,
                                         std::size_t begin, std::size_t end) {
    if (begin >= end || end > rows.size() || end > targets.size())
        throw DataError("normalization range [" + std::to_string(begin) + ", " + std::to_string(end) +
                        ") is empty or out of bounds");
    NormalizationSpec s;
    const std::size_t D = rows[begin].size();
    s.feature_min.assign(D, rows[begin][0]);
    s.feature_max.assign(D, rows[begin][0]);
    for (std::size_t j = 0; j < D; ++j) s.feature_min[j] = s.feature_max[j] = rows[begin][j];
    s.target_min = s.target_max = targets[begin];
    for (std::size_t r = begin; r < end; ++r) {
        if (rows[r].size() != D) throw DataError("ragged feature rows");
        for (std::size_t j = 0; j < D; ++j) {
            s.feature_min[j] = std::min(s.feature_min[j], rows[r][j]);
            s.feature_max[j] = std::max(s.feature_max[j], rows[r][j]);
        }
        s.target_min = std::min(s.target_min, targets[r]);
        s.target_max = std::max(s.target_max, targets[r]);
    }
    return s;
}

void NormalizationSpec::validate() const {
    if (feature_min.size() != feature_max.size() || feature_min.empty())
        throw DataError("normalization spec has inconsistent feature ranges");
    for (std::size_t j = 0; j < feature_min.size(); ++j) {
        if (!(feature_min[j] <= feature_max[j])) throw DataError("normalization min exceeds max");
    }
    if (!(target_min <= target_max)) throw DataError("normalization target min exceeds max");
}

void TrainingConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (lookback < 1) throw ConfigError("lookback must be at least 1");
    if (!(adam.lr > 0.0) || !std::isfinite(adam.lr)) throw ConfigError("learning rate must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
        throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(adam.eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (clip_norm < 0.0) throw ConfigError("clip norm must be non-negative");
}

MatrixXd SequenceDataset::window(std::size_t k) const {
    const auto e = static_cast<Index>(ends.at(k));
    return features.middleCols(e - lookback, lookback);
}

Batch SequenceDataset::batch(std::span<const std::size_t> which) const {
    Batch b;
    const auto B = static_cast<Index>(which.size());
    b.steps.assign(static_cast<std::size_t>(lookback), MatrixXd(features.rows(), B));
    b.targets.resize(B);
    for (Index j = 0; j < B; ++j) {
        const auto e = static_cast<Index>(ends.at(which[static_cast<std::size_t>(j)]));
        for (int t = 0; t < lookback; ++t) b.steps[static_cast<std::size_t>(t)].col(j) = features.col(e - lookback + t);
        b.targets(j) = targets(e);
    }
    return b;
}

Batch SequenceDataset::all() const {
    std::vector<std::size_t> idx(size());
    std::iota(idx.begin(), idx.end(), 0);
    return batch(idx);
}

double dataset_mae(const LstmModel& model, const SequenceDataset& data) {
    if (data.size() == 0) return 0.0;
    constexpr std::size_t kChunk = 512;
    double total = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += kChunk) {
        idx.clear();
        for (std::size_t k = start; k < std::min(data.size(), start + kChunk); ++k) idx.push_back(k);
        Batch b = data.batch(idx);
        total += (forward_batch(model, b.steps) - b.targets).cwiseAbs().sum();
    }
    return total / static_cast<double>(data.size());
}

TrainingHistory train(LstmModel& model, const SequenceDataset& train_set, const SequenceDataset* val_set,
                      const TrainingConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.size() == 0) throw DataError("training set is empty");
    if (train_set.lookback != cfg.lookback) throw DataError("dataset lookback does not match training config");

    TrainingHistory hist;
    AdamState adam(model.params().size());
    std::mt19937_64 eng(cfg.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    const auto bs = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_in_place(order, eng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            std::span<const std::size_t> which(order.data() + start, std::min(bs, order.size() - start));
            LossAndGradient lg = bptt_gradients(model, train_set.batch(which));
            loss_sum += lg.loss * static_cast<double>(which.size());
            if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " (learning rate " +
                                   std::to_string(cfg.adam.lr) + "); try a smaller learning rate or check the inputs");
            clip_global_norm(lg.gradient, cfg.clip_norm);
            adam_update(model.params(), lg.gradient, adam, cfg.adam);
        }
        if (!model.finite()) throw NumericError("parameters became non-finite at epoch " + std::to_string(epoch));
        double tr = loss_sum / static_cast<double>(order.size());
        double va = val_set && val_set->size() ? dataset_mae(model, *val_set) : std::nan("");
        hist.train_mae.push_back(tr);
        hist.val_mae.push_back(va);
        if (on_epoch) on_epoch(epoch, tr, va);
    }
    return hist;
}

} // namespace poisonlab::nn

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace poisonlab::nn {

struct LstmDims {
    int input = 2;
    int hidden1 = 128;
    int hidden2 = 8;

    friend bool operator==(const LstmDims&, const LstmDims&) = default;
};

/// Offsets of every tensor inside the flat parameter vector. Gate blocks are
/// stacked in i, f, g, o order.
struct ParameterLayout {
    explicit ParameterLayout(const LstmDims& d);

    std::size_t w1, u1, b1, w2, u2, b2, w_out, b_out, size;
};

/// Two stacked LSTM layers and a dense scalar head. All parameters live in
/// one contiguous vector so the optimizer and gradient checks can treat the
/// model as a point in R^n.
class LstmModel {
public:
    explicit LstmModel(const LstmDims& dims); // all parameters zero

    /// Uniform(-k, k) with k = 1/sqrt(fan-in); forget-gate biases shifted by +1.
    static LstmModel initialized(const LstmDims& dims, std::uint64_t seed);

    const LstmDims& dims() const { return dims_; }
    const ParameterLayout& layout() const { return layout_; }
    Eigen::VectorXd& params() { return params_; }
    const Eigen::VectorXd& params() const { return params_; }

    using ConstMat = Eigen::Map<const Eigen::MatrixXd>;
    using ConstVec = Eigen::Map<const Eigen::VectorXd>;
    ConstMat W1() const { return mat(layout_.w1, 4 * dims_.hidden1, dims_.input); }
    ConstMat U1() const { return mat(layout_.u1, 4 * dims_.hidden1, dims_.hidden1); }
    ConstVec b1() const { return vec(layout_.b1, 4 * dims_.hidden1); }
    ConstMat W2() const { return mat(layout_.w2, 4 * dims_.hidden2, dims_.hidden1); }
    ConstMat U2() const { return mat(layout_.u2, 4 * dims_.hidden2, dims_.hidden2); }
    ConstVec b2() const { return vec(layout_.b2, 4 * dims_.hidden2); }
    ConstVec w_out() const { return vec(layout_.w_out, dims_.hidden2); }
    double b_out() const { return params_[static_cast<Eigen::Index>(layout_.b_out)]; }

    bool finite() const { return params_.allFinite(); }

private:
    ConstMat mat(std::size_t off, int rows, int cols) const { return ConstMat(params_.data() + off, rows, cols); }
    ConstVec vec(std::size_t off, int n) const { return ConstVec(params_.data() + off, n); }

    LstmDims dims_;
    ParameterLayout layout_;
    Eigen::VectorXd params_;
};

/// One LSTM step for a single sample: i,f,o = sigmoid(Wx+Uh+b), g = tanh(..),
/// c' = f*c + i*g, h' = o*tanh(c').
std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_cell_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                                                              const Eigen::VectorXd& c,
                                                              const Eigen::Ref<const Eigen::MatrixXd>& W,
                                                              const Eigen::Ref<const Eigen::MatrixXd>& U,
                                                              const Eigen::Ref<const Eigen::VectorXd>& b);

/// A batch of windows: steps[t] is (input x batch); targets is (1 x batch).
struct Batch {
    std::vector<Eigen::MatrixXd> steps;
    Eigen::RowVectorXd targets;

    Eigen::Index size() const { return targets.size(); }
};

/// Prediction for every column of the batch.
Eigen::RowVectorXd forward_batch(const LstmModel& model, const std::vector<Eigen::MatrixXd>& steps);

/// Single window, (input x L) columns in time order. Throws DataError on a
/// shape mismatch.
double forward_sequence(const LstmModel& model, const Eigen::MatrixXd& window, int lookback);

double mae_loss(const LstmModel& model, const Batch& batch);

struct LossAndGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;
};

/// Exact reverse-mode gradient of the batch MAE (subgradient 0 at a zero
/// residual) through the dense head and both layers.
LossAndGradient bptt_gradients(const LstmModel& model, const Batch& batch);

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;

    explicit AdamState(Eigen::Index n = 0) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// Bias-corrected Adam step; advances `state.step` first.
void adam_update(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, const AdamConfig& cfg);

/// Rescales `g` in place when its L2 norm exceeds `max_norm`. Returns the pre-clip norm.
double clip_global_norm(Eigen::VectorXd& g, double max_norm);

struct NormalizationSpec {
    std::vector<double> feature_min;
    std::vector<double> feature_max;
    double target_min = 0.0;
    double target_max = 1.0;

    /// Fits per-column ranges over rows [begin, end) of `rows` (row-major samples).
    static NormalizationSpec fit(std::span<const std::vector<double>> rows, std::span<const double> targets,
                                 std::size_t begin, std::size_t end);
    void validate() const;
};

/// (x - min) / (max - min), no clamping; 0 when max == min.
double normalize(double x, double min, double max);
double denormalize(double y, double min, double max);

struct TrainingConfig {
    int epochs = 1000;
    int batch_size = 50;
    AdamConfig adam;
    double clip_norm = 5.0;
    int lookback = 10;
    std::uint64_t seed = 7;

    void validate() const;
};

/// Normalized series plus the window end indices that define samples: a
/// window ending at e uses columns [e-L, e) and targets[e].
struct SequenceDataset {
    Eigen::MatrixXd features; // input x T
    Eigen::VectorXd targets;  // T
    std::vector<std::size_t> ends;
    int lookback = 10;

    std::size_t size() const { return ends.size(); }
    Eigen::MatrixXd window(std::size_t k) const;
    Batch batch(std::span<const std::size_t> which) const;
    Batch all() const;
};

struct TrainingHistory {
    std::vector<double> train_mae;
    std::vector<double> val_mae;
};

using EpochCallback = std::function<void(int epoch, double train_mae, double val_mae)>;

/// Mini-batch BPTT with Adam; batch order reshuffled every epoch from the
/// seed. The train curve is the sample-weighted mean of the epoch's batch
/// losses; the validation curve is evaluated after the epoch. Throws
/// NumericError on a non-finite loss.
TrainingHistory train(LstmModel& model, const SequenceDataset& train_set, const SequenceDataset* val_set,
                      const TrainingConfig& cfg, const EpochCallback& on_epoch = {});

/// Mean absolute error over a dataset, batched for speed.
double dataset_mae(const LstmModel& model, const SequenceDataset& data);

} // namespace poisonlab::nn

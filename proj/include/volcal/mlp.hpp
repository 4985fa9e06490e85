#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "volcal/linalg.hpp"

namespace volcal {

enum class OutputActivation { sigmoid, hard_sigmoid, identity };

std::string_view activation_name(OutputActivation a);
OutputActivation parse_activation(std::string_view name);

/// Fully connected network: SeLU on every hidden layer, `output` at the head.
struct MlpSpec {
    std::vector<std::size_t> layer_sizes{88, 68, 49, 30, 11};
    OutputActivation output = OutputActivation::sigmoid;

    std::size_t inputs() const { return layer_sizes.front(); }
    std::size_t outputs() const { return layer_sizes.back(); }
    std::size_t layers() const { return layer_sizes.size() - 1; }
    void validate() const;

    bool operator==(const MlpSpec&) const = default;
};

struct DenseLayer {
    Matrix w;  // out x in
    std::vector<double> b;

    bool operator==(const DenseLayer&) const = default;
};

struct MlpWeights {
    std::vector<DenseLayer> layers;

    bool operator==(const MlpWeights&) const = default;
};

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

double selu(double x);
/// Derivative; the value at 0 is taken from the right (lambda).
double selu_derivative(double x);
double sigmoid(double x);
double hard_sigmoid(double x);

std::size_t param_count(const MlpSpec& spec);

/// Zero biases, N(0, 1/fan_in) weights.
MlpWeights init_weights(const MlpSpec& spec, std::uint64_t seed);
MlpWeights zeros_like(const MlpSpec& spec);
void check_shapes(const MlpSpec& spec, const MlpWeights& w);

/// Row-wise forward pass. Throws NonFiniteError naming the 1-based layer.
Matrix forward(const MlpSpec& spec, const MlpWeights& w, const Matrix& x);
std::vector<double> forward(const MlpSpec& spec, const MlpWeights& w, std::span<const double> x);

/// Mean over all entries of weights[j] * (pred - target)^2; an empty weight
/// vector means all ones.
double loss_mse(const Matrix& pred, const Matrix& target, std::span<const double> weights = {});

/// Gradient of loss_mse(forward(x), y, weights) with respect to every weight
/// and bias. Returns the loss as well.
std::pair<MlpWeights, double> gradients(const MlpSpec& spec, const MlpWeights& w, const Matrix& x,
                                        const Matrix& y, std::span<const double> weights = {});

/// d output / d input at one point, outputs x inputs.
Matrix input_jacobian(const MlpSpec& spec, const MlpWeights& w, std::span<const double> x,
                      std::vector<double>* output = nullptr);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    MlpWeights m;
    MlpWeights v;
    std::uint64_t t = 0;

    static AdamState zeros(const MlpSpec& spec);
};

void adam_step(MlpWeights& w, AdamState& state, const MlpWeights& grad, const AdamConfig& cfg);

/// Tracks the best validation loss; stop() once `patience` epochs pass
/// without a strict improvement.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience);

    /// Records the loss of `epoch`; returns true when it is a new best.
    bool update(std::size_t epoch, double loss);
    bool stop() const { return since_best_ >= patience_; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_; }

private:
    std::size_t patience_;
    std::size_t best_epoch_ = 0;
    std::size_t since_best_ = 0;
    double best_;
};

struct TrainConfig {
    AdamConfig adam;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 500;
    std::size_t patience = 25;
    double val_fraction = 0.1;
    std::uint64_t seed = 1;
    std::vector<double> loss_weights;  // per output column; empty = all ones

    void validate() const;
};

/// Epochs are numbered from 1.
struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::size_t best_epoch = 0;
    std::size_t stopped_epoch = 0;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
};

/// Mini-batch Adam with a seeded shuffle each epoch and early stopping on a
/// held-out validation share of the rows; returns the best-validation weights.
std::pair<MlpWeights, TrainReport> train(const MlpSpec& spec, const Matrix& x, const Matrix& y,
                                         const TrainConfig& cfg);

/// Same, starting from given weights.
std::pair<MlpWeights, TrainReport> train(const MlpSpec& spec, MlpWeights init, const Matrix& x,
                                         const Matrix& y, const TrainConfig& cfg);

}  // namespace volcal

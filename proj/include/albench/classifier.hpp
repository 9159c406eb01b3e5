#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "albench/dataset.hpp"
#include "albench/rng.hpp"

namespace albench {

struct MlpConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims{128};
    int num_classes = 0;
    double dropout_rate = 0.3;
    double learning_rate = 0.05;
    int epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t weight_init_seed = 0;

    void validate() const;
};

// Feed-forward ReLU network ending in a linear layer. weights[l] is
// (out x in); dropout follows every hidden activation.
struct MlpModel {
    MlpConfig config;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    // He-normal layers, zero biases. The output layer is drawn at
    // `output_scale` times the He scale; the default keeps a fresh classifier
    // close to uniform.
    static MlpModel initialize(const MlpConfig& config, double output_scale = 0.01);

    std::size_t num_layers() const noexcept { return weights.size(); }
    std::size_t num_parameters() const noexcept;
    bool operator==(const MlpModel& other) const;
};

struct MlpGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

// Activations kept for backprop. Columns are samples.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;       // input to every layer (post-dropout for hidden)
    std::vector<Eigen::MatrixXd> pre;          // hidden pre-activations
    std::vector<Eigen::MatrixXd> masks;        // hidden dropout masks (0 or 1/(1-p)); empty if none
    Eigen::MatrixXd logits;                    // num_outputs x batch
};

// `dropout` = nullptr disables dropout; otherwise masks are drawn from it
// layer by layer, sample by sample, unit by unit.
ForwardCache forward(const MlpModel& model, const Eigen::MatrixXd& inputs, Rng* dropout);

// Backprop of d(loss)/d(logits) through a cached forward pass.
MlpGradients backward(const MlpModel& model, const ForwardCache& cache, const Eigen::MatrixXd& dlogits);

// Column-wise numerically stable softmax.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

// Mean cross-entropy and its gradient with dropout off. `inputs` is dim x m.
struct LossAndGradient {
    double loss = 0.0;
    MlpGradients gradient;
};
LossAndGradient cross_entropy_and_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                           std::span<const ClassId> labels);

// Mean cross-entropy of the pool rows at `indices`, dropout off.
double cross_entropy(const MlpModel& model, const EmbeddingPool& pool, std::span<const std::size_t> indices);

// Shuffled mini-batch SGD on mean cross-entropy with inverted dropout.
// When `epoch_losses` is given it receives the dropout-off training loss
// after every epoch.
MlpModel train(MlpModel model, const EmbeddingPool& pool, std::span<const std::size_t> train_indices,
               std::uint64_t seed, std::vector<double>* epoch_losses = nullptr);

Eigen::VectorXd predict_proba_vector(const MlpModel& model, const Eigen::VectorXd& x, bool dropout_active,
                                     std::uint64_t mask_seed);

template <typename Derived>
Eigen::VectorXd predict_proba(const MlpModel& model, const Eigen::MatrixBase<Derived>& x,
                              bool dropout_active = false, std::uint64_t mask_seed = 0)
{
    const Eigen::VectorXd v = x.derived().template cast<double>().reshaped();
    return predict_proba_vector(model, v, dropout_active, mask_seed);
}

struct UncertaintyMatrix {
    int passes = 0;
    Eigen::MatrixXd probs;  // passes x C
    Eigen::VectorXd mean;   // column average of probs
    double certainty = 0.0;    // max of mean
    double uncertainty = 0.0;  // 1 - certainty
};

// t stochastic passes; pass p draws its masks from Rng(mc_pass_seed(seed, p)).
UncertaintyMatrix mc_dropout_vector(const MlpModel& model, const Eigen::VectorXd& x, int passes,
                                    std::uint64_t seed);

template <typename Derived>
UncertaintyMatrix mc_dropout(const MlpModel& model, const Eigen::MatrixBase<Derived>& x, int passes,
                             std::uint64_t seed)
{
    const Eigen::VectorXd v = x.derived().template cast<double>().reshaped();
    return mc_dropout_vector(model, v, passes, seed);
}

std::uint64_t mc_pass_seed(std::uint64_t seed, int pass) noexcept;

// Index of the largest entry; ties go to the lowest index.
Eigen::Index argmax(const Eigen::VectorXd& v);

// Predicted class (dropout off) for the pool rows at `indices`.
std::vector<ClassId> predict_classes(const MlpModel& model, const EmbeddingPool& pool,
                                     std::span<const std::size_t> indices);

double evaluate_accuracy(const MlpModel& model, const EmbeddingPool& pool,
                         std::span<const std::size_t> test_indices);

// AMLP checkpoint, little-endian:
//   "AMLP" | u8 version=1 | u32 input_dim | u32 n_hidden | n_hidden x u32 width
//   | u32 num_classes | f64 dropout | f64 lr | u32 epochs | u32 batch | u64 seed
//   then for every layer: out*in f64 weights (row-major), out f64 biases.
std::vector<std::uint8_t> encode_model(const MlpModel& model);
MlpModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

// Gathers pool rows into a dim x m double matrix (columns are samples).
Eigen::MatrixXd gather_columns(const EmbeddingPool& pool, std::span<const std::size_t> indices);

} // namespace albench

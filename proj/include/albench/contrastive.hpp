#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "albench/classifier.hpp"
#include "albench/dataset.hpp"

namespace albench {

struct NtXentConfig {
    double temperature = 0.5;

    void validate() const;
};

struct NtXentResult {
    double loss = 0.0;
    std::vector<double> per_pair;  // L(i, partner(i)) for every one of the 2N views
    Eigen::MatrixXd gradient;      // d loss / d embeddings, same shape as the input (when requested)
};

// NT-Xent over 2N embeddings stored as rows [a_1..a_N, b_1..b_N]; the
// positive partner of row i is row (i + N) mod 2N. Similarity is cosine and
// the denominator runs over every k != i, positive included. The loss is the
// mean over all 2N ordered pairs.
NtXentResult nt_xent_loss(const Eigen::MatrixXd& embeddings, const NtXentConfig& cfg,
                          bool with_gradient = false);

// A view of `anchor`: additive N(0, jitter^2) noise, then round_half_up(mask_frac * dim)
// coordinates set to zero.
Eigen::VectorXd augment(const Eigen::VectorXd& anchor, std::uint64_t seed, double jitter, double mask_frac);

struct ViewBatch {
    IndexList anchors;       // pool rows the views come from
    Eigen::MatrixXd view_a;  // dim x N, column i derives from anchors[i]
    Eigen::MatrixXd view_b;
    std::uint64_t aug_seed = 0;
};

ViewBatch make_view_batch(const EmbeddingPool& pool, std::span<const std::size_t> anchors, std::uint64_t aug_seed,
                          double jitter, double mask_frac);

struct EncoderConfig {
    std::size_t width = 64;
    std::size_t out_dim = 16;
    NtXentConfig loss;
    int epochs = 50;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
    double jitter = 0.1;
    double mask_frac = 0.1;

    void validate() const;
};

// Two-layer ReLU encoder (input -> width -> out_dim), stored as a
// dropout-free MlpModel so it shares the AMLP checkpoint format.
struct Encoder {
    MlpModel net;

    static Encoder initialize(std::size_t input_dim, const EncoderConfig& cfg, std::uint64_t seed);
    std::size_t input_dim() const noexcept { return net.config.input_dim; }
    std::size_t out_dim() const noexcept { return static_cast<std::size_t>(net.config.num_classes); }
};

struct EncoderTraining {
    Encoder encoder;
    double initial_loss = 0.0;  // NT-Xent on a fixed held-out view batch, before training
    double final_loss = 0.0;    // same batch, after training
};

// SGD on NT-Xent over seeded view batches. Labels are ignored.
EncoderTraining train_encoder(const EmbeddingPool& raw, const EncoderConfig& cfg, std::uint64_t seed);

// NT-Xent of `encoder` on a view batch.
double view_batch_loss(const Encoder& encoder, const ViewBatch& batch, const NtXentConfig& cfg);

// Maps every row through the encoder and L2-normalizes the result; labels
// and class count carry over.
EmbeddingPool encode(const Encoder& encoder, const EmbeddingPool& pool);

} // namespace albench

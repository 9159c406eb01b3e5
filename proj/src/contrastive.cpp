#include "albench/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "albench/errors.hpp"
#include "albench/rng.hpp"

namespace albench {

void NtXentConfig::validate() const
{
    if (!(temperature > 0.0))
        throw ValidationError("NT-Xent temperature must be positive");
}

NtXentResult nt_xent_loss(const Eigen::MatrixXd& embeddings, const NtXentConfig& cfg, bool with_gradient)
{
    cfg.validate();
    const Eigen::Index two_n = embeddings.rows();
    if (two_n % 2 != 0)
        throw ValidationError("NT-Xent needs an even number of views");
    const Eigen::Index n = two_n / 2;
    if (n < 2)
        throw ValidationError("NT-Xent needs N >= 2 so that negatives exist");

    const Eigen::VectorXd norms = embeddings.rowwise().norm();
    for (Eigen::Index i = 0; i < two_n; ++i)
        if (norms(i) == 0.0)
            throw DomainError("NT-Xent embedding " + std::to_string(i) + " has zero norm");
    const Eigen::MatrixXd unit = norms.cwiseInverse().asDiagonal() * embeddings;
    const Eigen::MatrixXd sim = unit * unit.transpose();
    const double inv_tau = 1.0 / cfg.temperature;

    NtXentResult out;
    out.per_pair.resize(static_cast<std::size_t>(two_n));
    // dloss/dsim(i, k), treating sim(i, k) and sim(k, i) as separate inputs.
    Eigen::MatrixXd dsim = Eigen::MatrixXd::Zero(two_n, two_n);
    const double scale = 1.0 / static_cast<double>(two_n);
    for (Eigen::Index i = 0; i < two_n; ++i) {
        const Eigen::Index partner = (i + n) % two_n;
        double top = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < two_n; ++k)
            if (k != i)
                top = std::max(top, sim(i, k) * inv_tau);
        double denom = 0.0;
        for (Eigen::Index k = 0; k < two_n; ++k)
            if (k != i)
                denom += std::exp(sim(i, k) * inv_tau - top);
        const double log_denom = top + std::log(denom);
        const double li = log_denom - sim(i, partner) * inv_tau;
        out.per_pair[static_cast<std::size_t>(i)] = li;
        out.loss += li;
        if (with_gradient) {
            for (Eigen::Index k = 0; k < two_n; ++k)
                if (k != i)
                    dsim(i, k) = scale * inv_tau * std::exp(sim(i, k) * inv_tau - log_denom);
            dsim(i, partner) -= scale * inv_tau;
        }
    }
    out.loss *= scale;

    if (with_gradient) {
        const Eigen::MatrixXd dunit = (dsim + dsim.transpose()) * unit;
        out.gradient.resize(two_n, embeddings.cols());
        for (Eigen::Index i = 0; i < two_n; ++i) {
            const Eigen::RowVectorXd u = unit.row(i);
            const Eigen::RowVectorXd g = dunit.row(i);
            out.gradient.row(i) = (g - g.dot(u) * u) / norms(i);
        }
    }
    return out;
}

Eigen::VectorXd augment(const Eigen::VectorXd& anchor, std::uint64_t seed, double jitter, double mask_frac)
{
    if (!(jitter >= 0.0))
        throw ValidationError("augment: jitter must be >= 0");
    if (!(mask_frac >= 0.0 && mask_frac < 1.0))
        throw ValidationError("augment: mask fraction must lie in [0, 1)");
    Rng rng(seed);
    Eigen::VectorXd view = anchor;
    if (jitter > 0.0)
        for (Eigen::Index i = 0; i < view.size(); ++i)
            view(i) += jitter * rng.normal();
    const std::size_t masked = round_half_up(mask_frac * static_cast<double>(view.size()));
    if (masked > 0) {
        IndexList coords(static_cast<std::size_t>(view.size()));
        for (std::size_t i = 0; i < coords.size(); ++i)
            coords[i] = i;
        shuffle_prefix(std::span<std::size_t>(coords), masked, rng);
        for (std::size_t i = 0; i < masked; ++i)
            view(static_cast<Eigen::Index>(coords[i])) = 0.0;
    }
    return view;
}

ViewBatch make_view_batch(const EmbeddingPool& pool, std::span<const std::size_t> anchors, std::uint64_t aug_seed,
                          double jitter, double mask_frac)
{
    ViewBatch batch;
    batch.anchors.assign(anchors.begin(), anchors.end());
    batch.aug_seed = aug_seed;
    const Eigen::MatrixXd raw = gather_columns(pool, anchors);
    batch.view_a.resize(raw.rows(), raw.cols());
    batch.view_b.resize(raw.rows(), raw.cols());
    for (Eigen::Index i = 0; i < raw.cols(); ++i) {
        const auto id = static_cast<std::uint64_t>(i);
        batch.view_a.col(i) = augment(raw.col(i), derive_seed(aug_seed, "view-a", id), jitter, mask_frac);
        batch.view_b.col(i) = augment(raw.col(i), derive_seed(aug_seed, "view-b", id), jitter, mask_frac);
    }
    return batch;
}

void EncoderConfig::validate() const
{
    loss.validate();
    if (width < 1 || out_dim < 2)
        throw ValidationError("encoder needs width >= 1 and out_dim >= 2");
    if (epochs < 0)
        throw ValidationError("encoder epochs must be >= 0");
    if (batch_size < 2)
        throw ValidationError("encoder batch size must be >= 2");
    if (!(learning_rate > 0.0))
        throw ValidationError("encoder learning rate must be positive");
    if (!(jitter >= 0.0) || !(mask_frac >= 0.0 && mask_frac < 1.0))
        throw ValidationError("encoder augmentation parameters out of range");
}

Encoder Encoder::initialize(std::size_t input_dim, const EncoderConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    MlpConfig net;
    net.input_dim = input_dim;
    net.hidden_dims = {cfg.width};
    net.num_classes = static_cast<int>(cfg.out_dim);
    net.dropout_rate = 0.0;
    net.learning_rate = cfg.learning_rate;
    net.epochs = cfg.epochs;
    net.batch_size = cfg.batch_size;
    net.weight_init_seed = derive_seed(seed, "encoder-init");
    return Encoder{MlpModel::initialize(net, 1.0)};
}

namespace {

Eigen::MatrixXd stacked_views(const ViewBatch& batch)
{
    Eigen::MatrixXd x(batch.view_a.rows(), batch.view_a.cols() * 2);
    x << batch.view_a, batch.view_b;
    return x;
}

} // namespace

double view_batch_loss(const Encoder& encoder, const ViewBatch& batch, const NtXentConfig& cfg)
{
    const ForwardCache cache = forward(encoder.net, stacked_views(batch), nullptr);
    return nt_xent_loss(cache.logits.transpose(), cfg).loss;
}

EncoderTraining train_encoder(const EmbeddingPool& raw, const EncoderConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    raw.validate();
    if (raw.size() < 4)
        throw ValidationError("train_encoder needs at least 4 samples");

    EncoderTraining out;
    out.encoder = Encoder::initialize(raw.dim(), cfg, seed);
    MlpModel& net = out.encoder.net;

    IndexList all(raw.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    const std::size_t batch_size = std::min(cfg.batch_size, raw.size());

    IndexList eval_rows = all;
    Rng eval_rng(derive_seed(seed, "encoder-eval"));
    shuffle_prefix(std::span<std::size_t>(eval_rows), batch_size, eval_rng);
    eval_rows.resize(batch_size);
    const ViewBatch eval_batch =
        make_view_batch(raw, eval_rows, derive_seed(seed, "encoder-eval-views"), cfg.jitter, cfg.mask_frac);
    out.initial_loss = view_batch_loss(out.encoder, eval_batch, cfg.loss);

    IndexList order = all;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng order_rng(derive_seed(seed, "encoder-order", static_cast<std::uint64_t>(epoch)));
        shuffle(order, order_rng);
        std::uint64_t batch_id = 0;
        for (std::size_t start = 0; start + 2 <= order.size(); start += batch_size, ++batch_id) {
            const std::span<const std::size_t> rows(order.data() + start, std::min(batch_size, order.size() - start));
            if (rows.size() < 2)
                break;
            const ViewBatch batch = make_view_batch(
                raw, rows, derive_seed(seed, "encoder-views", static_cast<std::uint64_t>(epoch), batch_id),
                cfg.jitter, cfg.mask_frac);
            const ForwardCache cache = forward(net, stacked_views(batch), nullptr);
            const NtXentResult loss = nt_xent_loss(cache.logits.transpose(), cfg.loss, true);
            const MlpGradients grad = backward(net, cache, loss.gradient.transpose());
            for (std::size_t l = 0; l < net.num_layers(); ++l) {
                net.weights[l] -= cfg.learning_rate * grad.weights[l];
                net.biases[l] -= cfg.learning_rate * grad.biases[l];
            }
        }
    }
    out.final_loss = view_batch_loss(out.encoder, eval_batch, cfg.loss);
    return out;
}

EmbeddingPool encode(const Encoder& encoder, const EmbeddingPool& pool)
{
    pool.validate();
    if (pool.dim() != encoder.input_dim())
        throw ValidationError("encode: pool dim " + std::to_string(pool.dim()) + " does not match encoder input " +
                              std::to_string(encoder.input_dim()));
    EmbeddingPool out;
    out.labels = pool.labels;
    out.num_classes = pool.num_classes;
    out.features.resize(static_cast<Eigen::Index>(pool.size()), static_cast<Eigen::Index>(encoder.out_dim()));
    constexpr std::size_t chunk = 1024;
    IndexList rows;
    for (std::size_t start = 0; start < pool.size(); start += chunk) {
        const std::size_t count = std::min(chunk, pool.size() - start);
        rows.resize(count);
        for (std::size_t i = 0; i < count; ++i)
            rows[i] = start + i;
        const Eigen::MatrixXd z = forward(encoder.net, gather_columns(pool, rows), nullptr).logits;
        for (std::size_t i = 0; i < count; ++i) {
            Eigen::VectorXd v = z.col(static_cast<Eigen::Index>(i));
            const double norm = v.norm();
            if (norm > 0.0)
                v /= norm;
            out.features.row(static_cast<Eigen::Index>(start + i)) = v.transpose().cast<float>();
        }
    }
    return out;
}

} // namespace albench

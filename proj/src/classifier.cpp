#include "albench/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <string>

#include "albench/errors.hpp"

namespace albench {

namespace {

constexpr Eigen::Index kEvalChunk = 1024;

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng)
{
    Eigen::MatrixXd mask(rows, cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
            mask(r, c) = rng.bernoulli(rate) ? 0.0 : keep_scale;
    return mask;
}

void check_input_dim(const MlpModel& model, Eigen::Index rows)
{
    if (static_cast<std::size_t>(rows) != model.config.input_dim)
        throw ValidationError("input dimension " + std::to_string(rows) + " does not match model input " +
                              std::to_string(model.config.input_dim));
}

// Hidden layer 0 output before dropout; dropout-independent, so MC passes share it.
Eigen::VectorXd first_hidden(const MlpModel& model, const Eigen::VectorXd& x)
{
    Eigen::VectorXd z = model.weights[0] * x + model.biases[0];
    return z.cwiseMax(0.0);
}

// Finishes a single-sample forward pass given the output of layer 0.
Eigen::VectorXd finish_forward(const MlpModel& model, Eigen::VectorXd h, Rng* dropout)
{
    const std::size_t layers = model.num_layers();
    const double rate = model.config.dropout_rate;
    for (std::size_t l = 1; l < layers; ++l) {
        if (dropout != nullptr && rate > 0.0)
            h = h.cwiseProduct(dropout_mask(h.size(), 1, rate, *dropout).col(0));
        Eigen::VectorXd z = model.weights[l] * h + model.biases[l];
        h = (l + 1 < layers) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    return h;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits)
{
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp().matrix();
    return e / e.sum();
}

Eigen::VectorXd single_logits(const MlpModel& model, const Eigen::VectorXd& x, Rng* dropout)
{
    if (model.num_layers() == 1)
        return model.weights[0] * x + model.biases[0];
    return finish_forward(model, first_hidden(model, x), dropout);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int s = 0; s < 32; s += 8)
        out.push_back(static_cast<std::uint8_t>((v >> s) & 0xFF));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v)
{
    for (int s = 0; s < 64; s += 8)
        out.push_back(static_cast<std::uint8_t>((v >> s) & 0xFF));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t read(int width)
    {
        if (pos_ + static_cast<std::size_t>(width) > bytes_.size())
            throw CorruptionError("AMLP checkpoint truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i)
            v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(read(4)); }
    std::uint64_t u64() { return read(8); }
    double f64() { return std::bit_cast<double>(read(8)); }
    bool done() const noexcept { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

void MlpConfig::validate() const
{
    if (input_dim < 1)
        throw ValidationError("MLP input_dim must be >= 1");
    if (num_classes < 2)
        throw ValidationError("MLP num_classes must be >= 2");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ValidationError("dropout rate must lie in [0, 1)");
    if (!(learning_rate > 0.0))
        throw ValidationError("learning rate must be positive");
    if (epochs < 0)
        throw ValidationError("epochs must be >= 0");
    if (batch_size < 1)
        throw ValidationError("batch size must be >= 1");
    for (std::size_t w : hidden_dims)
        if (w < 1)
            throw ValidationError("hidden layer widths must be >= 1");
}

MlpModel MlpModel::initialize(const MlpConfig& config, double output_scale)
{
    config.validate();
    MlpModel model;
    model.config = config;
    std::vector<std::size_t> widths{config.input_dim};
    widths.insert(widths.end(), config.hidden_dims.begin(), config.hidden_dims.end());
    widths.push_back(static_cast<std::size_t>(config.num_classes));

    Rng rng(derive_seed(config.weight_init_seed, "mlp-init"));
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(widths[l]);
        const auto out = static_cast<Eigen::Index>(widths[l + 1]);
        double scale = std::sqrt(2.0 / static_cast<double>(in));
        if (l + 2 == widths.size())
            scale *= output_scale;
        Eigen::MatrixXd w(out, in);
        for (Eigen::Index r = 0; r < out; ++r)
            for (Eigen::Index c = 0; c < in; ++c)
                w(r, c) = scale * rng.normal();
        model.weights.push_back(std::move(w));
        model.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    return model;
}

std::size_t MlpModel::num_parameters() const noexcept
{
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
}

bool MlpModel::operator==(const MlpModel& other) const
{
    if (weights.size() != other.weights.size())
        return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols())
            return false;
        if (weights[l] != other.weights[l] || biases[l] != other.biases[l])
            return false;
    }
    return config.input_dim == other.config.input_dim && config.hidden_dims == other.config.hidden_dims &&
           config.num_classes == other.config.num_classes;
}

ForwardCache forward(const MlpModel& model, const Eigen::MatrixXd& inputs, Rng* dropout)
{
    check_input_dim(model, inputs.rows());
    ForwardCache cache;
    const std::size_t layers = model.num_layers();
    const double rate = model.config.dropout_rate;
    Eigen::MatrixXd h = inputs;
    for (std::size_t l = 0; l < layers; ++l) {
        cache.inputs.push_back(h);
        Eigen::MatrixXd z = model.weights[l] * h;
        z.colwise() += model.biases[l];
        if (l + 1 == layers) {
            cache.logits = std::move(z);
            break;
        }
        h = relu(z);
        cache.pre.push_back(std::move(z));
        if (dropout != nullptr && rate > 0.0) {
            Eigen::MatrixXd mask = dropout_mask(h.rows(), h.cols(), rate, *dropout);
            h = h.cwiseProduct(mask);
            cache.masks.push_back(std::move(mask));
        } else {
            cache.masks.emplace_back();
        }
    }
    return cache;
}

MlpGradients backward(const MlpModel& model, const ForwardCache& cache, const Eigen::MatrixXd& dlogits)
{
    const std::size_t layers = model.num_layers();
    MlpGradients grad;
    grad.weights.resize(layers);
    grad.biases.resize(layers);
    Eigen::MatrixXd delta = dlogits;
    for (std::size_t l = layers; l-- > 0;) {
        grad.weights[l] = delta * cache.inputs[l].transpose();
        grad.biases[l] = delta.rowwise().sum();
        if (l == 0)
            break;
        Eigen::MatrixXd upstream = model.weights[l].transpose() * delta;
        const auto& mask = cache.masks[l - 1];
        if (mask.size() > 0)
            upstream = upstream.cwiseProduct(mask);
        const auto& z = cache.pre[l - 1];
        delta = (z.array() > 0.0).select(upstream, 0.0);
    }
    return grad;
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits)
{
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
        out.col(c) = softmax(logits.col(c));
    return out;
}

LossAndGradient cross_entropy_and_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                           std::span<const ClassId> labels)
{
    if (static_cast<std::size_t>(inputs.cols()) != labels.size() || labels.empty())
        throw ValidationError("cross_entropy: need one label per input column");
    ForwardCache cache = forward(model, inputs, nullptr);
    Eigen::MatrixXd probs = softmax_columns(cache.logits);
    const auto m = static_cast<double>(labels.size());
    LossAndGradient out;
    Eigen::MatrixXd dlogits = probs;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        const double p = probs(labels[i], col);
        out.loss -= std::log(std::max(p, std::numeric_limits<double>::min()));
        dlogits(labels[i], col) -= 1.0;
    }
    out.loss /= m;
    dlogits /= m;
    out.gradient = backward(model, cache, dlogits);
    return out;
}

Eigen::MatrixXd gather_columns(const EmbeddingPool& pool, std::span<const std::size_t> indices)
{
    Eigen::MatrixXd x(static_cast<Eigen::Index>(pool.dim()), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= pool.size())
            throw ValidationError("index " + std::to_string(indices[i]) + " outside the pool");
        x.col(static_cast<Eigen::Index>(i)) =
            pool.features.row(static_cast<Eigen::Index>(indices[i])).transpose().cast<double>();
    }
    return x;
}

double cross_entropy(const MlpModel& model, const EmbeddingPool& pool, std::span<const std::size_t> indices)
{
    if (indices.empty())
        throw ValidationError("cross_entropy over an empty index set");
    double total = 0.0;
    for (std::size_t start = 0; start < indices.size(); start += kEvalChunk) {
        const auto chunk = indices.subspan(start, std::min<std::size_t>(kEvalChunk, indices.size() - start));
        const Eigen::MatrixXd probs = softmax_columns(forward(model, gather_columns(pool, chunk), nullptr).logits);
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            const double p = probs(pool.labels[chunk[i]], static_cast<Eigen::Index>(i));
            total -= std::log(std::max(p, std::numeric_limits<double>::min()));
        }
    }
    return total / static_cast<double>(indices.size());
}

MlpModel train(MlpModel model, const EmbeddingPool& pool, std::span<const std::size_t> train_indices,
               std::uint64_t seed, std::vector<double>* epoch_losses)
{
    if (train_indices.empty())
        throw ValidationError("train needs at least one sample");
    if (!pool.has_labels())
        throw ValidationError("train needs a labeled pool");
    for (std::size_t idx : train_indices)
        if (idx >= pool.size())
            throw ValidationError("training index outside the pool");
    for (std::size_t idx : train_indices)
        if (pool.labels[idx] >= model.config.num_classes)
            throw ValidationError("training label exceeds model class count");
    check_input_dim(model, static_cast<Eigen::Index>(pool.dim()));

    const auto& cfg = model.config;
    IndexList order(train_indices.begin(), train_indices.end());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng order_rng(derive_seed(seed, "epoch-order", static_cast<std::uint64_t>(epoch)));
        shuffle(order, order_rng);
        std::uint64_t batch_id = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_id) {
            const std::span<const std::size_t> batch(order.data() + start,
                                                     std::min(cfg.batch_size, order.size() - start));
            const Eigen::MatrixXd x = gather_columns(pool, batch);
            Rng mask_rng(derive_seed(seed, "dropout", static_cast<std::uint64_t>(epoch), batch_id));
            ForwardCache cache = forward(model, x, &mask_rng);
            Eigen::MatrixXd dlogits = softmax_columns(cache.logits);
            for (std::size_t i = 0; i < batch.size(); ++i)
                dlogits(pool.labels[batch[i]], static_cast<Eigen::Index>(i)) -= 1.0;
            dlogits /= static_cast<double>(batch.size());
            const MlpGradients grad = backward(model, cache, dlogits);
            for (std::size_t l = 0; l < model.num_layers(); ++l) {
                model.weights[l] -= cfg.learning_rate * grad.weights[l];
                model.biases[l] -= cfg.learning_rate * grad.biases[l];
            }
        }
        if (epoch_losses != nullptr)
            epoch_losses->push_back(cross_entropy(model, pool, train_indices));
    }
    return model;
}

Eigen::VectorXd predict_proba_vector(const MlpModel& model, const Eigen::VectorXd& x, bool dropout_active,
                                     std::uint64_t mask_seed)
{
    check_input_dim(model, x.size());
    if (!dropout_active)
        return softmax(single_logits(model, x, nullptr));
    Rng rng(mask_seed);
    return softmax(single_logits(model, x, &rng));
}

std::uint64_t mc_pass_seed(std::uint64_t seed, int pass) noexcept
{
    return derive_seed(seed, "mc-pass", static_cast<std::uint64_t>(pass));
}

UncertaintyMatrix mc_dropout_vector(const MlpModel& model, const Eigen::VectorXd& x, int passes,
                                    std::uint64_t seed)
{
    if (passes < 1)
        throw ValidationError("mc_dropout needs at least one pass");
    check_input_dim(model, x.size());
    UncertaintyMatrix out;
    out.passes = passes;
    out.probs.resize(passes, model.config.num_classes);
    const bool single_layer = model.num_layers() == 1;
    const Eigen::VectorXd h0 = single_layer ? Eigen::VectorXd() : first_hidden(model, x);
    for (int p = 0; p < passes; ++p) {
        Rng rng(mc_pass_seed(seed, p));
        const Eigen::VectorXd logits =
            single_layer ? Eigen::VectorXd(model.weights[0] * x + model.biases[0]) : finish_forward(model, h0, &rng);
        out.probs.row(p) = softmax(logits).transpose();
    }
    out.mean = out.probs.colwise().sum().transpose() / static_cast<double>(passes);
    out.certainty = out.mean.maxCoeff();
    out.uncertainty = 1.0 - out.certainty;
    return out;
}

Eigen::Index argmax(const Eigen::VectorXd& v)
{
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v(i) > v(best))
            best = i;
    return best;
}

std::vector<ClassId> predict_classes(const MlpModel& model, const EmbeddingPool& pool,
                                     std::span<const std::size_t> indices)
{
    std::vector<ClassId> out;
    out.reserve(indices.size());
    for (std::size_t start = 0; start < indices.size(); start += kEvalChunk) {
        const auto chunk = indices.subspan(start, std::min<std::size_t>(kEvalChunk, indices.size() - start));
        const Eigen::MatrixXd logits = forward(model, gather_columns(pool, chunk), nullptr).logits;
        for (Eigen::Index c = 0; c < logits.cols(); ++c)
            out.push_back(static_cast<ClassId>(argmax(logits.col(c))));
    }
    return out;
}

double evaluate_accuracy(const MlpModel& model, const EmbeddingPool& pool, std::span<const std::size_t> test_indices)
{
    if (test_indices.empty())
        throw ValidationError("evaluate_accuracy over an empty test set");
    if (!pool.has_labels())
        throw ValidationError("evaluate_accuracy needs a labeled pool");
    const auto predicted = predict_classes(model, pool, test_indices);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_indices.size(); ++i)
        correct += predicted[i] == pool.labels[test_indices[i]] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(test_indices.size());
}

std::vector<std::uint8_t> encode_model(const MlpModel& model)
{
    const auto& cfg = model.config;
    std::vector<std::uint8_t> out;
    for (char c : {'A', 'M', 'L', 'P'})
        out.push_back(static_cast<std::uint8_t>(c));
    out.push_back(1);
    put_u32(out, static_cast<std::uint32_t>(cfg.input_dim));
    put_u32(out, static_cast<std::uint32_t>(cfg.hidden_dims.size()));
    for (std::size_t w : cfg.hidden_dims)
        put_u32(out, static_cast<std::uint32_t>(w));
    put_u32(out, static_cast<std::uint32_t>(cfg.num_classes));
    put_f64(out, cfg.dropout_rate);
    put_f64(out, cfg.learning_rate);
    put_u32(out, static_cast<std::uint32_t>(cfg.epochs));
    put_u32(out, static_cast<std::uint32_t>(cfg.batch_size));
    put_u64(out, cfg.weight_init_seed);
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const auto& w = model.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                put_f64(out, w(r, c));
        for (Eigen::Index r = 0; r < model.biases[l].size(); ++r)
            put_f64(out, model.biases[l](r));
    }
    return out;
}

MlpModel decode_model(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 5 || bytes[0] != 'A' || bytes[1] != 'M' || bytes[2] != 'L' || bytes[3] != 'P')
        throw FormatError("not an AMLP checkpoint (bad magic)");
    if (bytes[4] != 1)
        throw FormatError("unsupported AMLP version " + std::to_string(bytes[4]));
    ByteReader in(bytes.subspan(5));
    MlpConfig cfg;
    cfg.input_dim = in.u32();
    const std::uint32_t n_hidden = in.u32();
    if (n_hidden > 1024)
        throw CorruptionError("AMLP declares an implausible layer count");
    cfg.hidden_dims.clear();
    for (std::uint32_t i = 0; i < n_hidden; ++i)
        cfg.hidden_dims.push_back(in.u32());
    cfg.num_classes = static_cast<int>(in.u32());
    cfg.dropout_rate = in.f64();
    cfg.learning_rate = in.f64();
    cfg.epochs = static_cast<int>(in.u32());
    cfg.batch_size = in.u32();
    cfg.weight_init_seed = in.u64();
    cfg.validate();

    MlpModel model;
    model.config = cfg;
    std::vector<std::size_t> widths{cfg.input_dim};
    widths.insert(widths.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    widths.push_back(static_cast<std::size_t>(cfg.num_classes));
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Eigen::MatrixXd w(static_cast<Eigen::Index>(widths[l + 1]), static_cast<Eigen::Index>(widths[l]));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                w(r, c) = in.f64();
        Eigen::VectorXd b(w.rows());
        for (Eigen::Index r = 0; r < b.size(); ++r)
            b(r) = in.f64();
        model.weights.push_back(std::move(w));
        model.biases.push_back(std::move(b));
    }
    if (!in.done())
        throw CorruptionError("AMLP checkpoint has trailing bytes");
    return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path)
{
    const auto bytes = encode_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed for " + path.string());
}

MlpModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

} // namespace albench

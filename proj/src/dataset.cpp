#include "albench/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/QR>

#include "albench/errors.hpp"
#include "albench/rng.hpp"

namespace albench {

namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v)
{
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int shift = 0; shift < 32; shift += 8)
        out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
}

std::uint16_t get_u16(const std::uint8_t* p)
{
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<IndexList> indices_by_class(const EmbeddingPool& pool)
{
    std::vector<IndexList> by_class(static_cast<std::size_t>(pool.num_classes));
    for (std::size_t i = 0; i < pool.size(); ++i)
        by_class[static_cast<std::size_t>(pool.labels[i])].push_back(i);
    return by_class;
}

} // namespace

void EmbeddingPool::validate() const
{
    if (features.rows() < 1 || features.cols() < 1)
        throw ValidationError("pool must have n >= 1 and dim >= 1");
    if (has_labels()) {
        if (labels.size() != size())
            throw ValidationError("label count " + std::to_string(labels.size()) +
                                  " does not match n = " + std::to_string(size()));
        if (num_classes < 1)
            throw ValidationError("labeled pool needs num_classes >= 1");
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] < 0 || labels[i] >= num_classes)
                throw ValidationError("label " + std::to_string(labels[i]) + " at index " +
                                      std::to_string(i) + " outside [0, " +
                                      std::to_string(num_classes) + ")");
    } else if (num_classes != 0) {
        throw ValidationError("unlabeled pool must have num_classes = 0");
    }
}

std::vector<std::size_t> EmbeddingPool::class_counts() const
{
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
    for (ClassId c : labels)
        ++counts[static_cast<std::size_t>(c)];
    return counts;
}

bool EmbeddingPool::operator==(const EmbeddingPool& other) const
{
    if (features.rows() != other.features.rows() || features.cols() != other.features.cols())
        return false;
    // Bitwise comparison so NaN payloads and signed zeros round-trip too.
    const auto* a = features.data();
    const auto* b = other.features.data();
    for (Eigen::Index i = 0; i < features.size(); ++i)
        if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i]))
            return false;
    return labels == other.labels && num_classes == other.num_classes;
}

void SyntheticSpec::validate() const
{
    if (classes < 2)
        throw ValidationError("synthetic spec needs classes >= 2");
    if (per_class < 1)
        throw ValidationError("synthetic spec needs per_class >= 1");
    if (dim < 1)
        throw ValidationError("synthetic spec needs dim >= 1");
    if (!(spread > 0.0))
        throw ValidationError("synthetic spec needs spread > 0");
    if (!(separation > 0.0))
        throw ValidationError("synthetic spec needs separation > 0");
}

std::vector<std::uint8_t> encode_pool(const EmbeddingPool& pool)
{
    pool.validate();
    if (pool.size() > std::numeric_limits<std::uint32_t>::max() ||
        pool.dim() > std::numeric_limits<std::uint32_t>::max())
        throw ValidationError("pool too large for the AEMB format");
    if (pool.num_classes > std::numeric_limits<std::uint16_t>::max() + 1)
        throw ValidationError("AEMB labels are u16; too many classes");

    std::vector<std::uint8_t> out;
    out.reserve(kAembHeaderBytes + pool.size() * pool.dim() * 4 + pool.labels.size() * 2);
    for (char c : {'A', 'E', 'M', 'B'})
        put_u8(out, static_cast<std::uint8_t>(c));
    put_u8(out, kAembVersion);
    put_u32(out, static_cast<std::uint32_t>(pool.size()));
    put_u32(out, static_cast<std::uint32_t>(pool.dim()));
    put_u8(out, pool.has_labels() ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(pool.num_classes));
    const float* data = pool.features.data();
    for (Eigen::Index i = 0; i < pool.features.size(); ++i)
        put_u32(out, std::bit_cast<std::uint32_t>(data[i]));
    for (ClassId c : pool.labels)
        put_u16(out, static_cast<std::uint16_t>(c));
    return out;
}

EmbeddingPool decode_pool(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 5 || bytes[0] != 'A' || bytes[1] != 'E' || bytes[2] != 'M' || bytes[3] != 'B')
        throw FormatError("not an AEMB file (bad magic)");
    if (bytes[4] != kAembVersion)
        throw FormatError("unsupported AEMB version " + std::to_string(bytes[4]));
    if (bytes.size() < kAembHeaderBytes)
        throw CorruptionError("AEMB header truncated");

    const std::uint32_t n = get_u32(bytes.data() + 5);
    const std::uint32_t dim = get_u32(bytes.data() + 9);
    const std::uint8_t has_labels = bytes[13];
    const std::uint32_t num_classes = get_u32(bytes.data() + 14);
    if (has_labels > 1)
        throw FormatError("AEMB has_labels flag must be 0 or 1");
    if (n == 0 || dim == 0)
        throw ValidationError("AEMB declares an empty pool");

    const std::uint64_t feature_bytes = std::uint64_t{n} * dim * 4;
    const std::uint64_t label_bytes = has_labels ? std::uint64_t{n} * 2 : 0;
    const std::uint64_t payload = bytes.size() - kAembHeaderBytes;
    if (payload != feature_bytes + label_bytes)
        throw CorruptionError("AEMB payload is " + std::to_string(payload) + " bytes, expected " +
                              std::to_string(feature_bytes + label_bytes));

    EmbeddingPool pool;
    pool.features.resize(n, dim);
    const std::uint8_t* p = bytes.data() + kAembHeaderBytes;
    float* dst = pool.features.data();
    for (std::uint64_t i = 0; i < std::uint64_t{n} * dim; ++i, p += 4)
        dst[i] = std::bit_cast<float>(get_u32(p));
    if (has_labels) {
        pool.labels.resize(n);
        for (std::uint32_t i = 0; i < n; ++i, p += 2)
            pool.labels[i] = static_cast<ClassId>(get_u16(p));
        if (num_classes > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
            throw ValidationError("AEMB num_classes out of range");
        pool.num_classes = static_cast<int>(num_classes);
    } else {
        pool.num_classes = static_cast<int>(num_classes);
    }
    pool.validate();
    return pool;
}

EmbeddingPool load_pool(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError("read failed for " + path.string());
    return decode_pool(bytes);
}

void save_pool(const EmbeddingPool& pool, const std::filesystem::path& path)
{
    const auto bytes = encode_pool(pool);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed for " + path.string());
}

RowMatrixXd synthetic_centers(const SyntheticSpec& spec)
{
    spec.validate();
    const auto classes = static_cast<Eigen::Index>(spec.classes);
    const auto dim = static_cast<Eigen::Index>(spec.dim);
    Rng rng(derive_seed(spec.seed, "centers"));

    if (classes <= dim) {
        Eigen::MatrixXd gauss(dim, classes);
        for (Eigen::Index j = 0; j < classes; ++j)
            for (Eigen::Index i = 0; i < dim; ++i)
                gauss(i, j) = rng.normal();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, classes);
        // Orthonormal columns sit sqrt(2) apart.
        return (q.transpose() * (spec.separation / std::sqrt(2.0))).eval();
    }

    Eigen::VectorXd direction(dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        direction(i) = rng.normal();
    if (direction.norm() == 0.0)
        direction(0) = 1.0;
    direction.normalize();
    RowMatrixXd centers(classes, dim);
    for (Eigen::Index c = 0; c < classes; ++c)
        centers.row(c) = (static_cast<double>(c) * spec.separation) * direction.transpose();
    return centers;
}

EmbeddingPool gen_synthetic(const SyntheticSpec& spec)
{
    const RowMatrixXd centers = synthetic_centers(spec);
    const auto dim = static_cast<Eigen::Index>(spec.dim);
    const std::size_t n = static_cast<std::size_t>(spec.classes) * spec.per_class;

    EmbeddingPool pool;
    pool.num_classes = spec.classes;
    pool.features.resize(static_cast<Eigen::Index>(n), dim);
    pool.labels.resize(n);
    Rng rng(derive_seed(spec.seed, "samples"));
    std::size_t row = 0;
    for (int c = 0; c < spec.classes; ++c) {
        for (std::size_t k = 0; k < spec.per_class; ++k, ++row) {
            for (Eigen::Index j = 0; j < dim; ++j)
                pool.features(static_cast<Eigen::Index>(row), j) =
                    static_cast<float>(centers(c, j) + spec.spread * rng.normal());
            pool.labels[row] = c;
        }
    }
    return pool;
}

EmbeddingPool subset_pool(const EmbeddingPool& pool, std::span<const std::size_t> indices)
{
    EmbeddingPool out;
    out.num_classes = pool.num_classes;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), pool.features.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= pool.size())
            throw ValidationError("subset index out of range");
        out.features.row(static_cast<Eigen::Index>(r)) =
            pool.features.row(static_cast<Eigen::Index>(indices[r]));
    }
    if (pool.has_labels()) {
        out.labels.reserve(indices.size());
        for (std::size_t i : indices)
            out.labels.push_back(pool.labels[i]);
    }
    return out;
}

EmbeddingPool apply_imbalance(const EmbeddingPool& pool, std::span<const double> retention,
                              std::uint64_t seed)
{
    pool.validate();
    if (!pool.has_labels())
        throw ValidationError("apply_imbalance needs a labeled pool");
    if (retention.size() != static_cast<std::size_t>(pool.num_classes))
        throw ValidationError("retention has " + std::to_string(retention.size()) +
                              " entries, pool has " + std::to_string(pool.num_classes) + " classes");
    for (double r : retention)
        if (!(r > 0.0 && r <= 1.0))
            throw ValidationError("retention fractions must lie in (0, 1]");

    auto by_class = indices_by_class(pool);
    IndexList keep;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        const std::size_t target = round_half_up(static_cast<double>(members.size()) * retention[c]);
        if (target == 0)
            throw ValidationError("retention removes every sample of class " + std::to_string(c));
        Rng rng(derive_seed(seed, "imbalance", c));
        shuffle_prefix(std::span<std::size_t>(members), target, rng);
        keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(target));
    }
    std::sort(keep.begin(), keep.end());
    return subset_pool(pool, keep);
}

PoolPartition split_pool(const EmbeddingPool& pool, double test_fraction, std::uint64_t seed)
{
    pool.validate();
    if (!pool.has_labels())
        throw ValidationError("split_pool needs a labeled pool");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValidationError("test fraction must lie in (0, 1)");

    auto by_class = indices_by_class(pool);
    PoolPartition part;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.empty())
            continue;
        if (members.size() < 2)
            throw ValidationError("class " + std::to_string(c) + " has fewer than 2 samples");
        // At least one training sample must remain.
        const std::size_t n_test = std::min(
            round_half_up(static_cast<double>(members.size()) * test_fraction), members.size() - 1);
        Rng rng(derive_seed(seed, "split", c));
        shuffle_prefix(std::span<std::size_t>(members), n_test, rng);
        part.test.insert(part.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
        part.unlabeled.insert(part.unlabeled.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test),
                              members.end());
    }
    std::sort(part.test.begin(), part.test.end());
    std::sort(part.unlabeled.begin(), part.unlabeled.end());
    return part;
}

} // namespace albench

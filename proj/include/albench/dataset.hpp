#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace albench {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Indices into an EmbeddingPool.
using IndexList = std::vector<std::size_t>;
using ClassId = int;

// N feature vectors of dimension `dim`, optionally labeled with classes in [0, C).
struct EmbeddingPool {
    RowMatrixXf features;         // n x dim, row-major
    std::vector<ClassId> labels;  // empty when unlabeled
    int num_classes = 0;          // 0 when unlabeled

    std::size_t size() const noexcept { return static_cast<std::size_t>(features.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
    bool has_labels() const noexcept { return !labels.empty(); }

    // Throws ValidationError when an invariant is broken.
    void validate() const;

    // Number of samples per class; size num_classes.
    std::vector<std::size_t> class_counts() const;

    bool operator==(const EmbeddingPool& other) const;
};

// Labeled / unlabeled / test split over one pool. All three lists are kept sorted.
struct PoolPartition {
    IndexList labeled;
    IndexList unlabeled;
    IndexList test;
};

struct SyntheticSpec {
    int classes = 10;
    std::size_t dim = 32;
    std::size_t per_class = 100;
    double spread = 1.0;
    double separation = 10.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// AEMB binary format, little-endian:
//   "AEMB" | u8 version=1 | u32 n | u32 dim | u8 has_labels | u32 num_classes
//   then n*dim f32 row-major, then (if has_labels) n u16 labels.
inline constexpr std::size_t kAembHeaderBytes = 18;
inline constexpr std::uint8_t kAembVersion = 1;

EmbeddingPool load_pool(const std::filesystem::path& path);
void save_pool(const EmbeddingPool& pool, const std::filesystem::path& path);

// In-memory encoding, shared by the file routines and the tests.
std::vector<std::uint8_t> encode_pool(const EmbeddingPool& pool);
EmbeddingPool decode_pool(std::span<const std::uint8_t> bytes);

// Centers of the synthetic classes, C x dim, pairwise exactly `separation`
// apart when C <= dim (scaled random orthonormal directions) and spaced
// `separation` along a random unit line otherwise.
RowMatrixXd synthetic_centers(const SyntheticSpec& spec);

// Class-major isotropic Gaussian blobs around synthetic_centers().
EmbeddingPool gen_synthetic(const SyntheticSpec& spec);

// Keeps round_half_up(count_c * retention[c]) samples of every class c,
// chosen uniformly without replacement; survivors keep their relative order.
EmbeddingPool apply_imbalance(const EmbeddingPool& pool, std::span<const double> retention,
                              std::uint64_t seed);

// Stratified split: round_half_up(count_c * test_fraction) test samples per
// class, everything else unlabeled, nothing labeled.
PoolPartition split_pool(const EmbeddingPool& pool, double test_fraction, std::uint64_t seed);

// Rows of `pool` at `indices`, in that order.
EmbeddingPool subset_pool(const EmbeddingPool& pool, std::span<const std::size_t> indices);

} // namespace albench

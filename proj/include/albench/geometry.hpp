#pragma once

// Exact brute-force geometry over the rows of a dense matrix: distances,
// farthest-point sampling, k-nearest neighbors, k-means++ and silhouette.
//
// Every routine accepts any Eigen expression whose rows are samples. Inputs
// may be float; all distance arithmetic accumulates in double, in a fixed
// left-to-right order, so outputs are bit-stable. Every tie (FPS argmax, knn
// order, nearest center, best k) resolves to the lowest index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "albench/dataset.hpp"
#include "albench/errors.hpp"
#include "albench/rng.hpp"

namespace albench {

template <typename DerivedA, typename DerivedB>
double squared_euclidean(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    if (a.size() != b.size())
        throw ValidationError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.coeff(i)) - static_cast<double>(b.coeff(i));
        acc += d * d;
    }
    return acc;
}

template <typename DerivedA, typename DerivedB>
double euclidean(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    return std::sqrt(squared_euclidean(a, b));
}

template <typename DerivedA, typename DerivedB>
double cosine_sim(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    if (a.size() != b.size())
        throw ValidationError("dimension mismatch in cosine_sim");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double x = static_cast<double>(a.coeff(i));
        const double y = static_cast<double>(b.coeff(i));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0)
        throw DomainError("cosine similarity of a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// Incremental greedy max-min sampler over a candidate subset of rows.
//
// The running min-distance of every candidate is taken against all anchors:
// points passed to add_anchor() (e.g. an already-labeled set) and every point
// returned so far. next() returns the active candidate with the largest
// min-distance; with no anchors yet it returns the lowest candidate index.
template <typename Derived>
class FarthestPointSampler {
public:
    FarthestPointSampler(const Eigen::MatrixBase<Derived>& points, std::span<const std::size_t> candidates)
        : points_(points.derived()), candidates_(candidates.begin(), candidates.end())
    {
        std::sort(candidates_.begin(), candidates_.end());
        candidates_.erase(std::unique(candidates_.begin(), candidates_.end()), candidates_.end());
        for (std::size_t c : candidates_)
            if (c >= static_cast<std::size_t>(points_.rows()))
                throw ValidationError("candidate index out of range");
        min_dist_.assign(candidates_.size(), std::numeric_limits<double>::infinity());
        active_.assign(candidates_.size(), 1);
        remaining_ = candidates_.size();
    }

    std::size_t remaining() const noexcept { return remaining_; }

    // Distances to `index` now count towards every candidate's min-distance.
    void add_anchor(std::size_t index)
    {
        const auto anchor = points_.row(static_cast<Eigen::Index>(index));
        for (std::size_t c = 0; c < candidates_.size(); ++c) {
            if (!active_[c])
                continue;
            const double d = squared_euclidean(points_.row(static_cast<Eigen::Index>(candidates_[c])), anchor);
            if (d < min_dist_[c])
                min_dist_[c] = d;
        }
        has_anchor_ = true;
    }

    // The candidate can no longer be returned; it does not become an anchor.
    void exclude(std::size_t index)
    {
        const auto it = std::lower_bound(candidates_.begin(), candidates_.end(), index);
        if (it == candidates_.end() || *it != index)
            return;
        auto& flag = active_[static_cast<std::size_t>(it - candidates_.begin())];
        if (flag) {
            flag = 0;
            --remaining_;
        }
    }

    // Returns `index` as the next pick (it must be an active candidate).
    std::size_t take(std::size_t index)
    {
        const auto it = std::lower_bound(candidates_.begin(), candidates_.end(), index);
        if (it == candidates_.end() || *it != index || !active_[static_cast<std::size_t>(it - candidates_.begin())])
            throw ValidationError("FPS start index is not an available candidate");
        exclude(index);
        add_anchor(index);
        return index;
    }

    std::optional<std::size_t> next()
    {
        if (remaining_ == 0)
            return std::nullopt;
        std::size_t best = candidates_.size();
        for (std::size_t c = 0; c < candidates_.size(); ++c) {
            if (!active_[c])
                continue;
            if (best == candidates_.size() || (has_anchor_ && min_dist_[c] > min_dist_[best]))
                best = c;
            if (!has_anchor_)
                break;
        }
        return take(candidates_[best]);
    }

    // Current squared min-distance of a candidate to the anchor set.
    double min_squared_distance(std::size_t index) const
    {
        const auto it = std::lower_bound(candidates_.begin(), candidates_.end(), index);
        if (it == candidates_.end() || *it != index)
            throw ValidationError("not a candidate");
        return min_dist_[static_cast<std::size_t>(it - candidates_.begin())];
    }

private:
    const Derived& points_;
    IndexList candidates_;
    std::vector<double> min_dist_;
    std::vector<char> active_;
    std::size_t remaining_ = 0;
    bool has_anchor_ = false;
};

// Greedy max-min selection of `count` rows of `subset`, starting at
// `seed_index`. Returns picks in selection order.
template <typename Derived>
IndexList farthest_point_sampling(const Eigen::MatrixBase<Derived>& points,
                                  std::span<const std::size_t> subset, std::size_t count,
                                  std::size_t seed_index)
{
    if (count == 0)
        return {};
    if (subset.empty())
        throw ValidationError("farthest_point_sampling over an empty subset");
    FarthestPointSampler<Derived> sampler(points, subset);
    if (count > sampler.remaining())
        throw ValidationError("FPS count exceeds subset size");
    IndexList picks;
    picks.reserve(count);
    picks.push_back(sampler.take(seed_index));
    while (picks.size() < count)
        picks.push_back(*sampler.next());
    return picks;
}

// Same, but the min-distances start from an existing anchor set instead of
// a seed point, so the first pick is the candidate farthest from the anchors.
template <typename Derived>
IndexList farthest_point_sampling_from(const Eigen::MatrixBase<Derived>& points,
                                       std::span<const std::size_t> subset, std::size_t count,
                                       std::span<const std::size_t> anchors)
{
    if (count == 0)
        return {};
    if (subset.empty())
        throw ValidationError("farthest_point_sampling over an empty subset");
    FarthestPointSampler<Derived> sampler(points, subset);
    if (count > sampler.remaining())
        throw ValidationError("FPS count exceeds subset size");
    for (std::size_t a : anchors)
        sampler.add_anchor(a);
    IndexList picks;
    picks.reserve(count);
    while (picks.size() < count)
        picks.push_back(*sampler.next());
    return picks;
}

struct NeighborList {
    IndexList indices;
    std::vector<double> distances;
};

// The k members of `subset` closest to row `query_index` (the query itself
// excluded), ascending by distance then index.
template <typename Derived>
NeighborList knn(const Eigen::MatrixBase<Derived>& points, std::span<const std::size_t> subset,
                 std::size_t query_index, std::size_t k)
{
    const auto& pts = points.derived();
    if (query_index >= static_cast<std::size_t>(pts.rows()))
        throw ValidationError("knn query index out of range");
    const auto query = pts.row(static_cast<Eigen::Index>(query_index));
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(subset.size());
    for (std::size_t idx : subset) {
        if (idx == query_index)
            continue;
        if (idx >= static_cast<std::size_t>(pts.rows()))
            throw ValidationError("knn subset index out of range");
        scored.emplace_back(squared_euclidean(pts.row(static_cast<Eigen::Index>(idx)), query), idx);
    }
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end());
    NeighborList out;
    out.indices.reserve(take);
    out.distances.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.indices.push_back(scored[i].second);
        out.distances.push_back(std::sqrt(scored[i].first));
    }
    return out;
}

struct Clustering {
    int k = 0;
    RowMatrixXd centers;             // k x dim
    std::vector<int> assignment;     // per row, in [0, k)
    double inertia = 0.0;            // sum of squared distances to assigned centers
    std::vector<double> inertia_history;  // after every assignment step
    int iterations = 0;
};

namespace detail {

// Assigns every row to its nearest center; returns the inertia.
template <typename Derived>
double assign_to_centers(const Derived& pts, const RowMatrixXd& centers, std::vector<int>& assignment)
{
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            const double d = squared_euclidean(pts.row(i), centers.row(c));
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        assignment[static_cast<std::size_t>(i)] = best;
        inertia += best_d;
    }
    return inertia;
}

} // namespace detail

// k-means++ seeding (D^2 sampling) followed by Lloyd iterations until the
// largest center shift drops below `tol` or `max_iters` is reached. An empty
// cluster's center is re-seeded at the row farthest from its old position.
template <typename Derived>
Clustering kmeans_pp(const Eigen::MatrixBase<Derived>& points, int k, std::uint64_t seed,
                     int max_iters = 100, double tol = 1e-6)
{
    const auto& pts = points.derived();
    const Eigen::Index n = pts.rows();
    const Eigen::Index dim = pts.cols();
    if (k < 1 || static_cast<Eigen::Index>(k) > n)
        throw ValidationError("kmeans_pp needs 1 <= k <= n");

    Rng rng(derive_seed(seed, "kmeans++"));
    RowMatrixXd centers(k, dim);
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<char> chosen(static_cast<std::size_t>(n), 0);

    std::size_t first = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)));
    for (int c = 0; c < k; ++c) {
        std::size_t pick = first;
        if (c > 0) {
            double total = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                total += d2[static_cast<std::size_t>(i)];
            pick = static_cast<std::size_t>(n);
            if (total > 0.0) {
                const double r = rng.uniform() * total;
                double cum = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    cum += d2[static_cast<std::size_t>(i)];
                    if (cum > r && d2[static_cast<std::size_t>(i)] > 0.0) {
                        pick = static_cast<std::size_t>(i);
                        break;
                    }
                }
                // Rounding can leave r at the very top of the range.
                if (pick == static_cast<std::size_t>(n))
                    for (Eigen::Index i = n - 1; i >= 0; --i)
                        if (d2[static_cast<std::size_t>(i)] > 0.0) {
                            pick = static_cast<std::size_t>(i);
                            break;
                        }
            }
            if (pick == static_cast<std::size_t>(n)) {
                // Every row coincides with a chosen center: take the lowest unchosen row.
                for (Eigen::Index i = 0; i < n; ++i)
                    if (!chosen[static_cast<std::size_t>(i)]) {
                        pick = static_cast<std::size_t>(i);
                        break;
                    }
            }
        }
        chosen[pick] = 1;
        for (Eigen::Index j = 0; j < dim; ++j)
            centers(c, j) = static_cast<double>(pts(static_cast<Eigen::Index>(pick), j));
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = squared_euclidean(pts.row(i), centers.row(c));
            if (d < d2[static_cast<std::size_t>(i)])
                d2[static_cast<std::size_t>(i)] = d;
        }
    }

    Clustering out;
    out.k = k;
    out.assignment.assign(static_cast<std::size_t>(n), 0);
    out.inertia = detail::assign_to_centers(pts, centers, out.assignment);
    out.inertia_history.push_back(out.inertia);

    for (int it = 0; it < max_iters; ++it) {
        RowMatrixXd sums = RowMatrixXd::Zero(k, dim);
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = out.assignment[static_cast<std::size_t>(i)];
            ++counts[static_cast<std::size_t>(c)];
            for (Eigen::Index j = 0; j < dim; ++j)
                sums(c, j) += static_cast<double>(pts(i, j));
        }
        RowMatrixXd updated(k, dim);
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                updated.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = squared_euclidean(pts.row(i), centers.row(c));
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            for (Eigen::Index j = 0; j < dim; ++j)
                updated(c, j) = static_cast<double>(pts(far, j));
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c)
            shift = std::max(shift, std::sqrt(squared_euclidean(updated.row(c), centers.row(c))));
        centers = std::move(updated);
        out.inertia = detail::assign_to_centers(pts, centers, out.assignment);
        out.inertia_history.push_back(out.inertia);
        out.iterations = it + 1;
        if (shift < tol)
            break;
    }
    out.centers = std::move(centers);
    return out;
}

// Mean silhouette coefficient. Cluster ids may be any non-negative ints;
// the clusters are the ids present. Singleton clusters contribute 0.
template <typename Derived>
double silhouette(const Eigen::MatrixBase<Derived>& points, std::span<const int> assignment)
{
    const auto& pts = points.derived();
    const std::size_t n = static_cast<std::size_t>(pts.rows());
    if (assignment.size() != n)
        throw ValidationError("silhouette: assignment length does not match row count");

    int max_id = -1;
    for (int a : assignment) {
        if (a < 0)
            throw ValidationError("silhouette: negative cluster id");
        max_id = std::max(max_id, a);
    }
    std::vector<std::size_t> sizes(static_cast<std::size_t>(max_id + 1), 0);
    for (int a : assignment)
        ++sizes[static_cast<std::size_t>(a)];
    std::size_t present = 0;
    for (std::size_t s : sizes)
        present += s > 0 ? 1 : 0;
    if (present < 2)
        throw DomainError("silhouette needs at least two clusters");

    // sums(i, c) = total distance from row i to the members of cluster c.
    const std::size_t k = sizes.size();
    std::vector<double> sums(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = euclidean(pts.row(static_cast<Eigen::Index>(i)), pts.row(static_cast<Eigen::Index>(j)));
            sums[i * k + static_cast<std::size_t>(assignment[j])] += d;
            sums[j * k + static_cast<std::size_t>(assignment[i])] += d;
        }
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(assignment[i]);
        if (sizes[own] <= 1)
            continue;
        const double a = sums[i * k + own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != own && sizes[c] > 0)
                b = std::min(b, sums[i * k + c] / static_cast<double>(sizes[c]));
        const double denom = std::max(a, b);
        if (denom > 0.0)
            total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

struct SilhouetteSearch {
    int best_k = 0;
    std::vector<std::pair<int, double>> scores;  // (k, silhouette) for every k tried
    Clustering clustering;                       // the clustering at best_k
};

// Runs kmeans_pp for every k in [k_min, k_max] and keeps the k with the
// highest silhouette (ties to the smaller k). When the pool has more than
// `sample_cap` rows the silhouette is scored on a seeded uniform sample of
// that many rows; sample_cap = 0 always scores every row.
template <typename Derived>
SilhouetteSearch choose_k_by_silhouette(const Eigen::MatrixBase<Derived>& points, int k_min, int k_max,
                                        std::uint64_t seed, std::size_t sample_cap = 0)
{
    const auto& pts = points.derived();
    const auto n = static_cast<std::size_t>(pts.rows());
    if (k_min < 2 || k_min > k_max || static_cast<std::size_t>(k_max) > n)
        throw ValidationError("choose_k_by_silhouette needs 2 <= k_min <= k_max <= n");

    IndexList sample;
    if (sample_cap > 0 && n > sample_cap) {
        sample.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            sample[i] = i;
        Rng rng(derive_seed(seed, "silhouette-sample"));
        shuffle_prefix(std::span<std::size_t>(sample), sample_cap, rng);
        sample.resize(sample_cap);
        std::sort(sample.begin(), sample.end());
    }
    RowMatrixXd sampled;
    if (!sample.empty()) {
        sampled.resize(static_cast<Eigen::Index>(sample.size()), pts.cols());
        for (std::size_t r = 0; r < sample.size(); ++r)
            for (Eigen::Index j = 0; j < pts.cols(); ++j)
                sampled(static_cast<Eigen::Index>(r), j) = static_cast<double>(pts(static_cast<Eigen::Index>(sample[r]), j));
    }

    SilhouetteSearch out;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = k_min; k <= k_max; ++k) {
        Clustering cl = kmeans_pp(pts, k, derive_seed(seed, "k", static_cast<std::uint64_t>(k)));
        double score = -std::numeric_limits<double>::infinity();
        try {
            if (sample.empty()) {
                score = silhouette(pts, std::span<const int>(cl.assignment));
            } else {
                std::vector<int> sub(sample.size());
                for (std::size_t r = 0; r < sample.size(); ++r)
                    sub[r] = cl.assignment[sample[r]];
                score = silhouette(sampled, std::span<const int>(sub));
            }
        } catch (const DomainError&) {
            // Degenerate clustering (all rows in one cluster): never preferred.
        }
        out.scores.emplace_back(k, score);
        if (score > best) {
            best = score;
            out.best_k = k;
            out.clustering = std::move(cl);
        }
    }
    if (out.best_k == 0) {
        out.best_k = k_min;
        out.clustering = kmeans_pp(pts, k_min, derive_seed(seed, "k", static_cast<std::uint64_t>(k_min)));
    }
    return out;
}

} // namespace albench

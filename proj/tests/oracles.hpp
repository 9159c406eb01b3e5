#pragma once

// Brute-force reference implementations. They work on plain nested vectors
// and never call into the library, so a shared bug cannot hide.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Points = std::vector<std::vector<double>>;

template <typename Matrix>
Points to_points(const Matrix& m)
{
    Points out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < m.cols(); ++j)
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = static_cast<double>(m(i, j));
    return out;
}

inline double dist2(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

inline double dist(const std::vector<double>& a, const std::vector<double>& b) { return std::sqrt(dist2(a, b)); }

// Greedy max-min. Every step recomputes each candidate's distance to the
// whole chosen set from scratch.
inline std::vector<std::size_t> fps(const Points& p, std::vector<std::size_t> subset, std::size_t count,
                                    std::vector<std::size_t> anchors, bool have_start, std::size_t start)
{
    std::sort(subset.begin(), subset.end());
    std::vector<std::size_t> picks;
    std::set<std::size_t> used;
    if (have_start && count > 0) {
        picks.push_back(start);
        used.insert(start);
        anchors.push_back(start);
    }
    while (picks.size() < count) {
        std::size_t best = 0;
        double best_d = -1.0;
        bool found = false;
        for (std::size_t c : subset) {
            if (used.count(c))
                continue;
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t a : anchors)
                m = std::min(m, dist2(p[c], p[a]));
            if (anchors.empty())
                m = 0.0;
            if (!found || m > best_d) {
                best = c;
                best_d = m;
                found = true;
            }
        }
        if (!found)
            break;
        picks.push_back(best);
        used.insert(best);
        anchors.push_back(best);
    }
    return picks;
}

inline std::vector<std::size_t> knn(const Points& p, const std::vector<std::size_t>& subset, std::size_t q,
                                    std::size_t k)
{
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i : subset)
        if (i != q)
            all.emplace_back(dist2(p[i], p[q]), i);
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i)
        out.push_back(all[i].second);
    return out;
}

// Textbook silhouette; singletons contribute 0.
inline double silhouette(const Points& p, const std::vector<int>& label)
{
    const std::size_t n = p.size();
    std::set<int> ids(label.begin(), label.end());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double a_sum = 0.0;
        std::size_t a_n = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && label[j] == label[i]) {
                a_sum += dist(p[i], p[j]);
                ++a_n;
            }
        if (a_n == 0)
            continue;
        const double a = a_sum / static_cast<double>(a_n);
        double b = std::numeric_limits<double>::infinity();
        for (int other : ids) {
            if (other == label[i])
                continue;
            double s = 0.0;
            std::size_t m = 0;
            for (std::size_t j = 0; j < n; ++j)
                if (label[j] == other) {
                    s += dist(p[i], p[j]);
                    ++m;
                }
            b = std::min(b, s / static_cast<double>(m));
        }
        const double den = std::max(a, b);
        total += den > 0.0 ? (b - a) / den : 0.0;
    }
    return total / static_cast<double>(n);
}

// Nearest center for every point, ties to the lower center.
inline std::vector<int> nearest_center(const Points& p, const Points& centers)
{
    std::vector<int> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centers.size(); ++c) {
            const double d = dist2(p[i], centers[c]);
            if (d < best) {
                best = d;
                out[i] = static_cast<int>(c);
            }
        }
    }
    return out;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return d / std::sqrt(na * nb);
}

// NT-Xent over rows [a_1..a_N, b_1..b_N]; denominator over every k != i.
inline double nt_xent(const Points& z, double tau)
{
    const std::size_t two_n = z.size(), n = two_n / 2;
    double total = 0.0;
    for (std::size_t i = 0; i < two_n; ++i) {
        const std::size_t j = (i + n) % two_n;
        double den = 0.0;
        for (std::size_t k = 0; k < two_n; ++k)
            if (k != i)
                den += std::exp(cosine(z[i], z[k]) / tau);
        total += -std::log(std::exp(cosine(z[i], z[j]) / tau) / den);
    }
    return total / static_cast<double>(two_n);
}

// 1-NN classification accuracy of `test` rows against `train` rows.
template <typename Labels>
double one_nn_accuracy(const Points& p, const Labels& labels, const std::vector<std::size_t>& train,
                       const std::vector<std::size_t>& test)
{
    std::size_t hit = 0;
    for (std::size_t t : test) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = train.front();
        for (std::size_t r : train) {
            const double d = dist2(p[t], p[r]);
            if (d < best) {
                best = d;
                arg = r;
            }
        }
        hit += labels[arg] == labels[t];
    }
    return static_cast<double>(hit) / static_cast<double>(test.size());
}

} // namespace oracle

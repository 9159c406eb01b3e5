#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <set>

#include "albench/errors.hpp"
#include "albench/geometry.hpp"
#include "albench/strategies.hpp"
#include "oracles.hpp"

using namespace albench;

namespace {

EmbeddingPool blobs(int classes, std::size_t per_class, std::size_t dim, double spread, std::uint64_t seed)
{
    SyntheticSpec spec;
    spec.classes = classes;
    spec.per_class = per_class;
    spec.dim = dim;
    spec.spread = spread;
    spec.separation = 10.0;
    spec.seed = seed;
    return gen_synthetic(spec);
}

PoolPartition all_unlabeled(std::size_t n)
{
    PoolPartition p;
    p.unlabeled.resize(n);
    std::iota(p.unlabeled.begin(), p.unlabeled.end(), std::size_t{0});
    return p;
}

// Moves a seeded random share of the unlabeled rows to labeled.
PoolPartition with_labels(std::size_t n, std::size_t labeled, std::uint64_t seed)
{
    IndexList rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng rng(seed);
    shuffle_prefix(std::span<std::size_t>(rows), labeled, rng);
    PoolPartition p;
    p.labeled.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(labeled));
    p.unlabeled.assign(rows.begin() + static_cast<std::ptrdiff_t>(labeled), rows.end());
    std::sort(p.labeled.begin(), p.labeled.end());
    std::sort(p.unlabeled.begin(), p.unlabeled.end());
    return p;
}

MlpModel fresh_model(const EmbeddingPool& pool, std::uint64_t seed, double dropout = 0.3)
{
    MlpConfig c;
    c.input_dim = pool.dim();
    c.num_classes = pool.num_classes;
    c.hidden_dims = {32};
    c.dropout_rate = dropout;
    c.weight_init_seed = seed;
    return MlpModel::initialize(c);
}

MlpModel trained_model(const EmbeddingPool& pool, const IndexList& rows, std::uint64_t seed, double dropout = 0.3)
{
    MlpModel m = fresh_model(pool, seed, dropout);
    m.config.epochs = 40;
    return train(m, pool, rows, seed);
}

// Two regions along x0: a far one (x0 ~ 6) where the hand-built model is
// almost certain, and one near the origin where it is undecided.
EmbeddingPool two_region_pool()
{
    EmbeddingPool p;
    p.features.resize(40, 2);
    p.num_classes = 2;
    Rng rng(3);
    for (Eigen::Index i = 0; i < 40; ++i) {
        const bool far = i < 20;
        p.features(i, 0) = static_cast<float>((far ? 6.0 : 0.0) + 0.3 * rng.normal());
        p.features(i, 1) = static_cast<float>(0.3 * rng.normal());
        p.labels.push_back(far ? 0 : 1);
    }
    return p;
}

MlpModel region_model()
{
    MlpConfig c;
    c.input_dim = 2;
    c.hidden_dims = {2};
    c.num_classes = 2;
    c.dropout_rate = 0.0;
    MlpModel m = MlpModel::initialize(c);
    m.weights[0] << 1, 0, -1, 0;  // h = (relu(x0), relu(-x0))
    m.biases[0].setZero();
    m.weights[1] << 4, 0, 0, 0;  // logit_0 = 4 relu(x0)
    m.biases[1].setZero();
    return m;
}

void expect_valid_batch(const QueryBatch& b, const PoolPartition& part, std::size_t budget)
{
    EXPECT_LE(b.picks.size(), budget);
    std::set<std::size_t> s(b.picks.begin(), b.picks.end());
    EXPECT_EQ(s.size(), b.picks.size());
    for (std::size_t i : b.picks)
        EXPECT_TRUE(std::binary_search(part.unlabeled.begin(), part.unlabeled.end(), i));
    EXPECT_EQ(b.diagnostics.size(), b.picks.size());
}

} // namespace

TEST(Strategies, NamesRoundTrip)
{
    for (StrategyId s : all_strategies())
        EXPECT_EQ(parse_strategy(strategy_name(s)), s);
    EXPECT_FALSE(parse_strategy("bogus").has_value());
    EXPECT_EQ(strategy_name(StrategyId::Mcfps), "mcfps");
}

TEST(Strategies, ContextValidation)
{
    const EmbeddingPool pool = blobs(2, 5, 2, 1.0, 1);
    const PoolPartition part = all_unlabeled(pool.size());
    EXPECT_THROW(query_random(QueryContext{pool, part, nullptr, 0, {}, 1}), ValidationError);
    EXPECT_THROW(query_random(QueryContext{pool, part, nullptr, 11, {}, 1}), ValidationError);
    StrategyParams bad;
    bad.skip_threshold = 0.0;
    EXPECT_THROW(query_fps(QueryContext{pool, part, nullptr, 2, bad, 1}), ValidationError);
    EXPECT_THROW(query_mcfps(QueryContext{pool, part, nullptr, 2, {}, 1}), ValidationError);
}

TEST(Strategies, RandomExhaustionAndDeterminism)
{
    const EmbeddingPool pool = blobs(2, 10, 3, 1.0, 1);
    const PoolPartition part = with_labels(pool.size(), 5, 2);
    QueryBatch all = query_random(QueryContext{pool, part, nullptr, part.unlabeled.size(), {}, 4});
    std::sort(all.picks.begin(), all.picks.end());
    EXPECT_EQ(all.picks, part.unlabeled);
    const QueryContext ctx{pool, part, nullptr, 6, {}, 9};
    EXPECT_EQ(query_random(ctx).picks, query_random(ctx).picks);
}

TEST(Strategies, RandomIsUniform)
{
    const EmbeddingPool pool = blobs(2, 5, 2, 1.0, 1);
    const PoolPartition part = all_unlabeled(10);
    std::map<std::size_t, int> freq;
    for (std::uint64_t s = 0; s < 1000; ++s)
        ++freq[query_random(QueryContext{pool, part, nullptr, 1, {}, derive_seed(s, "round")}).picks[0]];
    for (std::size_t i = 0; i < 10; ++i)
        EXPECT_NEAR(freq[i], 100, 40) << "item " << i;
}

TEST(Strategies, FpsCollinear)
{
    EmbeddingPool pool;
    pool.features.resize(3, 2);
    pool.features << 0, 0, 1, 0, 10, 0;
    const PoolPartition part = all_unlabeled(3);
    const QueryBatch b = query_fps(QueryContext{pool, part, nullptr, 2, {}, 0});
    EXPECT_EQ(b.picks, (IndexList{0, 2}));
    QueryBatch all = query_fps(QueryContext{pool, part, nullptr, 3, {}, 0});
    std::sort(all.picks.begin(), all.picks.end());
    EXPECT_EQ(all.picks, part.unlabeled);
}

TEST(Strategies, FpsMatchesOracleWithLabeledAnchors)
{
    for (std::uint64_t trial = 0; trial < 30; ++trial) {
        Rng meta(trial);
        const std::size_t n = 8 + meta.below(57);
        const EmbeddingPool pool = blobs(2, n / 2, 3, 3.0, trial);
        const PoolPartition part = with_labels(pool.size(), meta.below(pool.size() / 2), trial + 1);
        const std::size_t budget = 1 + meta.below(part.unlabeled.size());
        const QueryBatch b = query_fps(QueryContext{pool, part, nullptr, budget, {}, trial});
        const auto pts = oracle::to_points(pool.features);
        EXPECT_EQ(b.picks, oracle::fps(pts, part.unlabeled, budget, part.labeled, false, 0));
        for (std::size_t i : b.picks)
            EXPECT_FALSE(std::binary_search(part.labeled.begin(), part.labeled.end(), i));
    }
}

TEST(Strategies, AllocateBudget)
{
    EXPECT_EQ(allocate_budget(4, std::vector<std::size_t>{10, 10}), (std::vector<std::size_t>{2, 2}));
    EXPECT_EQ(allocate_budget(4, std::vector<std::size_t>{1, 10}), (std::vector<std::size_t>{1, 3}));
    EXPECT_EQ(allocate_budget(5, std::vector<std::size_t>{10, 10, 10}), (std::vector<std::size_t>{2, 2, 1}));
    EXPECT_EQ(allocate_budget(6, std::vector<std::size_t>{0, 1, 10}), (std::vector<std::size_t>{0, 1, 5}));
    EXPECT_EQ(allocate_budget(9, std::vector<std::size_t>{2, 3}), (std::vector<std::size_t>{2, 3}));
}

TEST(Strategies, OsalEqualBlobsSplitEvenly)
{
    const EmbeddingPool pool = blobs(2, 30, 4, 0.3, 5);
    const PoolPartition part = all_unlabeled(pool.size());
    OsalState state;
    const QueryBatch b = query_osal(QueryContext{pool, part, nullptr, 4, {}, 3}, state);
    ASSERT_TRUE(state.initialized);
    EXPECT_EQ(state.k, 2);
    std::map<int, int> per_group;
    for (const auto& d : b.diagnostics)
        ++per_group[d.group];
    EXPECT_EQ(per_group.size(), 2u);
    for (const auto& [g, n] : per_group)
        EXPECT_EQ(n, 2);
    // Clusters match the blobs.
    for (std::size_t i = 0; i < pool.size(); ++i)
        EXPECT_EQ(state.cluster_of[i] == state.cluster_of[0], pool.labels[i] == pool.labels[0]);
}

TEST(Strategies, OsalRedistributesShortCluster)
{
    const EmbeddingPool pool = blobs(2, 30, 4, 0.3, 5);
    OsalState state;
    const PoolPartition first = all_unlabeled(pool.size());
    query_osal(QueryContext{pool, first, nullptr, 2, {}, 3}, state);
    // Leave a single unlabeled row in class 0's cluster.
    PoolPartition part;
    for (std::size_t i = 0; i < pool.size(); ++i)
        (pool.labels[i] == 0 && i != 0 ? part.labeled : part.unlabeled).push_back(i);
    const QueryBatch b = query_osal(QueryContext{pool, part, nullptr, 4, {}, 4}, state);
    std::map<int, int> per_class;
    for (std::size_t i : b.picks)
        ++per_class[pool.labels[i]];
    EXPECT_EQ(per_class[0], 1);
    EXPECT_EQ(per_class[1], 3);
    expect_valid_batch(b, part, 4);
}

TEST(Strategies, OsalClusterFpsIsAnchoredOnEarlierPicks)
{
    const EmbeddingPool pool = blobs(2, 25, 3, 1.0, 8);
    OsalState state;
    const PoolPartition part = with_labels(pool.size(), 6, 1);
    const QueryBatch b = query_osal(QueryContext{pool, part, nullptr, 6, {}, 2}, state);
    const auto pts = oracle::to_points(pool.features);
    for (int g = 0; g < state.k; ++g) {
        IndexList unl, lab, got;
        for (std::size_t i : part.unlabeled)
            if (state.cluster_of[i] == g)
                unl.push_back(i);
        for (std::size_t i : part.labeled)
            if (state.cluster_of[i] == g)
                lab.push_back(i);
        for (const auto& d : b.diagnostics)
            if (d.group == g)
                got.push_back(d.index);
        EXPECT_EQ(got, oracle::fps(pts, unl, got.size(), lab, false, 0));
    }
}

TEST(Strategies, McfpsFreshModelBehavesLikeFps)
{
    const EmbeddingPool pool = blobs(4, 20, 6, 1.0, 2);
    const PoolPartition part = all_unlabeled(pool.size());
    const MlpModel g = fresh_model(pool, 1);
    StrategyParams params;
    params.neighborhood_k = 0;
    const QueryBatch m = query_mcfps(QueryContext{pool, part, &g, 8, params, 5});
    const QueryBatch f = query_fps(QueryContext{pool, part, nullptr, 8, params, 5});
    EXPECT_EQ(m.picks, f.picks);
    EXPECT_TRUE(m.skipped.empty());
    for (const auto& d : m.diagnostics) {
        EXPECT_EQ(d.index, d.seed_index);
        EXPECT_LT(d.certainty, 0.8);
    }
}

TEST(Strategies, McfpsPicksMostUncertainMember)
{
    const EmbeddingPool pool = blobs(3, 40, 5, 2.5, 6);
    const PoolPartition part = with_labels(pool.size(), 20, 3);
    const MlpModel g = trained_model(pool, part.labeled, 4);
    StrategyParams params;
    params.neighborhood_k = 5;
    params.passes_t = 10;
    params.skip_threshold = 1.0;
    const std::uint64_t round_seed = 77;
    const QueryBatch b = query_mcfps(QueryContext{pool, part, &g, 10, params, round_seed});
    ASSERT_EQ(b.picks.size(), 10u);
    expect_valid_batch(b, part, 10);

    // Rebuild every neighborhood independently and check the choice. FPS
    // seeds are anchored on the labeled set and earlier seeds; picks are
    // only removed from the candidates.
    const auto pts = oracle::to_points(pool.features);
    std::set<std::size_t> taken, used_seeds;
    IndexList anchors = part.labeled;
    for (std::size_t n = 0; n < b.picks.size(); ++n) {
        IndexList candidates;
        for (std::size_t i : part.unlabeled)
            if (!taken.count(i) && !used_seeds.count(i))
                candidates.push_back(i);
        const std::size_t seed = oracle::fps(pts, candidates, 1, anchors, false, 0).at(0);
        EXPECT_EQ(b.diagnostics[n].seed_index, seed);
        IndexList members = oracle::knn(pts, part.unlabeled, seed, params.neighborhood_k);
        members.push_back(seed);
        std::sort(members.begin(), members.end());
        double best = -1.0;
        std::size_t arg = 0;
        for (std::size_t m : members) {
            if (taken.count(m))
                continue;
            const double u = mc_dropout(g, pool.features.row(static_cast<Eigen::Index>(m)), params.passes_t,
                                        mcfps_member_seed(round_seed, m)).uncertainty;
            if (u > best) {
                best = u;
                arg = m;
            }
        }
        EXPECT_EQ(b.picks[n], arg);
        taken.insert(arg);
        used_seeds.insert(seed);
        anchors.push_back(seed);
    }
}

TEST(Strategies, McfpsSkipsConfidentNeighborhoods)
{
    const EmbeddingPool pool = two_region_pool();
    const PoolPartition part = all_unlabeled(pool.size());
    const MlpModel g = region_model();
    StrategyParams params;
    params.neighborhood_k = 3;
    params.passes_t = 1;

    params.skip_threshold = 0.8;
    const QueryBatch skip = query_mcfps(QueryContext{pool, part, &g, 6, params, 1});
    EXPECT_GE(skip.skipped.size(), 1u);
    EXPECT_LT(skip.picks.size(), 6u);
    for (std::size_t s : skip.skipped)
        EXPECT_LT(s, 20u);  // only far-region seeds are skipped
    for (std::size_t p : skip.picks)
        EXPECT_GE(p, 20u);

    params.refill_on_skip = true;
    const QueryBatch refill = query_mcfps(QueryContext{pool, part, &g, 6, params, 1});
    EXPECT_EQ(refill.picks.size(), 6u);
    expect_valid_batch(refill, part, 6);

    params.refill_on_skip = false;
    params.skip_threshold = 1.0;
    const QueryBatch none = query_mcfps(QueryContext{pool, part, &g, 6, params, 1});
    EXPECT_TRUE(none.skipped.empty());
    EXPECT_EQ(none.picks.size(), 6u);
}

TEST(Strategies, McfpsDegenerateDropoutIgnoresPassCount)
{
    const EmbeddingPool pool = blobs(3, 30, 4, 2.0, 9);
    const PoolPartition part = with_labels(pool.size(), 15, 2);
    const MlpModel g = trained_model(pool, part.labeled, 3, 0.0);
    StrategyParams params;
    params.passes_t = 1;
    const QueryBatch one = query_mcfps(QueryContext{pool, part, &g, 8, params, 4});
    params.passes_t = 100;
    const QueryBatch many = query_mcfps(QueryContext{pool, part, &g, 8, params, 4});
    EXPECT_EQ(one.picks, many.picks);
    EXPECT_EQ(one.skipped, many.skipped);
}

TEST(Strategies, EveryStrategyYieldsValidDeterministicBatches)
{
    const EmbeddingPool pool = blobs(3, 40, 5, 2.0, 12);
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        const PoolPartition part = with_labels(pool.size(), 10 + 5 * trial, trial);
        const MlpModel g = trained_model(pool, part.labeled, trial);
        for (StrategyId id : all_strategies()) {
            const QueryContext ctx{pool, part, &g, 12, {}, trial};
            auto a = make_strategy(id);
            auto b = make_strategy(id);
            EXPECT_EQ(a->id(), id);
            const QueryBatch x = a->query(ctx);
            const QueryBatch y = b->query(ctx);
            expect_valid_batch(x, part, 12);
            EXPECT_EQ(x.picks, y.picks);
            EXPECT_EQ(x.skipped, y.skipped);
            EXPECT_EQ(a->osal_state() != nullptr, id == StrategyId::Osal);
        }
    }
}

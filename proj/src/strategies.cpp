#include "albench/strategies.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <string>

#include "albench/errors.hpp"
#include "albench/geometry.hpp"
#include "albench/rng.hpp"

namespace albench {

namespace {

constexpr std::array<std::pair<StrategyId, std::string_view>, 4> kNames{{
    {StrategyId::Random, "random"},
    {StrategyId::Fps, "fps"},
    {StrategyId::Osal, "osal"},
    {StrategyId::Mcfps, "mcfps"},
}};

void push_plain(QueryBatch& batch, std::size_t index, int group = -1)
{
    batch.picks.push_back(index);
    batch.diagnostics.push_back(PickDiagnostic{index, index, group, 0.0, 0.0});
}

class RandomStrategy final : public QueryStrategy {
public:
    StrategyId id() const noexcept override { return StrategyId::Random; }
    QueryBatch query(const QueryContext& ctx) override { return query_random(ctx); }
};

class FpsStrategy final : public QueryStrategy {
public:
    StrategyId id() const noexcept override { return StrategyId::Fps; }
    QueryBatch query(const QueryContext& ctx) override { return query_fps(ctx); }
};

class OsalStrategy final : public QueryStrategy {
public:
    StrategyId id() const noexcept override { return StrategyId::Osal; }
    QueryBatch query(const QueryContext& ctx) override { return query_osal(ctx, state_); }
    const OsalState* osal_state() const noexcept override { return &state_; }

private:
    OsalState state_;
};

class McfpsStrategy final : public QueryStrategy {
public:
    StrategyId id() const noexcept override { return StrategyId::Mcfps; }
    QueryBatch query(const QueryContext& ctx) override { return query_mcfps(ctx); }
};

} // namespace

std::string_view strategy_name(StrategyId id) noexcept
{
    for (const auto& [value, name] : kNames)
        if (value == id)
            return name;
    return "unknown";
}

std::optional<StrategyId> parse_strategy(std::string_view name) noexcept
{
    for (const auto& [value, known] : kNames)
        if (known == name)
            return value;
    return std::nullopt;
}

std::vector<StrategyId> all_strategies()
{
    std::vector<StrategyId> out;
    for (const auto& entry : kNames)
        out.push_back(entry.first);
    return out;
}

void StrategyParams::validate() const
{
    if (passes_t < 1)
        throw ValidationError("passes_t must be >= 1");
    if (!(skip_threshold > 0.0 && skip_threshold <= 1.0))
        throw ValidationError("skip threshold must lie in (0, 1]");
    if (osal_k_min < 2 || osal_k_min > osal_k_max)
        throw ValidationError("OSAL k range must satisfy 2 <= k_min <= k_max");
}

void QueryContext::validate() const
{
    params.validate();
    if (budget < 1)
        throw ValidationError("query budget must be >= 1");
    if (budget > partition.unlabeled.size())
        throw ValidationError("query budget " + std::to_string(budget) + " exceeds the " +
                              std::to_string(partition.unlabeled.size()) + " unlabeled samples");
}

QueryBatch query_random(const QueryContext& ctx)
{
    ctx.validate();
    IndexList pool = ctx.partition.unlabeled;
    Rng rng(derive_seed(ctx.round_seed, "random"));
    shuffle_prefix(std::span<std::size_t>(pool), ctx.budget, rng);
    QueryBatch batch;
    for (std::size_t i = 0; i < ctx.budget; ++i)
        push_plain(batch, pool[i]);
    return batch;
}

QueryBatch query_fps(const QueryContext& ctx)
{
    ctx.validate();
    FarthestPointSampler sampler(ctx.pool.features, ctx.partition.unlabeled);
    for (std::size_t a : ctx.partition.labeled)
        sampler.add_anchor(a);
    QueryBatch batch;
    while (batch.picks.size() < ctx.budget)
        push_plain(batch, *sampler.next());
    return batch;
}

std::vector<std::size_t> allocate_budget(std::size_t budget, std::span<const std::size_t> available)
{
    const std::size_t k = available.size();
    std::vector<std::size_t> alloc(k, 0);
    if (k == 0)
        return alloc;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t share = budget / k + (c < budget % k ? 1 : 0);
        alloc[c] = std::min(share, available[c]);
        assigned += alloc[c];
    }
    std::size_t leftover = budget - assigned;
    bool progress = true;
    while (leftover > 0 && progress) {
        progress = false;
        for (std::size_t c = 0; c < k && leftover > 0; ++c) {
            if (alloc[c] < available[c]) {
                ++alloc[c];
                --leftover;
                progress = true;
            }
        }
    }
    return alloc;
}

QueryBatch query_osal(const QueryContext& ctx, OsalState& state)
{
    ctx.validate();
    const auto& part = ctx.partition;

    if (!state.initialized) {
        IndexList train_rows = part.labeled;
        train_rows.insert(train_rows.end(), part.unlabeled.begin(), part.unlabeled.end());
        std::sort(train_rows.begin(), train_rows.end());
        const EmbeddingPool space = subset_pool(ctx.pool, train_rows);
        const int k_max = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(ctx.params.osal_k_max),
                                                                 train_rows.size()));
        if (k_max < ctx.params.osal_k_min)
            throw ValidationError("OSAL needs at least k_min samples to cluster");
        const SilhouetteSearch search = choose_k_by_silhouette(
            space.features, ctx.params.osal_k_min, k_max, derive_seed(ctx.round_seed, "osal-cluster"),
            ctx.params.osal_silhouette_sample);
        state.k = search.best_k;
        state.silhouette_scores = search.scores;
        state.cluster_of.assign(ctx.pool.size(), -1);
        for (std::size_t r = 0; r < train_rows.size(); ++r)
            state.cluster_of[train_rows[r]] = search.clustering.assignment[r];
        state.initialized = true;
    }

    const auto k = static_cast<std::size_t>(state.k);
    std::vector<IndexList> unlabeled_in(k), labeled_in(k);
    for (std::size_t i : part.unlabeled) {
        const int c = state.cluster_of.at(i);
        if (c < 0)
            throw ValidationError("OSAL: unlabeled row outside the clustered space");
        unlabeled_in[static_cast<std::size_t>(c)].push_back(i);
    }
    for (std::size_t i : part.labeled) {
        const int c = state.cluster_of.at(i);
        if (c >= 0)
            labeled_in[static_cast<std::size_t>(c)].push_back(i);
    }

    std::vector<std::size_t> available(k);
    for (std::size_t c = 0; c < k; ++c)
        available[c] = unlabeled_in[c].size();
    const auto alloc = allocate_budget(ctx.budget, available);

    QueryBatch batch;
    for (std::size_t c = 0; c < k; ++c) {
        if (alloc[c] == 0)
            continue;
        // Earlier picks in this cluster act as the initial FPS set.
        FarthestPointSampler sampler(ctx.pool.features, unlabeled_in[c]);
        for (std::size_t a : labeled_in[c])
            sampler.add_anchor(a);
        for (std::size_t n = 0; n < alloc[c]; ++n)
            push_plain(batch, *sampler.next(), static_cast<int>(c));
    }
    return batch;
}

std::uint64_t mcfps_member_seed(std::uint64_t round_seed, std::size_t index) noexcept
{
    return derive_seed(round_seed, "mcfps-member", static_cast<std::uint64_t>(index));
}

QueryBatch query_mcfps(const QueryContext& ctx)
{
    ctx.validate();
    if (ctx.model == nullptr)
        throw ValidationError("MCFPS needs an uncertainty model");
    const auto& part = ctx.partition;
    const auto& params = ctx.params;

    FarthestPointSampler sampler(ctx.pool.features, part.unlabeled);
    for (std::size_t a : part.labeled)
        sampler.add_anchor(a);

    QueryBatch batch;
    std::vector<char> picked(ctx.pool.size(), 0);
    std::size_t seeds_used = 0;
    while (batch.picks.size() < ctx.budget) {
        if (!params.refill_on_skip && seeds_used == ctx.budget)
            break;
        const auto seed = sampler.next();
        if (!seed)
            break;
        ++seeds_used;

        std::vector<std::size_t> members{*seed};
        if (params.neighborhood_k > 0) {
            const NeighborList nb = knn(ctx.pool.features, part.unlabeled, *seed, params.neighborhood_k);
            members.insert(members.end(), nb.indices.begin(), nb.indices.end());
        }
        std::sort(members.begin(), members.end());

        bool any_available = false;
        bool all_confident = true;
        std::size_t best = 0;
        UncertaintyMatrix best_u;
        for (std::size_t m : members) {
            if (picked[m])
                continue;
            const UncertaintyMatrix u = mc_dropout(*ctx.model, ctx.pool.features.row(static_cast<Eigen::Index>(m)),
                                                   params.passes_t, mcfps_member_seed(ctx.round_seed, m));
            if (!(u.certainty > params.skip_threshold))
                all_confident = false;
            // members are ascending, so strict > keeps the lowest index on ties.
            if (!any_available || u.uncertainty > best_u.uncertainty) {
                best = m;
                best_u = u;
            }
            any_available = true;
        }
        if (!any_available)
            continue;
        if (all_confident) {
            batch.skipped.push_back(*seed);
            continue;
        }
        picked[best] = 1;
        sampler.exclude(best);
        batch.picks.push_back(best);
        batch.diagnostics.push_back(PickDiagnostic{best, *seed, -1, best_u.certainty, best_u.uncertainty});
    }
    return batch;
}

std::unique_ptr<QueryStrategy> make_strategy(StrategyId id)
{
    switch (id) {
    case StrategyId::Random:
        return std::make_unique<RandomStrategy>();
    case StrategyId::Fps:
        return std::make_unique<FpsStrategy>();
    case StrategyId::Osal:
        return std::make_unique<OsalStrategy>();
    case StrategyId::Mcfps:
        return std::make_unique<McfpsStrategy>();
    }
    throw ValidationError("unknown strategy");
}

} // namespace albench

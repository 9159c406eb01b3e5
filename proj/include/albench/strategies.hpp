#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "albench/classifier.hpp"
#include "albench/dataset.hpp"

namespace albench {

enum class StrategyId { Random, Fps, Osal, Mcfps };

// Stable identifiers: "random", "fps", "osal", "mcfps".
std::string_view strategy_name(StrategyId id) noexcept;
std::optional<StrategyId> parse_strategy(std::string_view name) noexcept;
std::vector<StrategyId> all_strategies();

struct StrategyParams {
    std::size_t neighborhood_k = 10;  // MCFPS neighbors per FPS seed
    int passes_t = 20;                // MC-dropout forward passes
    double skip_threshold = 0.8;      // skip a neighborhood when every member's certainty exceeds this
    bool refill_on_skip = false;      // draw extra FPS seeds to replace skipped neighborhoods
    int osal_k_min = 2;
    int osal_k_max = 10;
    std::size_t osal_silhouette_sample = 4000;  // 0 scores every row

    void validate() const;
};

struct QueryContext {
    const EmbeddingPool& pool;
    const PoolPartition& partition;
    const MlpModel* model = nullptr;  // uncertainty model g; required by MCFPS only
    std::size_t budget = 0;
    StrategyParams params;
    std::uint64_t round_seed = 0;

    void validate() const;
};

struct PickDiagnostic {
    std::size_t index = 0;
    std::size_t seed_index = 0;  // FPS seed the pick came from (itself for non-MCFPS picks)
    int group = -1;              // OSAL cluster, -1 elsewhere
    double certainty = 0.0;      // MCFPS only
    double uncertainty = 0.0;
};

struct QueryBatch {
    IndexList picks;                       // in selection order
    std::vector<PickDiagnostic> diagnostics;  // parallel to picks
    IndexList skipped;                     // FPS seeds whose neighborhood was skipped
};

QueryBatch query_random(const QueryContext& ctx);

// FPS over the unlabeled set; min-distances start against the labeled set.
QueryBatch query_fps(const QueryContext& ctx);

// Clustering OSAL keeps between rounds; filled on first use.
struct OsalState {
    bool initialized = false;
    int k = 0;
    std::vector<int> cluster_of;  // per pool row; -1 for rows outside labeled + unlabeled
    std::vector<std::pair<int, double>> silhouette_scores;
};

// Budget split as evenly as possible across the clusters, with shares a
// cluster cannot fill passed round-robin to the others.
std::vector<std::size_t> allocate_budget(std::size_t budget, std::span<const std::size_t> available);

QueryBatch query_osal(const QueryContext& ctx, OsalState& state);

// FPS seeds, then for each seed the most MC-dropout-uncertain member of
// {seed} + its k nearest unlabeled neighbors; neighborhoods whose members are
// all more certain than the threshold are skipped.
QueryBatch query_mcfps(const QueryContext& ctx);

// Per-member MC-dropout seed; depends only on the round and the pool row.
std::uint64_t mcfps_member_seed(std::uint64_t round_seed, std::size_t index) noexcept;

// A strategy together with whatever it carries across rounds.
class QueryStrategy {
public:
    virtual ~QueryStrategy() = default;
    virtual StrategyId id() const noexcept = 0;
    virtual QueryBatch query(const QueryContext& ctx) = 0;
    // Cached clustering for OSAL; nullptr for every other strategy.
    virtual const OsalState* osal_state() const noexcept { return nullptr; }
};

std::unique_ptr<QueryStrategy> make_strategy(StrategyId id);

} // namespace albench

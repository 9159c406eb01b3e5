#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "albench/classifier.hpp"
#include "albench/dataset.hpp"
#include "albench/strategies.hpp"

namespace albench {

struct ExperimentConfig {
    StrategyId strategy = StrategyId::Mcfps;
    int rounds_max = 8;
    std::size_t budget_per_round = 64;
    double target_accuracy = 0.90;
    double test_fraction = 0.2;
    MlpConfig mlp;  // input_dim / num_classes / weight_init_seed are filled from the data and seed
    StrategyParams params;
    std::uint64_t master_seed = 0;
    bool warm_start = false;   // continue from last round's model instead of retraining from init
    bool record_time = false;  // when false the elapsed_ms column is written as 0

    void validate() const;
};

struct RoundRow {
    int round = 0;
    std::size_t cumulative_labels = 0;
    double test_accuracy = 0.0;
    std::size_t skipped = 0;
    std::int64_t elapsed_ms = 0;
};

enum class RunStatus { TargetReached, BudgetExhausted };

struct RunRecord {
    StrategyId strategy = StrategyId::Random;
    std::uint64_t seed = 0;
    std::vector<RoundRow> rows;
    RunStatus status = RunStatus::BudgetExhausted;
    std::vector<QueryBatch> queries;  // queries[r] moved labels from round r to round r + 1
    PoolPartition final_partition;
    std::optional<OsalState> osal;    // OSAL clustering, when the strategy is OSAL
};

// Called after every evaluation with the partition as trained on, and the
// batch about to be labeled (nullptr when the run stops at this round).
using RoundObserver = std::function<void(int round, const PoolPartition&, const QueryBatch*)>;

// Iterative loop: train g on the labeled set, evaluate on the fixed test set,
// stop at the target or after rounds_max queries, otherwise query, label the
// picks from ground truth and repeat. Round 0 is the untrained model.
RunRecord run_experiment(const ExperimentConfig& cfg, const EmbeddingPool& pool, const RoundObserver& observer = {});

// Smallest cumulative label count whose accuracy reached `target`.
std::optional<std::size_t> labels_to_target(const RunRecord& run, double target);

// Same split run_experiment uses for a given master seed.
PoolPartition experiment_split(const EmbeddingPool& pool, double test_fraction, std::uint64_t master_seed);

struct AggregateRow {
    StrategyId strategy = StrategyId::Random;
    int round = 0;
    double mean_acc = 0.0;
    double min_acc = 0.0;
    double max_acc = 0.0;
    std::size_t n_runs = 0;
    double mean_labels = 0.0;  // mean cumulative labels at this round (plot x coordinate)
};

// Per strategy and round, over the runs that recorded that round.
std::vector<AggregateRow> aggregate_runs(std::span<const RunRecord> runs, std::span<const StrategyId> strategies);

struct CompareResult {
    std::vector<RunRecord> runs;  // strategy-major, then seed, in declared order
    std::vector<AggregateRow> aggregate;
};

// Runs every (strategy, seed) pair on up to `jobs` threads. Each run's CSV is
// written to `out_dir`/runs as soon as it finishes; the aggregate CSV,
// labels-to-target CSV and SVG plot follow once the grid completes. The first
// failing run (in grid order) is rethrown after the workers stop.
CompareResult compare(const ExperimentConfig& base, const EmbeddingPool& pool, std::span<const StrategyId> strategies,
                      std::span<const std::uint64_t> seeds, const std::filesystem::path& out_dir, unsigned jobs = 1);

std::filesystem::path run_csv_path(const std::filesystem::path& out_dir, StrategyId strategy, std::uint64_t seed);

// Trains on a stratified `fraction` of the training split and returns the
// test accuracy.
double probe(const EmbeddingPool& pool, double fraction, std::uint64_t seed, const MlpConfig& mlp,
             double test_fraction = 0.2);

// Fills input_dim / num_classes / weight_init_seed of `mlp` for a pool and seed.
MlpConfig bind_mlp(MlpConfig mlp, const EmbeddingPool& pool, std::uint64_t master_seed);

} // namespace albench

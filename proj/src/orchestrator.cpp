#include "albench/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>

#include "albench/errors.hpp"
#include "albench/report.hpp"
#include "albench/rng.hpp"

namespace albench {

namespace {

using Clock = std::chrono::steady_clock;

// Conservation, disjointness and no-leakage of the loop state.
void check_partition(const PoolPartition& part, std::size_t train_size, const IndexList& test)
{
    if (part.labeled.size() + part.unlabeled.size() != train_size)
        throw std::logic_error("labeled + unlabeled no longer equals the initial training pool");
    IndexList lab = part.labeled;
    std::sort(lab.begin(), lab.end());
    if (std::adjacent_find(lab.begin(), lab.end()) != lab.end())
        throw std::logic_error("labeled set holds duplicates");
    for (std::size_t i : part.unlabeled)
        if (std::binary_search(lab.begin(), lab.end(), i))
            throw std::logic_error("labeled and unlabeled sets overlap");
    if (part.test != test)
        throw std::logic_error("test set changed during the run");
    for (std::size_t i : part.test)
        if (std::binary_search(lab.begin(), lab.end(), i))
            throw std::logic_error("test sample leaked into the labeled set");
}

void check_batch(const QueryBatch& batch, const PoolPartition& part, std::size_t budget)
{
    if (batch.picks.size() > budget)
        throw std::logic_error("strategy returned more picks than its budget");
    IndexList sorted = batch.picks;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::logic_error("strategy returned duplicate picks");
    for (std::size_t i : sorted)
        if (!std::binary_search(part.unlabeled.begin(), part.unlabeled.end(), i))
            throw std::logic_error("strategy picked a sample outside the unlabeled set");
}

void label_picks(PoolPartition& part, const IndexList& picks)
{
    IndexList sorted = picks;
    std::sort(sorted.begin(), sorted.end());
    IndexList remaining;
    remaining.reserve(part.unlabeled.size() - sorted.size());
    std::set_difference(part.unlabeled.begin(), part.unlabeled.end(), sorted.begin(), sorted.end(),
                        std::back_inserter(remaining));
    part.unlabeled = std::move(remaining);
    IndexList labeled;
    labeled.reserve(part.labeled.size() + sorted.size());
    std::merge(part.labeled.begin(), part.labeled.end(), sorted.begin(), sorted.end(), std::back_inserter(labeled));
    part.labeled = std::move(labeled);
}

} // namespace

void ExperimentConfig::validate() const
{
    if (rounds_max < 1)
        throw ValidationError("rounds_max must be >= 1");
    if (budget_per_round < 1)
        throw ValidationError("budget per round must be >= 1");
    if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0))
        throw ValidationError("target accuracy must lie in [0, 1]");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValidationError("test fraction must lie in (0, 1)");
    params.validate();
}

MlpConfig bind_mlp(MlpConfig mlp, const EmbeddingPool& pool, std::uint64_t master_seed)
{
    mlp.input_dim = pool.dim();
    mlp.num_classes = pool.num_classes;
    mlp.weight_init_seed = derive_seed(master_seed, "g-init");
    mlp.validate();
    return mlp;
}

PoolPartition experiment_split(const EmbeddingPool& pool, double test_fraction, std::uint64_t master_seed)
{
    return split_pool(pool, test_fraction, derive_seed(master_seed, "split"));
}

RunRecord run_experiment(const ExperimentConfig& cfg, const EmbeddingPool& pool, const RoundObserver& observer)
{
    cfg.validate();
    pool.validate();
    if (!pool.has_labels())
        throw ValidationError("experiments need a labeled pool (labels act as the annotator)");

    RunRecord record;
    record.strategy = cfg.strategy;
    record.seed = cfg.master_seed;

    PoolPartition part = experiment_split(pool, cfg.test_fraction, cfg.master_seed);
    const std::size_t train_size = part.unlabeled.size();
    const IndexList test = part.test;
    const MlpModel initial = MlpModel::initialize(bind_mlp(cfg.mlp, pool, cfg.master_seed));
    MlpModel model = initial;
    auto strategy = make_strategy(cfg.strategy);

    std::size_t skipped_last = 0;
    for (int round = 0;; ++round) {
        const auto started = Clock::now();
        if (round > 0 && !part.labeled.empty())
            model = train(cfg.warm_start ? model : initial, pool, part.labeled,
                          derive_seed(cfg.master_seed, "train", static_cast<std::uint64_t>(round)));
        const double accuracy = evaluate_accuracy(model, pool, part.test);
        check_partition(part, train_size, test);

        RoundRow row{round, part.labeled.size(), accuracy, skipped_last, 0};
        const bool reached = accuracy >= cfg.target_accuracy;
        const bool exhausted = round == cfg.rounds_max || part.unlabeled.empty();
        if (reached || exhausted) {
            record.status = reached ? RunStatus::TargetReached : RunStatus::BudgetExhausted;
            if (observer)
                observer(round, part, nullptr);
            if (cfg.record_time)
                row.elapsed_ms =
                    std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();
            record.rows.push_back(row);
            break;
        }

        const std::size_t budget = std::min(cfg.budget_per_round, part.unlabeled.size());
        const QueryContext ctx{pool, part, &model, budget, cfg.params,
                               derive_seed(cfg.master_seed, "query", static_cast<std::uint64_t>(round))};
        QueryBatch batch = strategy->query(ctx);
        check_batch(batch, part, budget);
        if (observer)
            observer(round, part, &batch);
        if (cfg.record_time)
            row.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();
        record.rows.push_back(row);

        label_picks(part, batch.picks);
        skipped_last = batch.skipped.size();
        record.queries.push_back(std::move(batch));
    }
    record.final_partition = std::move(part);
    if (const OsalState* state = strategy->osal_state())
        record.osal = *state;
    return record;
}

std::optional<std::size_t> labels_to_target(const RunRecord& run, double target)
{
    for (const RoundRow& row : run.rows)
        if (row.test_accuracy >= target)
            return row.cumulative_labels;
    return std::nullopt;
}

std::vector<AggregateRow> aggregate_runs(std::span<const RunRecord> runs, std::span<const StrategyId> strategies)
{
    std::vector<AggregateRow> out;
    for (StrategyId s : strategies) {
        int max_round = -1;
        for (const RunRecord& run : runs)
            if (run.strategy == s && !run.rows.empty())
                max_round = std::max(max_round, run.rows.back().round);
        for (int r = 0; r <= max_round; ++r) {
            AggregateRow row;
            row.strategy = s;
            row.round = r;
            row.min_acc = std::numeric_limits<double>::infinity();
            row.max_acc = -std::numeric_limits<double>::infinity();
            double acc_sum = 0.0, label_sum = 0.0;
            for (const RunRecord& run : runs) {
                if (run.strategy != s)
                    continue;
                for (const RoundRow& rr : run.rows) {
                    if (rr.round != r)
                        continue;
                    acc_sum += rr.test_accuracy;
                    label_sum += static_cast<double>(rr.cumulative_labels);
                    row.min_acc = std::min(row.min_acc, rr.test_accuracy);
                    row.max_acc = std::max(row.max_acc, rr.test_accuracy);
                    ++row.n_runs;
                }
            }
            if (row.n_runs == 0)
                continue;
            row.mean_acc = acc_sum / static_cast<double>(row.n_runs);
            row.mean_labels = label_sum / static_cast<double>(row.n_runs);
            out.push_back(row);
        }
    }
    return out;
}

std::filesystem::path run_csv_path(const std::filesystem::path& out_dir, StrategyId strategy, std::uint64_t seed)
{
    return out_dir / "runs" / (std::string(strategy_name(strategy)) + "_seed" + std::to_string(seed) + ".csv");
}

CompareResult compare(const ExperimentConfig& base, const EmbeddingPool& pool, std::span<const StrategyId> strategies,
                      std::span<const std::uint64_t> seeds, const std::filesystem::path& out_dir, unsigned jobs)
{
    if (strategies.empty() || seeds.empty())
        throw ValidationError("compare needs at least one strategy and one seed");
    base.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "runs", ec);
    if (ec)
        throw IoError("cannot create " + (out_dir / "runs").string() + ": " + ec.message());

    struct Task {
        StrategyId strategy;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (StrategyId s : strategies)
        for (std::uint64_t seed : seeds)
            tasks.push_back({s, seed});

    std::vector<std::optional<RunRecord>> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};

    auto worker = [&] {
        while (!abort.load()) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size())
                return;
            try {
                ExperimentConfig cfg = base;
                cfg.strategy = tasks[t].strategy;
                cfg.master_seed = tasks[t].seed;
                RunRecord run = run_experiment(cfg, pool);
                write_text(run_csv_path(out_dir, run.strategy, run.seed), run_csv(run));
                results[t] = std::move(run);
            } catch (...) {
                errors[t] = std::current_exception();
                abort.store(true);
            }
        }
    };

    const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (unsigned i = 0; i < n_threads; ++i)
            threads.emplace_back(worker);
        for (auto& th : threads)
            th.join();
    }
    for (const auto& err : errors)
        if (err)
            std::rethrow_exception(err);

    CompareResult out;
    for (auto& r : results)
        out.runs.push_back(std::move(*r));
    out.aggregate = aggregate_runs(out.runs, strategies);
    write_text(out_dir / "aggregate.csv", aggregate_csv(out.aggregate));
    write_text(out_dir / "labels_to_target.csv", labels_to_target_csv(out.runs, base.target_accuracy));
    write_text(out_dir / "learning_curves.svg", learning_curve_svg(out.aggregate, out.runs, base.target_accuracy));
    return out;
}

double probe(const EmbeddingPool& pool, double fraction, std::uint64_t seed, const MlpConfig& mlp,
             double test_fraction)
{
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ValidationError("probe fraction must lie in (0, 1)");
    pool.validate();
    const PoolPartition part = experiment_split(pool, test_fraction, seed);

    std::map<ClassId, IndexList> by_class;
    for (std::size_t i : part.unlabeled)
        by_class[pool.labels[i]].push_back(i);
    IndexList chosen;
    for (auto& [cls, members] : by_class) {
        const std::size_t take = round_half_up(static_cast<double>(members.size()) * fraction);
        if (take == 0)
            throw ValidationError("probe fraction leaves class " + std::to_string(cls) + " without samples");
        Rng rng(derive_seed(seed, "probe", static_cast<std::uint64_t>(cls)));
        shuffle_prefix(std::span<std::size_t>(members), take, rng);
        chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(chosen.begin(), chosen.end());
    const MlpModel model =
        train(MlpModel::initialize(bind_mlp(mlp, pool, seed)), pool, chosen, derive_seed(seed, "probe-train"));
    return evaluate_accuracy(model, pool, part.test);
}

} // namespace albench

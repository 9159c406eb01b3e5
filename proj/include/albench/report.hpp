#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "albench/orchestrator.hpp"

namespace albench {

// strategy,seed,round,cumulative_labels,test_accuracy,skipped,elapsed_ms
std::string run_csv(const RunRecord& run);

// strategy,round,mean_acc,min_acc,max_acc,n_runs
std::string aggregate_csv(std::span<const AggregateRow> rows);

// strategy,seed,labels_to_target,reached
std::string labels_to_target_csv(std::span<const RunRecord> runs, double target);

// cluster,class,count over every OSAL pick of a run.
std::string osal_histogram_csv(const RunRecord& run, const EmbeddingPool& pool);

// round,index,seed_index,group,certainty,uncertainty,label
std::string picks_csv(const RunRecord& run, const EmbeddingPool& pool);

// Learning curves: mean polyline and min/max band per strategy, dashed target
// line, dashed vertical line at each strategy's mean labels-to-target.
std::string learning_curve_svg(std::span<const AggregateRow> rows, std::span<const RunRecord> runs, double target);

void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace albench

#include "albench/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>

#include "albench/errors.hpp"

namespace albench {

namespace {

std::string fixed(double v, int precision = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace

std::string run_csv(const RunRecord& run)
{
    std::string out = "strategy,seed,round,cumulative_labels,test_accuracy,skipped,elapsed_ms\n";
    const std::string prefix = std::string(strategy_name(run.strategy)) + "," + std::to_string(run.seed) + ",";
    for (const RoundRow& r : run.rows)
        out += prefix + std::to_string(r.round) + "," + std::to_string(r.cumulative_labels) + "," +
               fixed(r.test_accuracy) + "," + std::to_string(r.skipped) + "," + std::to_string(r.elapsed_ms) + "\n";
    return out;
}

std::string aggregate_csv(std::span<const AggregateRow> rows)
{
    std::string out = "strategy,round,mean_acc,min_acc,max_acc,n_runs\n";
    for (const AggregateRow& r : rows)
        out += std::string(strategy_name(r.strategy)) + "," + std::to_string(r.round) + "," + fixed(r.mean_acc) + "," +
               fixed(r.min_acc) + "," + fixed(r.max_acc) + "," + std::to_string(r.n_runs) + "\n";
    return out;
}

std::string labels_to_target_csv(std::span<const RunRecord> runs, double target)
{
    std::string out = "strategy,seed,labels_to_target,reached\n";
    for (const RunRecord& run : runs) {
        const auto n = labels_to_target(run, target);
        out += std::string(strategy_name(run.strategy)) + "," + std::to_string(run.seed) + "," +
               (n ? std::to_string(*n) : std::string()) + "," + (n ? "true" : "false") + "\n";
    }
    return out;
}

std::string osal_histogram_csv(const RunRecord& run, const EmbeddingPool& pool)
{
    std::map<std::pair<int, ClassId>, std::size_t> counts;
    for (const QueryBatch& q : run.queries)
        for (const PickDiagnostic& d : q.diagnostics)
            ++counts[{d.group, pool.labels.at(d.index)}];
    std::string out = "cluster,class,count\n";
    for (const auto& [key, n] : counts)
        out += std::to_string(key.first) + "," + std::to_string(key.second) + "," + std::to_string(n) + "\n";
    return out;
}

std::string picks_csv(const RunRecord& run, const EmbeddingPool& pool)
{
    std::string out = "round,index,seed_index,group,certainty,uncertainty,label\n";
    for (std::size_t r = 0; r < run.queries.size(); ++r)
        for (const PickDiagnostic& d : run.queries[r].diagnostics)
            out += std::to_string(r) + "," + std::to_string(d.index) + "," + std::to_string(d.seed_index) + "," +
                   std::to_string(d.group) + "," + fixed(d.certainty) + "," + fixed(d.uncertainty) + "," +
                   (pool.has_labels() ? std::to_string(pool.labels.at(d.index)) : std::string()) + "\n";
    return out;
}

std::string learning_curve_svg(std::span<const AggregateRow> rows, std::span<const RunRecord> runs, double target)
{
    constexpr double W = 720, H = 440, left = 60, right = 160, top = 20, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;

    double x_max = 1.0;
    for (const AggregateRow& r : rows)
        x_max = std::max(x_max, r.mean_labels);
    auto sx = [&](double x) { return fixed(left + pw * x / x_max, 2); };
    auto sy = [&](double y) { return fixed(top + ph * (1.0 - std::clamp(y, 0.0, 1.0)), 2); };

    std::vector<StrategyId> order;
    for (const AggregateRow& r : rows)
        if (std::find(order.begin(), order.end(), r.strategy) == order.end())
            order.push_back(r.strategy);

    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(W, 0) + "\" height=\"" + fixed(H, 0) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<line x1=\"" + sx(0) + "\" y1=\"" + sy(0) + "\" x2=\"" + sx(x_max) + "\" y2=\"" + sy(0) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + sx(0) + "\" y1=\"" + sy(0) + "\" x2=\"" + sx(0) + "\" y2=\"" + sy(1) +
         "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double y = t / 5.0;
        s += "<text x=\"" + fixed(left - 8, 2) + "\" y=\"" + sy(y) + "\" text-anchor=\"end\">" + fixed(y, 1) +
             "</text>\n";
        const double x = x_max * t / 5.0;
        s += "<text x=\"" + sx(x) + "\" y=\"" + fixed(top + ph + 18, 2) + "\" text-anchor=\"middle\">" +
             fixed(x, 0) + "</text>\n";
    }
    s += "<text x=\"" + fixed(left + pw / 2, 2) + "\" y=\"" + fixed(H - 10, 2) +
         "\" text-anchor=\"middle\">labeled samples</text>\n";
    s += "<text x=\"15\" y=\"" + fixed(top + ph / 2, 2) + "\" transform=\"rotate(-90 15 " + fixed(top + ph / 2, 2) +
         ")\" text-anchor=\"middle\">test accuracy</text>\n";
    s += "<line x1=\"" + sx(0) + "\" y1=\"" + sy(target) + "\" x2=\"" + sx(x_max) + "\" y2=\"" + sy(target) +
         "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";

    for (std::size_t k = 0; k < order.size(); ++k) {
        const char* color = kColors[k % kColors.size()];
        std::vector<const AggregateRow*> pts;
        for (const AggregateRow& r : rows)
            if (r.strategy == order[k])
                pts.push_back(&r);

        std::string band, line;
        for (const AggregateRow* p : pts)
            band += sx(p->mean_labels) + "," + sy(p->max_acc) + " ";
        for (auto it = pts.rbegin(); it != pts.rend(); ++it)
            band += sx((*it)->mean_labels) + "," + sy((*it)->min_acc) + " ";
        for (const AggregateRow* p : pts)
            line += sx(p->mean_labels) + "," + sy(p->mean_acc) + " ";
        s += "<polygon points=\"" + band + "\" fill=\"" + color + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";

        double sum = 0.0;
        std::size_t reached = 0;
        for (const RunRecord& run : runs)
            if (run.strategy == order[k])
                if (const auto n = labels_to_target(run, target)) {
                    sum += static_cast<double>(*n);
                    ++reached;
                }
        if (reached > 0) {
            const double x = std::min(sum / static_cast<double>(reached), x_max);
            s += "<line x1=\"" + sx(x) + "\" y1=\"" + sy(0) + "\" x2=\"" + sx(x) + "\" y2=\"" + sy(1) + "\" stroke=\"" +
                 color + "\" stroke-dasharray=\"3,3\"/>\n";
        }
        const std::string ly = fixed(top + 16 + 20.0 * static_cast<double>(k), 2);
        s += "<line x1=\"" + fixed(W - right + 15, 2) + "\" y1=\"" + ly + "\" x2=\"" + fixed(W - right + 40, 2) +
             "\" y2=\"" + ly + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + fixed(W - right + 46, 2) + "\" y=\"" + ly + "\" dominant-baseline=\"middle\">" +
             std::string(strategy_name(order[k])) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("cannot open " + path.string() + " for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f)
        throw IoError("write failed: " + path.string());
}

} // namespace albench

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "albench/classifier.hpp"
#include "albench/contrastive.hpp"
#include "albench/dataset.hpp"
#include "albench/errors.hpp"
#include "albench/orchestrator.hpp"
#include "albench/report.hpp"
#include "albench/strategies.hpp"

using namespace albench;
namespace fs = std::filesystem;

namespace {

std::string strategy_list()
{
    std::string out;
    for (StrategyId s : all_strategies())
        out += (out.empty() ? "" : ", ") + std::string(strategy_name(s));
    return out;
}

StrategyId strategy_or_throw(const std::string& name)
{
    if (auto s = parse_strategy(name))
        return *s;
    throw ValidationError("unknown strategy '" + name + "' (valid: " + strategy_list() + ")");
}

// "1..5" or "1,2,7"
std::vector<std::uint64_t> parse_seeds(const std::string& text)
{
    std::vector<std::uint64_t> out;
    try {
        if (const auto dots = text.find(".."); dots != std::string::npos) {
            const std::uint64_t lo = std::stoull(text.substr(0, dots));
            const std::uint64_t hi = std::stoull(text.substr(dots + 2));
            if (hi < lo)
                throw ValidationError("empty seed range " + text);
            for (std::uint64_t s = lo; s <= hi; ++s)
                out.push_back(s);
            return out;
        }
        std::size_t start = 0;
        while (start <= text.size()) {
            const auto comma = text.find(',', start);
            const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!item.empty())
                out.push_back(std::stoull(item));
            if (comma == std::string::npos)
                break;
            start = comma + 1;
        }
    } catch (const std::logic_error&) {
        throw ValidationError("cannot parse seeds '" + text + "'");
    }
    if (out.empty())
        throw ValidationError("no seeds given");
    return out;
}

void write_meta(const fs::path& out, nlohmann::json meta, const EmbeddingPool& pool)
{
    meta["n"] = pool.size();
    meta["dim"] = pool.dim();
    meta["num_classes"] = pool.num_classes;
    if (pool.has_labels())
        meta["class_counts"] = pool.class_counts();
    write_text(fs::path(out.string() + ".meta.json"), meta.dump(2) + "\n");
}

void print_summary(const fs::path& out, const EmbeddingPool& pool)
{
    std::printf("%s: n=%zu dim=%zu classes=%d\n", out.string().c_str(), pool.size(), pool.dim(), pool.num_classes);
}

struct ExperimentFlags {
    ExperimentConfig cfg;
    std::vector<std::size_t> hidden{128};
};

void add_experiment_flags(CLI::App* app, ExperimentFlags& f)
{
    auto& c = f.cfg;
    app->add_option("--rounds", c.rounds_max, "Maximum query rounds")->check(CLI::PositiveNumber);
    app->add_option("--budget", c.budget_per_round, "Samples labeled per round")->check(CLI::PositiveNumber);
    app->add_option("--target", c.target_accuracy, "Stop once test accuracy reaches this")->check(CLI::Range(0.0, 1.0));
    app->add_option("--test-fraction", c.test_fraction, "Stratified held-out test fraction");
    app->add_option("--skip-threshold", c.params.skip_threshold,
                    "MCFPS: skip a neighborhood when every member's certainty exceeds this");
    app->add_option("--k", c.params.neighborhood_k, "MCFPS: neighbors per FPS seed");
    app->add_option("--passes", c.params.passes_t, "MCFPS: MC-dropout forward passes");
    app->add_flag("--refill-on-skip", c.params.refill_on_skip,
                  "MCFPS: draw further FPS seeds when a neighborhood is skipped");
    app->add_option("--osal-k-min", c.params.osal_k_min, "OSAL: smallest k tried");
    app->add_option("--osal-k-max", c.params.osal_k_max, "OSAL: largest k tried");
    app->add_option("--osal-silhouette-sample", c.params.osal_silhouette_sample,
                    "OSAL: rows used to score silhouettes (0 = all)");
    app->add_option("--dropout", c.mlp.dropout_rate, "Classifier dropout rate");
    app->add_option("--hidden", f.hidden, "Classifier hidden widths")->delimiter(',');
    app->add_option("--lr", c.mlp.learning_rate, "Classifier SGD learning rate");
    app->add_option("--epochs", c.mlp.epochs, "Classifier epochs per round");
    app->add_option("--batch-size", c.mlp.batch_size, "Classifier minibatch size");
    app->add_flag("--warm-start", c.warm_start, "Continue from the previous round's weights");
    app->add_flag("--record-time", c.record_time, "Fill elapsed_ms (otherwise written as 0)");
}

ExperimentConfig finish(ExperimentFlags& f)
{
    f.cfg.mlp.hidden_dims = f.hidden;
    return f.cfg;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Active-learning benchmark toolkit"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::uint64_t seed = 0;
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Master seed")->envname("ALBENCH_SEED");
    };

    // gen
    SyntheticSpec spec;
    fs::path gen_out;
    bool gen_meta = false;
    auto* gen = app.add_subcommand("gen", "Write a synthetic Gaussian-blob pool");
    gen->add_option("--classes", spec.classes, "Number of classes");
    gen->add_option("--per-class", spec.per_class, "Samples per class");
    gen->add_option("--dim", spec.dim, "Feature dimension");
    gen->add_option("--spread", spec.spread, "Per-coordinate standard deviation");
    gen->add_option("--separation", spec.separation, "Distance between class centers");
    gen->add_option("--out", gen_out, "Output AEMB file")->required();
    gen->add_flag("--meta", gen_meta, "Also write <out>.meta.json");
    add_seed(gen);

    // imbalance
    fs::path imb_data, imb_out;
    std::vector<double> retention;
    bool imb_meta = false;
    auto* imb = app.add_subcommand("imbalance", "Subsample classes by per-class retention");
    imb->add_option("--data", imb_data, "Input AEMB file")->required();
    imb->add_option("--retention", retention, "Per-class retention fractions")->delimiter(',')->required();
    imb->add_option("--out", imb_out, "Output AEMB file")->required();
    imb->add_flag("--meta", imb_meta, "Also write <out>.meta.json");
    add_seed(imb);

    // run
    ExperimentFlags run_flags;
    fs::path run_data, run_out, picks_out, clusters_out;
    std::string run_strategy = "mcfps";
    auto* run = app.add_subcommand("run", "One active-learning run");
    run->add_option("--data", run_data, "Input AEMB file")->required();
    run->add_option("--strategy", run_strategy, "Query strategy: " + strategy_list());
    run->add_option("--out", run_out, "Per-round CSV")->required();
    run->add_option("--picks-out", picks_out, "Optional CSV of every pick with its diagnostics");
    run->add_option("--clusters-out", clusters_out, "Optional cluster/class histogram of the picks");
    add_experiment_flags(run, run_flags);
    add_seed(run);

    // compare
    ExperimentFlags cmp_flags;
    fs::path cmp_data, cmp_out;
    std::string cmp_strategies = "random,fps,osal,mcfps", cmp_seeds = "1..5";
    unsigned jobs = 1;
    auto* cmp = app.add_subcommand("compare", "Strategy x seed grid with aggregate CSVs and an SVG plot");
    cmp->add_option("--data", cmp_data, "Input AEMB file")->required();
    cmp->add_option("--strategies", cmp_strategies, "Comma-separated strategy ids");
    cmp->add_option("--seeds", cmp_seeds, "Seed range lo..hi or comma-separated list");
    cmp->add_option("--out-dir", cmp_out, "Output directory")->required();
    cmp->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
    add_experiment_flags(cmp, cmp_flags);
    add_seed(cmp);

    // probe
    fs::path probe_data;
    std::vector<double> fractions{0.02, 0.05, 0.10};
    double probe_test = 0.2;
    MlpConfig probe_mlp;
    auto* prb = app.add_subcommand("probe", "Test accuracy of a classifier trained on random stratified fractions");
    prb->add_option("--data", probe_data, "Input AEMB file")->required();
    prb->add_option("--fractions", fractions, "Training fractions")->delimiter(',');
    prb->add_option("--test-fraction", probe_test, "Stratified held-out test fraction");
    prb->add_option("--hidden", probe_mlp.hidden_dims, "Classifier hidden widths")->delimiter(',');
    prb->add_option("--dropout", probe_mlp.dropout_rate, "Classifier dropout rate");
    prb->add_option("--lr", probe_mlp.learning_rate, "Classifier SGD learning rate");
    prb->add_option("--epochs", probe_mlp.epochs, "Classifier epochs");
    prb->add_option("--batch-size", probe_mlp.batch_size, "Classifier minibatch size");
    add_seed(prb);

    // ssl-toy
    fs::path ssl_data, ssl_out;
    EncoderConfig enc;
    bool ssl_meta = false;
    auto* ssl = app.add_subcommand("ssl-toy", "Train a small NT-Xent encoder and write the encoded pool");
    ssl->add_option("--data", ssl_data, "Input AEMB file")->required();
    ssl->add_option("--out", ssl_out, "Output AEMB file")->required();
    ssl->add_option("--tau", enc.loss.temperature, "NT-Xent temperature");
    ssl->add_option("--epochs", enc.epochs, "Training epochs");
    ssl->add_option("--out-dim", enc.out_dim, "Embedding width");
    ssl->add_option("--width", enc.width, "Hidden width");
    ssl->add_option("--batch-size", enc.batch_size, "Anchors per batch");
    ssl->add_option("--lr", enc.learning_rate, "SGD learning rate");
    ssl->add_option("--jitter", enc.jitter, "Augmentation noise standard deviation");
    ssl->add_option("--mask-frac", enc.mask_frac, "Fraction of coordinates zeroed per view");
    ssl->add_flag("--meta", ssl_meta, "Also write <out>.meta.json");
    add_seed(ssl);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << sub->help();
        return 1;
    }

    try {
        if (*gen) {
            spec.seed = seed;
            const EmbeddingPool pool = gen_synthetic(spec);
            save_pool(pool, gen_out);
            if (gen_meta)
                write_meta(gen_out, {{"source", "gen"}, {"seed", seed}, {"spread", spec.spread},
                                     {"separation", spec.separation}}, pool);
            print_summary(gen_out, pool);
        } else if (*imb) {
            const EmbeddingPool pool = apply_imbalance(load_pool(imb_data), retention, seed);
            save_pool(pool, imb_out);
            if (imb_meta)
                write_meta(imb_out, {{"source", imb_data.string()}, {"seed", seed}, {"retention", retention}}, pool);
            print_summary(imb_out, pool);
        } else if (*run) {
            ExperimentConfig cfg = finish(run_flags);
            cfg.strategy = strategy_or_throw(run_strategy);
            cfg.master_seed = seed;
            const EmbeddingPool pool = load_pool(run_data);
            const RunRecord rec = run_experiment(cfg, pool);
            write_text(run_out, run_csv(rec));
            if (!picks_out.empty())
                write_text(picks_out, picks_csv(rec, pool));
            if (!clusters_out.empty())
                write_text(clusters_out, osal_histogram_csv(rec, pool));
            const RoundRow& last = rec.rows.back();
            std::printf("%s seed %llu: %s after %zu labels, accuracy %.4f\n", run_strategy.c_str(),
                        static_cast<unsigned long long>(seed),
                        rec.status == RunStatus::TargetReached ? "target reached" : "budget exhausted",
                        last.cumulative_labels, last.test_accuracy);
        } else if (*cmp) {
            ExperimentConfig cfg = finish(cmp_flags);
            std::vector<StrategyId> strategies;
            std::size_t start = 0;
            while (start <= cmp_strategies.size()) {
                const auto comma = cmp_strategies.find(',', start);
                const std::string item = cmp_strategies.substr(
                    start, comma == std::string::npos ? std::string::npos : comma - start);
                if (!item.empty())
                    strategies.push_back(strategy_or_throw(item));
                if (comma == std::string::npos)
                    break;
                start = comma + 1;
            }
            const auto seeds = parse_seeds(cmp_seeds);
            const EmbeddingPool pool = load_pool(cmp_data);
            const CompareResult res = compare(cfg, pool, strategies, seeds, cmp_out, jobs);
            for (StrategyId s : strategies) {
                double sum = 0.0;
                std::size_t n = 0;
                for (const RunRecord& r : res.runs)
                    if (r.strategy == s) {
                        const auto l = labels_to_target(r, cfg.target_accuracy);
                        sum += l ? static_cast<double>(*l)
                                 : static_cast<double>(cfg.budget_per_round) * cfg.rounds_max + 1.0;
                        ++n;
                    }
                std::printf("%s: mean labels-to-target %.1f\n", std::string(strategy_name(s)).c_str(),
                            sum / static_cast<double>(n));
            }
        } else if (*prb) {
            const EmbeddingPool pool = load_pool(probe_data);
            for (double f : fractions) {
                const double acc = probe(pool, f, seed, probe_mlp, probe_test);
                std::printf("%g,%.6f\n", f, acc);
            }
        } else if (*ssl) {
            const EmbeddingPool raw = load_pool(ssl_data);
            const EncoderTraining trained = train_encoder(raw, enc, seed);
            const EmbeddingPool encoded = encode(trained.encoder, raw);
            save_pool(encoded, ssl_out);
            if (ssl_meta)
                write_meta(ssl_out, {{"source", ssl_data.string()}, {"seed", seed}, {"tau", enc.loss.temperature},
                                     {"initial_loss", trained.initial_loss}, {"final_loss", trained.final_loss}},
                           encoded);
            std::printf("nt-xent %.6f -> %.6f\n", trained.initial_loss, trained.final_loss);
            print_summary(ssl_out, encoded);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "toybench/comparison.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <limits>
#include <thread>

#include <json.hpp>

#include "common/error.hpp"
#include "common/format.hpp"
#include "common/svg_plot.hpp"

namespace propcredit::toybench {

using json = nlohmann::ordered_json;

std::vector<double> smoothed_reward(const RunMetrics& run, int window) {
    PROPCREDIT_REQUIRE(window >= 1, "smoothing window must be >= 1");
    std::vector<double> out(run.epochs.size());
    double sum = 0.0;
    for (std::size_t e = 0; e < run.epochs.size(); ++e) {
        sum += run.epochs[e].reward_mean;
        if (e >= static_cast<std::size_t>(window)) sum -= run.epochs[e - static_cast<std::size_t>(window)].reward_mean;
        out[e] = sum / static_cast<double>(std::min<std::size_t>(e + 1, static_cast<std::size_t>(window)));
    }
    return out;
}

std::optional<int> epochs_to_threshold(const RunMetrics& run, double threshold, int window) {
    const auto smooth = smoothed_reward(run, window);
    for (std::size_t e = 0; e < smooth.size(); ++e) {
        if (smooth[e] >= threshold) return static_cast<int>(e);
    }
    return std::nullopt;
}

double median(std::vector<double> values) {
    PROPCREDIT_REQUIRE(!values.empty(), "median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

double window_mean(const RunMetrics& run, int window) {
    const std::size_t n = std::min(run.epochs.size(), static_cast<std::size_t>(window));
    double s = 0.0;
    for (std::size_t i = run.epochs.size() - n; i < run.epochs.size(); ++i) s += run.epochs[i].reward_mean;
    return s / static_cast<double>(n);
}

const char* family_name(sampler::SamplerKind k) { return k == sampler::SamplerKind::Flow ? "flow" : "diffusion"; }

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

/// Per-variant mean over seeds of a per-epoch quantity.
template <class Get>
LinePlot mean_trace_plot(const std::vector<RunMetrics>& runs, const std::string& title, const std::string& y_label,
                         Get&& get) {
    LinePlot plot{title, "epoch", y_label, {}, false};
    std::vector<std::string> order;
    std::map<std::string, std::vector<const RunMetrics*>> by_variant;
    for (const auto& r : runs) {
        if (!by_variant.contains(r.variant)) order.push_back(r.variant);
        by_variant[r.variant].push_back(&r);
    }
    for (std::size_t v = 0; v < order.size(); ++v) {
        const auto& group = by_variant[order[v]];
        std::size_t len = group.front()->epochs.size();
        for (const auto* r : group) len = std::min(len, r->epochs.size());
        PlotSeries s{order[v], {}, {}, kPalette[v % std::size(kPalette)]};
        for (std::size_t e = 0; e < len; ++e) {
            double acc = 0.0;
            for (const auto* r : group) acc += get(*r, e);
            s.x.push_back(static_cast<double>(e));
            s.y.push_back(acc / static_cast<double>(group.size()));
        }
        plot.series.push_back(std::move(s));
    }
    return plot;
}

}  // namespace

ComparisonResult run_comparison(const ToyDataset& dataset, const BasePolicies& bases, const DiffusionSetup& diffusion,
                                const FlowSetup& flow, const ComparisonConfig& config) {
    PROPCREDIT_REQUIRE(!config.variants.empty(), "comparison needs at least one variant");
    PROPCREDIT_REQUIRE(!config.seeds.empty(), "comparison needs at least one seed");
    PROPCREDIT_REQUIRE(config.epochs >= 1, "comparison needs at least one epoch");
    PROPCREDIT_REQUIRE(config.smoothing_window >= 1 && config.plateau_window >= 1, "windows must be >= 1");
    PROPCREDIT_REQUIRE(config.threads >= 1, "threads must be >= 1");
    for (const auto& v : config.variants) {
        const auto* base = v.sampler == sampler::SamplerKind::Flow ? bases.flow : bases.diffusion;
        PROPCREDIT_REQUIRE(base != nullptr, std::string("no base policy for the ") + family_name(v.sampler) + " sampler");
    }

    const std::size_t jobs = config.variants.size() * config.seeds.size();
    ComparisonResult result;
    result.epochs = config.epochs;
    result.runs.resize(jobs);
    std::vector<std::exception_ptr> errors(jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs; j = next++) {
            const auto& v = config.variants[j / config.seeds.size()];
            const auto seed = config.seeds[j % config.seeds.size()];
            try {
                const auto* base = v.sampler == sampler::SamplerKind::Flow ? bases.flow : bases.diffusion;
                Trainer trainer(dataset, *base, v, diffusion, flow, seed);
                result.runs[j] = trainer.run(config.epochs);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };
    const int nthreads = std::min<int>(config.threads, static_cast<int>(jobs));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    // Automatic levels per sampler family.
    for (auto kind : {sampler::SamplerKind::Diffusion, sampler::SamplerKind::Flow}) {
        std::vector<double> base_rewards;
        double plateau = -std::numeric_limits<double>::infinity();
        for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
            if (config.variants[vi].sampler != kind) continue;
            std::vector<double> finals;
            for (std::size_t si = 0; si < config.seeds.size(); ++si) {
                const auto& run = result.runs[vi * config.seeds.size() + si];
                base_rewards.push_back(run.epochs.front().reward_mean);
                finals.push_back(window_mean(run, config.plateau_window));
            }
            plateau = std::max(plateau, median(finals));
        }
        if (base_rewards.empty()) continue;
        double base = 0.0;
        for (double b : base_rewards) base += b;
        result.levels.push_back({kind, base / static_cast<double>(base_rewards.size()), plateau});
    }

    for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
        const auto& v = config.variants[vi];
        std::vector<double> thresholds = config.thresholds;
        if (thresholds.empty()) {
            for (const auto& l : result.levels) {
                if (l.sampler == v.sampler) thresholds.push_back(0.5 * (l.base_reward + l.plateau_reward));
            }
        }
        for (double threshold : thresholds) {
            VariantSummary row;
            row.variant = method_name(v.method);
            row.threshold = threshold;
            std::vector<double> epochs, coverage;
            double clip = 0.0, first = 0.0;
            for (std::size_t si = 0; si < config.seeds.size(); ++si) {
                const auto& run = result.runs[vi * config.seeds.size() + si];
                RunOutcome out;
                out.variant = run.variant;
                out.seed = run.seed;
                out.threshold = threshold;
                out.epochs_to_threshold = epochs_to_threshold(run, threshold, config.smoothing_window);
                const std::size_t at = out.epochs_to_threshold ? static_cast<std::size_t>(*out.epochs_to_threshold)
                                                               : run.epochs.size() - 1;
                out.coverage_at_threshold = run.epochs[at].coverage;
                for (const auto& e : run.epochs) {
                    out.mean_clip_frac += e.clip_frac;
                    out.mean_clip_frac_first_step += e.clip_frac_first_step;
                    out.max_taylor_gap = std::max(out.max_taylor_gap, e.taylor_gap_max);
                }
                out.mean_clip_frac /= static_cast<double>(run.epochs.size());
                out.mean_clip_frac_first_step /= static_cast<double>(run.epochs.size());

                epochs.push_back(out.epochs_to_threshold ? *out.epochs_to_threshold : config.epochs);
                coverage.push_back(out.coverage_at_threshold);
                clip += out.mean_clip_frac;
                first += out.mean_clip_frac_first_step;
                row.max_taylor_gap = std::max(row.max_taylor_gap, out.max_taylor_gap);
                if (out.epochs_to_threshold) ++row.reached;
                result.outcomes.push_back(std::move(out));
            }
            row.runs = static_cast<int>(config.seeds.size());
            row.median_epochs = median(epochs);
            row.median_coverage = median(coverage);
            row.mean_clip_frac = clip / static_cast<double>(config.seeds.size());
            row.mean_clip_frac_first_step = first / static_cast<double>(config.seeds.size());
            result.summary.push_back(std::move(row));
        }
    }
    return result;
}

std::string metrics_csv(const std::vector<RunMetrics>& runs) {
    std::ostringstream os;
    os << "epoch,variant,seed,reward_mean,clip_frac,clip_frac_first_step,coverage,spread,taylor_gap_max\n";
    for (const auto& r : runs) {
        for (const auto& e : r.epochs) {
            os << e.epoch << ',' << r.variant << ',' << r.seed << ',' << format_number(e.reward_mean) << ','
               << format_number(e.clip_frac) << ',' << format_number(e.clip_frac_first_step) << ','
               << format_number(e.coverage) << ',' << format_number(e.spread) << ','
               << format_number(e.taylor_gap_max) << '\n';
        }
    }
    return os.str();
}

std::string summary_json(const ComparisonResult& result, const ComparisonConfig& config) {
    json doc;
    doc["epochs"] = result.epochs;
    doc["seeds"] = config.seeds;
    doc["smoothing_window"] = config.smoothing_window;
    doc["plateau_window"] = config.plateau_window;
    doc["threshold_source"] = config.thresholds.empty() ? "auto" : "explicit";
    json levels = json::array();
    for (const auto& l : result.levels) {
        levels.push_back({{"sampler", family_name(l.sampler)},
                          {"base_reward", l.base_reward},
                          {"plateau_reward", l.plateau_reward},
                          {"midpoint", 0.5 * (l.base_reward + l.plateau_reward)}});
    }
    doc["levels"] = levels;
    json rows = json::array();
    for (const auto& s : result.summary) {
        rows.push_back({{"variant", s.variant},
                        {"threshold", s.threshold},
                        {"median_epochs_to_threshold", s.median_epochs},
                        {"reached", s.reached},
                        {"runs", s.runs},
                        {"median_coverage_at_threshold", s.median_coverage},
                        {"mean_clip_frac", s.mean_clip_frac},
                        {"mean_clip_frac_first_step", s.mean_clip_frac_first_step},
                        {"max_taylor_gap", s.max_taylor_gap}});
    }
    doc["summary"] = rows;
    json runs = json::array();
    for (const auto& o : result.outcomes) {
        runs.push_back({{"variant", o.variant},
                        {"seed", o.seed},
                        {"threshold", o.threshold},
                        {"epochs_to_threshold", o.epochs_to_threshold ? json(*o.epochs_to_threshold) : json(nullptr)},
                        {"coverage_at_threshold", o.coverage_at_threshold},
                        {"mean_clip_frac", o.mean_clip_frac},
                        {"mean_clip_frac_first_step", o.mean_clip_frac_first_step},
                        {"max_taylor_gap", o.max_taylor_gap}});
    }
    doc["runs"] = runs;
    return doc.dump(2) + "\n";
}

std::string reward_plot_svg(const std::vector<RunMetrics>& runs) {
    return render_svg(mean_trace_plot(runs, "Mean reward", "reward",
                                      [](const RunMetrics& r, std::size_t e) { return r.epochs[e].reward_mean; }));
}

std::string clip_plot_svg(const std::vector<RunMetrics>& runs) {
    return render_svg(mean_trace_plot(runs, "Clip fraction", "clipped share",
                                      [](const RunMetrics& r, std::size_t e) { return r.epochs[e].clip_frac; }));
}

}  // namespace propcredit::toybench

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fcnseg/checkpoint.hpp"
#include "fcnseg/cli.hpp"
#include "fcnseg/dataset.hpp"
#include "fcnseg/errors.hpp"
#include "fcnseg/folds.hpp"
#include "fcnseg/metrics.hpp"
#include "fcnseg/png.hpp"

namespace fcnseg::cli {
namespace fs = std::filesystem;
namespace {

const Fold& fold_of(const FoldPlan& plan, int fold) {
    if (fold < 0 || fold >= static_cast<int>(plan.folds.size())) {
        throw ConfigError("fold " + std::to_string(fold) + " outside 0.." + std::to_string(plan.folds.size() - 1));
    }
    return plan.folds[static_cast<std::size_t>(fold)];
}

Dataset load_items(const std::vector<std::string>& ids, const std::map<std::string, ManifestEntry>& by_id, int size) {
    Dataset out;
    for (const auto& id : ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("fold plan item '" + id + "' is not in the manifest");
        out.push_back(load_sample(it->second, size));
    }
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void save_stage_checkpoint(Checkpoint ckpt, int input_size, const fs::path& path, RunManifest& manifest) {
    ckpt.meta.extra["input_size"] = input_size;
    save_checkpoint(ckpt, path);
    manifest.add_output(path);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

}  // namespace

int cmd_train(const TrainOptions& opts, std::ostream& log) {
    RunManifest manifest("train", opts.argv);
    manifest.set_config(to_json(opts.config));
    manifest.add_seed("model", opts.config.seed);
    manifest.add_seed("train", opts.config.train.seed);
    manifest.note("fold", opts.fold);
    const fs::path run_path = opts.out / "run_manifest.json";
    try {
        const RunConfig& cfg = opts.config;
        cfg.train.validate();
        manifest.add_input(opts.manifest);
        manifest.add_input(opts.plan);
        const auto entries = read_manifest(opts.manifest);
        std::map<std::string, ManifestEntry> by_id;
        for (const auto& e : entries) by_id.emplace(e.id, e);
        const FoldPlan plan = load_fold_plan(opts.plan);
        const Fold& fold = fold_of(plan, opts.fold);

        StageData target;
        target.task = TaskKind::kSegmentation;
        target.num_classes = kNumWoundClasses;
        target.train = load_items(fold.train, by_id, cfg.input_size);
        target.validation = load_items(fold.validation, by_id, cfg.input_size);
        log << "train: fold " << opts.fold << ", " << target.train.size() << " train / " << target.validation.size()
            << " validation items, " << to_string(cfg.variant) << " width " << cfg.width_scale << '\n';

        ResolvedTierPlan resolved;
        if (opts.tier_plan) {
            manifest.add_input(*opts.tier_plan);
            std::ifstream f(*opts.tier_plan);
            if (!f) throw ConfigError("cannot open tier plan " + opts.tier_plan->string());
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(f);
            } catch (const nlohmann::json::parse_error& e) {
                throw ConfigError(opts.tier_plan->string() + ": " + e.what());
            }
            resolved = resolve_tier_plan(j, cfg, std::move(target));
            manifest.note("tier_plan", j);
        } else {
            resolved.plan.stages.push_back({"target", StageRole::kTarget, "target", cfg.train, LoadMode::kCompatible});
            resolved.datasets.emplace("target", std::move(target));
        }

        const ModelSpec spec{cfg.variant, cfg.width_scale, cfg.seed, cfg.model_options};
        const int size = cfg.input_size;
        auto on_epoch = [&](const std::string& stage, const EpochStats& s) {
            log << "  [" << stage << "] epoch " << s.epoch << " lr " << fmt(s.lr) << " train_loss " << fmt(s.train_loss);
            if (s.val_loss) log << " val_loss " << fmt(*s.val_loss) << " val_pixel_acc " << fmt(*s.val_pixel_acc);
            log << '\n';
        };
        auto on_stage = [&](const StageResult& r) {
            const fs::path dir = opts.out / r.name;
            write_epoch_csv(dir / "epochs.csv", r.stats);
            manifest.add_output(dir / "epochs.csv");
            save_stage_checkpoint(r.last, size, dir / "last.ckpt", manifest);
            if (r.best) save_stage_checkpoint(*r.best, size, dir / "best.ckpt", manifest);
            if (r.load_report) {
                log << "  [" << r.name << "] warm start: " << r.load_report->copied.size() << " copied, "
                    << r.load_report->reinitialized.size() << " reinitialized\n";
            }
        };
        const TierResult result = run_tier_plan(resolved.plan, spec, resolved.datasets, on_stage, on_epoch);
        save_stage_checkpoint(result.final_checkpoint, size, opts.out / "final.ckpt", manifest);
        log << "train: wrote " << (opts.out / "final.ckpt").string() << '\n';
        manifest.write(run_path, "ok");
        return kExitOk;
    } catch (const std::exception& e) {
        log << "train: " << e.what() << '\n';
        manifest.add_error("", e.what());
        manifest.write(run_path, "failed");
        return kExitFatal;
    }
}

int cmd_eval(const EvalOptions& opts, std::ostream& log) {
    RunManifest manifest("eval", opts.argv);
    const fs::path run_path = opts.out / "run_manifest.json";
    try {
        if (opts.checkpoint.has_value() == opts.predictions.has_value()) {
            throw ConfigError("eval needs exactly one of --checkpoint or --predictions");
        }
        manifest.add_input(opts.manifest);
        const auto entries = read_manifest(opts.manifest);

        std::set<std::string> selected;
        if (opts.plan) {
            manifest.add_input(*opts.plan);
            const FoldPlan plan = load_fold_plan(*opts.plan);
            if (opts.fold < 0) throw ConfigError("--plan needs --fold");
            const Fold& fold = fold_of(plan, opts.fold);
            selected.insert(fold.test.begin(), fold.test.end());
        }
        std::vector<const ManifestEntry*> items, healthy;
        for (const auto& e : entries) {
            if (e.healthy) {
                healthy.push_back(&e);
            } else if (!opts.plan || selected.count(e.id)) {
                items.push_back(&e);
            }
        }

        std::optional<SegModel> model;
        int size = 0;
        std::string method = opts.method;
        nlohmann::json meta{{"fold", opts.fold}};
        if (opts.checkpoint) {
            manifest.add_input(*opts.checkpoint);
            const Checkpoint ckpt = load_checkpoint(*opts.checkpoint);
            if (opts.expect_variant && *opts.expect_variant != ckpt.meta.variant) {
                throw CheckpointError("checkpoint holds " + std::string(to_string(ckpt.meta.variant)) + ", expected " +
                                      std::string(to_string(*opts.expect_variant)));
            }
            if (ckpt.meta.num_classes != kNumWoundClasses) {
                throw CheckpointError("checkpoint predicts " + std::to_string(ckpt.meta.num_classes) +
                                      " classes; wound evaluation needs " + std::to_string(kNumWoundClasses));
            }
            model = model_from_checkpoint(ckpt);
            size = opts.input_size >= 0 ? opts.input_size : ckpt.meta.extra.value("input_size", 0);
            if (method.empty()) method = std::string(to_string(ckpt.meta.variant));
            meta["source"] = opts.checkpoint->generic_string();
            meta["variant"] = std::string(to_string(ckpt.meta.variant));
        } else {
            if (method.empty()) method = "predictions";
            meta["source"] = opts.predictions->generic_string();
        }
        meta["method"] = method;
        meta["resolution"] = size > 0 ? "model input " + std::to_string(size) + "x" + std::to_string(size) : "native";
        manifest.set_config(meta);

        auto predict = [&](const ManifestEntry& e) -> std::pair<LabeledItem, LabeledItem> {
            if (model) {
                const Sample s = load_sample(e, size);
                LabelImage pred = predict_labels(forward(*model, s.image));
                if (opts.save_predictions) {
                    const fs::path p = opts.out / "predictions" / (e.id + ".png");
                    write_file_bytes(p, encode_paletted_png(pred));
                    manifest.add_output(p);
                }
                return {{e.id, std::move(pred)}, {e.id, s.label}};
            }
            const fs::path p = *opts.predictions / (e.id + ".png");
            if (!fs::is_regular_file(p)) throw DataError("item '" + e.id + "' has no prediction at " + p.string());
            LabelImage pred = decode_paletted_png(read_file_bytes(p));
            const RgbImage photo = decode_rgb_png(read_file_bytes(e.image));
            LabelImage gt = e.label.empty() ? LabelImage(photo.width, photo.height)
                                            : decode_paletted_png(read_file_bytes(e.label));
            if (pred.width != gt.width || pred.height != gt.height) {
                throw DataError("item '" + e.id + "': prediction extents differ from the ground truth");
            }
            return {{e.id, std::move(pred)}, {e.id, std::move(gt)}};
        };

        auto run = [&](const std::vector<const ManifestEntry*>& set) {
            std::vector<LabeledItem> preds, gts;
            for (const auto* e : set) {
                auto [p, g] = predict(*e);
                preds.push_back(std::move(p));
                gts.push_back(std::move(g));
            }
            return evaluate_split(preds, gts);
        };

        fs::create_directories(opts.out);
        meta["items"] = items.size();
        meta["healthy_items"] = healthy.size();
        if (!items.empty()) {
            const auto ev = run(items);
            write_per_image_csv(opts.out / "per_image.csv", ev.per_image);
            write_summary_csv(opts.out / "summary.csv", method, ev.summary);
            manifest.add_output(opts.out / "per_image.csv");
            manifest.add_output(opts.out / "summary.csv");
            for (const auto& s : ev.summary) {
                log << "eval: " << method << " " << to_string(s.region) << " dice " << format_mean_std(s.dice)
                    << " specificity " << format_mean_std(s.specificity) << " sensitivity "
                    << format_mean_std(s.sensitivity) << " mcc " << format_mean_std(s.mcc) << '\n';
            }
        }
        if (!healthy.empty()) {
            const auto ev = run(healthy);
            write_per_image_csv(opts.out / "healthy_per_image.csv", ev.per_image);
            std::ofstream f(opts.out / "healthy_audit.csv", std::ios::trunc);
            f << "method,region,images,specificity_mean,specificity_min\n";
            log << "healthy audit: " << healthy.size() << " images, specificity";
            for (const auto& s : ev.summary) {
                double lo = 1.0;
                for (const auto& m : ev.per_image)
                    if (m.region == s.region) lo = std::min(lo, m.metrics.specificity);
                f << method << ',' << to_string(s.region) << ',' << s.images << ',' << fmt(s.specificity.mean) << ','
                  << fmt(lo) << '\n';
                char buf[64];
                std::snprintf(buf, sizeof buf, " %s=%.4f", std::string(to_string(s.region)).c_str(), s.specificity.mean);
                log << buf;
            }
            log << '\n';
            f.close();
            manifest.add_output(opts.out / "healthy_audit.csv");
            manifest.add_output(opts.out / "healthy_per_image.csv");
        }
        if (items.empty() && healthy.empty()) throw DataError("no items selected for evaluation");
        {
            std::ofstream f(opts.out / "eval_meta.json", std::ios::trunc);
            f << meta.dump(2) << '\n';
        }
        manifest.add_output(opts.out / "eval_meta.json");
        manifest.write(run_path, "ok");
        return kExitOk;
    } catch (const std::exception& e) {
        log << "eval: " << e.what() << '\n';
        manifest.add_error("", e.what());
        manifest.write(run_path, "failed");
        return kExitFatal;
    }
}

int cmd_report(const ReportOptions& opts, std::ostream& log) {
    RunManifest manifest("report", opts.argv);
    manifest.set_config({{"bins", opts.bins}, {"out", opts.out.generic_string()}});
    const fs::path run_path = opts.out / "run_manifest.json";
    try {
        if (opts.evals.empty()) throw ConfigError("report needs at least one eval output");
        struct Run {
            int fold;
            std::vector<ImageMetrics> rows;
        };
        std::vector<std::string> order;
        std::map<std::string, std::vector<Run>> by_method;

        for (const auto& dir : opts.evals) {
            const fs::path summary_path = dir / "summary.csv";
            const fs::path per_image_path = dir / "per_image.csv";
            manifest.add_input(summary_path);
            manifest.add_input(per_image_path);
            const auto summary = read_lines(summary_path);
            if (summary.empty() || summary[0] != kSummaryHeader) {
                throw DataError(summary_path.string() + ": header is not '" + std::string(kSummaryHeader) + "'");
            }
            const auto per_image = read_lines(per_image_path);
            if (per_image.empty() || per_image[0] != kPerImageHeader) {
                throw DataError(per_image_path.string() + ": header is not '" + std::string(kPerImageHeader) + "'");
            }
            std::string method;
            int fold = -1;
            if (fs::is_regular_file(dir / "eval_meta.json")) {
                std::ifstream f(dir / "eval_meta.json");
                const auto meta = nlohmann::json::parse(f, nullptr, false);
                if (!meta.is_discarded()) {
                    method = meta.value("method", std::string());
                    fold = meta.value("fold", -1);
                }
            }
            if (method.empty()) {
                if (summary.size() < 2) throw DataError(summary_path.string() + ": no rows");
                method = split_csv(summary[1]).at(0);
            }
            Run run{fold, {}};
            for (std::size_t i = 1; i < per_image.size(); ++i) {
                const auto cells = split_csv(per_image[i]);
                if (cells.size() != 11) {
                    throw DataError(per_image_path.string() + ":" + std::to_string(i + 1) + ": expected 11 columns");
                }
                ImageMetrics m;
                m.id = cells[0];
                m.region = parse_region(cells[1]);
                try {
                    m.counts.tp = std::stoll(cells[2]);
                    m.counts.fp = std::stoll(cells[3]);
                    m.counts.fn = std::stoll(cells[4]);
                    m.counts.tn = std::stoll(cells[5]);
                } catch (const std::exception&) {
                    throw DataError(per_image_path.string() + ":" + std::to_string(i + 1) + ": bad count");
                }
                m.counts.universe = m.counts.tp + m.counts.fp + m.counts.fn + m.counts.tn;
                m.metrics = compute_metrics(m.counts);
                run.rows.push_back(std::move(m));
            }
            if (!by_method.count(method)) order.push_back(method);
            by_method[method].push_back(std::move(run));
        }

        fs::create_directories(opts.out);
        std::ofstream cmp(opts.out / "comparison.csv", std::ios::trunc);
        std::ofstream by_fold(opts.out / "comparison_by_fold.csv", std::ios::trunc);
        std::ofstream md(opts.out / "comparison.md", std::ios::trunc);
        std::ofstream hist(opts.out / "histograms.csv", std::ios::trunc);
        cmp << kSummaryHeader << '\n';
        by_fold << kSummaryHeader << '\n';
        hist << "method,region,bin_lo,bin_hi,count\n";
        md << "| Method | Region | Dice | Specificity | Sensitivity | MCC |\n|---|---|---|---|---|---|\n";

        for (const auto& method : order) {
            const auto& runs = by_method[method];
            std::vector<ImageMetrics> pooled;
            for (const auto& r : runs) pooled.insert(pooled.end(), r.rows.begin(), r.rows.end());
            for (Region region : kAllRegions) {
                const RegionSummary s = summarize(region, pooled);
                cmp << method << ',' << to_string(region) << ',' << format_mean_std(s.dice) << ','
                    << format_mean_std(s.specificity) << ',' << format_mean_std(s.sensitivity) << ','
                    << format_mean_std(s.mcc) << '\n';
                md << "| " << method << " | " << to_string(region) << " | " << format_mean_std(s.dice) << " | "
                   << format_mean_std(s.specificity) << " | " << format_mean_std(s.sensitivity) << " | "
                   << format_mean_std(s.mcc) << " |\n";

                // Fold-level view: std across the per-run means.
                std::vector<double> dice, spec, sens, mcc;
                for (const auto& r : runs) {
                    const RegionSummary f = summarize(region, r.rows);
                    dice.push_back(f.dice.mean);
                    spec.push_back(f.specificity.mean);
                    sens.push_back(f.sensitivity.mean);
                    mcc.push_back(f.mcc.mean);
                }
                by_fold << method << ',' << to_string(region) << ',' << format_mean_std(mean_std(dice)) << ','
                        << format_mean_std(mean_std(spec)) << ',' << format_mean_std(mean_std(sens)) << ','
                        << format_mean_std(mean_std(mcc)) << '\n';

                const Histogram h = dice_histogram(s.dice_values, opts.bins);
                for (std::size_t b = 0; b < h.counts.size(); ++b) {
                    hist << method << ',' << to_string(region) << ',' << fmt(h.edges[b]) << ',' << fmt(h.edges[b + 1])
                         << ',' << h.counts[b] << '\n';
                }
            }
            log << "report: " << method << " (" << runs.size() << " eval output" << (runs.size() == 1 ? "" : "s")
                << ")\n";
        }
        for (const char* name : {"comparison.csv", "comparison_by_fold.csv", "comparison.md", "histograms.csv"}) {
            manifest.add_output(opts.out / name);
        }
        cmp.close();
        by_fold.close();
        md.close();
        hist.close();
        manifest.write(run_path, "ok");
        return kExitOk;
    } catch (const std::exception& e) {
        log << "report: " << e.what() << '\n';
        manifest.add_error("", e.what());
        manifest.write(run_path, "failed");
        return kExitFatal;
    }
}

}  // namespace fcnseg::cli

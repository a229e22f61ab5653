#include <cctype>

#include "fcnseg/errors.hpp"
#include "fcnseg/train.hpp"

namespace fcnseg {

std::string_view to_string(StageRole r) {
    switch (r) {
        case StageRole::kClassificationSurrogate: return "classification-surrogate";
        case StageRole::kSegmentationSurrogate: return "segmentation-surrogate";
        case StageRole::kTarget: return "target";
    }
    return "?";
}

StageRole parse_stage_role(std::string_view s) {
    if (s == "classification-surrogate" || s == "tier1") return StageRole::kClassificationSurrogate;
    if (s == "segmentation-surrogate" || s == "tier2") return StageRole::kSegmentationSurrogate;
    if (s == "target") return StageRole::kTarget;
    throw ConfigError("unknown stage role '" + std::string(s) + "'");
}

TierResult run_tier_plan(const TierPlan& plan, const ModelSpec& spec, const DatasetRegistry& datasets,
                         const StageCallback& on_stage_done, const EpochCallback& on_epoch) {
    if (plan.stages.empty()) throw ConfigError("tier plan has no stages");
    TierResult result;
    const Checkpoint* source = plan.source ? &*plan.source : nullptr;

    for (const auto& stage : plan.stages) {
        const auto it = datasets.find(stage.dataset);
        if (it == datasets.end()) throw StageError(stage.name, "dataset '" + stage.dataset + "' is not available");
        const StageData& data = it->second;
        if (data.train.empty()) throw StageError(stage.name, "dataset '" + stage.dataset + "' has no training items");

        StageResult sr;
        sr.name = stage.name;
        try {
            SegModel model = build_model(spec.variant, data.num_classes, spec.width_scale, spec.seed, spec.options);
            if (source) sr.load_report = load_pretrained(model, *source, stage.load_mode);

            SgdTrainer trainer(model, stage.config, data.task);
            double best_val = 0.0;
            const std::string tag = std::string(to_string(stage.role)) + ":" + stage.name;
            for (int e = 0; e < stage.config.epochs; ++e) {
                EpochStats stats = trainer.train_epoch(data.train, e);
                if (!data.validation.empty()) {
                    const auto v = validate(model, data.validation, data.task);
                    stats.val_loss = v.loss;
                    stats.val_pixel_acc = v.pixel_accuracy;
                    if (!sr.best || v.loss < best_val) {
                        best_val = v.loss;
                        sr.best = make_checkpoint(model, tag, {{"epoch", e}, {"val_loss", v.loss}});
                    }
                }
                if (on_epoch) on_epoch(stage.name, stats);
                sr.stats.push_back(stats);
            }
            sr.last = make_checkpoint(model, tag, {{"epoch", stage.config.epochs - 1}});
        } catch (const StageError&) {
            throw;
        } catch (const Error& e) {
            throw StageError(stage.name, e.what());
        }
        result.stages.push_back(std::move(sr));
        if (on_stage_done) on_stage_done(result.stages.back());
        source = &result.stages.back().last;
    }
    result.final_checkpoint = result.stages.back().last;
    return result;
}

}  // namespace fcnseg

// Command-line entry point: convert → split → train → eval → report.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "fcnseg/cli.hpp"
#include "fcnseg/errors.hpp"

namespace {

template <class T>
void override_if(const std::optional<T>& v, T& target) {
    if (v) target = *v;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace fcnseg;
    const std::vector<std::string> args(argv, argv + argc);

    CLI::App app{"Fully convolutional wound segmentation toolkit"};
    app.require_subcommand(1);

    cli::ConvertOptions convert;
    auto* c = app.add_subcommand("convert", "Rasterize annotation XML into paletted PNG labels and a manifest");
    c->add_option("--annotations", convert.annotations, "Directory of annotation .xml files")->required();
    c->add_option("--images", convert.images, "Directory holding the photographs")->required();
    c->add_option("--out", convert.out, "Output directory")->required();

    cli::SplitOptions split;
    auto* s = app.add_subcommand("split", "Write a seeded 5-fold train/validation/test plan");
    s->add_option("--manifest", split.manifest, "Dataset manifest (.jsonl)")->required();
    s->add_option("--out", split.out, "Fold plan JSON path")->required();
    s->add_option("--seed", split.seed, "Shuffle seed");

    cli::TrainOptions train;
    std::optional<std::filesystem::path> run_file;
    std::optional<std::string> variant, fc_padding;
    std::optional<double> width_scale, base_lr, momentum, step_fraction, gamma;
    std::optional<int> input_size, epochs, batch_size;
    std::optional<std::uint64_t> seed;
    bool dropout = false;
    auto* t = app.add_subcommand("train", "Train one fold, optionally through a tier plan");
    t->add_option("--manifest", train.manifest, "Dataset manifest (.jsonl)")->required();
    t->add_option("--plan", train.plan, "Fold plan JSON")->required();
    t->add_option("--fold", train.fold, "Fold index 0-4")->required();
    t->add_option("--out", train.out, "Output directory")->required();
    t->add_option("--config", run_file, "Run file (JSON); flags below override it");
    t->add_option("--tier-plan", train.tier_plan, "Tier plan JSON");
    t->add_option("--variant", variant, "fcn-alexnet | fcn-32s | fcn-16s | fcn-8s");
    t->add_option("--width-scale", width_scale, "Channel width multiplier in (0, 1]");
    t->add_option("--input-size", input_size, "Training resolution (0 keeps native size)");
    t->add_option("--fc-padding", fc_padding, "same | valid");
    t->add_option("--seed", seed, "Seed for initialization and visit order");
    t->add_option("--epochs", epochs, "Training epochs (default 60)");
    t->add_option("--base-lr", base_lr, "Initial learning rate (default 1e-4)");
    t->add_option("--momentum", momentum, "SGD momentum (default 0.9)");
    t->add_option("--batch-size", batch_size, "Images per update (default 1)");
    t->add_option("--step-fraction", step_fraction, "Epoch fraction between lr drops (default 0.33)");
    t->add_option("--gamma", gamma, "lr multiplier at each drop (default 0.1)");
    t->add_flag("--dropout", dropout, "Enable dropout after fc6 and fc7");

    cli::EvalOptions eval;
    std::optional<std::string> expect_variant;
    auto* e = app.add_subcommand("eval", "Score predictions against ground truth for three regions");
    auto* ck = e->add_option("--checkpoint", eval.checkpoint, "Model checkpoint");
    auto* pr = e->add_option("--predictions", eval.predictions, "Directory of <id>.png paletted predictions");
    ck->excludes(pr);
    e->add_option("--manifest", eval.manifest, "Dataset manifest (.jsonl)")->required();
    e->add_option("--plan", eval.plan, "Fold plan JSON; evaluates that fold's test items");
    e->add_option("--fold", eval.fold, "Fold index 0-4");
    e->add_option("--out", eval.out, "Output directory")->required();
    e->add_option("--method", eval.method, "Row label in the summary table");
    e->add_option("--input-size", eval.input_size, "Evaluation resolution (default: from the checkpoint; 0: native)");
    e->add_option("--variant", expect_variant, "Fail unless the checkpoint holds this variant");
    e->add_flag("--save-predictions", eval.save_predictions, "Also write predicted label PNGs");

    cli::ReportOptions report;
    auto* r = app.add_subcommand("report", "Merge eval outputs into a comparison table and Dice histograms");
    r->add_option("--eval", report.evals, "Eval output directory (repeatable)")->required();
    r->add_option("--out", report.out, "Output directory")->required();
    r->add_option("--bins", report.bins, "Histogram bins over [0, 1]");

    cli::SynthOptions synth;
    auto* y = app.add_subcommand("synth", "Generate a synthetic foot-ulcer corpus (photographs + annotation XML)");
    y->add_option("--out", synth.out, "Output directory")->required();
    y->add_option("--count", synth.count, "Ulcer images");
    y->add_option("--healthy", synth.healthy_count, "Healthy images");
    y->add_option("--size", synth.size, "Image side in pixels");
    y->add_option("--seed", synth.seed, "Generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c->parsed()) {
            convert.argv = args;
            return cli::cmd_convert(convert, std::cout);
        }
        if (s->parsed()) {
            split.argv = args;
            return cli::cmd_split(split, std::cout);
        }
        if (t->parsed()) {
            cli::RunConfig cfg;
            if (run_file) cfg = cli::load_run_config(*run_file, cfg);
            if (variant) cfg.variant = parse_variant(*variant);
            if (fc_padding) {
                auto j = to_json(cfg.model_options);
                j["fc_padding"] = *fc_padding;
                cfg.model_options = model_options_from_json(j);
            }
            override_if(width_scale, cfg.width_scale);
            override_if(input_size, cfg.input_size);
            if (seed) {
                cfg.seed = *seed;
                cfg.train.seed = *seed;
            }
            override_if(epochs, cfg.train.epochs);
            override_if(base_lr, cfg.train.base_lr);
            override_if(momentum, cfg.train.momentum);
            override_if(batch_size, cfg.train.batch_size);
            override_if(step_fraction, cfg.train.step_fraction);
            override_if(gamma, cfg.train.gamma);
            if (dropout) cfg.model_options.dropout = true;
            train.config = cfg;
            train.argv = args;
            return cli::cmd_train(train, std::cout);
        }
        if (e->parsed()) {
            if (expect_variant) eval.expect_variant = parse_variant(*expect_variant);
            eval.argv = args;
            return cli::cmd_eval(eval, std::cout);
        }
        if (r->parsed()) {
            report.argv = args;
            return cli::cmd_report(report, std::cout);
        }
        if (y->parsed()) {
            synth.argv = args;
            return cli::cmd_synth(synth, std::cout);
        }
    } catch (const Error& err) {
        std::cerr << "fcnseg: " << err.what() << '\n';
        return cli::kExitFatal;
    }
    return cli::kExitFatal;
}

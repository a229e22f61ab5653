#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "fcnseg/annotation.hpp"
#include "fcnseg/cli.hpp"
#include "fcnseg/dataset.hpp"
#include "fcnseg/errors.hpp"
#include "fcnseg/folds.hpp"
#include "fcnseg/png.hpp"
#include "fcnseg/synthetic.hpp"

namespace fcnseg::cli {
namespace fs = std::filesystem;

int cmd_convert(const ConvertOptions& opts, std::ostream& log) {
    RunManifest manifest("convert", opts.argv);
    manifest.set_config({{"annotations", opts.annotations.generic_string()},
                         {"images", opts.images.generic_string()},
                         {"out", opts.out.generic_string()}});
    const fs::path run_path = opts.out / "run_manifest.json";
    try {
        if (!fs::is_directory(opts.annotations)) throw DataError("annotation directory not found: " + opts.annotations.string());
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(opts.annotations)) {
            if (e.is_regular_file() && e.path().extension() == ".xml") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        fs::create_directories(opts.out / "labels");

        std::vector<ManifestEntry> entries;
        std::map<std::string, fs::path> seen;
        for (const auto& file : files) {
            manifest.add_input(file);
            try {
                const auto bytes = read_file_bytes(file);
                const RegionAnnotation a = parse_annotation(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
                if (a.image_id.find_first_of(",\n\"/\\") != std::string::npos) {
                    throw IngestionError("annotation/image@id", "id contains a reserved character");
                }
                if (const auto it = seen.find(a.image_id); it != seen.end()) {
                    throw IngestionError("annotation/image@id", "id '" + a.image_id + "' already used by " + it->second.string());
                }
                const fs::path image = fs::absolute(opts.images / (a.image_file.empty() ? a.image_id + ".png" : a.image_file));
                if (!fs::is_regular_file(image)) throw IngestionError("annotation/image@file", "photograph not found: " + image.string());
                const RgbImage photo = decode_rgb_png(read_file_bytes(image));
                if (photo.width != a.width || photo.height != a.height) {
                    throw IngestionError("annotation/image", "declared " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                                                                 " but photograph is " + std::to_string(photo.width) + "x" +
                                                                 std::to_string(photo.height));
                }
                manifest.add_input(image);
                const LabelImage label = rasterize(a, a.width, a.height);
                const fs::path label_path = fs::absolute(opts.out / "labels" / (a.image_id + ".png"));
                write_file_bytes(label_path, encode_paletted_png(label));
                manifest.add_output(label_path);
                seen.emplace(a.image_id, file);
                entries.push_back({a.image_id, image, label_path, a.healthy});
            } catch (const Error& e) {
                log << "convert: " << file.filename().string() << ": " << e.what() << '\n';
                manifest.add_error(file.generic_string(), e.what());
            }
        }
        const fs::path manifest_path = opts.out / "manifest.jsonl";
        write_manifest(manifest_path, entries);
        manifest.add_output(manifest_path);
        log << "convert: " << entries.size() << " of " << files.size() << " annotations converted\n";
        const bool partial = manifest.error_count() > 0;
        if (!partial && files.empty()) log << "convert: no annotation files found\n";
        manifest.write(run_path, partial ? "partial" : "ok");
        if (partial) return entries.empty() ? kExitFatal : kExitPartial;
        return kExitOk;
    } catch (const std::exception& e) {
        log << "convert: " << e.what() << '\n';
        manifest.add_error("", e.what());
        manifest.write(run_path, "failed");
        return kExitFatal;
    }
}

int cmd_split(const SplitOptions& opts, std::ostream& log) {
    RunManifest manifest("split", opts.argv);
    manifest.set_config({{"manifest", opts.manifest.generic_string()}, {"out", opts.out.generic_string()}});
    manifest.add_seed("split", opts.seed);
    const fs::path run_path = opts.out.parent_path() / (opts.out.stem().string() + ".run_manifest.json");
    try {
        manifest.add_input(opts.manifest);
        const auto entries = read_manifest(opts.manifest);
        std::vector<std::string> ids, healthy;
        for (const auto& e : entries) (e.healthy ? healthy : ids).push_back(e.id);
        const FoldPlan plan = make_fold_plan(ids, opts.seed);
        check_fold_plan(plan);
        auto j = to_json(plan);
        j["healthy_test_only"] = healthy;
        if (opts.out.has_parent_path()) fs::create_directories(opts.out.parent_path());
        std::ofstream f(opts.out, std::ios::trunc);
        if (!f) throw DataError("cannot write " + opts.out.string());
        f << j.dump(1) << '\n';
        f.close();
        manifest.add_output(opts.out);
        log << "split: " << ids.size() << " items into 5 folds (" << plan.folds[0].train.size() << "/"
            << plan.folds[0].validation.size() << "/" << plan.folds[0].test.size() << " in fold 0); " << healthy.size()
            << " healthy items kept for testing only\n";
        manifest.write(run_path, "ok");
        return kExitOk;
    } catch (const std::exception& e) {
        log << "split: " << e.what() << '\n';
        manifest.add_error("", e.what());
        manifest.write(run_path, "failed");
        return kExitFatal;
    }
}

int cmd_synth(const SynthOptions& opts, std::ostream& log) {
    RunManifest manifest("synth", opts.argv);
    manifest.set_config({{"count", opts.count}, {"healthy_count", opts.healthy_count}, {"size", opts.size},
                         {"out", opts.out.generic_string()}});
    manifest.add_seed("synth", opts.seed);
    const fs::path run_path = opts.out / "run_manifest.json";
    try {
        auto emit = [&](const SyntheticSample& s) {
            const fs::path image = opts.out / "images" / s.annotation.image_file;
            const fs::path xml = opts.out / "annotations" / (s.id + ".xml");
            write_file_bytes(image, encode_rgb_png(s.image));
            const std::string text = serialize_annotation(s.annotation);
            write_file_bytes(xml, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
            manifest.add_output(image);
            manifest.add_output(xml);
        };
        for (std::size_t i = 0; i < opts.count; ++i) emit(generate_synthetic_sample(opts.seed, i, opts.size, false));
        for (std::size_t i = 0; i < opts.healthy_count; ++i) emit(generate_synthetic_sample(opts.seed, i, opts.size, true));
        log << "synth: wrote " << opts.count << " ulcer and " << opts.healthy_count << " healthy items to "
            << opts.out.string() << '\n';
        manifest.write(run_path, "ok");
        return kExitOk;
    } catch (const std::exception& e) {
        log << "synth: " << e.what() << '\n';
        manifest.add_error("", e.what());
        manifest.write(run_path, "failed");
        return kExitFatal;
    }
}

}  // namespace fcnseg::cli

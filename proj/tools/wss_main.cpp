// Command-line front end: one subcommand per pipeline stage plus the one-shot `pipeline`.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "wss/core/config.hpp"
#include "wss/core/image_io.hpp"
#include "wss/core/manifest.hpp"
#include "wss/eval/metrics.hpp"
#include "wss/infer/inference.hpp"
#include "wss/ingest/ingest.hpp"
#include "wss/masks/mask_source.hpp"
#include "wss/model/checkpoint.hpp"
#include "wss/pipeline/pipeline.hpp"
#include "wss/synth/synthbench.hpp"
#include "wss/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace wss;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = false) {
    auto* opt = cmd->add_option("--config", c.config, "pipeline config file");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "override the config seed");
    cmd->add_option("--workers", c.workers, "worker-thread hint")->check(CLI::PositiveNumber);
}

PipelineConfig load(const Common& c) {
    PipelineConfig config;
    if (!c.config.empty()) {
        const fs::path path(c.config);
        config = resolve_config_paths(load_config(path), fs::absolute(path).parent_path());
    }
    if (c.seed) config.seed = *c.seed;
    if (c.workers) config.workers = *c.workers;
    config.validate();
    return config;
}

void progress(const std::string& msg) { std::cerr << msg << '\n'; }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string part; std::getline(in, part, ',');)
        if (!part.empty()) out.push_back(part);
    return out;
}

std::vector<double> parse_scales(const std::string& s) {
    std::vector<double> out;
    for (const auto& part : split_list(s)) {
        std::size_t used = 0;
        const double v = std::stod(part, &used);
        if (used != part.size()) throw std::invalid_argument("bad scale \"" + part + "\"");
        out.push_back(v);
    }
    return out;
}

std::string format_mean(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weakly supervised segmentation from retrieved images and image-level labels", "wss"};
    app.require_subcommand(1);
    app.fallthrough(false);

    // ingest
    Common ingest_c;
    std::string ingest_class, ingest_fetcher = "dir", ingest_src, ingest_out;
    int ingest_max = 1000;
    auto* ingest = app.add_subcommand("ingest", "fetch images for one class and rebuild the retrieved corpus");
    add_common(ingest, ingest_c);
    ingest->add_option("--class", ingest_class, "class name used as the query")->required();
    ingest->add_option("--fetcher", ingest_fetcher, "dir or urllist")->check(CLI::IsMember({"dir", "urllist"}));
    ingest->add_option("--src", ingest_src, "source folder or URL list")->required();
    ingest->add_option("--out", ingest_out, "corpus directory")->required();
    ingest->add_option("--max", ingest_max, "maximum images to fetch")->check(CLI::PositiveNumber);

    // coseg
    Common coseg_c;
    std::string coseg_group, coseg_source = "oracle", coseg_out, coseg_sidecars;
    double fg_min = 0.2, fg_max = 0.8;
    auto* coseg = app.add_subcommand("coseg", "co-segment a retrieved corpus and apply the foreground filter");
    add_common(coseg, coseg_c);
    coseg->add_option("--group", coseg_group, "corpus manifest")->required()->check(CLI::ExistingFile);
    coseg->add_option("--source", coseg_source, "oracle or consensus")->check(CLI::IsMember({"oracle", "consensus"}));
    coseg->add_option("--out", coseg_out, "output directory")->required();
    coseg->add_option("--fg-min", fg_min, "lower foreground-fraction bound (inclusive)");
    coseg->add_option("--fg-max", fg_max, "upper foreground-fraction bound (inclusive)");
    coseg->add_option("--sidecars", coseg_sidecars, "root holding <class>/<id>.mask.png sidecars (oracle)");

    // train
    Common train_c;
    std::string train_manifest, train_stage_name = "initial", train_out, train_init;
    std::optional<int> train_iters;
    bool train_no_branch = false;
    auto* train = app.add_subcommand("train", "train the mask generator or the final model");
    add_common(train, train_c, true);
    train->add_option("--manifest", train_manifest, "training manifest with masks")->required()->check(CLI::ExistingFile);
    train->add_option("--stage", train_stage_name, "initial or final")->check(CLI::IsMember({"initial", "final"}));
    train->add_option("--out", train_out, "checkpoint to write")->required();
    train->add_option("--iterations", train_iters, "override the stage iteration count")->check(CLI::PositiveNumber);
    train->add_option("--init", train_init, "starting checkpoint")->check(CLI::ExistingFile);
    train->add_flag("--no-branch", train_no_branch, "final stage without the multi-label branch");

    // genmasks
    Common gen_c;
    std::string gen_manifest, gen_ckpt, gen_out, gen_scales, gen_crf;
    auto* gen = app.add_subcommand("genmasks", "label-constrained mask generation for target images");
    add_common(gen, gen_c, true);
    gen->add_option("--manifest", gen_manifest, "target manifest with image-level labels")->required()->check(CLI::ExistingFile);
    gen->add_option("--ckpt,--checkpoint", gen_ckpt, "mask generator checkpoint")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--scales", gen_scales, "comma-separated inference scales (default from config)");
    gen->add_option("--crf", gen_crf, "on or off (default from config)")->check(CLI::IsMember({"on", "off"}));

    // infer
    Common infer_c;
    std::string infer_ckpt, infer_image, infer_out, infer_labels, infer_scales, infer_crf = "off";
    auto* infer = app.add_subcommand("infer", "predict a mask for one image");
    add_common(infer, infer_c);
    infer->add_option("--ckpt,--checkpoint", infer_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
    infer->add_option("--image", infer_image, "input image")->required()->check(CLI::ExistingFile);
    infer->add_option("--out", infer_out, "output mask PNG")->required();
    infer->add_option("--labels", infer_labels, "comma-separated classes to allow (default all)");
    infer->add_option("--scales", infer_scales, "comma-separated inference scales (default from config)");
    infer->add_option("--crf", infer_crf, "on or off")->check(CLI::IsMember({"on", "off"}));

    // evaluate
    Common eval_c;
    std::string eval_pred, eval_gt, eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "per-class and mean IoU of a prediction directory");
    add_common(evaluate, eval_c);
    evaluate->add_option("--pred-dir", eval_pred, "directory of <image stem>.png predictions")->required()->check(CLI::ExistingDirectory);
    evaluate->add_option("--gt-manifest", eval_gt, "manifest with ground-truth masks")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--out", eval_out, "report CSV")->required();

    // ablate
    Common ablate_c;
    std::string ablate_out, ablate_work;
    auto* ablate = app.add_subcommand("ablate", "train and evaluate the four ablation settings");
    add_common(ablate, ablate_c, true);
    ablate->add_option("--out", ablate_out, "table CSV")->required();
    ablate->add_option("--work-dir", ablate_work, "intermediate directory (default: next to the table)");

    // synthbench
    std::string synth_spec, synth_out;
    auto* synth = app.add_subcommand("synthbench", "generate the synthetic shapes benchmark");
    synth->add_option("--spec", synth_spec, "synth spec file")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", synth_out, "output directory")->required();

    // pipeline
    Common pipe_c;
    std::string pipe_out;
    bool pipe_fresh = false;
    auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end (resumable)");
    add_common(pipeline, pipe_c, true);
    pipeline->add_option("--out", pipe_out, "run directory")->required();
    pipeline->add_flag("--no-resume", pipe_fresh, "rerun every stage");

    if (argc > 1 && argv[1][0] != '-') {
        bool known = false;
        for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == argv[1];
        if (!known) {
            std::cerr << "wss-error\tcommand=" << argv[1] << "\tmessage=unknown subcommand\n" << app.help();
            return 2;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "wss-error\tcommand=" << (argc > 1 ? argv[1] : "") << "\tmessage=" << e.what() << '\n';
        std::cerr << app.help();
        return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (*ingest) {
            const auto config = load(ingest_c);
            const auto taxonomy = taxonomy_from_config(config);
            const fs::path out(ingest_out);
            std::unique_ptr<ImageFetcher> fetcher;
            if (ingest_fetcher == "dir") fetcher = std::make_unique<DirectoryFetcher>(ingest_src);
            else fetcher = std::make_unique<UrlListFetcher>(ingest_src);
            const auto report =
                fetch_class_images({ingest_class, ingest_max, out / "raw" / ingest_class}, *fetcher, taxonomy);
            for (const auto& m : report.messages) progress("warning: " + m);
            const auto groups = load_class_groups(out / "raw", taxonomy);
            const auto corpus = build_retrieved_corpus(groups, config, taxonomy, out / "corpus");
            for (const auto& w : corpus.warnings) progress("warning: " + w);
            write_manifest(out / "corpus.txt", corpus.manifest, taxonomy);
            std::cout << "fetched\t" << report.files.size() << "\twarnings\t" << report.warnings << "\tcorpus\t"
                      << corpus.manifest.entries.size() << '\n';
        } else if (*coseg) {
            const auto config = load(coseg_c);
            const auto taxonomy = taxonomy_from_config(config);
            const fs::path manifest_path(coseg_group);
            auto sidecars = coseg_sidecars.empty() ? manifest_path.parent_path() / "raw" : fs::path(coseg_sidecars);
            const auto source = make_mask_source(coseg_source, sidecars, taxonomy, config.workers);
            const auto corpus = load_manifest(manifest_path, taxonomy);
            const fs::path out(coseg_out);
            const auto result = cosegment_corpus(corpus, *source, fg_min, fg_max, taxonomy, out / "masks");
            write_text_file(out / "fractions.csv", result.fractions_csv);
            write_manifest(out / "coseg.txt", result.kept, taxonomy);
            std::cout << "kept\t" << result.kept.entries.size() << "\ttotal\t" << result.total << '\n';
        } else if (*train) {
            const auto config = load(train_c);
            const auto taxonomy = taxonomy_from_config(config);
            const auto stage = train_stage_name == "initial" ? TrainStage::initial : TrainStage::final;
            TrainOptions opts;
            opts.iterations = train_iters;
            opts.use_branch = !train_no_branch;
            if (!train_init.empty()) opts.init = load_checkpoint(train_init);
            const fs::path out(train_out);
            if (config.checkpoint_every > 0) {
                opts.checkpoint_dir = out.parent_path() / (out.stem().string() + "_snapshots");
                fs::create_directories(*opts.checkpoint_dir);
            }
            const auto result = train_stage(load_manifest(train_manifest, taxonomy), taxonomy, config, stage,
                                            config.seed, opts);
            save_checkpoint(out, result.params);
            write_training_log(out.parent_path() / (out.stem().string() + "_log.csv"), result.log);
            std::cout << "checkpoint\t" << out.string() << "\tfinal_seg_loss\t" << result.log.back().seg_loss << '\n';
        } else if (*gen) {
            auto config = load(gen_c);
            if (!gen_scales.empty()) config.inference_scales = parse_scales(gen_scales);
            if (!gen_crf.empty()) config.crf_on_generation = gen_crf == "on";
            config.validate();
            const auto taxonomy = taxonomy_from_config(config);
            const fs::path out(gen_out);
            const auto generated = generate_target_masks(load_manifest(gen_manifest, taxonomy), taxonomy,
                                                         load_checkpoint(gen_ckpt), config, out);
            write_manifest(out / "genmasks.txt", generated, taxonomy);
            std::cout << "masks\t" << generated.entries.size() << '\n';
        } else if (*infer) {
            const auto config = load(infer_c);
            const auto taxonomy = taxonomy_from_config(config);
            const auto params = load_checkpoint(infer_ckpt);
            std::optional<LabelVector> y;
            if (!infer_labels.empty()) {
                std::vector<int> idx;
                for (const auto& n : split_list(infer_labels)) idx.push_back(taxonomy.index_of(n));
                y = LabelVector::from_indices(taxonomy.size(), idx);
            }
            const auto scales = infer_scales.empty() ? config.inference_scales : parse_scales(infer_scales);
            const auto record = load_record(infer_image, ImageSource::target);
            const auto mask = predict_mask(record, params, y, scales, infer_crf == "on" ? std::optional(config.crf) : std::nullopt);
            write_mask(infer_out, mask);
            std::cout << "mask\t" << infer_out << '\n';
        } else if (*evaluate) {
            const auto config = load(eval_c);
            const auto taxonomy = taxonomy_from_config(config);
            const auto cm = evaluate_directory(eval_pred, load_manifest(eval_gt, taxonomy, Split::val), taxonomy);
            write_text_file(eval_out, format_iou_report(cm, taxonomy));
            std::cout << "mean_iou\t" << format_mean(mean_iou(cm)) << '\n';
        } else if (*ablate) {
            const auto config = load(ablate_c);
            const auto taxonomy = taxonomy_from_config(config);
            const fs::path out(ablate_out);
            const fs::path work = ablate_work.empty() ? out.parent_path() / (out.stem().string() + "_work") : fs::path(ablate_work);
            const auto rows = ablation_run(config, work, {true, progress});
            write_text_file(out, format_ablation_table(rows, taxonomy));
            for (const auto& r : rows) std::cout << r.setting << '\t' << format_mean(r.mean_iou) << '\n';
        } else if (*synth) {
            write_synth_benchmark(synth_out, parse_synth_plan(read_text_file(synth_spec)));
            std::cout << "synthbench\t" << synth_out << '\n';
        } else if (*pipeline) {
            const auto config = load(pipe_c);
            const auto run = run_pipeline(config, pipe_out, {!pipe_fresh, progress});
            std::cout << "run_id\t" << run.run_id << "\treport\t" << run.find("evaluate")->path.string() << '\n';
        }
    } catch (const StageError& e) {
        std::cerr << "wss-error\tcommand=" << command << "\tstage=" << e.stage() << "\tmessage=" << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "wss-error\tcommand=" << command << "\tmessage=" << e.what() << '\n';
        return 1;
    }
    return 0;
}

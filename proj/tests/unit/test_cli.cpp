#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>

#include "test_support.hpp"
#include "wss/core/image_io.hpp"
#include "wss/pipeline/pipeline.hpp"

using namespace wss;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run wss_cli(const std::string& args, const fs::path& scratch) {
    const auto err_file = scratch / "stderr.txt";
    const std::string cmd = std::string(WSS_CLI_PATH) + " " + args + " 2>" + err_file.string();
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = read_text_file(err_file);
    return r;
}

// Paths are passed to the shell unquoted; temp directories contain no spaces.
std::string q(const fs::path& p) { return p.string(); }

}  // namespace

TEST_CASE("command-line front end") {
    test::TempDir dir("cli");
    write_text_file(dir / "synth.spec", "retrieved_images = 12\ntarget_images = 6\neval_images = 3\ncanvas = 40\nseed = 4\n");

    const auto synth = wss_cli("synthbench --spec " + q(dir / "synth.spec") + " --out " + q(dir / "bench"), dir.path());
    REQUIRE(synth.code == 0);
    CHECK(fs::exists(dir / "bench/val_gt.txt"));

    PipelineConfig config;
    config.classes = ClassTaxonomy::synthetic_shapes().names();
    config.retrieved_dir = "bench/retrieved";
    config.target_manifest = "bench/train_labels.txt";
    config.eval_manifest = "bench/val_gt.txt";
    config.batch_size = 2;
    config.crop_size = 32;
    config.stage1_iters = 3;
    config.stage2_iters = 3;
    config.inference_scales = {1.0};
    config.workers = 1;
    write_text_file(dir / "toy.cfg", format_config(config));
    const auto cfg = " --config " + q(dir / "toy.cfg");

    SUBCASE("evaluate prints the mean IoU of perfect predictions") {
        const auto taxonomy = ClassTaxonomy::synthetic_shapes();
        fs::create_directories(dir / "pred");
        for (const auto& e : load_manifest(dir / "bench/val_gt.txt", taxonomy).entries)
            fs::copy_file(*e.mask, dir / ("pred/" + e.image.stem().string() + ".png"));
        const auto r = wss_cli("evaluate" + cfg + " --pred-dir " + q(dir / "pred") + " --gt-manifest " +
                                   q(dir / "bench/val_gt.txt") + " --out " + q(dir / "report.csv"),
                               dir.path());
        CHECK(r.code == 0);
        CHECK(r.out == "mean_iou\t1.000000\n");
        CHECK(read_text_file(dir / "report.csv").ends_with("mean,1.000000\n"));
    }
    SUBCASE("pipeline then single-image inference") {
        const auto p = wss_cli("pipeline" + cfg + " --out " + q(dir / "run"), dir.path());
        REQUIRE(p.code == 0);
        CHECK(p.out.starts_with("run_id\t"));
        CHECK(p.err.find("run evaluate") != std::string::npos);
        const auto again = wss_cli("pipeline" + cfg + " --out " + q(dir / "run"), dir.path());
        CHECK(again.err.find("skip evaluate (up to date)") != std::string::npos);

        const auto manifest = parse_run_manifest(read_text_file(dir / "run/run_manifest.txt"));
        const auto image = load_manifest(dir / "bench/val_gt.txt", ClassTaxonomy::synthetic_shapes()).entries[0].image;
        const auto r = wss_cli("infer" + cfg + " --ckpt " + manifest.find("train-final")->path.string() + " --image " +
                                   image.string() + " --labels disk --out " + q(dir / "m.png"),
                               dir.path());
        REQUIRE(r.code == 0);
        const auto mask = read_mask(dir / "m.png");
        CHECK(mask.height() == read_image(image).height);
        for (auto v : mask.labels.data) CHECK((v == 0 || v == 1));
    }
    SUBCASE("unknown subcommand") {
        const auto r = wss_cli("frobnicate", dir.path());
        CHECK(r.code == 2);
        CHECK(r.err.starts_with("wss-error\tcommand=frobnicate\tmessage=unknown subcommand\n"));
        CHECK(r.err.find("Subcommands:") != std::string::npos);
    }
    SUBCASE("missing required option") {
        const auto r = wss_cli("evaluate" + cfg, dir.path());
        CHECK(r.code != 0);
        CHECK(r.err.starts_with("wss-error\tcommand=evaluate\t"));
        CHECK(r.err.find("--pred-dir") != std::string::npos);
    }
    SUBCASE("stage failures name the stage") {
        config.retrieved_dir = "nowhere";
        write_text_file(dir / "bad.cfg", format_config(config));
        const auto r = wss_cli("pipeline --config " + q(dir / "bad.cfg") + " --out " + q(dir / "bad"), dir.path());
        CHECK(r.code == 1);
        CHECK(r.err.find("wss-error\tcommand=pipeline\tstage=ingest\tmessage=") != std::string::npos);
    }
}

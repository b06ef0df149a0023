#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "sketchedit/checkpoint.hpp"
#include "sketchedit/image_io.hpp"
#include "sketchedit_app/cli.hpp"

using namespace sketchedit;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "sketchedit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = app::cli_run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path work_dir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "sketchedit_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

const char* kTinyConfig = R"({"steps": 0, "batch_size": 2, "seed": 1,
    "schedule": {"steps": 6, "beta_start": 0.001, "beta_end": 0.2},
    "model": {"channels": [4, 8], "res_blocks": 1, "time_dim": 8}})";

// Dataset plus an untrained checkpoint shared by the tests below.
fs::path tiny_checkpoint_file() {
    static const fs::path ckpt = [] {
        const fs::path d = work_dir();
        REQUIRE(cli({"dataset-gen", "4", (d / "data").string(), "--seed", "2"}).code == 0);
        std::ofstream(d / "cfg.json") << kTinyConfig;
        const Run r = cli({"train", (d / "data").string(), (d / "cfg.json").string(), (d / "tiny.ckpt").string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        return d / "tiny.ckpt";
    }();
    return ckpt;
}

}  // namespace

TEST_CASE("cli: usage errors exit with 2, help with 0") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"dataset-gen"}).code == 2);
    CHECK(cli({"dataset-gen", "-3", "x"}).code == 2);
    CHECK(cli({"edit", "a.ckpt", "--image", "x.png"}).code == 2);
    const Run help = cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("dataset-gen") != std::string::npos);
}

TEST_CASE("cli: runtime errors exit with 1") {
    const fs::path d = work_dir();
    const Run r = cli({"edit", (d / "missing.ckpt").string(), "--image", "x.png", "--mask", "m.png", "--prompt", "red tee",
                       "--out", (d / "o.png").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("missing.ckpt") != std::string::npos);
    std::ofstream(d / "bad.json") << R"({"stepz": 1})";
    CHECK(cli({"train", (d / "nodata").string(), (d / "bad.json").string(), (d / "x.ckpt").string()}).code == 1);
}

TEST_CASE("cli: dataset-gen writes a loadable dataset and edit set") {
    const fs::path d = work_dir();
    CHECK(cli({"dataset-gen", "0", (d / "empty").string()}).code == 0);
    CHECK(fs::exists(d / "empty" / "captions.jsonl"));
    CHECK(cli({"dataset-gen", "3", (d / "edits").string(), "--edit-set"}).code == 0);
    for (const char* sub : {"sources", "masks", "sketches", "references"})
        CHECK(fs::exists(d / "edits" / sub / "000002.png"));
}

TEST_CASE("cli: train with steps 0 saves the initialised model") {
    const Checkpoint c = load_checkpoint(tiny_checkpoint_file());
    CHECK(c.final_step == 0);
    CHECK(c.history.empty());
    CHECK(c.schedule.steps == 6);
    CHECK(c.model.channels == std::vector<int>{4, 8});
    CHECK(fs::exists(work_dir() / "tiny.ckpt.loss.jsonl"));
}

TEST_CASE("cli: edit") {
    const fs::path d = work_dir();
    const std::string ckpt = tiny_checkpoint_file().string();
    const fs::path src = d / "data" / "images" / "000000.png";
    write_mask(d / "keep.png", Mask(1, 32, 32, 1.0f));
    write_mask(d / "box.png", testing::box_mask(32, 32, 8, 8, 24, 24));

    SUBCASE("all-keep mask returns the source") {
        const Run r = cli({"edit", ckpt, "--image", src.string(), "--mask", (d / "keep.png").string(), "--prompt",
                           "red tee with dots", "--out", (d / "keep_out.png").string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        CHECK(read_image(d / "keep_out.png") == read_image(src));
    }
    SUBCASE("same seed twice gives identical bytes") {
        for (const char* name : {"a.png", "b.png"}) {
            const Run r = cli({"edit", ckpt, "--image", src.string(), "--mask", (d / "box.png").string(), "--prompt",
                               "blue dress with stripes", "--seed", "11", "--out", (d / name).string()});
            REQUIRE_MESSAGE(r.code == 0, r.err);
            CHECK(r.out.find("pre_error=0") != std::string::npos);
        }
        CHECK(read_file(d / "a.png") == read_file(d / "b.png"));
    }
    SUBCASE("mask size mismatch") {
        write_mask(d / "small.png", Mask(1, 16, 16, 1.0f));
        const Run r = cli({"edit", ckpt, "--image", src.string(), "--mask", (d / "small.png").string(), "--prompt",
                           "red tee", "--out", (d / "x.png").string()});
        CHECK(r.code == 1);
    }
    SUBCASE("steps beyond T") {
        const Run r = cli({"edit", ckpt, "--image", src.string(), "--mask", (d / "box.png").string(), "--prompt",
                           "red tee", "--steps", "7", "--out", (d / "x.png").string()});
        CHECK(r.code == 1);
    }
}

TEST_CASE("cli: the installed binary reports exit codes") {
    const std::string bin = SKETCHEDIT_CLI_PATH;
    CHECK(WEXITSTATUS(std::system((bin + " --help > /dev/null").c_str())) == 0);
    CHECK(WEXITSTATUS(std::system((bin + " bogus > /dev/null 2>&1").c_str())) == 2);
    CHECK(WEXITSTATUS(std::system((bin + " evaluate /nonexistent /nonexistent.ckpt > /dev/null 2>&1").c_str())) == 1);
}

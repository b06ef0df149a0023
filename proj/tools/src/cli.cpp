#include "sketchedit_app/cli.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "sketchedit/checkpoint.hpp"
#include "sketchedit/evaluation.hpp"
#include "sketchedit/image_io.hpp"
#include "sketchedit/sampler.hpp"
#include "sketchedit/synth_data.hpp"
#include "sketchedit_app/service.hpp"

namespace sketchedit::app {

namespace fs = std::filesystem;

namespace {

struct Options {
    int n = 0;
    std::string out, data_dir, config_file, ckpt, image, mask, sketch, prompt, manifest_dir, log, host = "127.0.0.1";
    std::uint64_t seed = 0;
    int steps = 0;
    int port = 8080;
    bool edit_set = false;
    bool no_latent_mask = false;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Standard grammar plus any extra tokens found in the dataset captions.
Vocabulary dataset_vocabulary(const std::vector<TrainingSample>& samples) {
    std::vector<std::string> tokens = DatasetSpec::standard().vocabulary().tokens();
    tokens.erase(tokens.begin());
    std::set<std::string> known(tokens.begin(), tokens.end());
    std::set<std::string> extra;
    for (const auto& s : samples) {
        std::istringstream words(s.caption);
        for (std::string w; words >> w;) {
            std::ranges::transform(w, w.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (!known.contains(w)) extra.insert(w);
        }
    }
    tokens.insert(tokens.end(), extra.begin(), extra.end());
    return Vocabulary(tokens);
}

int run_dataset_gen(const Options& o, std::ostream& out) {
    const DatasetSpec spec = DatasetSpec::standard();
    if (o.edit_set) {
        write_edit_set(o.out, o.n, spec, MaskConfig{}, o.seed);
        out << "wrote " << o.n << " edit cases to " << o.out << '\n';
    } else {
        build_dataset(o.n, o.out, spec, o.seed);
        out << "wrote " << o.n << " samples to " << o.out << '\n';
    }
    return 0;
}

int run_train(const Options& o, std::ostream& out) {
    const TrainConfig cfg = parse_train_config(read_text(o.config_file));
    const auto data = load_dataset(o.data_dir);
    if (data.empty()) throw std::runtime_error("dataset " + o.data_dir + " is empty");
    const Vocabulary vocab = dataset_vocabulary(data);
    const std::string log_path = o.log.empty() ? o.out + ".loss.jsonl" : o.log;
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + log_path);
    const Checkpoint ckpt = fit(data, vocab, cfg, [&](const LossReport& r) {
        log << loss_log_line(r) << '\n';
        if (r.step % 100 == 0) {
            log.flush();
            out << loss_log_line(r) << std::endl;
        }
    });
    save_checkpoint(o.out, ckpt);
    out << "saved " << o.out << " after " << ckpt.final_step << " steps\n";
    return 0;
}

int run_edit(const Options& o, std::ostream& out) {
    const EditModel model(load_checkpoint(o.ckpt));
    EditRequest req;
    req.source = read_image(o.image);
    req.mask = read_mask(o.mask);
    req.user_sketch = o.sketch.empty() ? extract_sketch(req.source) : read_image(o.sketch);
    req.prompt = o.prompt;
    req.seed = o.seed;
    if (o.steps > 0) req.steps = o.steps;
    req.latent_mask_sampling = !o.no_latent_mask;
    const Image result = quantize(blended_sample(req, model));
    write_image(o.out, result);
    out << "wrote " << o.out;
    if (editable_fraction(req.mask) < 1.0) out << " pre_error=" << pre_error(result, req.source, req.mask);
    out << '\n';
    return 0;
}

int run_evaluate(const Options& o, std::ostream& out) {
    const EditModel model(load_checkpoint(o.ckpt));
    auto entries = load_manifest(o.manifest_dir);
    fill_edits(o.manifest_dir, entries, model, o.seed, !o.no_latent_mask);
    const MetricReport report = evaluate_entries(entries, model);
    const std::string text = report_to_json(report);
    const fs::path path = o.out.empty() ? fs::path(o.manifest_dir) / "report.json" : fs::path(o.out);
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    bytes.push_back('\n');
    write_file(path, bytes);
    out << text << '\n';
    return 0;
}

int run_serve(const Options& o, std::ostream& out) {
    auto model = std::make_shared<const EditModel>(load_checkpoint(o.ckpt));
    const EditService service(model);
    out << "serving " << o.ckpt << " on http://" << o.host << ':' << o.port << std::endl;
    serve(service, o.host, o.port);
    return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sketch-guided garment image editing with blended latent diffusion", "sketchedit"};
    app.require_subcommand(1);
    Options o;

    auto* gen = app.add_subcommand("dataset-gen", "Generate a synthetic garment dataset or a held-out edit set");
    gen->add_option("n", o.n, "Number of samples")->required()->check(CLI::NonNegativeNumber);
    gen->add_option("out", o.out, "Output directory")->required();
    gen->add_option("--seed", o.seed, "Generator seed");
    gen->add_flag("--edit-set", o.edit_set, "Write an evaluation manifest (sources, masks, sketches, references)");

    auto* train = app.add_subcommand("train", "Train a checkpoint");
    train->add_option("data_dir", o.data_dir, "Dataset directory")->required();
    train->add_option("config_file", o.config_file, "Training config (JSON)")->required();
    train->add_option("out_ckpt", o.out, "Output checkpoint")->required();
    train->add_option("--log", o.log, "Loss log path (default <out_ckpt>.loss.jsonl)");

    auto* edit = app.add_subcommand("edit", "Edit one image");
    edit->add_option("ckpt", o.ckpt, "Checkpoint")->required();
    edit->add_option("--image", o.image, "Source PNG")->required();
    edit->add_option("--mask", o.mask, "Mask PNG (black = editable)")->required();
    edit->add_option("--sketch", o.sketch, "User sketch PNG (default: the source's own sketch)");
    edit->add_option("--prompt", o.prompt, "Text prompt")->required();
    edit->add_option("--seed", o.seed, "Sampling seed");
    edit->add_option("--steps", o.steps, "Reverse steps (default T)")->check(CLI::PositiveNumber);
    edit->add_option("--out", o.out, "Output PNG")->required();
    edit->add_flag("--no-latent-mask", o.no_latent_mask, "Disable latent blending and the final composite");

    auto* eval = app.add_subcommand("evaluate", "Compute metrics over a manifest directory");
    eval->add_option("manifest_dir", o.manifest_dir, "Manifest directory")->required();
    eval->add_option("ckpt", o.ckpt, "Checkpoint")->required();
    eval->add_option("--out", o.out, "Report path (default <manifest_dir>/report.json)");
    eval->add_option("--seed", o.seed, "Base seed for edits generated for entries without one");
    eval->add_flag("--no-latent-mask", o.no_latent_mask, "Generate missing edits without latent blending");

    auto* srv = app.add_subcommand("serve", "Serve the HTTP edit API");
    srv->add_option("ckpt", o.ckpt, "Checkpoint")->required();
    srv->add_option("--port", o.port, "Port")->check(CLI::Range(1, 65535));
    srv->add_option("--host", o.host, "Bind address");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (gen->parsed()) return run_dataset_gen(o, out);
        if (train->parsed()) return run_train(o, out);
        if (edit->parsed()) return run_edit(o, out);
        if (eval->parsed()) return run_evaluate(o, out);
        return run_serve(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace sketchedit::app

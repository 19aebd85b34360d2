// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/toolsrv/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "raw2raw/baselines.hpp"
#include "raw2raw/calibfit.hpp"
#include "raw2raw/error.hpp"
#include "raw2raw/evalkit.hpp"
#include "raw2raw/nnmap/inference.hpp"
#include "raw2raw/nnmap/model_io.hpp"
#include "raw2raw/nnmap/trainer.hpp"
#include "raw2raw/rawio.hpp"
#include "raw2raw/synthcam.hpp"
#include "raw2raw/toolsrv/annotation_service.hpp"
#include "raw2raw/toolsrv/dataset_layout.hpp"
#include "raw2raw/toolsrv/http_server.hpp"

namespace raw2raw::tools {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, eval::IlluminantPolicy> kPolicies = {
    {"shared", eval::IlluminantPolicy::SharedGroundTruth},
    {"gray-world", eval::IlluminantPolicy::PerImageGrayWorld},
    {"mapped-gray-world", eval::IlluminantPolicy::MappedGrayWorld},
};

const std::vector<std::string> kDirections = {"A2B", "B2A"};

void write_text(const fs::path &path, const std::string &text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    f << text;
    if (!f)
        throw Error(ErrorCode::Io, "write failed: " + path.string());
}

void save_image(const PackedImage &img, const fs::path &path, std::optional<Vec3> illuminant = std::nullopt)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    save_frame(frame_from_image(img, illuminant), path);
}

char source_camera(Direction d) { return d == Direction::A2B ? 'A' : 'B'; }
char target_camera(Direction d) { return d == Direction::A2B ? 'B' : 'A'; }

/// Stored annotation, or the chart patches recorded in the chart frames.
AnnotationRecord annotation_or_chart(const DatasetLayout &layout, const std::string &pair_id, std::size_t regions)
{
    if (auto r = layout.load_annotation(pair_id))
        return *r;
    return automatic_annotation(layout, pair_id, regions);
}

std::vector<baselines::TestPair> load_tests(const DatasetLayout &layout)
{
    std::vector<baselines::TestPair> tests;
    for (const auto &info : layout.pairs("test")) {
        const RawFrame fa = layout.load_frame(info.id, "a_free");
        const RawFrame fb = layout.load_frame(info.id, "b_free");
        tests.push_back({info.id, normalize(fa), normalize(fb), fa.meta.illuminant, fb.meta.illuminant,
                         info.achromatic});
    }
    if (tests.empty())
        throw Error(ErrorCode::Io, "no test pairs under " + layout.root().string());
    return tests;
}

// ---------------------------------------------------------------------------

struct SynthGenArgs
{
    std::string out;
    std::uint64_t seed = 0;
    int unpaired = 16;
    int anchors = 4;
    int tests = 8;
    int size = 128;
    std::string sensor_b = "nonlinear";
    bool auto_annotate = false;
};

int synth_gen(const SynthGenArgs &a, std::ostream &out)
{
    synth::DatasetOptions opt;
    opt.n_unpaired = a.unpaired;
    opt.n_anchor = a.anchors;
    opt.n_test = a.tests;
    opt.seed = a.seed;
    opt.scene.height = opt.scene.width = a.size;
    const auto sensor_a = synth::reference_sensor();
    const auto sensor_b =
        a.sensor_b == "linear" ? synth::linear_partner_sensor() : synth::nonlinear_partner_sensor();
    const auto ds = synth::generate_dataset(opt, sensor_a, sensor_b);
    const auto manifest = synth::write_dataset(ds, sensor_a, sensor_b, a.out);
    out << "wrote " << manifest.entries.size() << " frames to " << a.out << "\n";

    if (a.auto_annotate) {
        AnnotationService service(a.out);
        for (const auto &info : service.layout().pairs("anchor")) {
            const AnnotationRecord draft = automatic_annotation(service.layout(), info.id);
            service.set_chart(info.id, draft.chart_a, draft.chart_b);
            for (const auto &region : draft.regions) {
                try {
                    service.add_region(info.id, region);
                } catch (const ServiceError &) {
                    // Regions failing the homogeneity check are skipped.
                }
            }
            const MutationResult r = service.commit(info.id);
            out << "annotated " << info.id << ": " << r.record.regions.size() << " regions, residual "
                << r.fit.residual_rms.value_or(0.0) << "\n";
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct FitCalibArgs
{
    std::string root;
    std::string pair;
    std::string kernel = "poly";
    std::string direction = "A2B";
    std::string out;
};

int fit_calib(const FitCalibArgs &a, std::ostream &out)
{
    const DatasetLayout layout(a.root);
    const AnnotationRecord record = annotation_or_chart(layout, a.pair, 0);
    calib::AnchorOptions opt;
    opt.kernel = calib::kernel_from_string(a.kernel);
    auto samples = calib::annotation_samples(layout.load_image(a.pair, "a_chart"),
                                             layout.load_image(a.pair, "b_chart"), record, opt);
    const Direction dir = direction_from_string(a.direction);
    if (dir == Direction::B2A)
        for (auto &s : samples)
            std::swap(s.src, s.dst);
    calib::CalibrationMap map = calib::fit_map(samples, opt.kernel, opt.fit);
    map.src_camera = layout.profile(source_camera(dir)).camera_id;
    map.dst_camera = layout.profile(target_camera(dir)).camera_id;
    write_text(a.out, map.to_json());
    out << a.pair << " " << calib::to_string(opt.kernel) << " " << to_string(dir) << ": " << samples.size()
        << " samples, residual_rms " << map.fit_residual_rms << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct BuildAnchorsArgs
{
    std::string root;
    std::string kernel = "poly";
    std::string out;
};

int build_anchors(const BuildAnchorsArgs &a, std::ostream &out)
{
    const DatasetLayout layout(a.root);
    calib::AnchorOptions opt;
    opt.kernel = calib::kernel_from_string(a.kernel);
    const auto anchors = layout.pairs("anchor");
    if (anchors.empty())
        throw Error(ErrorCode::Io, "no anchor pairs under " + a.root);
    for (const auto &info : anchors) {
        const AnnotationRecord record = annotation_or_chart(layout, info.id, 0);
        const calib::AnchorBuild b = calib::build_anchor_pair(
            layout.load_image(info.id, "a_chart"), layout.load_image(info.id, "a_free"),
            layout.load_image(info.id, "b_chart"), layout.load_image(info.id, "b_free"), record, opt);
        const fs::path ab = fs::path(a.out) / (info.id + "_ab");
        const fs::path ba = fs::path(a.out) / (info.id + "_ba");
        save_image(b.a_to_b.image_a, ab / "a.raw16");
        save_image(b.a_to_b.image_b, ab / "b.raw16");
        write_text(ab / "map.json", b.map_ab.to_json());
        save_image(b.b_to_a.image_a, ba / "a.raw16");
        save_image(b.b_to_a.image_b, ba / "b.raw16");
        write_text(ba / "map.json", b.map_ba.to_json());
        out << info.id << ": residual A2B " << b.map_ab.fit_residual_rms << ", B2A " << b.map_ba.fit_residual_rms
            << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs
{
    std::string config;
    std::string root;
    std::string anchors;
    std::string out;
    std::string ablate;
    std::string log;
    std::string resume;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
};

nn::TrainingData load_training_data(const TrainArgs &a)
{
    const DatasetLayout layout(a.root);
    nn::TrainingData data;
    for (const auto &p : layout.unpaired('A'))
        data.unpaired_a.push_back(load_image(p));
    for (const auto &p : layout.unpaired('B'))
        data.unpaired_b.push_back(load_image(p));
    if (!a.anchors.empty()) {
        std::vector<fs::path> dirs;
        for (const auto &e : fs::directory_iterator(a.anchors))
            if (e.is_directory())
                dirs.push_back(e.path());
        std::sort(dirs.begin(), dirs.end());
        for (const auto &d : dirs)
            data.anchors.emplace_back(load_image(d / "a.raw16"), load_image(d / "b.raw16"));
    } else {
        for (const auto &info : layout.pairs("anchor"))
            data.anchors.emplace_back(layout.load_image(info.id, "a_free"), layout.load_image(info.id, "b_free"));
    }
    return data;
}

void apply_ablation(nn::TrainConfig &cfg, const std::string &ablate)
{
    if (ablate.empty())
        return;
    if (ablate == "no-Lr")
        cfg.loss_switches.use_r = false;
    else if (ablate == "no-La")
        cfg.loss_switches.use_a = false;
    else if (ablate == "no-Lm")
        cfg.loss_switches.use_m = false;
    else if (ablate == "m-only")
        cfg.loss_switches = {false, false, true};
}

int train(const TrainArgs &a, std::ostream &out)
{
    nn::TrainConfig cfg = a.config.empty() ? nn::TrainConfig{} : nn::load_train_config(a.config);
    apply_ablation(cfg, a.ablate);
    if (a.epochs)
        cfg.epochs = *a.epochs;
    if (a.seed)
        cfg.seed = *a.seed;

    const nn::TrainingData data = load_training_data(a);
    if (!data.unpaired_a.empty())
        cfg.arch.in_channels = data.unpaired_a.front().channels;
    else if (!data.anchors.empty())
        cfg.arch.in_channels = data.anchors.front().first.channels;
    cfg.validate();

    std::optional<nn::Checkpoint> resume;
    if (!a.resume.empty())
        resume = nn::load_checkpoint(a.resume);

    out << "training: " << data.unpaired_a.size() << "+" << data.unpaired_b.size() << " unpaired, "
        << data.anchors.size() << " anchors, " << nn::iterations_per_epoch(data, cfg) << " iterations/epoch\n";
    const auto on = [](bool b) { return b ? "on" : "off"; };
    out << "loss terms: L_r " << on(cfg.loss_switches.use_r) << ", L_a " << on(cfg.loss_switches.use_a) << ", L_m "
        << on(cfg.loss_switches.use_m) << "\n";
    const nn::TrainResult r = nn::train(data, cfg, resume ? &*resume : nullptr);
    nn::save_model(r.model, a.out);
    if (!a.log.empty())
        write_text(a.log, nn::loss_log_csv(r.log));
    if (!r.log.empty())
        out << "epochs " << r.epochs_completed << ", final loss " << r.log.back().total << "\n";
    if (r.aborted)
        throw Error(ErrorCode::Numeric, "training aborted: " + r.abort_reason);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct MapArgs
{
    std::string model;
    std::string in;
    std::string out;
    std::string direction = "A2B";
    int tile = 256;
    int overlap = 32;
};

int map_images(const MapArgs &a, std::ostream &out)
{
    const nn::MappingModel model = nn::load_model(a.model);
    const Direction dir = direction_from_string(a.direction);
    const nn::TileOptions tiles{a.tile, a.overlap};
    const auto inputs = list_frames(a.in);
    if (inputs.empty())
        throw Error(ErrorCode::Io, "no frames in " + a.in);
    const bool to_dir = fs::is_directory(a.in);
    for (const auto &p : inputs) {
        const fs::path dst = to_dir ? fs::path(a.out) / p.filename() : fs::path(a.out);
        save_image(nn::map_image(load_image(p), model, dir, tiles), dst);
        out << p.string() << " -> " << dst.string() << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs
{
    std::string mapped;
    std::string gt;
    std::string profile;
    std::string csv;
    std::string policy = "shared";
    std::string method = "mapped";
    std::string direction = "A2B";
};

int evaluate(const EvalArgs &a, std::ostream &out)
{
    const auto mapped = list_frames(a.mapped);
    if (mapped.empty())
        throw Error(ErrorCode::Io, "no frames in " + a.mapped);
    const bool gt_dir = fs::is_directory(a.gt);
    std::vector<eval::EvalItem> items;
    for (const auto &p : mapped) {
        const fs::path gt_path = gt_dir ? fs::path(a.gt) / p.filename() : fs::path(a.gt);
        const RawFrame gt = load_frame(gt_path);
        items.push_back({p.stem().string(), load_image(p), normalize(gt), gt.meta.illuminant, {}});
    }
    const eval::MetricsReport report = eval::evaluate(items, eval::load_profile(a.profile), kPolicies.at(a.policy),
                                                      a.method, a.direction);
    out << report.to_table();
    if (!a.csv.empty())
        write_text(a.csv, report.to_csv());
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct BaselineArgs
{
    std::string root;
    std::string method = "global-3x3";
    double beta = 0.01;
    std::string direction = "A2B";
    std::string policy = "shared";
    std::string csv;
};

int baseline(const BaselineArgs &a, std::ostream &out)
{
    const DatasetLayout layout(a.root);
    const Direction dir = direction_from_string(a.direction);
    baselines::RunOptions ro;
    ro.direction = dir;
    ro.profile = layout.profile(target_camera(dir));
    ro.policy = kPolicies.at(a.policy);
    const auto tests = load_tests(layout);

    eval::MetricsReport report;
    if (a.method == "identity") {
        report = baselines::identity_run(tests, ro);
    } else if (a.method == "fda") {
        baselines::FdaConfig cfg;
        cfg.beta = a.beta;
        cfg.validate();
        std::vector<PackedImage> targets;
        for (const auto &info : layout.pairs("anchor"))
            targets.push_back(layout.load_image(info.id, dir == Direction::A2B ? "b_free" : "a_free"));
        if (targets.empty())
            throw Error(ErrorCode::Io, "no anchor pairs under " + a.root);
        report = baselines::fda_run(targets, tests, cfg, ro);
    } else {
        const calib::Kernel kernel = a.method == "global-poly" ? calib::Kernel::Poly11 : calib::Kernel::Identity;
        std::vector<baselines::CalibrationAnchor> anchors;
        for (const auto &info : layout.pairs("anchor"))
            anchors.push_back({info.id, layout.load_image(info.id, "a_chart"), layout.load_image(info.id, "b_chart"),
                               annotation_or_chart(layout, info.id, 0)});
        if (anchors.empty())
            throw Error(ErrorCode::Io, "no anchor pairs under " + a.root);
        calib::AnchorOptions anchor_opt;
        anchor_opt.kernel = kernel;
        report = baselines::global_calibration_run(anchors, tests, kernel, ro, anchor_opt);
    }
    out << report.to_table();
    if (!a.csv.empty())
        write_text(a.csv, report.to_csv());
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct ServeArgs
{
    std::string root;
    std::string host = "127.0.0.1";
    int port = 8080;
};

int serve(const ServeArgs &a, std::ostream &out)
{
    if (a.root.empty())
        throw Error(ErrorCode::Config, "no dataset root (pass --root or set RAW2RAW_DATA_ROOT)");
    if (!fs::is_directory(a.root))
        throw Error(ErrorCode::Io, "dataset root not found: " + a.root);
    AnnotationService service(a.root);
    AnnotationServer server(service);
    const int port = server.bind(a.host, a.port);
    if (port < 0)
        throw Error(ErrorCode::Io, "cannot bind " + a.host + ":" + std::to_string(a.port));
    out << "serving " << a.root << " on http://" << a.host << ":" << port << "\n" << std::flush;
    return server.serve() ? kExitOk : kExitDataError;
}

} // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Raw-to-raw camera color mapping toolkit", "raw2raw"};
    app.require_subcommand(1, 1);
    const auto directions = CLI::IsMember(kDirections);
    const auto policies = CLI::IsMember(std::vector<std::string>{"shared", "gray-world", "mapped-gray-world"});
    const auto kernels = CLI::IsMember(std::vector<std::string>{"3x3", "poly"});

    SynthGenArgs sg;
    auto *c_sg = app.add_subcommand("synth-gen", "Generate a synthetic two-camera dataset");
    c_sg->add_option("--out", sg.out, "Dataset root to create")->required();
    c_sg->add_option("--seed", sg.seed, "Generator seed");
    c_sg->add_option("--unpaired", sg.unpaired, "Unpaired images per camera")->check(CLI::NonNegativeNumber);
    c_sg->add_option("--anchors", sg.anchors, "Anchor scene pairs")->check(CLI::NonNegativeNumber);
    c_sg->add_option("--tests", sg.tests, "Held-out test scene pairs")->check(CLI::NonNegativeNumber);
    c_sg->add_option("--size", sg.size, "Image side in pixels")->check(CLI::Range(32, 4096));
    c_sg->add_option("--sensor-b", sg.sensor_b, "Camera B relation to camera A")
        ->check(CLI::IsMember({"linear", "nonlinear"}));
    c_sg->add_flag("--auto-annotate", sg.auto_annotate, "Commit chart and flat-region annotations for anchors");

    FitCalibArgs fc;
    auto *c_fc = app.add_subcommand("fit-calib", "Fit a global color map on one annotated pair");
    c_fc->add_option("--root", fc.root, "Dataset root")->required();
    c_fc->add_option("--pair", fc.pair, "Pair id")->required();
    c_fc->add_option("--kernel", fc.kernel, "Feature kernel")->check(kernels);
    c_fc->add_option("--direction", fc.direction, "Mapping direction")->check(directions);
    c_fc->add_option("--out", fc.out, "Output map (JSON)")->required();

    BuildAnchorsArgs ba;
    auto *c_ba = app.add_subcommand("build-anchors", "Build anchor pairs from annotated chart scenes");
    c_ba->add_option("--root", ba.root, "Dataset root")->required();
    c_ba->add_option("--kernel", ba.kernel, "Feature kernel")->check(kernels);
    c_ba->add_option("--out", ba.out, "Output directory")->required();

    TrainArgs tr;
    auto *c_tr = app.add_subcommand("train", "Train the dual encoder-decoder mapping model");
    c_tr->add_option("--config", tr.config, "Training configuration (JSON)");
    c_tr->add_option("--root", tr.root, "Dataset root")->required();
    c_tr->add_option("--anchors", tr.anchors, "Anchor directory from build-anchors");
    c_tr->add_option("--out", tr.out, "Output model path")->required();
    c_tr->add_option("--ablate", tr.ablate, "Disable loss terms")
        ->check(CLI::IsMember({"no-Lr", "no-La", "no-Lm", "m-only"}));
    c_tr->add_option("--log", tr.log, "Per-epoch loss log (CSV)");
    c_tr->add_option("--resume", tr.resume, "Checkpoint to resume from");
    c_tr->add_option("--epochs", tr.epochs, "Override the configured epoch count")->check(CLI::PositiveNumber);
    c_tr->add_option("--seed", tr.seed, "Override the configured seed");

    MapArgs mp;
    auto *c_mp = app.add_subcommand("map", "Map raw images with a trained model");
    c_mp->add_option("--model", mp.model, "Model path")->required();
    c_mp->add_option("--in", mp.in, "Input frame or directory")->required();
    c_mp->add_option("--out", mp.out, "Output frame or directory")->required();
    c_mp->add_option("--direction", mp.direction, "Mapping direction")->check(directions);
    c_mp->add_option("--tile", mp.tile, "Tile side")->check(CLI::PositiveNumber);
    c_mp->add_option("--overlap", mp.overlap, "Tile overlap")->check(CLI::NonNegativeNumber);

    EvalArgs ev;
    auto *c_ev = app.add_subcommand("eval", "Score mapped images against ground truth");
    c_ev->add_option("--mapped", ev.mapped, "Mapped frame or directory")->required();
    c_ev->add_option("--gt", ev.gt, "Ground-truth frame or directory")->required();
    c_ev->add_option("--profile", ev.profile, "Target camera color profile")->required();
    c_ev->add_option("--csv", ev.csv, "CSV output");
    c_ev->add_option("--policy", ev.policy, "Illuminant policy")->check(policies);
    c_ev->add_option("--method", ev.method, "Method label");
    c_ev->add_option("--direction", ev.direction, "Direction label")->check(directions);

    BaselineArgs bl;
    auto *c_bl = app.add_subcommand("baseline", "Run a baseline on the test split");
    c_bl->add_option("--root", bl.root, "Dataset root")->required();
    c_bl->add_option("--method", bl.method, "Baseline")
        ->check(CLI::IsMember({"global-3x3", "global-poly", "fda", "identity"}));
    c_bl->add_option("--beta", bl.beta, "FDA window fraction")->check(CLI::Range(0.0, 0.5));
    c_bl->add_option("--direction", bl.direction, "Mapping direction")->check(directions);
    c_bl->add_option("--policy", bl.policy, "Illuminant policy")->check(policies);
    c_bl->add_option("--csv", bl.csv, "CSV output");

    ServeArgs sv;
    if (const char *env = std::getenv("RAW2RAW_DATA_ROOT"))
        sv.root = env;
    auto *c_sv = app.add_subcommand("annotate-serve", "Serve the annotation HTTP API");
    c_sv->add_option("--root", sv.root, "Dataset root (default: $RAW2RAW_DATA_ROOT)");
    c_sv->add_option("--host", sv.host, "Bind address");
    c_sv->add_option("--port", sv.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << "\n\n";
        const auto selected = app.get_subcommands();
        err << (selected.empty() ? app.help() : selected.front()->help());
        return kExitUsage;
    }

    try {
        if (c_sg->parsed())
            return synth_gen(sg, out);
        if (c_fc->parsed())
            return fit_calib(fc, out);
        if (c_ba->parsed())
            return build_anchors(ba, out);
        if (c_tr->parsed())
            return train(tr, out);
        if (c_mp->parsed())
            return map_images(mp, out);
        if (c_ev->parsed())
            return evaluate(ev, out);
        if (c_bl->parsed())
            return baseline(bl, out);
        if (c_sv->parsed())
            return serve(sv, out);
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitDataError;
    }
    err << app.help();
    return kExitUsage;
}

} // namespace raw2raw::tools

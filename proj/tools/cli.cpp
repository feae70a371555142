#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <optional>

#include "ktm/bench.hpp"
#include "ktm/io.hpp"
#include "ktm/matcher.hpp"
#include "ktm/projection.hpp"
#include "ktm/template_builder.hpp"

namespace ktm::cli {

namespace fs = std::filesystem;

namespace {

struct CloudProjectArgs {
    std::string features, depth, calib, mask, color, out, pixel_map;
    std::vector<double> workspace;
    std::uint32_t stride = 4;
    bool no_normalize = false;
};

struct CloudMergeArgs {
    std::vector<std::string> inputs;
    std::string out;
};

struct TemplateBuildArgs {
    std::string cloud, annotations, pixel_map, category, out;
    std::size_t fps = 0;
    std::optional<std::size_t> seed_index;
    FpsWeights weights;
};

struct MatchArgs {
    std::string tmpl, cloud, out, variant = "full";
    MatchParams params;
};

struct BenchRunArgs {
    std::string preset, config, out, summary;
    std::optional<std::size_t> scenes;
    std::optional<std::uint64_t> seed;
};

struct BenchCheckArgs {
    std::string report;
    bench::CheckThresholds thresholds;
};

void add_match_params(CLI::App *app, MatchParams &p) {
    app->add_option("--beta", p.beta, "Structure weight (per meter)")
            ->capture_default_str();
    app->add_option("--delta-f", p.delta_f, "Feature gate")
            ->capture_default_str();
    app->add_option("--delta-p", p.delta_p, "Fine search radius (m)")
            ->capture_default_str();
    app->add_option("--iterations", p.ransac_iterations, "RANSAC iterations")
            ->capture_default_str();
    app->add_option("--inlier-radius", p.ransac_inlier_radius,
                    "RANSAC inlier radius (m)")
            ->capture_default_str();
    app->add_option("--candidate-cap", p.candidate_cap,
                    "Candidates kept per keypoint")
            ->capture_default_str();
    app->add_option("--scale-min", p.scale_min)->capture_default_str();
    app->add_option("--scale-max", p.scale_max)->capture_default_str();
    app->add_option("--seed", p.rng_seed, "RANSAC seed")->capture_default_str();
}

fs::path resolve_config(const std::string &name) {
    fs::path p(name);
    if (fs::exists(p) || p.is_absolute()) return p;
    if (const char *dir = std::getenv("KTM_CONFIG_DIR")) {
        const fs::path candidate = fs::path(dir) / p;
        if (fs::exists(candidate)) return candidate;
    }
    return p;
}

void cloud_project(const CloudProjectArgs &a, std::ostream &out) {
    const auto features = io::read_feature_image(a.features);
    const auto depth = io::read_depth(a.depth);
    const auto calib = io::read_calibration(a.calib);
    std::optional<MaskImage> mask;
    std::optional<ColorImage> color;
    ProjectionOptions opts;
    if (!a.mask.empty()) {
        mask = io::read_mask_pgm(a.mask);
        opts.mask = &*mask;
    }
    if (!a.color.empty()) {
        color = io::read_color_ppm(a.color);
        opts.color = &*color;
    }
    if (!a.workspace.empty()) {
        const auto &w = a.workspace;
        opts.workspace = Workspace{Vec3(w[0], w[1], w[2]), Vec3(w[3], w[4], w[5])};
    }
    opts.stride = a.stride;
    opts.normalize = !a.no_normalize;
    const auto projected = project_with_pixels(
            features, depth, calib.intrinsics, calib.extrinsics, opts);
    io::write_cloud(a.out, projected.cloud);
    if (!a.pixel_map.empty()) {
        io::write_file_atomic(a.pixel_map,
                              io::dump_json(io::pixel_map_to_json(projected.pixels)));
    }
    out << "wrote " << projected.cloud.size() << " points to " << a.out << "\n";
}

void cloud_merge(const CloudMergeArgs &a, std::ostream &out) {
    std::vector<SemanticPointCloud> clouds;
    for (const auto &p : a.inputs) clouds.push_back(io::read_cloud(p));
    const auto merged = merge_clouds(clouds);
    io::write_cloud(a.out, merged);
    out << "wrote " << merged.size() << " points to " << a.out << "\n";
}

void template_build(const TemplateBuildArgs &a, std::ostream &out) {
    const auto cloud = io::read_cloud(a.cloud);
    std::optional<KnowledgeTemplate> tmpl;
    if (a.fps > 0) {
        tmpl = fps_sample(cloud, a.fps, a.weights, a.seed_index, a.category);
    } else {
        auto ann = io::annotations_from_json(io::parse_json(io::read_file(a.annotations)));
        std::vector<PixelCoord> pixels;
        if (!a.pixel_map.empty()) {
            pixels = io::pixel_map_from_json(io::parse_json(io::read_file(a.pixel_map)));
        }
        const std::string category =
                a.category.empty() ? ann.category : a.category;
        tmpl = build_from_annotations(cloud, ann.annotations, category,
                                      a.pixel_map.empty() ? nullptr : &pixels);
    }
    io::write_template(a.out, *tmpl);
    out << "wrote template with " << tmpl->size() << " keypoints to " << a.out
        << "\n";
}

int template_validate(const std::string &path, std::ostream &out) {
    const auto tmpl = io::read_template(path);
    const auto diags = validate_template(tmpl);
    out << "K: " << tmpl.size() << "\nfeature_dim: " << tmpl.feature_dim()
        << "\n";
    if (diags.empty()) out << "ok\n";
    for (const auto &d : diags) {
        out << "warning[" << to_string(d.code) << "]: " << d.message << "\n";
    }
    return 0;
}

void match(const MatchArgs &a, std::ostream &out) {
    const auto tmpl = io::read_template(a.tmpl);
    const auto cloud = io::read_cloud(a.cloud);
    io::MatchDocument doc{MatchResult{}, a.params, a.variant};
    if (a.variant == "top1") {
        doc.result = top1_match(tmpl, cloud, a.params);
    } else if (a.variant == "coarse") {
        const auto coarse = coarse_match(tmpl, cloud, a.params);
        doc.result = coarse_result(tmpl, cloud, coarse, a.params);
    } else {
        doc.result = match_template(tmpl, cloud, a.params);
    }
    io::write_match(a.out, doc);
    std::size_t matched = 0;
    for (const auto &k : doc.result.keypoints) matched += k.matched();
    out << "variant " << a.variant << ": " << matched << "/"
        << doc.result.keypoints.size() << " matched, objective "
        << doc.result.objective_value << "\n";
}

void bench_run(const BenchRunArgs &a, std::ostream &out) {
    bench::SuiteConfig config;
    if (!a.config.empty()) {
        const fs::path path = resolve_config(a.config);
        std::string text;
        try {
            text = io::read_file(path);
        } catch (const IoError &e) {
            throw ConfigError(e.what(), 0);
        }
        config = bench::parse_config(text);
    } else {
        config = bench::preset_config(a.preset.empty() ? "ablation" : a.preset);
    }
    if (a.scenes) config.scenes = *a.scenes;
    if (a.seed) config.seed = *a.seed;
    if (!a.out.empty()) config.output = a.out;

    const auto report = bench::run_suite(config);
    io::write_file_atomic(config.output,
                          io::dump_json(bench::report_to_json(report)));
    const std::string table = bench::summary_table(report);
    const fs::path summary = a.summary.empty()
                                     ? fs::path(config.output).replace_extension(".txt")
                                     : fs::path(a.summary);
    io::write_file_atomic(summary, table);
    out << table << "report: " << config.output << "\nsummary: "
        << summary.string() << "\n";
}

int bench_check(const BenchCheckArgs &a, std::ostream &out) {
    const auto doc = io::parse_json(io::read_file(a.report));
    const auto checks = bench::check_report(doc, a.thresholds);
    bool all = true;
    for (const auto &c : checks) {
        out << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail
            << "\n";
        all = all && c.passed;
    }
    if (checks.empty()) out << "no applicable checks\n";
    return all ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err) {
    CLI::App app{"Semantic keypoint template matching", "ktm"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP threads (0: runtime default)")
            ->check(CLI::NonNegativeNumber);

    // cloud
    auto *cloud = app.add_subcommand("cloud", "Point cloud construction");
    cloud->require_subcommand(1);
    CloudProjectArgs cp;
    auto *project_cmd = cloud->add_subcommand(
            "project", "Feature image + depth + calibration -> SPCF");
    project_cmd->add_option("--features", cp.features, "SFIM file")->required();
    project_cmd->add_option("--depth", cp.depth, "SDEP file")->required();
    project_cmd->add_option("--calib", cp.calib, "Calibration JSON")->required();
    project_cmd->add_option("--mask", cp.mask, "Object mask (binary PGM)");
    project_cmd->add_option("--color", cp.color, "Color image (binary PPM)");
    project_cmd->add_option("--workspace", cp.workspace,
                            "Crop box: xmin ymin zmin xmax ymax zmax")
            ->expected(6);
    project_cmd->add_option("--stride", cp.stride, "Pixel subsampling stride")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
    project_cmd->add_flag("--no-normalize", cp.no_normalize,
                          "Keep raw descriptor norms");
    project_cmd->add_option("--pixel-map", cp.pixel_map,
                            "Also write the source pixel of each point (JSON)");
    project_cmd->add_option("--out", cp.out, "Output SPCF")->required();

    CloudMergeArgs cm;
    auto *merge_cmd = cloud->add_subcommand("merge", "Concatenate SPCF clouds");
    merge_cmd->add_option("inputs", cm.inputs, "Input SPCF files")
            ->required()
            ->expected(1, -1);
    merge_cmd->add_option("--out", cm.out, "Output SPCF")->required();

    // template
    auto *tmpl = app.add_subcommand("template", "Knowledge templates");
    tmpl->require_subcommand(1);
    TemplateBuildArgs tb;
    auto *build_cmd = tmpl->add_subcommand("build", "SPCF -> template JSON");
    build_cmd->add_option("--cloud", tb.cloud, "Source SPCF")->required();
    auto *fps_opt = build_cmd->add_option("--fps", tb.fps,
                                          "Farthest point sampling with K keypoints");
    auto *ann_opt = build_cmd->add_option("--annotations", tb.annotations,
                                          "Annotation JSON");
    fps_opt->excludes(ann_opt);
    build_cmd->add_option("--pixel-map", tb.pixel_map,
                          "Pixel map from `cloud project` (pixel annotations)");
    build_cmd->add_option("--category", tb.category, "Category label");
    build_cmd->add_option("--seed-index", tb.seed_index,
                          "First FPS point (default: nearest the centroid)");
    build_cmd->add_option("--w-position", tb.weights.position)
            ->capture_default_str();
    build_cmd->add_option("--w-color", tb.weights.color)->capture_default_str();
    build_cmd->add_option("--w-feature", tb.weights.feature)
            ->capture_default_str();
    build_cmd->add_option("--out", tb.out, "Output template JSON")->required();

    std::string validate_path;
    auto *validate_cmd = tmpl->add_subcommand("validate", "Template diagnostics");
    validate_cmd->add_option("template", validate_path)->required();

    // match
    MatchArgs ma;
    auto *match_cmd = app.add_subcommand("match", "Match a template to a cloud");
    match_cmd->add_option("--template", ma.tmpl)->required();
    match_cmd->add_option("--cloud", ma.cloud)->required();
    match_cmd->add_option("--variant", ma.variant)
            ->capture_default_str()
            ->check(CLI::IsMember({"top1", "coarse", "full"}));
    add_match_params(match_cmd, ma.params);
    match_cmd->add_option("--out", ma.out, "Output match JSON")->required();

    // bench
    auto *bench_cmd = app.add_subcommand("bench", "Synthetic benchmark");
    bench_cmd->require_subcommand(1);
    BenchRunArgs br;
    auto *run_cmd = bench_cmd->add_subcommand("run", "Run a scene suite");
    auto *preset_opt = run_cmd->add_option("--preset", br.preset,
                                           "Built-in preset (default ablation)")
                               ->check(CLI::IsMember(bench::preset_names()));
    auto *config_opt = run_cmd->add_option(
            "--config", br.config,
            "Config file; relative names also searched in $KTM_CONFIG_DIR");
    preset_opt->excludes(config_opt);
    run_cmd->add_option("--scenes", br.scenes, "Override scene count");
    run_cmd->add_option("--seed", br.seed, "Override suite seed");
    run_cmd->add_option("--out", br.out, "Report JSON path");
    run_cmd->add_option("--summary", br.summary,
                        "Summary table path (default: report with .txt)");

    BenchCheckArgs bc;
    auto *check_cmd = bench_cmd->add_subcommand("check", "Dominance checks on a report");
    check_cmd->add_option("report", bc.report)->required();
    check_cmd->add_option("--min-gap", bc.thresholds.min_matched_rate_gap,
                          "Also require this full/top1 matched-rate ratio");
    check_cmd->add_option("--min-fine-wins", bc.thresholds.min_fine_win_fraction,
                          "Required fraction of scenes where full beats coarse")
            ->capture_default_str();

    std::string inspect_path;
    auto *inspect_cmd = app.add_subcommand("inspect", "Summarize any supported file");
    inspect_cmd->add_option("file", inspect_path)->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    if (threads > 0) {
#ifdef _OPENMP
        omp_set_num_threads(threads);
#endif
    }

    try {
        if (*project_cmd) cloud_project(cp, out);
        else if (*merge_cmd) cloud_merge(cm, out);
        else if (*build_cmd) {
            if (tb.fps == 0 && tb.annotations.empty()) {
                err << "template build: one of --fps or --annotations is required\n";
                return 2;
            }
            template_build(tb, out);
        } else if (*validate_cmd) return template_validate(validate_path, out);
        else if (*match_cmd) match(ma, out);
        else if (*run_cmd) bench_run(br, out);
        else if (*check_cmd) return bench_check(bc, out);
        else if (*inspect_cmd) out << io::describe_file(inspect_path);
        return 0;
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace ktm::cli

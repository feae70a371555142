// Acceptance run: prints one [PASS]/[FAIL] line per criterion and exits
// non-zero if any fails. argv[1] is the path of the ktm executable.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

#include "ktm/bench.hpp"
#include "ktm/io.hpp"
#include "ktm/matcher.hpp"
#include "ktm/template_builder.hpp"
#include "test_support.hpp"

using namespace ktm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool passed;
    std::string detail;
};

bool near_transform(const SimilarityTransform &a, const SimilarityTransform &b, double tol) {
    return rotation_error(a.rotation(), b.rotation()) < tol &&
           (a.translation() - b.translation()).norm() < tol &&
           std::abs(a.scale() - b.scale()) < tol;
}

Outcome umeyama_exactness() {
    std::mt19937_64 rng(20240601);
    const auto t0 = Clock::now();
    double worst_r = 0, worst_t = 0, worst_s = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 10 + rng() % 41;
        const auto truth = test::random_similarity(rng, 0.5, 2.0);
        std::vector<Vec3> src, dst;
        for (std::size_t j = 0; j < n; ++j) {
            src.push_back(test::uniform_vec(rng, -1, 1));
            dst.push_back(truth.apply(src.back()));
        }
        const auto est = umeyama(src, dst);
        worst_r = std::max(worst_r, rotation_error(est.rotation(), truth.rotation()));
        worst_t = std::max(worst_t, (est.translation() - truth.translation()).norm());
        worst_s = std::max(worst_s, std::abs(est.scale() - truth.scale()));
    }
    const double t = seconds_since(t0);
    std::ostringstream d;
    d << "max errors rot " << worst_r << " rad, trans " << worst_t << " m, scale " << worst_s
      << "; " << t << " s";
    return {worst_r < 1e-9 && worst_t < 1e-9 && worst_s < 1e-9 && t < 5.0, d.str()};
}

Outcome self_registration() {
    std::size_t ok = 0, total = 0;
    double worst_obj = 0.0, worst_rot = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto cloud = test::random_cloud(100 + seed * 8, 32, seed, 0.5);
        const auto tmpl = fps_sample(cloud, 3 + seed % 18);
        MatchParams p;
        p.rng_seed = seed;
        const auto r = match_template(tmpl, cloud, p);
        const double rot = rotation_angle(r.transform.rotation());
        bool all_matched = true;
        for (const auto &k : r.keypoints) all_matched = all_matched && k.matched();
        worst_obj = std::max(worst_obj, std::abs(r.objective_value));
        worst_rot = std::max(worst_rot, rot);
        ++total;
        ok += rot < 1e-9 && all_matched && std::abs(r.objective_value) <= 1e-9;
    }
    std::ostringstream d;
    d << ok << "/" << total << " templates; max rotation " << worst_rot << " rad, max |objective| "
      << worst_obj;
    return {ok == total, d.str()};
}

Outcome clutter_recovery() {
    auto cfg = bench::preset_config("clutter");
    std::size_t ok = 0;
    for (std::size_t s = 0; s < 200; ++s) {
        const auto inst = bench::generate_scene(bench::scene_spec_for(cfg, s));
        try {
            const auto c = coarse_match(inst.tmpl, inst.cloud, bench::match_params_for(cfg, s));
            ok += near_transform(c.transform, inst.true_transform, 1e-6);
        } catch (const Error &) {
        }
    }
    std::ostringstream d;
    d << ok << "/200 scenes within 1e-6 (500 distractors)";
    return {ok >= 198, d.str()};
}

Outcome occlusion_robustness() {
    auto cfg = bench::preset_config("occlusion");
    std::size_t ok = 0;
    const std::size_t scenes = 100;
    double worst = 0.0;
    for (std::size_t s = 0; s < scenes; ++s) {
        const auto inst = bench::generate_scene(bench::scene_spec_for(cfg, s));
        const auto r = match_template(inst.tmpl, inst.cloud, bench::match_params_for(cfg, s));
        bool good = near_transform(r.transform, inst.true_transform, 1e-6);
        for (std::size_t k = 0; k < inst.visible.size(); ++k) {
            if (inst.visible[k]) continue;
            const double e = (r.keypoints[k].position - inst.true_positions[k]).norm();
            worst = std::max(worst, e);
            good = good && !r.keypoints[k].matched() && e < 1e-6;
        }
        ok += good;
    }
    std::ostringstream d;
    d << ok << "/" << scenes << " scenes (K = 10, 4 occluded); max occluded error " << worst << " m";
    return {ok == scenes, d.str()};
}

Outcome ablation_ordering() {
    const auto cfg = bench::preset_config("ablation");
    const auto t0 = Clock::now();
    const auto report = bench::run_suite(cfg);
    const double t = seconds_since(t0);
    const bench::VariantSummary *top1 = nullptr, *full = nullptr;
    for (const auto &s : report.summary) {
        if (s.variant == bench::Variant::top1) top1 = &s;
        if (s.variant == bench::Variant::full) full = &s;
    }
    const double gap = full->matched_rate / std::max(top1->matched_rate, 1e-12);
    std::ostringstream d;
    d << "top1 " << top1->average_error * 100 << " cm / " << top1->matched_rate * 100
      << "%, template " << full->average_error * 100 << " cm / " << full->matched_rate * 100
      << "%, gap " << gap << "x; " << t << " s";
    return {full->average_error < top1->average_error && full->matched_rate > top1->matched_rate &&
                    gap >= 1.5 && t < 60.0,
            d.str()};
}

Outcome fine_stage_value() {
    const auto cfg = bench::preset_config("deformation");
    const auto report = bench::run_suite(cfg);
    std::size_t wins = 0;
    const std::size_t nv = cfg.variants.size();
    for (std::size_t i = 0; i < report.rows.size(); i += nv) {
        double coarse = -1, full = -1;
        for (std::size_t j = 0; j < nv; ++j) {
            const auto &m = report.rows[i + j].metrics;
            if (!m.ok) continue;
            if (m.variant == bench::Variant::coarse) coarse = m.average_error;
            if (m.variant == bench::Variant::full) full = m.average_error;
        }
        wins += coarse >= 0 && full >= 0 && full < coarse;
    }
    std::ostringstream d;
    d << wins << "/" << cfg.scenes << " scenes where coarse+fine beats coarse-only";
    return {wins * 100 >= 95 * cfg.scenes, d.str()};
}

Outcome fps_oracle() {
    std::mt19937_64 rng(99);
    std::size_t ok = 0;
    for (std::uint64_t c = 0; c < 100; ++c) {
        const std::size_t n = 20 + rng() % 281;
        const std::size_t k = 1 + rng() % 20;
        auto cloud = test::random_cloud(n, 4 + c % 13, 1000 + c);
        if (c % 4 == 0) {
            // Duplicate a third of the points to force exact ties.
            std::vector<Vec3> pos = cloud.positions(), col = cloud.colors();
            std::vector<double> f = cloud.feature_data();
            for (std::size_t i = 0; i < n / 3; ++i) {
                pos.push_back(cloud.position(i));
                col.push_back(cloud.color(i));
                const auto fi = cloud.feature(i);
                f.insert(f.end(), fi.begin(), fi.end());
            }
            cloud = SemanticPointCloud(cloud.feature_dim(), pos, col, f, true);
        }
        const FpsWeights w{1.0 + (c % 3), c % 5 ? 1.0 : 0.0, 0.5 + (c % 2)};
        const auto order = test::brute_fps(cloud, k, test::brute_centroid_nearest(cloud), w);
        bool same = true;
        try {
            const auto tmpl = fps_sample(cloud, k, w);
            for (std::size_t j = 0; j < k; ++j) same = same && tmpl.position(j) == cloud.position(order[j]);
        } catch (const DegenerateGeometryError &) {
            std::vector<Vec3> picked;
            for (auto i : order) picked.push_back(cloud.position(i));
            same = is_collinear(picked);
        }
        ok += same;
    }
    std::ostringstream d;
    d << ok << "/100 clouds identical to the O(n^2 k) reference";
    return {ok == 100, d.str()};
}

std::string read_or_empty(const std::filesystem::path &p) {
    try {
        return io::read_file(p);
    } catch (const Error &) {
        return {};
    }
}

Outcome cli_determinism(const std::string &exe) {
    test::TempDir dir;
    const auto fx = test::make_rgbd(64, 48, 24, 5);
    io::write_feature_image(dir / "f.sfim", fx.features);
    io::write_depth(dir / "d.sdep", fx.depth);
    io::write_calibration(dir / "calib.json", fx.calib);
    io::write_file_atomic(dir / "small.cfg", "preset = ablation\nscenes = 10\n");
    io::write_file_atomic(dir / "ann.json", "{\"category\": \"mug\", \"annotations\": [0, 7, 19, 42]}");

    auto q = [](const std::filesystem::path &p) { return "'" + p.string() + "'"; };
    const std::string k = q(exe) + " ";
    const std::vector<std::pair<std::string, std::string>> steps{
            {"c.spcf", "cloud project --features " + q(dir / "f.sfim") + " --depth " + q(dir / "d.sdep") +
                               " --calib " + q(dir / "calib.json") + " --stride 2 --out " + q(dir / "c.spcf") +
                               " --pixel-map " + q(dir / "px.json")},
            {"m.spcf", "cloud merge " + q(dir / "c.spcf") + " " + q(dir / "c.spcf") + " --out " + q(dir / "m.spcf")},
            {"a.json", "template build --cloud " + q(dir / "m.spcf") + " --annotations " + q(dir / "ann.json") +
                               " --out " + q(dir / "a.json")},
            {"t.json", "template build --cloud " + q(dir / "c.spcf") + " --fps 10 --out " + q(dir / "t.json")},
            {"top1.json", "match --variant top1 --template " + q(dir / "t.json") + " --cloud " +
                                  q(dir / "c.spcf") + " --out " + q(dir / "top1.json")},
            {"coarse.json", "match --variant coarse --seed 3 --template " + q(dir / "t.json") + " --cloud " +
                                    q(dir / "c.spcf") + " --out " + q(dir / "coarse.json")},
            {"full.json", "match --variant full --seed 3 --template " + q(dir / "t.json") + " --cloud " +
                                  q(dir / "c.spcf") + " --out " + q(dir / "full.json")},
            {"r.json", "bench run --config " + q(dir / "small.cfg") + " --out " + q(dir / "r.json")},
    };
    std::vector<std::string> first;
    std::size_t same = 0, total = 0;
    for (int round = 0; round < 2; ++round) {
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const std::string cmd = k + steps[i].second + " > /dev/null";
            if (std::system(cmd.c_str()) != 0) {
                return {false, "command failed: " + steps[i].second};
            }
            std::string bytes = read_or_empty(dir / steps[i].first);
            if (steps[i].first == "r.json") {
                auto doc = io::parse_json(bytes);
                doc.erase("generated_at");
                bytes = io::dump_json(doc);
                bytes += read_or_empty(dir / "r.txt");
            }
            if (steps[i].first == "c.spcf") bytes += read_or_empty(dir / "px.json");
            if (round == 0) {
                first.push_back(bytes);
            } else {
                ++total;
                same += !bytes.empty() && bytes == first[i];
            }
        }
    }
    std::ostringstream d;
    d << same << "/" << total << " CLI outputs byte-identical on rerun";
    return {same == total, d.str()};
}

Outcome format_round_trips() {
    std::vector<std::string> failures;
    auto check = [&](bool ok, const std::string &what) {
        if (!ok) failures.push_back(what);
    };
    auto r32 = [](double x) { return double(float(x)); };
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto c = test::random_cloud(1 + seed * 13, 1 + seed % 9, seed);
        std::vector<Vec3> pos, col;
        std::vector<double> f;
        for (std::size_t i = 0; i < c.size(); ++i) {
            pos.push_back(test::round_f32(c.position(i)));
            col.push_back(test::round_f32(c.color(i)));
            for (double x : c.feature(i)) f.push_back(r32(x));
        }
        const SemanticPointCloud cloud(c.feature_dim(), pos, col, f, false);
        check(io::decode_cloud(io::encode_cloud(cloud)) == cloud, "SPCF round-trip");
        const auto fx = test::make_rgbd(3 + seed, 2 + seed, 1 + seed % 4, seed);
        check(io::decode_feature_image(io::encode_feature_image(fx.features)) == fx.features, "SFIM round-trip");
        check(io::decode_depth(io::encode_depth(fx.depth)) == fx.depth, "SDEP round-trip");
        const auto tmpl = fps_sample(c.size() >= 3 ? c : test::random_cloud(10, 3, seed), 3);
        check(io::template_from_json(io::parse_json(io::dump_json(io::template_to_json(tmpl)))) == tmpl,
              "template round-trip");
        MatchParams p;
        p.rng_seed = seed * 0x9E3779B97F4A7C15ull;
        const auto big = test::random_cloud(120, 8, seed + 500, 0.4);
        const io::MatchDocument doc{match_template(fps_sample(big, 6), big, p), p, "full"};
        check(io::match_from_json(io::parse_json(io::dump_json(io::match_to_json(doc)))) == doc,
              "match round-trip");
    }

    const auto cloud = test::random_cloud(10, 4, 1);
    const std::string good = io::encode_cloud(cloud);
    const std::size_t rec = 40;
    auto offset_of = [](const std::function<void()> &f) -> std::int64_t {
        try {
            f();
        } catch (const FormatError &e) {
            return static_cast<std::int64_t>(e.offset());
        }
        return -1;
    };
    std::string bad = good;
    bad.replace(0, 4, "XXXX");
    try {
        io::decode_cloud(bad);
        check(false, "bad magic accepted");
    } catch (const BadMagicError &e) {
        check(e.offset() == 0, "bad magic offset");
    }
    bad = good;
    bad[8] = static_cast<char>(11);  // point_count overstated by one
    try {
        io::decode_cloud(bad);
        check(false, "truncation accepted");
    } catch (const TruncatedPayloadError &e) {
        check(e.offset() == 17 + 10 * rec, "truncation offset");
    }
    bad = good;
    bad[4] = 9;
    check(offset_of([&] { io::decode_cloud(bad); }) == 4, "version offset");
    bad = good;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bad.data() + 17 + 3 * rec + 8, &nan, 4);
    try {
        io::decode_cloud(bad);
        check(false, "NaN accepted");
    } catch (const NonFiniteValueError &e) {
        check(e.offset() == 17 + 3 * rec + 8, "NaN offset");
    }
    auto doc = io::template_to_json(fps_sample(cloud, 3));
    doc["keypoints"][1]["extra"] = true;
    try {
        io::template_from_json(doc);
        check(false, "unknown field accepted");
    } catch (const FormatError &e) {
        check(e.json_path() == "/keypoints/1/extra", "JSON path");
    }

    std::string d = failures.empty() ? "SPCF/SFIM/SDEP/template/match lossless; positioned errors correct"
                                     : "failed:";
    for (const auto &f : failures) d += " " + f + ";";
    return {failures.empty(), d};
}

}  // namespace

int main(int argc, char **argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-ktm>\n";
        return 2;
    }
    const std::string exe = argv[1];
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
            {"umeyama exactness", umeyama_exactness},
            {"self-registration", self_registration},
            {"transform recovery under clutter", clutter_recovery},
            {"occlusion robustness", occlusion_robustness},
            {"ablation ordering", ablation_ordering},
            {"fine-stage value on deformation scenes", fine_stage_value},
            {"FPS oracle equivalence", fps_oracle},
            {"CLI determinism", [&] { return cli_determinism(exe); }},
            {"format round-trips", format_round_trips},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.passed;
        std::cout << (o.passed ? "[PASS] " : "[FAIL] ") << "criterion " << i + 1 << " ("
                  << criteria[i].first << "): " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}

// scdlab: command-line driver for data generation, feature export, training,
// evaluation, sweeps and ablations.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scd/backbone.hpp"
#include "scd/datagen.hpp"
#include "scd/error.hpp"
#include "scd/evaluation.hpp"
#include "scd/hash.hpp"
#include "scd/kernels.hpp"
#include "scd/manifest.hpp"
#include "scd/model.hpp"
#include "scd/training.hpp"

namespace fs = std::filesystem;
using namespace scd;

namespace {

constexpr const char* kToolVersion = "scdlab 0.1.0";

void log_line(const std::string& s) { std::cout << s << std::endl; }

std::string config_hash(const std::string& resolved) { return Fnv1a().update(resolved).hex(); }

// key=value, resolved options first.
void write_run_meta(const fs::path& path, const std::string& command, const std::string& resolved,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
    std::ostringstream o;
    o << "tool=" << kToolVersion << "\n";
    o << "command=" << command << "\n";
    o << "format.manifest=" << kManifestVersion << "\n";
    o << "format.scdf=1\nformat.scdm=1\nformat.scdb=1\n";
    o << "config_hash=" << config_hash(resolved) << "\n";
    for (const auto& [k, v] : extra) o << k << "=" << v << "\n";
    o << "[resolved]\n" << resolved;
    if (!resolved.empty() && resolved.back() != '\n') o << "\n";
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    o << "[run]\ntimestamp=" << stamp << "\n";
    const std::string text = o.str();
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f || std::fwrite(text.data(), 1, text.size(), f) != text.size() || std::fclose(f) != 0) {
        throw IoError("cannot write " + path.string());
    }
}

fs::path meta_for_file(const fs::path& output) {
    fs::path p = output;
    p.replace_extension(".run.meta");
    return p;
}

fs::path sibling(const fs::path& output, const std::string& suffix) {
    fs::path p = output;
    p.replace_extension(suffix);
    return p;
}

std::vector<PairManifest> load_manifests(const std::vector<std::string>& paths, bool check_files = true) {
    std::vector<PairManifest> out;
    for (const auto& p : paths) out.push_back(read_manifest(p, check_files));
    return out;
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& text) {
    const auto x = text.find('x');
    try {
        if (x == std::string::npos) {
            const auto s = std::stoul(text);
            return {s, s};
        }
        return {std::stoul(text.substr(0, x)), std::stoul(text.substr(x + 1))};
    } catch (const std::exception&) {
        throw UsageError("size must look like WxH, got '" + text + "'");
    }
}

std::optional<BackboneInfo> backbone_info_from(const fs::path& features_dir) {
    const fs::path p = features_dir / "backbone.scdb";
    if (!fs::exists(p)) return std::nullopt;
    const ToyBackbone bb = read_backbone(p);
    BackboneInfo info{bb.seed(), bb.dim(), std::nullopt};
    if (bb.fitted()) info.stats = bb.stats();
    return info;
}

std::vector<std::string> unique_images(const std::vector<PairManifest>& manifests) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& m : manifests)
        for (const auto& r : m.records)
            for (const auto* img : {&r.t0, &r.t1})
                if (seen.insert(*img).second) out.push_back(*img);
    return out;
}

std::vector<ComparatorKind> parse_kinds(const std::vector<std::string>& names) {
    std::vector<ComparatorKind> kinds;
    for (const auto& n : names) kinds.push_back(parse_comparator(n));
    return kinds;
}

QueryOrientation parse_orientation(const std::string& s) {
    if (s == "t0") return QueryOrientation::T0Queries;
    if (s == "t1") return QueryOrientation::T1Queries;
    throw UsageError("orientation must be t0 or t1");
}

void print_eval(const EvalReport& report) {
    for (const auto& s : report.splits) {
        log_line("split " + s.split + ": mean F1 " + format_value(s.mean) + " over " + std::to_string(s.count) +
                 " pairs");
    }
    log_line("avg " + format_value(report.avg));
    ConfusionCounts pooled;
    for (const auto& r : report.rows) pooled += r.counts;
    log_line("pixels tp " + std::to_string(pooled.tp) + " fp " + std::to_string(pooled.fp) + " fn " +
             std::to_string(pooled.fn) + " tn " + std::to_string(pooled.tn));
    for (const auto& f : report.failures) log_line("failed " + f.split + " " + f.pair_id + ": " + f.message);
    std::ostringstream t;
    t << "wall clock " << report.seconds << " s";
    log_line(t.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scene change detection lab"};
    app.set_config("--config", "", "Flat key=value recipe file; flags take precedence");
    app.require_subcommand(1);
    int jobs = 1;
    app.add_option("--jobs,-j", jobs, "Worker threads")->check(CLI::PositiveNumber);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset with aligned and Diff-k manifests");
    std::string gen_out, gen_size = "224x224";
    std::size_t gen_scenes = 8, gen_frames = 6, gen_objects = 6;
    std::uint64_t gen_seed = 0;
    double gen_rate = 0.5, gen_step = 8.0, gen_rot = 1.0, gen_rmin = 14.0, gen_rmax = 36.0;
    bool gen_snap = false;
    std::vector<std::size_t> gen_ks{1, 2};
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--scenes", gen_scenes, "Number of scenes")->check(CLI::PositiveNumber);
    gen->add_option("--frames", gen_frames, "Views per scene")->check(CLI::PositiveNumber);
    gen->add_option("--size", gen_size, "Image size WxH (multiples of 14)");
    gen->add_option("--seed", gen_seed, "Dataset seed");
    gen->add_option("--change-rate", gen_rate, "Probability that an object appears or vanishes");
    gen->add_option("--max-step", gen_step, "Maximum camera translation per view (px)");
    gen->add_option("--max-rotation", gen_rot, "Maximum camera rotation per view (deg)");
    gen->add_option("--objects", gen_objects, "Objects per scene");
    gen->add_option("--min-radius", gen_rmin, "Smallest object radius (px)");
    gen->add_option("--max-radius", gen_rmax, "Largest object radius (px)");
    gen->add_flag("--grid-snap", gen_snap, "Axis-aligned objects on the patch grid");
    gen->add_option("--diff-k", gen_ks, "Neighbour distances to emit");

    // features
    auto* feat = app.add_subcommand("features", "Export toy-backbone features or validate imported SCDF files");
    std::vector<std::string> feat_manifests;
    std::string feat_out, feat_backbone = "toy", feat_import, feat_backbone_file, feat_fit_manifest;
    std::size_t feat_dim = 384;
    std::uint64_t feat_seed = 0;
    feat->add_option("--manifest", feat_manifests, "Manifest(s) whose images are encoded")->required();
    auto* feat_out_opt = feat->add_option("--out", feat_out, "Feature directory");
    feat->add_option("--backbone", feat_backbone, "Backbone (toy)");
    feat->add_option("--dim", feat_dim, "Feature dimension")->check(CLI::PositiveNumber);
    feat->add_option("--seed", feat_seed, "Backbone seed");
    feat->add_option("--backbone-file", feat_backbone_file, "Reuse a fitted backbone.scdb");
    feat->add_option("--fit-manifest", feat_fit_manifest, "Fit normalisation on this manifest's images instead");
    auto* import_opt = feat->add_option("--import", feat_import, "Validate an externally produced SCDF directory");
    import_opt->excludes(feat_out_opt);

    // train
    auto* tr = app.add_subcommand("train", "Train a change model");
    std::string tr_manifest, tr_features, tr_out, tr_kind = "cross", tr_orient = "t0", tr_resume, tr_ckpt_dir;
    TrainConfig tc;
    tr->add_option("--manifest", tr_manifest, "Training manifest")->required();
    tr->add_option("--features", tr_features, "Feature directory")->required();
    tr->add_option("--comparator", tr_kind, "cross|diff|concat|corr");
    tr->add_option("--steps", tc.steps, "Optimiser steps")->check(CLI::PositiveNumber);
    tr->add_option("--batch", tc.batch, "Batch size")->check(CLI::PositiveNumber);
    tr->add_option("--lr", tc.lr0, "Initial learning rate");
    tr->add_option("--seed", tc.seed, "Training seed");
    tr->add_option("--heads", tc.model.heads, "Attention heads");
    tr->add_option("--blocks", tc.model.blocks, "Cross-attention blocks (1 or 2)");
    tr->add_option("--orientation", tr_orient, "Queries of the first block: t0|t1");
    tr->add_option("--w-change", tc.weights.change, "Loss weight of the change class");
    tr->add_option("--w-unchanged", tc.weights.unchanged, "Loss weight of the unchanged class");
    tr->add_option("--checkpoint-every", tc.checkpoint_every, "Checkpoint cadence in steps (0 = off)");
    tr->add_option("--checkpoint-dir", tr_ckpt_dir, "Checkpoint directory (default: next to --out)");
    tr->add_option("--resume", tr_resume, "Resume from a checkpoint");
    tr->add_option("--out", tr_out, "Model file")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "Per-image F1 on one or more splits");
    std::string ev_model, ev_features, ev_report, ev_plot;
    std::vector<std::string> ev_manifests;
    bool ev_micro = false;
    ev->add_option("--model", ev_model, "Model file")->required();
    ev->add_option("--manifest", ev_manifests, "Split manifest(s)")->required();
    ev->add_option("--features", ev_features, "Feature directory")->required();
    ev->add_option("--report", ev_report, "CSV report")->required();
    ev->add_option("--plot", ev_plot, "SVG plot");
    ev->add_flag("--micro", ev_micro, "Pixel-pooled instead of per-image averaging");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Affine robustness sweep on t0 images");
    std::string sw_model, sw_manifest, sw_mode = "translate", sw_report, sw_plot;
    double sw_range = 255, sw_stride = 15;
    sw->add_option("--model", sw_model, "Model file")->required();
    sw->add_option("--manifest", sw_manifest, "Split manifest")->required();
    sw->add_option("--mode", sw_mode, "translate|rotate");
    sw->add_option("--range", sw_range, "Largest offset (px) or angle (deg)");
    sw->add_option("--stride", sw_stride, "Step between sweep points");
    sw->add_option("--report", sw_report, "CSV report")->required();
    sw->add_option("--plot", sw_plot, "SVG plot");

    // ablate
    auto* ab = app.add_subcommand("ablate", "Train and compare comparator kinds");
    std::string ab_train, ab_features, ab_eval_features, ab_report, ab_plot, ab_models;
    std::vector<std::string> ab_eval, ab_kinds{"cross", "diff"};
    TrainConfig ac;
    ab->add_option("--train", ab_train, "Training manifest")->required();
    ab->add_option("--features", ab_features, "Training feature directory")->required();
    ab->add_option("--eval", ab_eval, "Evaluation manifests")->required();
    ab->add_option("--eval-features", ab_eval_features, "Evaluation feature directory (default: --features)");
    ab->add_option("--comparators", ab_kinds, "Comparator kinds")->delimiter(',');
    ab->add_option("--steps", ac.steps, "Optimiser steps")->check(CLI::PositiveNumber);
    ab->add_option("--batch", ac.batch, "Batch size")->check(CLI::PositiveNumber);
    ab->add_option("--lr", ac.lr0, "Initial learning rate");
    ab->add_option("--seed", ac.seed, "Training seed");
    ab->add_option("--report", ab_report, "CSV report")->required();
    ab->add_option("--plot", ab_plot, "SVG plot");
    ab->add_option("--models-dir", ab_models, "Keep the trained models here");

    // augment
    auto* au = app.add_subcommand("augment", "Affine-augment the t0 side of a split");
    std::string au_manifest, au_out;
    AugmentConfig acfg;
    bool au_no_orig = false;
    au->add_option("--manifest", au_manifest, "Source manifest")->required();
    au->add_option("--out", au_out, "Output directory")->required();
    au->add_option("--copies", acfg.copies, "Augmented copies per record");
    au->add_option("--seed", acfg.seed, "Augmentation seed");
    au->add_option("--max-rotation", acfg.bounds.max_rotation_deg, "Rotation bound (deg)");
    au->add_option("--max-translation", acfg.bounds.max_translation, "Translation bound (px)");
    au->add_flag("--rotation-only", acfg.rotation_only, "No translation");
    au->add_flag("--no-original", au_no_orig, "Omit the untransformed records");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ErrorKind::Usage);
    }

    try {
        kernels::set_threads(jobs);
        const std::string resolved = app.config_to_str(true, false);

        if (*gen) {
            DatasetConfig dc;
            std::tie(dc.scene.width, dc.scene.height) = parse_size(gen_size);
            dc.scene.views = gen_frames;
            dc.scene.objects = gen_objects;
            dc.scene.change_rate = gen_rate;
            dc.scene.max_camera_step = gen_step;
            dc.scene.max_rotation_step = gen_rot;
            dc.scene.grid_snap = gen_snap;
            dc.scene.min_object_radius = gen_rmin;
            dc.scene.max_object_radius = gen_rmax;
            dc.scenes = gen_scenes;
            dc.seed = gen_seed;
            dc.diff_ks = gen_ks;
            const auto summary = materialize_dataset(dc, gen_out);
            for (const auto& m : summary.manifests) {
                log_line("wrote " + m.string() + " (" + std::to_string(read_manifest(m, false).records.size()) +
                         " pairs)");
            }
            write_run_meta(fs::path(gen_out) / "run.meta", "gen", resolved,
                           {{"seed", std::to_string(gen_seed)}, {"images", std::to_string(summary.images)}});
            return 0;
        }

        if (*feat) {
            const auto manifests = load_manifests(feat_manifests);
            const auto images = unique_images(manifests);
            const fs::path base = manifests.front().base_dir;
            for (const auto& m : manifests) {
                if (fs::weakly_canonical(m.base_dir) != fs::weakly_canonical(base)) {
                    throw UsageError("all manifests given to features must live in one directory");
                }
            }
            if (!feat_import.empty()) {
                std::size_t ok = 0, bad = 0, dim = 0;
                for (const auto& img : images) {
                    const fs::path p = feature_file_for(feat_import, img);
                    try {
                        const FeatureMap fm = read_features(p);
                        const ImageSize sz = read_ppm_size(base / img);
                        if (fm.h * kPatchSize != sz.height || fm.w * kPatchSize != sz.width) {
                            throw ValidationError("grid " + std::to_string(fm.w) + "x" + std::to_string(fm.h) +
                                                  " does not match image " + std::to_string(sz.width) + "x" +
                                                  std::to_string(sz.height));
                        }
                        if (dim == 0) dim = fm.f;
                        if (fm.f != dim) {
                            throw ValidationError("feature dimension " + std::to_string(fm.f) + " differs from " +
                                                  std::to_string(dim));
                        }
                        ++ok;
                    } catch (const Error& e) {
                        ++bad;
                        std::cerr << "invalid " << p.string() << ": " << e.what() << "\n";
                    }
                }
                log_line("import: " + std::to_string(ok) + " valid, " + std::to_string(bad) + " invalid");
                if (bad) throw ValidationError(std::to_string(bad) + " feature file(s) failed validation");
                write_run_meta(fs::path(feat_import) / "run.meta", "features --import", resolved,
                               {{"files", std::to_string(ok)}, {"dim", std::to_string(dim)}});
                return 0;
            }
            if (feat_out.empty()) throw UsageError("features needs --out or --import");
            if (feat_backbone != "toy") throw UsageError("only the toy backbone runs in-process; use --import");
            ToyBackbone bb = feat_backbone_file.empty() ? ToyBackbone(feat_seed, feat_dim)
                                                        : read_backbone(feat_backbone_file);
            if (!bb.fitted()) {
                std::vector<PairManifest> fit_set;
                if (!feat_fit_manifest.empty()) fit_set.push_back(read_manifest(feat_fit_manifest));
                const auto& src = feat_fit_manifest.empty() ? manifests : fit_set;
                StatsAccumulator acc(bb.dim());
                for (const auto& img : unique_images(src)) acc.add(bb.project(read_ppm(src.front().base_dir / img)));
                bb.set_stats(acc.finish());
            }
            fs::create_directories(feat_out);
            write_backbone(bb, fs::path(feat_out) / "backbone.scdb");
            std::exception_ptr failure;
            const auto n = static_cast<std::ptrdiff_t>(images.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::threads()) if (kernels::threads() > 1)
            for (std::ptrdiff_t i = 0; i < n; ++i) {
                try {
                    const auto& img = images[static_cast<std::size_t>(i)];
                    const fs::path out = feature_file_for(feat_out, img);
                    fs::create_directories(out.parent_path());
                    write_features(bb.encode(read_ppm(base / img)), out);
                } catch (...) {
#pragma omp critical(scdlab_features)
                    if (!failure) failure = std::current_exception();
                }
            }
            if (failure) std::rethrow_exception(failure);
            log_line("encoded " + std::to_string(images.size()) + " images into " + feat_out);
            write_run_meta(fs::path(feat_out) / "run.meta", "features", resolved,
                           {{"backbone.seed", std::to_string(bb.seed())},
                            {"backbone.dim", std::to_string(bb.dim())},
                            {"backbone.projection_hash", std::to_string(bb.projection_hash())},
                            {"files", std::to_string(images.size())}});
            return 0;
        }

        if (*tr) {
            tc.model.kind = parse_comparator(tr_kind);
            tc.model.orientation = parse_orientation(tr_orient);
            const PairManifest manifest = read_manifest(tr_manifest);
            const ScdfFeatureSource source(tr_features);
            const auto samples = load_training_set(manifest, source);
            tc.model.dim = samples.front().f0.f;
            if (tc.checkpoint_every > 0) {
                tc.checkpoint_dir = tr_ckpt_dir.empty() ? sibling(tr_out, ".ckpt") : fs::path(tr_ckpt_dir);
            }
            std::optional<Checkpoint> ck;
            if (!tr_resume.empty()) ck = load_checkpoint(tr_resume);
            log_line("training " + std::string(comparator_name(tc.model.kind)) + " on " +
                     std::to_string(samples.size()) + " pairs, f=" + std::to_string(tc.model.dim) + ", " +
                     std::to_string(tc.steps) + " steps");
            const TrainResult result = train(tc, samples, backbone_info_from(tr_features), ck ? &*ck : nullptr);
            save_model(result.model, tr_out);
            write_loss_csv(result.trace, sibling(tr_out, ".loss.csv"));
            log_line("final loss " + format_value(result.trace.empty() ? 0.0 : result.trace.back().loss));
            write_run_meta(meta_for_file(tr_out), "train", resolved,
                           {{"lr", format_value(tc.lr0)},
                            {"batch", std::to_string(tc.batch)},
                            {"steps", std::to_string(tc.steps)},
                            {"seed", std::to_string(tc.seed)},
                            {"weights.change", format_value(tc.weights.change)},
                            {"weights.unchanged", format_value(tc.weights.unchanged)},
                            {"adam", "beta1=0.9 beta2=0.999 eps=1e-08"},
                            {"schedule", "cosine"},
                            {"model_hash", model_hash(result.model)}});
            return 0;
        }

        if (*ev) {
            const ModelParams model = load_model(ev_model);
            const auto manifests = load_manifests(ev_manifests, false);
            const ScdfFeatureSource scdf(ev_features);
            const CachedFeatureSource source(scdf);
            EvalReport report = evaluate(model, manifests, source, ev_micro ? Averaging::Micro : Averaging::Macro);
            report.config_hash = config_hash(resolved);
            print_eval(report);
            write_eval_csv(report, ev_report);
            if (!ev_plot.empty()) {
                PlotSeries s{"model", {}, {}};
                PlotSpec spec{"Mean F1 per split", "split", "mean F1", {}};
                for (std::size_t i = 0; i < report.splits.size(); ++i) {
                    s.x.push_back(static_cast<double>(i));
                    s.y.push_back(report.splits[i].mean);
                    spec.x_ticks.push_back(report.splits[i].split);
                }
                write_svg(spec, std::span<const PlotSeries>(&s, 1), ev_plot);
            }
            std::vector<std::pair<std::string, std::string>> extra{{"model_hash", report.model_hash},
                                                                   {"averaging", ev_micro ? "micro" : "macro"},
                                                                   {"empty_convention", kEmptyConvention},
                                                                   {"failures", std::to_string(report.failures.size())}};
            for (const auto& s : report.splits) extra.emplace_back("mean." + s.split, format_value(s.mean));
            extra.emplace_back("avg", format_value(report.avg));
            write_run_meta(meta_for_file(ev_report), "eval", resolved, extra);
            return 0;
        }

        if (*sw) {
            const SweepMode mode = parse_sweep_mode(sw_mode);
            const ModelParams model = load_model(sw_model);
            const PairManifest manifest = read_manifest(sw_manifest);
            const SweepCurve curve = sweep_affine(image_predictor(model), manifest, mode, sw_range, sw_stride);
            for (std::size_t i = 0; i < curve.params.size(); ++i)
                log_line(format_value(curve.params[i]) + " " + format_value(curve.mean[i]));
            write_sweep_csv(curve, sw_report);
            if (!sw_plot.empty()) {
                const std::string label(comparator_name(model.config.kind));
                write_sweep_svg(std::span(&curve, 1), std::span(&label, 1), sw_plot);
            }
            write_run_meta(meta_for_file(sw_report), "sweep", resolved,
                           {{"model_hash", model_hash(model)}, {"points", std::to_string(curve.params.size())}});
            return 0;
        }

        if (*ab) {
            const auto kinds = parse_kinds(ab_kinds);
            if (kinds.size() < 2) throw UsageError("ablate needs at least two comparator kinds");
            const PairManifest train_manifest = read_manifest(ab_train);
            const ScdfFeatureSource train_source(ab_features);
            const auto samples = load_training_set(train_manifest, train_source);
            ac.model.dim = samples.front().f0.f;
            const auto splits = load_manifests(ab_eval, false);
            const ScdfFeatureSource eval_scdf(ab_eval_features.empty() ? ab_features : ab_eval_features);
            const CachedFeatureSource eval_source(eval_scdf);
            std::vector<ModelParams> models;
            const AblationReport report = ablate(samples, splits, eval_source, kinds, ac,
                                                 backbone_info_from(ab_features), &models);
            for (const auto& row : report.rows) {
                std::string line(comparator_name(row.kind));
                for (double v : row.split_means) line += " " + format_value(v);
                log_line(line + " avg " + format_value(row.avg));
            }
            if (!ab_models.empty()) {
                for (const auto& m : models)
                    save_model(m, fs::path(ab_models) / (std::string(comparator_name(m.config.kind)) + ".scdm"));
            }
            write_ablation_csv(report, ab_report);
            if (!ab_plot.empty()) write_ablation_svg(report, ab_plot);
            write_run_meta(meta_for_file(ab_report), "ablate", resolved, {{"seed", std::to_string(ac.seed)}});
            return 0;
        }

        if (*au) {
            acfg.keep_original = !au_no_orig;
            const PairManifest manifest = read_manifest(au_manifest);
            const PairManifest out = augment_dataset(manifest, acfg, au_out);
            log_line("wrote " + (fs::path(au_out) / "augmented.manifest").string() + " (" +
                     std::to_string(out.records.size()) + " pairs)");
            write_run_meta(fs::path(au_out) / "run.meta", "augment", resolved, {{"seed", std::to_string(acfg.seed)}});
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::Io);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

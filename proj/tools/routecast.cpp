// routecast: dataset generation, training and congestion forecasting.
//
// Exit codes: 0 success, 2 validation error, 3 IO error, 1 anything else.

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "routecast/arch.hpp"
#include "routecast/cgan.hpp"
#include "routecast/checkpoint.hpp"
#include "routecast/dataset.hpp"
#include "routecast/error.hpp"
#include "routecast/eval.hpp"
#include "routecast/io.hpp"
#include "routecast/netlist.hpp"
#include "routecast/placer.hpp"
#include "routecast/raster.hpp"
#include "routecast/router.hpp"

namespace fs = std::filesystem;
using namespace routecast;
using nlohmann::ordered_json;

namespace {

struct Globals {
    uint64_t seed = 1;
    std::string out = ".";
    int w = 64;
    int threads = 0;
    std::string config;
    bool include_overflow = false;
};

Globals g;

std::string resolve(const std::string &p)
{
    if (p.empty() || fs::path(p).is_absolute())
        return p;
    return (fs::path(g.out) / p).string();
}

template <typename T>
std::vector<T> parse_list(const std::string &s, const char *what)
{
    std::vector<T> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty())
            continue;
        try {
            const auto dash = tok.find('-', 1);
            if constexpr (std::is_integral_v<T>) {
                if (dash != std::string::npos) {
                    const T a = static_cast<T>(std::stoull(tok.substr(0, dash)));
                    const T b = static_cast<T>(std::stoull(tok.substr(dash + 1)));
                    if (b < a)
                        throw ValidationError(std::string("empty range in ") + what);
                    for (T v = a; v <= b; ++v)
                        out.push_back(v);
                    continue;
                }
                out.push_back(static_cast<T>(std::stoull(tok)));
            } else {
                out.push_back(static_cast<T>(std::stod(tok)));
            }
        } catch (const std::logic_error &) {
            throw ValidationError(std::string("bad ") + what + " list '" + s + "'");
        }
    }
    if (out.empty())
        throw ValidationError(std::string("empty ") + what + " list");
    return out;
}

TrainConfig train_config()
{
    TrainConfig t;
    t.seed = g.seed;
    if (g.config.empty())
        return t;
    std::istringstream in(read_file(resolve(g.config)));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos)
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto l = s.find_first_not_of(" \t\r");
            const auto r = s.find_last_not_of(" \t\r");
            return l == std::string::npos ? std::string() : s.substr(l, r - l + 1);
        };
        apply_override(t, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    validate(t);
    return t;
}

Floorplan load_arch(const std::string &path) { return Floorplan::from_json(read_file(resolve(path))); }
Netlist load_netlist(const std::string &path)
{
    Netlist nl = parse_netlist(read_file(resolve(path)));
    return nl;
}

std::vector<TrainPair> pairs_for(const Dataset &ds, const std::vector<const DatasetItem *> &items, const TrainConfig &t)
{
    std::vector<TrainPair> out;
    for (const auto *it : items)
        out.push_back(make_pair(load_sample(ds, *it), t));
    return out;
}

// Trains on `pairs`, logging every step to loss_csv and checkpointing to
// ckpt_path every `every` epochs (and at the end) when non-empty.
std::unique_ptr<Model> run_training(const std::vector<TrainPair> &pairs, const GeneratorConfig &gc,
                                    const TrainConfig &t, const std::string &manifest_hash,
                                    const std::string &loss_csv, const std::string &ckpt_path, int every)
{
    auto m = std::make_unique<Model>(gc, DiscriminatorConfig::for_generator(gc), t);
    m->manifest_hash = manifest_hash;
    std::string log = kLossCsvHeader;
    TrainCallbacks cb;
    cb.on_step = [&](long long step, const StepLosses &l) { log += loss_csv_row(step, l); };
    cb.on_epoch_end = [&](const Model &) {
        if (!ckpt_path.empty() && every > 0 && m->epoch % every == 0)
            save_checkpoint(*m, ckpt_path);
    };
    train_epochs(*m, pairs, t.epochs, cb);
    if (!loss_csv.empty())
        write_file(loss_csv, log);
    if (!ckpt_path.empty())
        save_checkpoint(*m, ckpt_path);
    return m;
}

ordered_json accuracy_json(const AccuracyReport &r)
{
    return {{"per_pixel_acc", r.per_pixel_acc}, {"baseline_acc", r.baseline_acc}, {"tau", r.tau},
            {"correct", r.correct},             {"n_segments", r.n_segments},     {"n_channel_pixels", r.n_channel_pixels},
            {"per_image", r.per_image}};
}

std::vector<const DatasetItem *> pick_items(const Dataset &ds, const std::string &ids)
{
    const auto usable = usable_items(ds, g.include_overflow);
    if (ids.empty())
        return usable;
    std::vector<const DatasetItem *> out;
    std::stringstream ss(ids);
    std::string id;
    while (std::getline(ss, id, ',')) {
        const auto it = std::find_if(ds.manifest.items.begin(), ds.manifest.items.end(),
                                     [&](const DatasetItem &d) { return d.id == id; });
        if (it == ds.manifest.items.end())
            throw ValidationError("no dataset item '" + id + "'");
        out.push_back(&*it);
    }
    return out;
}

ImagePlane side_by_side(const ImagePlane &a, const ImagePlane &b)
{
    ImagePlane out(a.height(), a.width() + b.width(), 3);
    for (int y = 0; y < a.height(); ++y)
        for (int c = 0; c < 3; ++c) {
            for (int x = 0; x < a.width(); ++x)
                out.at(y, x, c) = a.at(y, x, c);
            for (int x = 0; x < b.width(); ++x)
                out.at(y, a.width() + x, c) = b.at(y, x, c);
        }
    return out;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"routecast: FPGA routing congestion forecasting from placement images"};
    app.require_subcommand(1);
    app.add_option("--seed", g.seed, "RNG seed")->capture_default_str();
    app.add_option("--out", g.out, "Base directory for relative paths")->capture_default_str();
    app.add_option("--w", g.w, "Image size in pixels")->capture_default_str();
    app.add_option("--threads", g.threads, "OpenMP threads (0: runtime default)");
    app.add_option("--config", g.config, "key=value overrides for the training config");
    app.add_flag("--include-overflow", g.include_overflow, "Use overflowed items for training and evaluation");

    // gen-arch
    FloorplanSpec spec;
    std::string arch_out = "arch.json";
    auto *ga = app.add_subcommand("gen-arch", "Write an island floorplan description");
    ga->add_option("--cols", spec.cols)->capture_default_str();
    ga->add_option("--rows", spec.rows)->capture_default_str();
    ga->add_option("--mem-col", spec.mem_col)->capture_default_str();
    ga->add_option("--mult-col", spec.mult_col)->capture_default_str();
    ga->add_option("--capacity", spec.channel_capacity, "Tracks per channel")->capture_default_str();
    ga->add_option("--io-ports", spec.io_ports_per_pad)->capture_default_str();
    ga->add_option("-o,--output", arch_out)->capture_default_str();

    // gen-netlist
    SyntheticParams sp;
    std::string netlist_out = "netlist.txt";
    auto *gn = app.add_subcommand("gen-netlist", "Generate a synthetic netlist");
    gn->add_option("--clb", sp.n_clb)->capture_default_str();
    gn->add_option("--inputs", sp.n_io_in)->capture_default_str();
    gn->add_option("--outputs", sp.n_io_out)->capture_default_str();
    gn->add_option("--mem", sp.n_mem)->capture_default_str();
    gn->add_option("--mult", sp.n_mult)->capture_default_str();
    gn->add_option("--fanout", sp.avg_fanout)->capture_default_str();
    gn->add_option("--rent", sp.rent_exponent)->capture_default_str();
    gn->add_option("--nets-per-clb", sp.nets_per_clb)->capture_default_str();
    gn->add_option("-o,--output", netlist_out)->capture_default_str();

    // dataset
    std::string arch_in = "arch.json", netlist_in = "netlist.txt", dataset_dir = "dataset";
    std::string seeds_s, alphas_s, inner_s;
    int px = 0, ch = 0;
    RouterConfig rcfg;
    auto *ds = app.add_subcommand("dataset", "Sweep placements, route and rasterize");
    ds->add_option("--arch", arch_in)->capture_default_str();
    ds->add_option("--netlist", netlist_in)->capture_default_str();
    ds->add_option("--dir", dataset_dir)->capture_default_str();
    ds->add_option("--seeds", seeds_s, "Seed list or range, e.g. 1-10 (default 1-10)");
    ds->add_option("--alphas", alphas_s, "alpha_t list (default 0.5,0.7,0.8,0.9,0.95)");
    ds->add_option("--inner", inner_s, "inner_num list (default 0.5,1,2,10)");
    ds->add_option("--px", px, "Tile size in pixels (0: fit)");
    ds->add_option("--ch", ch, "Channel strip width in pixels");
    ds->add_option("--max-iters", rcfg.max_iters)->capture_default_str();

    // train
    std::string ckpt = "model.rckp", loss_csv = "loss.csv", skip = "all";
    double train_frac = 1.0;
    int base = 0, every = 0;
    auto *tr = app.add_subcommand("train", "Train the generator/discriminator pair");
    tr->add_option("--dataset", dataset_dir)->capture_default_str();
    tr->add_option("--train-frac", train_frac, "Leading fraction of usable items to train on")->capture_default_str();
    tr->add_option("--skip", skip, "all, single or none")->capture_default_str();
    tr->add_option("--base", base, "Generator base width (0: default for --w)");
    tr->add_option("--ckpt", ckpt)->capture_default_str();
    tr->add_option("--loss-csv", loss_csv)->capture_default_str();
    tr->add_option("--checkpoint-every", every, "Also checkpoint every N epochs");

    // fine-tune
    std::string ckpt_out = "finetuned.rckp", items_s;
    int k_pairs = 10;
    auto *ft = app.add_subcommand("fine-tune", "Continue training on K pairs of one design");
    ft->add_option("--ckpt", ckpt)->capture_default_str();
    ft->add_option("--dataset", dataset_dir)->capture_default_str();
    ft->add_option("--pairs", k_pairs, "Number of leading usable items to use")->capture_default_str();
    ft->add_option("--items", items_s, "Explicit comma-separated item ids");
    ft->add_option("-o,--output", ckpt_out)->capture_default_str();
    ft->add_option("--loss-csv", loss_csv)->capture_default_str();

    // infer
    std::string item_id, place_png, connect_png, pred_out = "pred.png", util_out;
    auto *in = app.add_subcommand("infer", "Predict a routing heat map");
    in->add_option("--ckpt", ckpt)->capture_default_str();
    in->add_option("--dataset", dataset_dir, "Dataset holding --item");
    in->add_option("--item", item_id);
    in->add_option("--place", place_png, "Placement image (instead of --item)");
    in->add_option("--connect", connect_png, "Connectivity image (instead of --item)");
    in->add_option("-o,--output", pred_out)->capture_default_str();
    in->add_option("--util-out", util_out, "Decoded utilization CSV (needs --item)");

    // eval
    double tau = kDefaultTau, eval_from = 0.0;
    int k_top = 10;
    std::string report = "eval.json";
    auto *ev = app.add_subcommand("eval", "Per-pixel accuracy and Top-k ranking on a dataset");
    ev->add_option("--ckpt", ckpt)->capture_default_str();
    ev->add_option("--dataset", dataset_dir)->capture_default_str();
    ev->add_option("--skip-frac", eval_from, "Skip this leading fraction of items (the training split)");
    ev->add_option("--items", items_s);
    ev->add_option("--tau", tau)->capture_default_str();
    ev->add_option("--k", k_top)->capture_default_str();
    ev->add_option("--report", report)->capture_default_str();

    // explore
    std::string objective = "min", explore_out = "explore.csv";
    auto *ex = app.add_subcommand("explore", "Rank placements by predicted congestion");
    ex->add_option("--ckpt", ckpt)->capture_default_str();
    ex->add_option("--dataset", dataset_dir)->capture_default_str();
    ex->add_option("--objective", objective, "min|max[:mean|max|p95][:region]")->capture_default_str();
    ex->add_option("--report", explore_out)->capture_default_str();

    // watch
    AnnealSchedule sched;
    long long snap_every = 100;
    std::string frames_dir = "frames";
    auto *wa = app.add_subcommand("watch", "Forecast congestion on annealing snapshots");
    wa->add_option("--arch", arch_in)->capture_default_str();
    wa->add_option("--netlist", netlist_in)->capture_default_str();
    wa->add_option("--ckpt", ckpt)->capture_default_str();
    wa->add_option("--every", snap_every, "Accepted moves between snapshots")->capture_default_str();
    wa->add_option("--alpha", sched.alpha_t)->capture_default_str();
    wa->add_option("--inner", sched.inner_num)->capture_default_str();
    wa->add_option("--frames", frames_dir)->capture_default_str();

    // ablate
    std::string variants_s = "l1_all,no_l1,single_skip", ablate_dir = "ablation";
    int n_seeds = 3;
    auto *ab = app.add_subcommand("ablate", "Train variants over seeds and compare on held-out items");
    ab->add_option("--dataset", dataset_dir)->capture_default_str();
    ab->add_option("--variants", variants_s)->capture_default_str();
    ab->add_option("--seeds", n_seeds, "Seeds per variant, starting at --seed")->capture_default_str();
    ab->add_option("--train-frac", train_frac)->capture_default_str();
    ab->add_option("--base", base);
    ab->add_option("--report-dir", ablate_dir)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (g.threads > 0)
            omp_set_num_threads(g.threads);

        if (*ga) {
            write_file(resolve(arch_out), build_floorplan(spec).to_json());
            std::printf("wrote %s\n", resolve(arch_out).c_str());
        } else if (*gn) {
            const Netlist nl = generate_synthetic(sp, g.seed);
            write_file(resolve(netlist_out), nl.serialize());
            std::printf("wrote %s: %d blocks, %d nets\n", resolve(netlist_out).c_str(), nl.num_blocks(),
                        nl.num_nets());
        } else if (*ds) {
            const Floorplan fp = load_arch(arch_in);
            const Netlist nl = load_netlist(netlist_in);
            SweepGrid grid = default_sweep_grid();
            if (!seeds_s.empty())
                grid.seeds = parse_list<uint64_t>(seeds_s, "seed");
            if (!alphas_s.empty())
                grid.alpha_ts = parse_list<double>(alphas_s, "alpha_t");
            if (!inner_s.empty())
                grid.inner_nums = parse_list<double>(inner_s, "inner_num");
            DatasetOptions opt;
            opt.w = g.w;
            opt.px_per_tile = px;
            opt.channel_px = ch > 0 ? ch : std::max(1, px / 2);
            opt.router = rcfg;
            DatasetBuildStats st;
            const auto m = build_dataset(fp, nl, grid, resolve(dataset_dir), opt, &st);
            std::printf("%zu items (%d computed, %d reused, %d overflowed) in %s\n", m.items.size(), st.computed,
                        st.reused, st.overflowed, resolve(dataset_dir).c_str());
        } else if (*tr) {
            const TrainConfig t = train_config();
            const SkipMode skip_mode = parse_skip_mode(skip);
            const Dataset d = open_dataset(resolve(dataset_dir));
            GeneratorConfig gc = GeneratorConfig::for_width(d.manifest.w, t.grayscale ? 2 : 4);
            gc.skip = skip_mode;
            if (base > 0)
                gc.base_width = base;
            const auto [train_items, held] = split_items(usable_items(d, g.include_overflow), train_frac);
            const auto pairs = pairs_for(d, train_items, t);
            auto m = run_training(pairs, gc, t, d.manifest.hash(), resolve(loss_csv), resolve(ckpt), every);
            std::printf("trained %lld steps on %zu pairs; final d_loss %.4f g_adv %.4f g_l1 %.4f -> %s\n", m->step,
                        pairs.size(), m->last.d_loss, m->last.g_adv, m->last.g_l1, resolve(ckpt).c_str());
        } else if (*ft) {
            auto m = load_checkpoint(resolve(ckpt));
            const Dataset d = open_dataset(resolve(dataset_dir));
            TrainConfig t = g.config.empty() ? m->t_cfg : train_config();
            if (g.config.empty())
                t.epochs = 50;
            auto items = pick_items(d, items_s);
            if (items_s.empty()) {
                if (k_pairs < 1)
                    throw ValidationError("--pairs must be >= 1");
                if (static_cast<int>(items.size()) < k_pairs)
                    throw ValidationError("dataset has only " + std::to_string(items.size()) + " usable items");
                items.resize(k_pairs);
            }
            const auto pairs = pairs_for(d, items, t);
            std::string log = kLossCsvHeader;
            TrainCallbacks cb;
            cb.on_step = [&](long long step, const StepLosses &l) { log += loss_csv_row(step, l); };
            fine_tune(*m, pairs, t, cb);
            write_file(resolve(loss_csv), log);
            save_checkpoint(*m, resolve(ckpt_out));
            std::printf("fine-tuned on %zu pairs for %d epochs -> %s\n", pairs.size(), t.epochs,
                        resolve(ckpt_out).c_str());
        } else if (*in) {
            auto m = load_checkpoint(resolve(ckpt));
            Tensor<float> x;
            std::optional<Dataset> d;
            if (!item_id.empty()) {
                d.emplace(open_dataset(resolve(dataset_dir)));
                const auto items = pick_items(*d, item_id);
                const Sample s = load_sample(*d, *items[0]);
                x = build_input(s.place, s.connect, m->t_cfg);
            } else if (!place_png.empty() && !connect_png.empty()) {
                ImagePlane place = read_png(resolve(place_png));
                ImagePlane connect = read_png(resolve(connect_png));
                if (connect.channels() != 1)
                    connect = to_grayscale(connect);
                x = build_input(place, connect, m->t_cfg);
            } else {
                throw ValidationError("infer needs --item or both --place and --connect");
            }
            const ImagePlane pred = to_image(infer(*m, x));
            write_png(resolve(pred_out), pred);
            if (!util_out.empty()) {
                if (!d)
                    throw ValidationError("--util-out needs --item");
                write_file(resolve(util_out), decode_heatmap(pred, d->layout).to_csv());
            }
            std::printf("wrote %s\n", resolve(pred_out).c_str());
        } else if (*ev) {
            auto m = load_checkpoint(resolve(ckpt));
            const Dataset d = open_dataset(resolve(dataset_dir));
            auto items = pick_items(d, items_s);
            if (items_s.empty())
                items = split_items(items, eval_from).second;
            std::vector<ImagePlane> preds;
            std::vector<ChannelUtilization> truths;
            ScoreList pred_scores, true_scores;
            for (const auto *it : items) {
                const Sample s = load_sample(d, *it);
                preds.push_back(to_image(infer(*m, build_input(s.place, s.connect, m->t_cfg))));
                truths.push_back(s.util);
                pred_scores.push_back({s.id, congestion_score(decode_heatmap(preds.back(), d.layout), std::nullopt,
                                                              ScoreMode::Mean)});
                true_scores.push_back({s.id, congestion_score(s.util, std::nullopt, ScoreMode::Mean)});
            }
            const AccuracyReport acc = per_pixel_accuracy(preds, truths, d.layout, tau);
            ordered_json j;
            j["items"] = items.size();
            j["accuracy"] = accuracy_json(acc);
            if (static_cast<int>(items.size()) >= k_top) {
                const RankingReport r = topk_overlap(pred_scores, true_scores, k_top);
                j["topk"] = {{"k", r.k}, {"overlap", r.overlap}, {"selected", r.selected}, {"true", r.true_topk}};
            }
            write_file(resolve(report), j.dump(2) + "\n");
            std::printf("per-pixel accuracy %.4f (all-zero baseline %.4f) over %zu items\n", acc.per_pixel_acc,
                        acc.baseline_acc, items.size());
        } else if (*ex) {
            auto m = load_checkpoint(resolve(ckpt));
            const Dataset d = open_dataset(resolve(dataset_dir));
            const Objective obj = parse_objective(objective);
            std::vector<ExploreItem> cand;
            for (const auto *it : usable_items(d, g.include_overflow)) {
                const Sample s = load_sample(d, *it);
                cand.push_back({s.id, to_image(infer(*m, build_input(s.place, s.connect, m->t_cfg)))});
            }
            const auto ranked = explore(cand, obj, d.fp, d.layout);
            std::string csv = "rank,id,score\n";
            for (size_t i = 0; i < ranked.size(); ++i) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "%zu,%s,%.6f\n", i + 1, ranked[i].id.c_str(), ranked[i].score);
                csv += buf;
            }
            write_file(resolve(explore_out), csv);
            std::printf("best for %s: %s (%.4f)\n", objective.c_str(), ranked.front().id.c_str(),
                        ranked.front().score);
        } else if (*wa) {
            auto m = load_checkpoint(resolve(ckpt));
            const Floorplan fp = load_arch(arch_in);
            const Netlist nl = load_netlist(netlist_in);
            const RasterLayout layout = fit_layout(fp, m->g_cfg.image_size);
            if (snap_every < 1)
                throw ValidationError("--every must be >= 1");
            sched.seed = g.seed;
            const AnnealResult ar = anneal(nl, fp, sched, snap_every);
            const std::string dir = resolve(frames_dir);
            for (size_t i = 0; i < ar.snapshots.size(); ++i) {
                const ImagePlane place = render_placement(fp, nl, ar.snapshots[i], layout);
                const ImagePlane conn = render_connectivity(nl, ar.snapshots[i], layout);
                const ImagePlane pred = to_image(infer(*m, build_input(place, conn, m->t_cfg)));
                char name[32];
                std::snprintf(name, sizeof name, "frame_%05zu.png", i);
                write_png((fs::path(dir) / name).string(), side_by_side(place, pred));
            }
            std::printf("wrote %zu frames to %s\n", ar.snapshots.size(), dir.c_str());
        } else if (*ab) {
            const Dataset d = open_dataset(resolve(dataset_dir));
            const TrainConfig t0 = train_config();
            const auto [train_items, held] = split_items(usable_items(d, g.include_overflow), train_frac);
            if (held.empty())
                throw ValidationError("ablation needs held-out items; lower --train-frac");
            std::vector<HoldoutItem> holdout;
            for (const auto *it : held)
                holdout.push_back(make_holdout(load_sample(d, *it)));
            const std::string dir = resolve(ablate_dir);
            std::string csv;
            ordered_json report = ordered_json::array();
            std::map<std::string, std::vector<double>> l1s;
            std::vector<std::string> names;
            std::stringstream vs(variants_s);
            for (std::string v; std::getline(vs, v, ',');)
                if (!v.empty())
                    names.push_back(variant_spec(v).name);
            if (names.empty())
                throw ValidationError("no ablation variants");
            for (int si = 0; si < n_seeds; ++si) {
                std::vector<std::unique_ptr<Model>> models;
                std::vector<AblationVariant> vars;
                for (const auto &name : names) {
                    const VariantSpec v = variant_spec(name);
                    TrainConfig t = t0;
                    t.seed = g.seed + si;
                    t.use_l1 = v.use_l1;
                    t.grayscale = v.grayscale;
                    GeneratorConfig gc = GeneratorConfig::for_width(d.manifest.w, v.grayscale ? 2 : 4);
                    gc.skip = v.skip;
                    if (base > 0)
                        gc.base_width = base;
                    const std::string tag = name + "_s" + std::to_string(t.seed);
                    const std::string curve = (fs::path(dir) / ("loss_" + tag + ".csv")).string();
                    models.push_back(run_training(pairs_for(d, train_items, t), gc, t, d.manifest.hash(), curve,
                                                  (fs::path(dir) / (tag + ".rckp")).string(), 0));
                    vars.push_back({tag, models.back().get(), curve});
                }
                const auto rows = ablation_compare(vars, holdout, d.layout);
                const std::string part = ablation_csv(rows);
                csv += si == 0 ? part : part.substr(part.find('\n') + 1);
                for (size_t i = 0; i < rows.size(); ++i) {
                    report.push_back(ablation_json({rows[i]})[0]);
                    l1s[names[i]].push_back(rows[i].val_l1);
                }
            }
            ordered_json summary;
            for (const auto &name : names)
                summary[name] = {{"median_val_l1", median(l1s[name])}, {"val_l1", l1s[name]}};
            write_file((fs::path(dir) / "ablation.csv").string(), csv);
            write_file((fs::path(dir) / "ablation.json").string(),
                       ordered_json{{"runs", report}, {"summary", summary}}.dump(2) + "\n");
            for (const auto &name : names)
                std::printf("%-12s median val L1 %.5f\n", name.c_str(), median(l1s[name]));
        }
    } catch (const ValidationError &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const IoError &e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 0;
}

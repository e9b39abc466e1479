#include "routecast/dataset.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>

#include "routecast/error.hpp"
#include "routecast/hash.hpp"
#include "routecast/io.hpp"

namespace routecast {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string item_name(const char *prefix, size_t i, const char *ext)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04zu.%s", prefix, i, ext);
    return buf;
}

ordered_json schedule_json(const AnnealSchedule &s)
{
    return {{"seed", s.seed},
            {"alpha_t", s.alpha_t},
            {"inner_num", s.inner_num},
            {"algorithm", place_algorithm_name(s.algorithm)},
            {"t_init_factor", s.t_init_factor},
            {"exit_t", s.exit_t}};
}

AnnealSchedule schedule_from(const ordered_json &j)
{
    AnnealSchedule s;
    s.seed = j.at("seed");
    s.alpha_t = j.at("alpha_t");
    s.inner_num = j.at("inner_num");
    s.algorithm = parse_place_algorithm(j.at("algorithm"));
    s.t_init_factor = j.at("t_init_factor");
    s.exit_t = j.at("exit_t");
    return s;
}

bool same_schedule(const AnnealSchedule &a, const AnnealSchedule &b)
{
    return a.seed == b.seed && a.alpha_t == b.alpha_t && a.inner_num == b.inner_num && a.algorithm == b.algorithm &&
           a.t_init_factor == b.t_init_factor && a.exit_t == b.exit_t;
}

bool same_router(const RouterConfig &a, const RouterConfig &b)
{
    return a.max_iters == b.max_iters && a.pres_fac_init == b.pres_fac_init && a.pres_fac_mult == b.pres_fac_mult &&
           a.hist_fac == b.hist_fac && a.seed == b.seed;
}

std::vector<std::string> item_files(const DatasetItem &it)
{
    return {it.placement_file, it.place_image, it.connect_image, it.route_image, it.util_file};
}

// True when every file of the item is on disk with its recorded hash.
bool item_intact(const std::string &dir, const DatasetItem &it)
{
    for (const auto &f : item_files(it)) {
        const auto h = it.hashes.find(f);
        if (h == it.hashes.end() || !fs::exists(fs::path(dir) / f))
            return false;
        if (content_hash(read_file((fs::path(dir) / f).string())) != h->second)
            return false;
    }
    return true;
}

void put(const std::string &dir, DatasetItem &it, const std::string &name, const std::string &bytes)
{
    write_file((fs::path(dir) / name).string(), bytes);
    it.hashes[name] = content_hash(bytes);
}

DatasetItem build_item(const Floorplan &fp, const Netlist &nl, const RasterLayout &layout, const RouterConfig &rcfg,
                       const AnnealSchedule &sched, size_t index, const std::string &dir)
{
    DatasetItem it;
    char id[32];
    std::snprintf(id, sizeof id, "p%04zu", index);
    it.id = id;
    it.options = sched;
    it.placement_file = item_name("place", index, "txt");
    it.place_image = item_name("pl", index, "png");
    it.connect_image = item_name("cn", index, "png");
    it.route_image = item_name("rt", index, "png");
    it.util_file = item_name("util", index, "csv");

    const AnnealResult ar = anneal(nl, fp, sched);
    const RoutingResult rr = route(nl, ar.placement, fp, rcfg);
    const ChannelUtilization util = utilization(rr, fp);
    it.overflow = rr.overflow;
    it.bbox_cost = ar.final_cost;
    it.route_iterations = rr.iterations;
    double s = 0;
    for (float u : util.flat())
        s += u;
    it.mean_util = s / util.num_segments();

    const ImagePlane place = render_placement(fp, nl, ar.placement, layout);
    put(dir, it, it.placement_file, write_placement(nl, fp, ar.placement, sched));
    put(dir, it, it.place_image, encode_png(place));
    put(dir, it, it.connect_image, encode_png(render_connectivity(nl, ar.placement, layout)));
    put(dir, it, it.route_image, encode_png(render_heatmap(util, place, layout)));
    put(dir, it, it.util_file, util.to_csv());
    return it;
}

} // namespace

ordered_json DatasetManifest::to_json() const
{
    ordered_json j;
    j["version"] = version;
    j["floorplan_hash"] = floorplan_hash;
    j["netlist_hash"] = netlist_hash;
    j["arch"] = arch_file;
    j["netlist"] = netlist_file;
    j["floor_image"] = {{"file", floor_image}, {"hash", floor_image_hash}};
    j["layout"] = {{"w", w}, {"px_per_tile", px_per_tile}, {"channel_px", channel_px}};
    j["router"] = {{"max_iters", router.max_iters},
                   {"pres_fac_init", router.pres_fac_init},
                   {"pres_fac_mult", router.pres_fac_mult},
                   {"hist_fac", router.hist_fac},
                   {"seed", router.seed}};
    ordered_json items = ordered_json::array();
    for (const auto &it : this->items) {
        ordered_json h;
        for (const auto &f : item_files(it))
            h[f] = it.hashes.at(f);
        items.push_back({{"id", it.id},
                         {"options", schedule_json(it.options)},
                         {"placement", it.placement_file},
                         {"place_image", it.place_image},
                         {"connect_image", it.connect_image},
                         {"route_image", it.route_image},
                         {"util", it.util_file},
                         {"overflow", it.overflow},
                         {"bbox_cost", it.bbox_cost},
                         {"route_iterations", it.route_iterations},
                         {"mean_util", it.mean_util},
                         {"hashes", h}});
    }
    j["items"] = items;
    return j;
}

DatasetManifest DatasetManifest::from_json(const ordered_json &j)
{
    DatasetManifest m;
    try {
        m.version = j.at("version");
        if (m.version != 1)
            throw IoError("unsupported manifest version " + std::to_string(m.version));
        m.floorplan_hash = j.at("floorplan_hash");
        m.netlist_hash = j.at("netlist_hash");
        m.arch_file = j.at("arch");
        m.netlist_file = j.at("netlist");
        m.floor_image = j.at("floor_image").at("file");
        m.floor_image_hash = j.at("floor_image").at("hash");
        m.w = j.at("layout").at("w");
        m.px_per_tile = j.at("layout").at("px_per_tile");
        m.channel_px = j.at("layout").at("channel_px");
        const auto &r = j.at("router");
        m.router.max_iters = r.at("max_iters");
        m.router.pres_fac_init = r.at("pres_fac_init");
        m.router.pres_fac_mult = r.at("pres_fac_mult");
        m.router.hist_fac = r.at("hist_fac");
        m.router.seed = r.at("seed");
        for (const auto &e : j.at("items")) {
            DatasetItem it;
            it.id = e.at("id");
            it.options = schedule_from(e.at("options"));
            it.placement_file = e.at("placement");
            it.place_image = e.at("place_image");
            it.connect_image = e.at("connect_image");
            it.route_image = e.at("route_image");
            it.util_file = e.at("util");
            it.overflow = e.at("overflow");
            it.bbox_cost = e.at("bbox_cost");
            it.route_iterations = e.at("route_iterations");
            it.mean_util = e.at("mean_util");
            for (const auto &[k, v] : e.at("hashes").items())
                it.hashes[k] = v;
            m.items.push_back(std::move(it));
        }
    } catch (const nlohmann::json::exception &e) {
        throw IoError(std::string("corrupt manifest: ") + e.what());
    }
    return m;
}

std::string DatasetManifest::hash() const { return content_hash(to_json().dump()); }

DatasetManifest build_dataset(const Floorplan &fp, const Netlist &nl, const SweepGrid &grid, const std::string &out_dir,
                              const DatasetOptions &opt, DatasetBuildStats *stats)
{
    if (grid.size() == 0)
        throw ValidationError("empty sweep grid");
    const RasterLayout layout = opt.px_per_tile > 0 ? make_layout(fp, opt.w, opt.px_per_tile, opt.channel_px)
                                                    : fit_layout(fp, opt.w);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create " + out_dir + ": " + ec.message());
    const fs::path dir(out_dir);

    DatasetManifest m;
    m.floorplan_hash = content_hash(fp.to_json());
    m.netlist_hash = nl.hash();
    m.w = layout.w;
    m.px_per_tile = layout.px_per_tile;
    m.channel_px = layout.channel_px;
    m.router = opt.router;

    // A previous manifest for the same design and settings lets intact items
    // be reused.
    std::map<std::string, DatasetItem> previous;
    const fs::path manifest_path = dir / "manifest.json";
    if (fs::exists(manifest_path)) {
        try {
            const DatasetManifest old =
                DatasetManifest::from_json(ordered_json::parse(read_file(manifest_path.string())));
            if (old.floorplan_hash == m.floorplan_hash && old.netlist_hash == m.netlist_hash && old.w == m.w &&
                old.px_per_tile == m.px_per_tile && old.channel_px == m.channel_px && same_router(old.router, m.router))
                for (const auto &it : old.items)
                    previous.emplace(it.id, it);
        } catch (const std::exception &) {
            previous.clear(); // unreadable manifest: rebuild everything
        }
    }

    write_file((dir / m.arch_file).string(), fp.to_json());
    write_file((dir / m.netlist_file).string(), nl.serialize());
    const std::string floor = encode_png(render_floorplan(fp, layout));
    write_file((dir / m.floor_image).string(), floor);
    m.floor_image_hash = content_hash(floor);

    const auto schedules = grid.schedules(opt.base);
    const size_t n = schedules.size();
    std::vector<DatasetItem> items(n);
    std::vector<char> done(n, 0), reused(n, 0);
    for (size_t i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "p%04zu", i);
        const auto p = previous.find(id);
        if (p != previous.end() && same_schedule(p->second.options, schedules[i]) &&
            item_intact(out_dir, p->second)) {
            items[i] = p->second;
            done[i] = reused[i] = 1;
        }
    }

    auto write_manifest = [&] {
        DatasetManifest snapshot = m;
        for (size_t i = 0; i < n; ++i)
            if (done[i])
                snapshot.items.push_back(items[i]);
        write_file(manifest_path.string(), snapshot.to_json().dump(2) + "\n");
    };

    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        if (done[i])
            continue;
        try {
            DatasetItem it = build_item(fp, nl, layout, opt.router, schedules[i], static_cast<size_t>(i), out_dir);
#pragma omp critical(routecast_dataset)
            {
                items[i] = std::move(it);
                done[i] = 1;
                write_manifest();
            }
        } catch (...) {
#pragma omp critical(routecast_dataset)
            if (!failure)
                failure = std::current_exception();
        }
    }
    if (failure)
        std::rethrow_exception(failure);

    write_manifest();
    m.items = std::move(items);
    if (stats) {
        *stats = {};
        for (size_t i = 0; i < n; ++i) {
            (reused[i] ? stats->reused : stats->computed)++;
            stats->overflowed += m.items[i].overflow ? 1 : 0;
        }
    }
    return m;
}

Dataset open_dataset(const std::string &dir)
{
    const fs::path d(dir);
    const DatasetManifest m = DatasetManifest::from_json([&] {
        try {
            return ordered_json::parse(read_file((d / "manifest.json").string()));
        } catch (const nlohmann::json::exception &e) {
            throw IoError("corrupt manifest in " + dir + ": " + e.what());
        }
    }());
    auto check = [&](const std::string &file, const std::string &expected) {
        const fs::path p = d / file;
        if (!fs::exists(p))
            throw IoError("manifest references missing file " + p.string());
        if (content_hash(read_file(p.string())) != expected)
            throw IoError("hash mismatch for " + p.string());
    };
    const std::string arch_text = read_file((d / m.arch_file).string());
    if (content_hash(arch_text) != m.floorplan_hash)
        throw IoError("floorplan hash mismatch in " + dir);
    Floorplan fp = Floorplan::from_json(arch_text);
    Netlist nl = parse_netlist(read_file((d / m.netlist_file).string()));
    if (nl.hash() != m.netlist_hash)
        throw IoError("netlist hash mismatch in " + dir);
    check(m.floor_image, m.floor_image_hash);
    for (const auto &it : m.items)
        for (const auto &f : item_files(it)) {
            const auto h = it.hashes.find(f);
            if (h == it.hashes.end())
                throw IoError("item " + it.id + " has no hash for " + f);
            check(f, h->second);
        }
    RasterLayout layout = make_layout(fp, m.w, m.px_per_tile, m.channel_px);
    return Dataset{dir, m, std::move(fp), std::move(nl), layout};
}

Sample load_sample(const Dataset &ds, const DatasetItem &item)
{
    const fs::path d(ds.dir);
    Sample s;
    s.id = item.id;
    s.placement = read_placement(read_file((d / item.placement_file).string()), ds.nl, ds.fp);
    s.util = ChannelUtilization::from_csv(read_file((d / item.util_file).string()), ds.fp.cols(), ds.fp.rows());
    s.place = render_placement(ds.fp, ds.nl, s.placement, ds.layout);
    s.connect = render_connectivity(ds.nl, s.placement, ds.layout);
    s.route = render_heatmap(s.util, s.place, ds.layout);
    return s;
}

std::vector<const DatasetItem *> usable_items(const Dataset &ds, bool include_overflow)
{
    std::vector<const DatasetItem *> out;
    for (const auto &it : ds.manifest.items)
        if (include_overflow || !it.overflow)
            out.push_back(&it);
    return out;
}

std::pair<std::vector<const DatasetItem *>, std::vector<const DatasetItem *>>
split_items(const std::vector<const DatasetItem *> &items, double train_frac)
{
    if (!(train_frac >= 0 && train_frac <= 1))
        throw ValidationError("train fraction must be in [0, 1]");
    const auto n = static_cast<size_t>(std::llround(train_frac * static_cast<double>(items.size())));
    return {{items.begin(), items.begin() + n}, {items.begin() + n, items.end()}};
}

TrainPair make_pair(const Sample &s, const TrainConfig &t)
{
    return {s.id, build_input(s.place, s.connect, t), to_tensor(s.route)};
}

HoldoutItem make_holdout(const Sample &s) { return {s.id, s.place, s.connect, s.route, s.util}; }

} // namespace routecast

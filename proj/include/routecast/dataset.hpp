#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "routecast/arch.hpp"
#include "routecast/cgan.hpp"
#include "routecast/eval.hpp"
#include "routecast/netlist.hpp"
#include "routecast/placer.hpp"
#include "routecast/raster.hpp"
#include "routecast/router.hpp"

namespace routecast {

// One sweep point. File names are relative to the dataset directory;
// `hashes` maps each file name to its content hash.
struct DatasetItem {
    std::string id;
    AnnealSchedule options;
    std::string placement_file;
    std::string place_image;
    std::string connect_image;
    std::string route_image;
    std::string util_file;
    bool overflow = false;
    double bbox_cost = 0;
    int route_iterations = 0;
    double mean_util = 0;
    std::map<std::string, std::string> hashes;
};

struct DatasetManifest {
    int version = 1;
    std::string floorplan_hash;
    std::string netlist_hash;
    std::string arch_file = "arch.json";
    std::string netlist_file = "netlist.txt";
    std::string floor_image = "fl.png";
    std::string floor_image_hash;
    int w = 64;
    int px_per_tile = 0;
    int channel_px = 0;
    RouterConfig router;
    std::vector<DatasetItem> items;

    nlohmann::ordered_json to_json() const;
    static DatasetManifest from_json(const nlohmann::ordered_json &j);
    // Hash of the serialized manifest; stored in checkpoints trained on it.
    std::string hash() const;
};

struct DatasetOptions {
    int w = 64;
    int px_per_tile = 0; // 0: fit_layout
    int channel_px = 0;
    RouterConfig router;
    AnnealSchedule base; // t_init_factor / exit_t for every point
};

struct DatasetBuildStats {
    int computed = 0;
    int reused = 0;
    int overflowed = 0;
};

// sweep -> route -> rasterize for every grid point, written under out_dir
// together with copies of the floorplan and netlist. Items whose files are
// present with matching hashes are reused. The manifest is rewritten after
// every finished item, so an interrupted run resumes where it stopped.
DatasetManifest build_dataset(const Floorplan &fp, const Netlist &nl, const SweepGrid &grid, const std::string &out_dir,
                              const DatasetOptions &opt = {}, DatasetBuildStats *stats = nullptr);

// A manifest plus the design it was generated from.
struct Dataset {
    std::string dir;
    DatasetManifest manifest;
    Floorplan fp;
    Netlist nl;
    RasterLayout layout;
};

// Loads and checks referential integrity: every referenced file exists and
// matches its recorded hash. Throws IoError otherwise.
Dataset open_dataset(const std::string &dir);

struct Sample {
    std::string id;
    Placement placement;
    ImagePlane place;
    ImagePlane connect;
    ImagePlane route;
    ChannelUtilization util;
};

// Float images re-rendered from the stored placement and utilization.
Sample load_sample(const Dataset &ds, const DatasetItem &item);

// Items usable for training: all of them with include_overflow, otherwise
// the non-overflowed ones.
std::vector<const DatasetItem *> usable_items(const Dataset &ds, bool include_overflow);

// Deterministic split in manifest order: the first round(frac * n) items
// train, the rest are held out.
std::pair<std::vector<const DatasetItem *>, std::vector<const DatasetItem *>>
split_items(const std::vector<const DatasetItem *> &items, double train_frac);

TrainPair make_pair(const Sample &s, const TrainConfig &t);
HoldoutItem make_holdout(const Sample &s);

} // namespace routecast

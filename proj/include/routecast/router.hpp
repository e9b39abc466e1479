#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "routecast/arch.hpp"
#include "routecast/netlist.hpp"
#include "routecast/placer.hpp"

namespace routecast {

struct RouterConfig {
    int max_iters = 50;
    double pres_fac_init = 0.5;
    double pres_fac_mult = 1.5;
    double hist_fac = 0.2;
    // Reserved: the router currently makes no randomized decisions, so the
    // result is a function of the inputs alone.
    uint64_t seed = 1;
};

struct RoutingResult {
    // Per net (netlist order): routing-graph nodes of the route tree, in the
    // order they were added; the driver pin comes first. Empty when all
    // terminals share one tile.
    std::vector<std::vector<int>> routes;
    // Per net: parent of each tree node (same indexing as routes), -1 at root.
    std::vector<std::vector<int>> parents;
    int iterations = 0;
    bool overflow = false;
    // Over-capacity segment count at the end of every iteration.
    std::vector<int> overused_history;
};

// Negotiated-congestion router over the channel graph. Nets are routed in
// order of decreasing bounding-box size (ties by net id); multi-sink nets
// grow a tree toward the nearest unreached sink.
RoutingResult route(const Netlist &nl, const Placement &pl, const Floorplan &fp, const RouterConfig &cfg = {});

// Per-segment used / capacity, laid out as a horizontal matrix (rows+1 by
// cols, chanx(x, y) at [y][x-1]) and a vertical matrix (rows by cols+1,
// chany(x, y) at [y-1][x]).
struct ChannelUtilization {
    int cols = 0;
    int rows = 0;
    std::vector<float> chanx;
    std::vector<float> chany;

    ChannelUtilization() = default;
    ChannelUtilization(int cols, int rows);

    float &x_at(int x, int y) { return chanx[y * cols + (x - 1)]; }
    float x_at(int x, int y) const { return chanx[y * cols + (x - 1)]; }
    float &y_at(int x, int y) { return chany[(y - 1) * (cols + 1) + x]; }
    float y_at(int x, int y) const { return chany[(y - 1) * (cols + 1) + x]; }
    int num_segments() const { return static_cast<int>(chanx.size() + chany.size()); }
    // Segment values in routing-graph segment-node order.
    std::vector<float> flat() const;
    float max() const;

    // util.csv: "kind,x,y,u" header, one line per segment, 6 decimals.
    std::string to_csv() const;
    static ChannelUtilization from_csv(const std::string &text, int cols, int rows);

    bool operator==(const ChannelUtilization &) const = default;
};

// Per-segment track usage: number of distinct nets whose route tree uses it.
std::vector<int> segment_usage(const RoutingResult &r, const Floorplan &fp);
ChannelUtilization utilization(const RoutingResult &r, const Floorplan &fp);

// Inclusive tile-coordinate rectangle.
struct Region {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

enum class ScoreMode { Mean, Max, P95 };
ScoreMode parse_score_mode(const std::string &s);

// Named rectangles over the full tile grid: "all", "upper", "lower", "left",
// "right" (halves) and "upper_third", "lower_third", "right_third".
std::optional<Region> named_region(const std::string &name, const Floorplan &fp);

// Reduction of u over segments bordering a tile of the region (the whole
// floorplan when absent). Throws ValidationError if no segment qualifies or
// the region leaves the grid.
double congestion_score(const ChannelUtilization &u, std::optional<Region> region, ScoreMode mode);

} // namespace routecast

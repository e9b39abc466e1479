#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "routecast/arch.hpp"
#include "routecast/netlist.hpp"

namespace routecast {

struct Location {
    int x = 0;
    int y = 0;
    int subtile = 0; // IO port index; 0 for every other tile kind

    bool operator==(const Location &) const = default;
};

// block index -> location. Holds no references; the netlist and floorplan it
// was made for are passed alongside.
struct Placement {
    std::vector<Location> loc;

    bool operator==(const Placement &) const = default;
};

// Itemized legality violations; empty iff legal.
std::vector<std::string> check_placement(const Netlist &nl, const Floorplan &fp, const Placement &pl);

// Throws ValidationError("insufficient <KIND> sites") when a kind does not fit.
Placement random_placement(const Netlist &nl, const Floorplan &fp, uint64_t seed);

// Sum over nets of the half-perimeter of the terminals' tile bounding box.
double bbox_cost(const Netlist &nl, const Placement &pl);

enum class PlaceAlgorithm { BoundingBox };
const char *place_algorithm_name(PlaceAlgorithm a);
PlaceAlgorithm parse_place_algorithm(const std::string &s);

struct AnnealSchedule {
    uint64_t seed = 1;
    double alpha_t = 0.8;
    double inner_num = 1.0;
    PlaceAlgorithm algorithm = PlaceAlgorithm::BoundingBox;
    double t_init_factor = 20.0;
    double exit_t = 0.005;
};

void validate_schedule(const AnnealSchedule &s);

// Metropolis acceptance. At temperature 0 only non-increasing moves pass.
bool metropolis_accept(double delta, double temperature, double uniform01);

struct AnnealResult {
    Placement placement;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    long long moves = 0;
    long long accepted = 0;
    int levels = 0;
    // With snapshot_every > 0: the initial placement, then one snapshot every
    // snapshot_every accepted moves, then the returned placement.
    std::vector<Placement> snapshots;
};

// Simulated annealing on bounding-box cost. Returns the lowest-cost placement
// seen at a temperature-level boundary, so final_cost <= initial_cost.
AnnealResult anneal(const Netlist &nl, const Floorplan &fp, const AnnealSchedule &schedule,
                    long long snapshot_every = 0);

struct SweepGrid {
    std::vector<uint64_t> seeds;
    std::vector<double> alpha_ts;
    std::vector<double> inner_nums;
    std::vector<PlaceAlgorithm> algorithms;

    size_t size() const { return seeds.size() * alpha_ts.size() * inner_nums.size() * algorithms.size(); }
    // Cartesian order: seeds outermost, algorithms innermost.
    std::vector<AnnealSchedule> schedules(const AnnealSchedule &base = {}) const;
};

SweepGrid default_sweep_grid();

struct SweepPoint {
    AnnealSchedule options;
    AnnealResult result;
};

// Runs every grid point; points run in parallel, each with its own RNG seeded
// by the point's seed value. Output order is the cartesian order.
std::vector<SweepPoint> sweep(const Netlist &nl, const Floorplan &fp, const SweepGrid &grid,
                              const AnnealSchedule &base = {});

// Placement file: '#' header lines, then "<block_id> <x> <y> <subtile>".
std::string write_placement(const Netlist &nl, const Floorplan &fp, const Placement &pl,
                            const AnnealSchedule &options);
Placement read_placement(const std::string &text, const Netlist &nl, const Floorplan &fp);

} // namespace routecast

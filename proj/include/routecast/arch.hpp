#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace routecast {

enum class TileKind : uint8_t { IO, CLB, MEM, MULT };

const char *tile_kind_name(TileKind k);

// Island-style architecture parameters. Column indices (mem_col, mult_col)
// count interior columns from 0; the IO ring adds one tile on every side.
struct FloorplanSpec {
    int cols = 8;
    int rows = 8;
    int mem_col = 2;
    int mult_col = 6;
    int channel_capacity = 16;
    int io_ports_per_pad = 8;

    bool operator==(const FloorplanSpec &) const = default;
};

// Throws ValidationError naming the first offending field.
void validate_spec(const FloorplanSpec &spec);

// Tile grid of (cols + 2) x (rows + 2). Tile (x, y) has x growing to the
// right and y growing upward; the ring is x == 0, x == cols + 1, y == 0 and
// y == rows + 1. Ring corners are IO tiles without usable ports.
//
// Channel segments follow the VPR convention:
//   chanx(x, y), 1 <= x <= cols, 0 <= y <= rows: horizontal segment running
//     above tile row y, spanning tile column x.
//   chany(x, y), 0 <= x <= cols, 1 <= y <= rows: vertical segment running
//     right of tile column x, spanning tile row y.
class Floorplan {
  public:
    explicit Floorplan(const FloorplanSpec &spec);

    const FloorplanSpec &spec() const { return spec_; }
    int grid_width() const { return spec_.cols + 2; }
    int grid_height() const { return spec_.rows + 2; }
    int cols() const { return spec_.cols; }
    int rows() const { return spec_.rows; }
    int capacity() const { return spec_.channel_capacity; }

    TileKind kind(int x, int y) const { return tiles_[y * grid_width() + x]; }
    bool is_corner(int x, int y) const;
    // Number of blocks a tile can host: io_ports_per_pad on IO pads, 0 on
    // ring corners, 1 elsewhere.
    int site_capacity(int x, int y) const;
    int count_tiles(TileKind k) const;

    int num_chanx() const { return (spec_.rows + 1) * spec_.cols; }
    int num_chany() const { return (spec_.cols + 1) * spec_.rows; }
    int num_segments() const { return num_chanx() + num_chany(); }
    int chanx_index(int x, int y) const { return y * spec_.cols + (x - 1); }
    int chany_index(int x, int y) const { return num_chanx() + (y - 1) * (spec_.cols + 1) + x; }

    // Versioned JSON document: spec fields plus derived grid dims.
    std::string to_json() const;
    static Floorplan from_json(const std::string &text);

  private:
    FloorplanSpec spec_;
    std::vector<TileKind> tiles_;
};

Floorplan build_floorplan(const FloorplanSpec &spec);

// Channel-segment / tile-pin graph used by the router.
//
// Node ids: [0, num_chanx) horizontal segments, [num_chanx, num_segments)
// vertical segments, then one pin per usable tile. Segments incident to the
// same switch point are fully connected; each pin connects to the segments
// bordering its tile.
struct RoutingGraph {
    enum class NodeKind : uint8_t { ChanX, ChanY, Pin };
    struct NodeInfo {
        NodeKind kind;
        int16_t x;
        int16_t y;
    };

    std::vector<NodeInfo> nodes;
    std::vector<int> capacity; // track capacity for segments, 0 for pins
    std::vector<int> adj_offset; // CSR, size nodes + 1
    std::vector<int> adj;
    int num_segments = 0;
    int grid_width = 0;
    std::vector<int> pin_of_tile; // grid_width * grid_height, -1 if none

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_edges() const { return static_cast<int>(adj.size()) / 2; }
    int pin(int x, int y) const { return pin_of_tile[y * grid_width + x]; }
    bool is_segment(int n) const { return n < num_segments; }
};

RoutingGraph routing_graph(const Floorplan &fp);

} // namespace routecast

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "routecast/arch.hpp"

namespace routecast {

enum class BlockKind : uint8_t { CLB, INPAD, OUTPAD, MEM, MULT };

const char *block_kind_name(BlockKind k);
std::optional<BlockKind> parse_block_kind(const std::string &s);
// Tile kind a block of this kind must be placed on.
TileKind site_kind(BlockKind k);

struct Block {
    std::string id;
    BlockKind kind;

    bool operator==(const Block &) const = default;
};

// Driver and sinks are block indices into Netlist::blocks.
struct Net {
    std::string id;
    int driver = -1;
    std::vector<int> sinks;

    bool operator==(const Net &) const = default;
};

struct NetlistStats {
    int clbs = 0;
    int inpads = 0;
    int outpads = 0;
    int mems = 0;
    int mults = 0;
    int nets = 0;
    int pins = 0;
};

// Packed netlist. Blocks and nets are kept in canonical order (sorted by id),
// so equality of two netlists is equality of their serializations.
class Netlist {
  public:
    Netlist() = default;
    // Builds from unsorted parts. Does not validate; see validate().
    Netlist(std::vector<Block> blocks, std::vector<Net> nets);

    const std::vector<Block> &blocks() const { return blocks_; }
    const std::vector<Net> &nets() const { return nets_; }
    int num_blocks() const { return static_cast<int>(blocks_.size()); }
    int num_nets() const { return static_cast<int>(nets_.size()); }
    std::optional<int> find_block(const std::string &id) const;
    NetlistStats stats() const;

    // block index -> indices of nets touching it (driver or sink), ascending.
    std::vector<std::vector<int>> block_nets() const;

    std::string serialize() const;
    std::string hash() const;

    bool operator==(const Netlist &o) const { return blocks_ == o.blocks_ && nets_ == o.nets_; }

  private:
    std::vector<Block> blocks_;
    std::vector<Net> nets_;
    std::unordered_map<std::string, int> index_;
};

// Line format:
//   block <id> <CLB|INPAD|OUTPAD|MEM|MULT>
//   net <id> <driver> <sink>+
// '#' starts a comment. Throws ValidationError with the line number on
// syntax errors, duplicate block ids and unknown endpoints; the result is
// also run through validate().
Netlist parse_netlist(const std::string &text);

// Itemized invariant violations; empty iff the netlist is valid.
std::vector<std::string> validate(const Netlist &n);

struct SyntheticParams {
    int n_clb = 44;
    int n_io_in = 12;
    int n_io_out = 8;
    int n_mem = 0;
    int n_mult = 0;
    double avg_fanout = 2.5;
    double rent_exponent = 0.6;
    // Not a wiring-model parameter: net count target relative to CLB count.
    // Default is the VTR-benchmark ratio (~2,059 nets / 563 CLBs).
    double nets_per_clb = 3.6;
};

// Deterministic for fixed (params, seed). Kinds are assigned first, then
// nets are wired by walking a recursive bipartition of the block order: from
// the driver's leaf, each step up the hierarchy is taken with probability
// 2^(rent_exponent - 1), and the sink is drawn from the reached subtree.
Netlist generate_synthetic(const SyntheticParams &params, uint64_t seed);

} // namespace routecast

#include "routecast/netlist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "routecast/error.hpp"
#include "routecast/hash.hpp"

namespace routecast {

const char *block_kind_name(BlockKind k)
{
    switch (k) {
    case BlockKind::CLB:
        return "CLB";
    case BlockKind::INPAD:
        return "INPAD";
    case BlockKind::OUTPAD:
        return "OUTPAD";
    case BlockKind::MEM:
        return "MEM";
    case BlockKind::MULT:
        return "MULT";
    }
    return "?";
}

std::optional<BlockKind> parse_block_kind(const std::string &s)
{
    for (BlockKind k : {BlockKind::CLB, BlockKind::INPAD, BlockKind::OUTPAD, BlockKind::MEM, BlockKind::MULT})
        if (s == block_kind_name(k))
            return k;
    return std::nullopt;
}

TileKind site_kind(BlockKind k)
{
    switch (k) {
    case BlockKind::CLB:
        return TileKind::CLB;
    case BlockKind::MEM:
        return TileKind::MEM;
    case BlockKind::MULT:
        return TileKind::MULT;
    default:
        return TileKind::IO;
    }
}

Netlist::Netlist(std::vector<Block> blocks, std::vector<Net> nets)
{
    std::vector<int> order(blocks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return blocks[a].id < blocks[b].id; });
    std::vector<int> remap(blocks.size());
    blocks_.reserve(blocks.size());
    for (size_t i = 0; i < order.size(); ++i) {
        remap[order[i]] = static_cast<int>(i);
        blocks_.push_back(std::move(blocks[order[i]]));
    }
    auto map_idx = [&](int b) { return (b >= 0 && b < static_cast<int>(remap.size())) ? remap[b] : -1; };
    for (auto &n : nets) {
        n.driver = map_idx(n.driver);
        for (int &s : n.sinks)
            s = map_idx(s);
    }
    std::stable_sort(nets.begin(), nets.end(), [](const Net &a, const Net &b) { return a.id < b.id; });
    nets_ = std::move(nets);
    for (size_t i = 0; i < blocks_.size(); ++i)
        index_.emplace(blocks_[i].id, static_cast<int>(i));
}

std::optional<int> Netlist::find_block(const std::string &id) const
{
    auto it = index_.find(id);
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

NetlistStats Netlist::stats() const
{
    NetlistStats s;
    for (const auto &b : blocks_) {
        switch (b.kind) {
        case BlockKind::CLB:
            ++s.clbs;
            break;
        case BlockKind::INPAD:
            ++s.inpads;
            break;
        case BlockKind::OUTPAD:
            ++s.outpads;
            break;
        case BlockKind::MEM:
            ++s.mems;
            break;
        case BlockKind::MULT:
            ++s.mults;
            break;
        }
    }
    s.nets = num_nets();
    for (const auto &n : nets_)
        s.pins += 1 + static_cast<int>(n.sinks.size());
    return s;
}

std::vector<std::vector<int>> Netlist::block_nets() const
{
    std::vector<std::vector<int>> out(blocks_.size());
    for (int i = 0; i < num_nets(); ++i) {
        const Net &n = nets_[i];
        auto add = [&](int b) {
            if (b >= 0 && b < num_blocks() && (out[b].empty() || out[b].back() != i))
                out[b].push_back(i);
        };
        add(n.driver);
        for (int s : n.sinks)
            add(s);
    }
    return out;
}

std::string Netlist::serialize() const
{
    std::string out;
    for (const auto &b : blocks_)
        out += "block " + b.id + " " + block_kind_name(b.kind) + "\n";
    for (const auto &n : nets_) {
        out += "net " + n.id + " " + blocks_.at(n.driver).id;
        for (int s : n.sinks)
            out += " " + blocks_.at(s).id;
        out += "\n";
    }
    return out;
}

std::string Netlist::hash() const { return content_hash(serialize()); }

Netlist parse_netlist(const std::string &text)
{
    std::vector<Block> blocks;
    std::unordered_map<std::string, int> index;
    struct PendingNet {
        std::string id;
        std::vector<std::string> terms;
        int line;
    };
    std::vector<PendingNet> pending;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;)
            tok.push_back(t);
        if (tok.empty())
            continue;
        const std::string where = " at line " + std::to_string(lineno);
        if (tok[0] == "block") {
            if (tok.size() != 3)
                throw ValidationError("syntax error: expected 'block <id> <KIND>'" + where);
            auto kind = parse_block_kind(tok[2]);
            if (!kind)
                throw ValidationError("unknown block kind '" + tok[2] + "'" + where);
            if (!index.emplace(tok[1], static_cast<int>(blocks.size())).second)
                throw ValidationError("duplicate block id '" + tok[1] + "'" + where);
            blocks.push_back({tok[1], *kind});
        } else if (tok[0] == "net") {
            if (tok.size() < 4)
                throw ValidationError("syntax error: expected 'net <id> <driver> <sink>+'" + where);
            pending.push_back({tok[1], std::vector<std::string>(tok.begin() + 2, tok.end()), lineno});
        } else {
            throw ValidationError("syntax error: unknown directive '" + tok[0] + "'" + where);
        }
    }

    std::vector<Net> nets;
    for (const auto &p : pending) {
        Net n;
        n.id = p.id;
        for (size_t i = 0; i < p.terms.size(); ++i) {
            auto it = index.find(p.terms[i]);
            if (it == index.end())
                throw ValidationError("unknown block '" + p.terms[i] + "' at line " + std::to_string(p.line));
            if (i == 0)
                n.driver = it->second;
            else
                n.sinks.push_back(it->second);
        }
        nets.push_back(std::move(n));
    }
    Netlist result(std::move(blocks), std::move(nets));
    auto report = validate(result);
    if (!report.empty())
        throw ValidationError("invalid netlist: " + report.front());
    return result;
}

std::vector<std::string> validate(const Netlist &n)
{
    std::vector<std::string> v;
    if (n.num_blocks() == 0)
        v.push_back("netlist has no blocks");
    for (int i = 1; i < n.num_blocks(); ++i)
        if (n.blocks()[i].id == n.blocks()[i - 1].id)
            v.push_back("duplicate id '" + n.blocks()[i].id + "'");
    std::set<std::string> net_ids;
    std::vector<bool> drives(n.num_blocks(), false);
    auto valid = [&](int b) { return b >= 0 && b < n.num_blocks(); };
    for (const auto &net : n.nets()) {
        if (!net_ids.insert(net.id).second)
            v.push_back("duplicate net id '" + net.id + "'");
        if (!valid(net.driver)) {
            v.push_back("net " + net.id + " has unknown driver");
            continue;
        }
        drives[net.driver] = true;
        if (net.sinks.empty())
            v.push_back("net " + net.id + " has no sinks");
        if (n.blocks()[net.driver].kind == BlockKind::OUTPAD)
            v.push_back("net " + net.id + " is driven by OUTPAD");
        for (int s : net.sinks) {
            if (!valid(s)) {
                v.push_back("net " + net.id + " has unknown sink");
            } else if (s == net.driver) {
                v.push_back("self-loop net " + net.id);
            } else if (n.blocks()[s].kind == BlockKind::INPAD) {
                v.push_back("net " + net.id + " sinks into INPAD " + n.blocks()[s].id);
            }
        }
    }
    for (int i = 0; i < n.num_blocks(); ++i)
        if (n.blocks()[i].kind == BlockKind::INPAD && !drives[i])
            v.push_back("INPAD " + n.blocks()[i].id + " drives no net");
    return v;
}

namespace {

// Fixed-width ids keep lexicographic order equal to numeric order.
std::string numbered(const char *prefix, int i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%05d", prefix, i);
    return buf;
}

} // namespace

Netlist generate_synthetic(const SyntheticParams &p, uint64_t seed)
{
    if (p.n_clb < 1)
        throw ValidationError("synthetic netlist: n_clb must be >= 1");
    if (p.n_io_in < 0 || p.n_io_out < 0 || p.n_mem < 0 || p.n_mult < 0)
        throw ValidationError("synthetic netlist: block counts must be >= 0");
    if (!(p.avg_fanout >= 1.0))
        throw ValidationError("synthetic netlist: avg_fanout must be >= 1");
    if (!(p.rent_exponent > 0.0 && p.rent_exponent <= 1.0))
        throw ValidationError("synthetic netlist: rent_exponent must be in (0, 1]");
    if (!(p.nets_per_clb > 0.0))
        throw ValidationError("synthetic netlist: nets_per_clb must be > 0");

    std::mt19937_64 rng(seed);
    auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto coin = [&](double prob) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < prob; };

    std::vector<Block> blocks;
    for (int i = 0; i < p.n_clb; ++i)
        blocks.push_back({numbered("clb", i), BlockKind::CLB});
    for (int i = 0; i < p.n_io_in; ++i)
        blocks.push_back({numbered("in", i), BlockKind::INPAD});
    for (int i = 0; i < p.n_io_out; ++i)
        blocks.push_back({numbered("out", i), BlockKind::OUTPAD});
    for (int i = 0; i < p.n_mem; ++i)
        blocks.push_back({numbered("mem", i), BlockKind::MEM});
    for (int i = 0; i < p.n_mult; ++i)
        blocks.push_back({numbered("mult", i), BlockKind::MULT});
    const int nb = static_cast<int>(blocks.size());

    // Leaf order of the bipartition tree: a seeded shuffle, so every kind is
    // spread over the hierarchy. Position pos[b] is the leaf of block b.
    std::vector<int> leaf(nb);
    std::iota(leaf.begin(), leaf.end(), 0);
    std::shuffle(leaf.begin(), leaf.end(), rng);
    std::vector<int> pos(nb);
    for (int i = 0; i < nb; ++i)
        pos[leaf[i]] = i;
    int levels = 0;
    while ((1 << levels) < nb)
        ++levels;

    const double p_up = std::pow(2.0, p.rent_exponent - 1.0);
    std::vector<bool> is_sink(nb, false);
    auto can_sink = [&](int b, int driver) { return b != driver && blocks[b].kind != BlockKind::INPAD; };
    int sinkable_total = nb - p.n_io_in;

    // Draws a sink for driver d by climbing the hierarchy from its leaf. An
    // OUTPAD takes a single net, as a pad port does, unless nothing else is
    // left; otherwise a busy pad tile would need more tracks than its one
    // adjacent segment has.
    auto draw_sink = [&](int d, const std::vector<int> &exclude) -> int {
        int start = 1;
        while (start < levels && coin(p_up))
            ++start;
        for (bool relaxed : {false, true}) {
            for (int level = start; level <= levels + 1; ++level) {
                const int span = 1 << std::min(level, 30);
                const int lo = (pos[d] / span) * span;
                const int hi = std::min(nb, lo + span);
                std::vector<int> cand;
                for (int i = lo; i < hi; ++i) {
                    int b = leaf[i];
                    if (!can_sink(b, d) || std::find(exclude.begin(), exclude.end(), b) != exclude.end())
                        continue;
                    if (!relaxed && blocks[b].kind == BlockKind::OUTPAD && is_sink[b])
                        continue;
                    cand.push_back(b);
                }
                if (!cand.empty())
                    return cand[uniform(0, static_cast<int>(cand.size()) - 1)];
            }
        }
        return -1;
    };

    // Drivers: one net per INPAD, MEM and MULT; CLBs take the rest of the
    // target, spread round-robin over a shuffled CLB order.
    std::vector<int> drivers;
    for (int b = 0; b < nb; ++b)
        if (blocks[b].kind == BlockKind::INPAD || blocks[b].kind == BlockKind::MEM || blocks[b].kind == BlockKind::MULT)
            drivers.push_back(b);
    const int target = std::max(static_cast<int>(std::lround(p.nets_per_clb * p.n_clb)),
                                static_cast<int>(drivers.size()) + p.n_clb);
    std::vector<int> clbs(p.n_clb);
    std::iota(clbs.begin(), clbs.end(), 0);
    std::shuffle(clbs.begin(), clbs.end(), rng);
    for (int i = 0; static_cast<int>(drivers.size()) < target; ++i)
        drivers.push_back(clbs[i % p.n_clb]);

    std::vector<Net> nets;
    const double extra_mean = p.avg_fanout - 1.0;
    for (size_t i = 0; i < drivers.size(); ++i) {
        const int d = drivers[i];
        const int max_sinks = sinkable_total - (can_sink(d, -1) ? 1 : 0);
        if (max_sinks < 1)
            continue;
        int fanout = 1;
        if (extra_mean > 0.0)
            fanout += std::geometric_distribution<int>(1.0 / (1.0 + extra_mean))(rng);
        fanout = std::min(fanout, max_sinks);
        Net net;
        net.id = numbered("n", static_cast<int>(nets.size()));
        net.driver = d;
        for (int k = 0; k < fanout; ++k) {
            int s = draw_sink(d, net.sinks);
            if (s < 0)
                break;
            net.sinks.push_back(s);
            is_sink[s] = true;
        }
        if (net.sinks.empty())
            continue;
        std::sort(net.sinks.begin(), net.sinks.end());
        nets.push_back(std::move(net));
    }

    // Unloaded OUTPADs get attached to the nearest-in-hierarchy CLB net.
    for (int b = 0; b < nb; ++b) {
        if (blocks[b].kind != BlockKind::OUTPAD || is_sink[b] || nets.empty())
            continue;
        int best = -1, best_dist = 1 << 30;
        for (size_t i = 0; i < nets.size(); ++i) {
            const int d = nets[i].driver;
            if (blocks[d].kind != BlockKind::CLB)
                continue;
            int dist = std::abs(pos[d] - pos[b]);
            if (dist < best_dist) {
                best_dist = dist;
                best = static_cast<int>(i);
            }
        }
        if (best < 0)
            best = 0;
        auto &sinks = nets[best].sinks;
        sinks.insert(std::upper_bound(sinks.begin(), sinks.end(), b), b);
        is_sink[b] = true;
    }

    return Netlist(std::move(blocks), std::move(nets));
}

} // namespace routecast

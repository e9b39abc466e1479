#include "routecast/arch.hpp"

#include <algorithm>
#include <string>

#include "json.hpp"
#include "routecast/error.hpp"

namespace routecast {

namespace {

constexpr int kFloorplanVersion = 1;

void require(bool cond, const std::string &field, const std::string &what)
{
    if (!cond)
        throw ValidationError("invalid floorplan spec: " + field + " " + what);
}

} // namespace

const char *tile_kind_name(TileKind k)
{
    switch (k) {
    case TileKind::IO:
        return "IO";
    case TileKind::CLB:
        return "CLB";
    case TileKind::MEM:
        return "MEM";
    case TileKind::MULT:
        return "MULT";
    }
    return "?";
}

void validate_spec(const FloorplanSpec &spec)
{
    require(spec.cols >= 2, "cols", "must be >= 2");
    require(spec.rows >= 2, "rows", "must be >= 2");
    require(spec.mem_col >= 0 && spec.mem_col < spec.cols, "mem_col", "out of range [0, cols)");
    require(spec.mult_col >= 0 && spec.mult_col < spec.cols, "mult_col", "out of range [0, cols)");
    if (spec.mem_col == spec.mult_col)
        throw ValidationError("invalid floorplan spec: mem_col equals mult_col");
    require(spec.channel_capacity >= 1, "channel_capacity", "must be >= 1");
    require(spec.io_ports_per_pad >= 1, "io_ports_per_pad", "must be >= 1");
    // Node coordinates are stored as int16.
    require(spec.cols < 30000 && spec.rows < 30000, "cols/rows", "too large");
}

Floorplan::Floorplan(const FloorplanSpec &spec) : spec_(spec)
{
    validate_spec(spec);
    const int gw = grid_width(), gh = grid_height();
    tiles_.assign(static_cast<size_t>(gw) * gh, TileKind::IO);
    for (int y = 1; y <= spec.rows; ++y) {
        for (int x = 1; x <= spec.cols; ++x) {
            TileKind k = TileKind::CLB;
            if (x - 1 == spec.mem_col)
                k = TileKind::MEM;
            else if (x - 1 == spec.mult_col)
                k = TileKind::MULT;
            tiles_[y * gw + x] = k;
        }
    }
}

bool Floorplan::is_corner(int x, int y) const
{
    return (x == 0 || x == grid_width() - 1) && (y == 0 || y == grid_height() - 1);
}

int Floorplan::site_capacity(int x, int y) const
{
    if (kind(x, y) != TileKind::IO)
        return 1;
    return is_corner(x, y) ? 0 : spec_.io_ports_per_pad;
}

int Floorplan::count_tiles(TileKind k) const { return static_cast<int>(std::count(tiles_.begin(), tiles_.end(), k)); }

std::string Floorplan::to_json() const
{
    nlohmann::ordered_json j;
    j["version"] = kFloorplanVersion;
    j["cols"] = spec_.cols;
    j["rows"] = spec_.rows;
    j["mem_col"] = spec_.mem_col;
    j["mult_col"] = spec_.mult_col;
    j["channel_capacity"] = spec_.channel_capacity;
    j["io_ports_per_pad"] = spec_.io_ports_per_pad;
    j["grid_width"] = grid_width();
    j["grid_height"] = grid_height();
    return j.dump(2) + "\n";
}

Floorplan Floorplan::from_json(const std::string &text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(std::string("floorplan json: ") + e.what());
    }
    if (!j.is_object())
        throw ValidationError("floorplan json: expected an object");
    if (j.value("version", 0) != kFloorplanVersion)
        throw ValidationError("floorplan json: unsupported version");
    FloorplanSpec spec;
    auto field = [&](const char *name, int &dst) {
        if (!j.contains(name) || !j[name].is_number_integer())
            throw ValidationError(std::string("floorplan json: missing integer field '") + name + "'");
        dst = j[name].get<int>();
    };
    field("cols", spec.cols);
    field("rows", spec.rows);
    field("mem_col", spec.mem_col);
    field("mult_col", spec.mult_col);
    if (j.contains("channel_capacity"))
        field("channel_capacity", spec.channel_capacity);
    if (j.contains("io_ports_per_pad"))
        field("io_ports_per_pad", spec.io_ports_per_pad);
    Floorplan fp(spec);
    if ((j.contains("grid_width") && j["grid_width"] != fp.grid_width()) ||
        (j.contains("grid_height") && j["grid_height"] != fp.grid_height()))
        throw ValidationError("floorplan json: grid dims disagree with spec");
    return fp;
}

Floorplan build_floorplan(const FloorplanSpec &spec) { return Floorplan(spec); }

RoutingGraph routing_graph(const Floorplan &fp)
{
    using NK = RoutingGraph::NodeKind;
    const int cols = fp.cols(), rows = fp.rows();
    const int gw = fp.grid_width(), gh = fp.grid_height();

    RoutingGraph g;
    g.num_segments = fp.num_segments();
    g.grid_width = gw;
    g.nodes.resize(g.num_segments);
    for (int y = 0; y <= rows; ++y)
        for (int x = 1; x <= cols; ++x)
            g.nodes[fp.chanx_index(x, y)] = {NK::ChanX, int16_t(x), int16_t(y)};
    for (int y = 1; y <= rows; ++y)
        for (int x = 0; x <= cols; ++x)
            g.nodes[fp.chany_index(x, y)] = {NK::ChanY, int16_t(x), int16_t(y)};
    g.capacity.assign(g.num_segments, fp.capacity());

    g.pin_of_tile.assign(static_cast<size_t>(gw) * gh, -1);
    for (int y = 0; y < gh; ++y) {
        for (int x = 0; x < gw; ++x) {
            if (fp.site_capacity(x, y) == 0)
                continue;
            g.pin_of_tile[y * gw + x] = g.num_nodes();
            g.nodes.push_back({NK::Pin, int16_t(x), int16_t(y)});
            g.capacity.push_back(0);
        }
    }

    std::vector<std::pair<int, int>> edges;
    // Switch point (x, y) sits at the corner shared by tiles (x, y), (x+1, y),
    // (x, y+1), (x+1, y+1).
    std::vector<int> incident;
    for (int y = 0; y <= rows; ++y) {
        for (int x = 0; x <= cols; ++x) {
            incident.clear();
            if (x >= 1)
                incident.push_back(fp.chanx_index(x, y));
            if (x + 1 <= cols)
                incident.push_back(fp.chanx_index(x + 1, y));
            if (y >= 1)
                incident.push_back(fp.chany_index(x, y));
            if (y + 1 <= rows)
                incident.push_back(fp.chany_index(x, y + 1));
            for (size_t a = 0; a < incident.size(); ++a)
                for (size_t b = a + 1; b < incident.size(); ++b)
                    edges.emplace_back(incident[a], incident[b]);
        }
    }
    for (int y = 0; y < gh; ++y) {
        for (int x = 0; x < gw; ++x) {
            const int p = g.pin(x, y);
            if (p < 0)
                continue;
            if (x >= 1 && x <= cols) {
                if (y >= 1)
                    edges.emplace_back(p, fp.chanx_index(x, y - 1));
                if (y <= rows)
                    edges.emplace_back(p, fp.chanx_index(x, y));
            }
            if (y >= 1 && y <= rows) {
                if (x >= 1)
                    edges.emplace_back(p, fp.chany_index(x - 1, y));
                if (x <= cols)
                    edges.emplace_back(p, fp.chany_index(x, y));
            }
        }
    }

    const int n = g.num_nodes();
    std::vector<int> degree(n, 0);
    for (auto [a, b] : edges) {
        ++degree[a];
        ++degree[b];
    }
    g.adj_offset.assign(n + 1, 0);
    for (int i = 0; i < n; ++i)
        g.adj_offset[i + 1] = g.adj_offset[i] + degree[i];
    g.adj.resize(g.adj_offset[n]);
    std::vector<int> fill(g.adj_offset.begin(), g.adj_offset.end() - 1);
    for (auto [a, b] : edges) {
        g.adj[fill[a]++] = b;
        g.adj[fill[b]++] = a;
    }
    for (int i = 0; i < n; ++i)
        std::sort(g.adj.begin() + g.adj_offset[i], g.adj.begin() + g.adj_offset[i + 1]);
    return g;
}

} // namespace routecast

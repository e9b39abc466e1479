#include "routecast/router.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "routecast/error.hpp"

namespace routecast {

namespace {

struct NetTerminals {
    int source = -1;
    std::vector<int> sinks; // distinct pin nodes, excluding the source pin
};

NetTerminals terminals(const Net &n, const Placement &pl, const RoutingGraph &g)
{
    NetTerminals t;
    const Location &d = pl.loc[n.driver];
    t.source = g.pin(d.x, d.y);
    for (int s : n.sinks) {
        const Location &l = pl.loc[s];
        const int p = g.pin(l.x, l.y);
        if (p != t.source && std::find(t.sinks.begin(), t.sinks.end(), p) == t.sinks.end())
            t.sinks.push_back(p);
    }
    std::sort(t.sinks.begin(), t.sinks.end());
    return t;
}

class NegotiatedRouter {
  public:
    NegotiatedRouter(const RoutingGraph &g, const RouterConfig &cfg)
        : g_(g), cfg_(cfg), occ_(g.num_nodes(), 0), hist_(g.num_nodes(), 0.0), dist_(g.num_nodes(), kUnset),
          prev_(g.num_nodes()), in_tree_(g.num_nodes(), -1), target_(g.num_nodes(), false)
    {
    }

    double node_cost(int n, double pres_fac) const
    {
        const int over = std::max(0, occ_[n] + 1 - g_.capacity[n]);
        return (1.0 + hist_[n]) * (1.0 + pres_fac * over);
    }

    // Routes one net as an incremental Steiner tree; returns tree nodes and
    // their parents (indices into the returned node list).
    void route_net(const NetTerminals &t, double pres_fac, std::vector<int> &nodes, std::vector<int> &parents)
    {
        nodes.clear();
        parents.clear();
        if (t.sinks.empty())
            return;
        nodes.push_back(t.source);
        parents.push_back(-1);
        in_tree_[t.source] = 0;
        for (int s : t.sinks)
            target_[s] = true;
        int remaining = static_cast<int>(t.sinks.size());

        using Item = std::pair<double, int>;
        while (remaining > 0) {
            std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
            touched_.clear();
            auto touch = [&](int n, double d, int p) {
                if (dist_[n] == kUnset)
                    touched_.push_back(n);
                dist_[n] = d;
                prev_[n] = p;
            };
            for (size_t i = 0; i < nodes.size(); ++i) {
                const int n = nodes[i];
                if (n == t.source || g_.is_segment(n)) {
                    touch(n, 0.0, -1);
                    pq.emplace(0.0, n);
                }
            }
            int reached = -1;
            while (!pq.empty()) {
                auto [d, u] = pq.top();
                pq.pop();
                if (d > dist_[u])
                    continue;
                if (target_[u]) {
                    reached = u;
                    break;
                }
                if (!g_.is_segment(u) && u != t.source)
                    continue; // pins are endpoints only
                for (int k = g_.adj_offset[u]; k < g_.adj_offset[u + 1]; ++k) {
                    const int v = g_.adj[k];
                    double nd;
                    if (g_.is_segment(v))
                        nd = d + node_cost(v, pres_fac);
                    else if (target_[v])
                        nd = d;
                    else
                        continue;
                    if (dist_[v] == kUnset || nd < dist_[v]) {
                        touch(v, nd, u);
                        pq.emplace(nd, v);
                    }
                }
            }
            for (int n : touched_)
                dist_[n] = kUnset;
            if (reached < 0)
                throw std::logic_error("router: sink pin unreachable from net source");

            // Walk back to the tree and graft the path.
            std::vector<int> path;
            for (int n = reached; in_tree_[n] < 0; n = prev_[n])
                path.push_back(n);
            const int attach = prev_[path.back()];
            int parent = in_tree_[attach];
            for (auto it = path.rbegin(); it != path.rend(); ++it) {
                in_tree_[*it] = static_cast<int>(nodes.size());
                nodes.push_back(*it);
                parents.push_back(parent);
                parent = in_tree_[*it];
            }
            target_[reached] = false;
            --remaining;
        }
        for (int n : nodes)
            in_tree_[n] = -1;
    }

    void add_usage(const std::vector<int> &nodes, int delta)
    {
        for (int n : nodes)
            if (g_.is_segment(n))
                occ_[n] += delta;
    }

    int overused() const
    {
        int c = 0;
        for (int n = 0; n < g_.num_segments; ++n)
            c += occ_[n] > g_.capacity[n];
        return c;
    }

    void update_history()
    {
        for (int n = 0; n < g_.num_segments; ++n)
            if (occ_[n] > g_.capacity[n])
                hist_[n] += cfg_.hist_fac * (occ_[n] - g_.capacity[n]);
    }

  private:
    static constexpr double kUnset = -1.0;

    const RoutingGraph &g_;
    const RouterConfig &cfg_;
    std::vector<int> occ_;
    std::vector<double> hist_;
    std::vector<double> dist_;
    std::vector<int> prev_;
    std::vector<int> in_tree_;
    std::vector<char> target_;
    std::vector<int> touched_;
};

} // namespace

RoutingResult route(const Netlist &nl, const Placement &pl, const Floorplan &fp, const RouterConfig &cfg)
{
    if (cfg.max_iters < 1)
        throw ValidationError("router: max_iters must be >= 1");
    const auto violations = check_placement(nl, fp, pl);
    if (!violations.empty())
        throw ValidationError("router: illegal placement: " + violations.front());

    const RoutingGraph g = routing_graph(fp);
    std::vector<NetTerminals> terms;
    terms.reserve(nl.num_nets());
    for (const auto &n : nl.nets())
        terms.push_back(terminals(n, pl, g));

    std::vector<int> order(nl.num_nets());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> span(nl.num_nets());
    for (int i = 0; i < nl.num_nets(); ++i) {
        const Net &n = nl.nets()[i];
        const Location &d = pl.loc[n.driver];
        int x0 = d.x, x1 = d.x, y0 = d.y, y1 = d.y;
        for (int s : n.sinks) {
            x0 = std::min(x0, pl.loc[s].x);
            x1 = std::max(x1, pl.loc[s].x);
            y0 = std::min(y0, pl.loc[s].y);
            y1 = std::max(y1, pl.loc[s].y);
        }
        span[i] = (x1 - x0) + (y1 - y0);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return span[a] > span[b]; });

    RoutingResult res;
    res.routes.assign(nl.num_nets(), {});
    res.parents.assign(nl.num_nets(), {});
    NegotiatedRouter router(g, cfg);
    double pres_fac = cfg.pres_fac_init;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        for (int i : order) {
            router.add_usage(res.routes[i], -1);
            router.route_net(terms[i], pres_fac, res.routes[i], res.parents[i]);
            router.add_usage(res.routes[i], +1);
        }
        res.iterations = iter;
        const int over = router.overused();
        res.overused_history.push_back(over);
        if (over == 0) {
            res.overflow = false;
            return res;
        }
        router.update_history();
        pres_fac *= cfg.pres_fac_mult;
    }
    res.overflow = true;
    return res;
}

ChannelUtilization::ChannelUtilization(int c, int r)
    : cols(c), rows(r), chanx(static_cast<size_t>(r + 1) * c, 0.0f), chany(static_cast<size_t>(c + 1) * r, 0.0f)
{
}

std::vector<float> ChannelUtilization::flat() const
{
    std::vector<float> out(chanx);
    out.insert(out.end(), chany.begin(), chany.end());
    return out;
}

float ChannelUtilization::max() const
{
    float m = 0.0f;
    for (float v : chanx)
        m = std::max(m, v);
    for (float v : chany)
        m = std::max(m, v);
    return m;
}

std::string ChannelUtilization::to_csv() const
{
    std::string out = "kind,x,y,u\n";
    char buf[96];
    for (int y = 0; y <= rows; ++y)
        for (int x = 1; x <= cols; ++x) {
            std::snprintf(buf, sizeof buf, "chanx,%d,%d,%.6f\n", x, y, static_cast<double>(x_at(x, y)));
            out += buf;
        }
    for (int y = 1; y <= rows; ++y)
        for (int x = 0; x <= cols; ++x) {
            std::snprintf(buf, sizeof buf, "chany,%d,%d,%.6f\n", x, y, static_cast<double>(y_at(x, y)));
            out += buf;
        }
    return out;
}

ChannelUtilization ChannelUtilization::from_csv(const std::string &text, int cols, int rows)
{
    ChannelUtilization u(cols, rows);
    std::vector<char> seen(u.num_segments(), 0);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) {
            if (line != "kind,x,y,u")
                throw ValidationError("util csv: bad header");
            continue;
        }
        if (line.empty())
            continue;
        char kind[8] = {0};
        int x = 0, y = 0;
        double v = 0.0;
        if (std::sscanf(line.c_str(), "chan%1[xy],%d,%d,%lf", kind, &x, &y, &v) != 4)
            throw ValidationError("util csv: malformed line " + std::to_string(lineno));
        int idx;
        if (kind[0] == 'x') {
            if (x < 1 || x > cols || y < 0 || y > rows)
                throw ValidationError("util csv: chanx out of range at line " + std::to_string(lineno));
            idx = y * cols + (x - 1);
            u.x_at(x, y) = static_cast<float>(v);
        } else {
            if (x < 0 || x > cols || y < 1 || y > rows)
                throw ValidationError("util csv: chany out of range at line " + std::to_string(lineno));
            idx = static_cast<int>(u.chanx.size()) + (y - 1) * (cols + 1) + x;
            u.y_at(x, y) = static_cast<float>(v);
        }
        seen[idx] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw ValidationError("util csv: missing segments");
    return u;
}

std::vector<int> segment_usage(const RoutingResult &r, const Floorplan &fp)
{
    std::vector<int> used(fp.num_segments(), 0);
    for (const auto &tree : r.routes)
        for (int n : tree)
            if (n < fp.num_segments())
                ++used[n];
    return used;
}

ChannelUtilization utilization(const RoutingResult &r, const Floorplan &fp)
{
    ChannelUtilization u(fp.cols(), fp.rows());
    const auto used = segment_usage(r, fp);
    const float cap = static_cast<float>(fp.capacity());
    for (size_t i = 0; i < u.chanx.size(); ++i)
        u.chanx[i] = static_cast<float>(used[i]) / cap;
    for (size_t i = 0; i < u.chany.size(); ++i)
        u.chany[i] = static_cast<float>(used[u.chanx.size() + i]) / cap;
    return u;
}

ScoreMode parse_score_mode(const std::string &s)
{
    if (s == "mean")
        return ScoreMode::Mean;
    if (s == "max")
        return ScoreMode::Max;
    if (s == "p95")
        return ScoreMode::P95;
    throw ValidationError("unknown score mode '" + s + "'");
}

std::optional<Region> named_region(const std::string &name, const Floorplan &fp)
{
    const int gw = fp.grid_width(), gh = fp.grid_height();
    if (name == "all")
        return Region{0, 0, gw - 1, gh - 1};
    if (name == "upper")
        return Region{0, gh / 2, gw - 1, gh - 1};
    if (name == "lower")
        return Region{0, 0, gw - 1, gh / 2 - 1};
    if (name == "left")
        return Region{0, 0, gw / 2 - 1, gh - 1};
    if (name == "right")
        return Region{gw / 2, 0, gw - 1, gh - 1};
    if (name == "upper_third")
        return Region{0, gh - gh / 3, gw - 1, gh - 1};
    if (name == "lower_third")
        return Region{0, 0, gw - 1, gh / 3 - 1};
    if (name == "right_third")
        return Region{gw - gw / 3, 0, gw - 1, gh - 1};
    return std::nullopt;
}

double congestion_score(const ChannelUtilization &u, std::optional<Region> region, ScoreMode mode)
{
    const int gw = u.cols + 2, gh = u.rows + 2;
    Region r = region.value_or(Region{0, 0, gw - 1, gh - 1});
    if (r.x0 < 0 || r.y0 < 0 || r.x1 >= gw || r.y1 >= gh || r.x0 > r.x1 || r.y0 > r.y1)
        throw ValidationError("congestion region out of bounds");
    auto in_x = [&](int x) { return x >= r.x0 && x <= r.x1; };
    auto in_y = [&](int y) { return y >= r.y0 && y <= r.y1; };

    std::vector<float> vals;
    for (int y = 0; y <= u.rows; ++y)
        for (int x = 1; x <= u.cols; ++x)
            if (in_x(x) && (in_y(y) || in_y(y + 1)))
                vals.push_back(u.x_at(x, y));
    for (int y = 1; y <= u.rows; ++y)
        for (int x = 0; x <= u.cols; ++x)
            if (in_y(y) && (in_x(x) || in_x(x + 1)))
                vals.push_back(u.y_at(x, y));
    if (vals.empty())
        throw ValidationError("congestion region contains no channel segments");

    switch (mode) {
    case ScoreMode::Mean: {
        double s = 0.0;
        for (float v : vals)
            s += v;
        return s / static_cast<double>(vals.size());
    }
    case ScoreMode::Max:
        return *std::max_element(vals.begin(), vals.end());
    case ScoreMode::P95: {
        std::sort(vals.begin(), vals.end());
        const size_t rank = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(vals.size())));
        return vals[std::max<size_t>(rank, 1) - 1];
    }
    }
    return 0.0;
}

} // namespace routecast

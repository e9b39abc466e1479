#include "routecast/placer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <random>
#include <sstream>

#include "routecast/error.hpp"
#include "routecast/hash.hpp"

namespace routecast {

namespace {

// All placement slots of one tile kind; a slot is (tile, subtile).
struct SiteClass {
    std::vector<std::pair<int, int>> tiles; // (x, y) with site_capacity > 0
    std::vector<int> tile_cap;
    std::vector<int> slot_base; // first slot id of each tile
    int num_slots = 0;
};

struct SiteMap {
    std::map<TileKind, SiteClass> classes;
    std::vector<int> tile_of; // per grid tile: index within its class, or -1
    std::vector<TileKind> kinds;
    int gw = 0;

    explicit SiteMap(const Floorplan &fp) : tile_of(fp.grid_width() * fp.grid_height(), -1), gw(fp.grid_width())
    {
        for (int y = 0; y < fp.grid_height(); ++y) {
            for (int x = 0; x < fp.grid_width(); ++x) {
                kinds.push_back(fp.kind(x, y));
                const int cap = fp.site_capacity(x, y);
                if (cap == 0)
                    continue;
                SiteClass &c = classes[fp.kind(x, y)];
                tile_of[y * gw + x] = static_cast<int>(c.tiles.size());
                c.tiles.emplace_back(x, y);
                c.tile_cap.push_back(cap);
                c.slot_base.push_back(c.num_slots);
                c.num_slots += cap;
            }
        }
    }

    int slot(const Location &l) const
    {
        const TileKind k = kind_at(l);
        const SiteClass &c = classes.at(k);
        return c.slot_base[tile_of[l.y * gw + l.x]] + l.subtile;
    }
    TileKind kind_at(const Location &l) const { return kinds[l.y * gw + l.x]; }
};

double net_hpwl(const Net &n, const Placement &pl)
{
    const Location &d = pl.loc[n.driver];
    int x0 = d.x, x1 = d.x, y0 = d.y, y1 = d.y;
    for (int s : n.sinks) {
        const Location &l = pl.loc[s];
        x0 = std::min(x0, l.x);
        x1 = std::max(x1, l.x);
        y0 = std::min(y0, l.y);
        y1 = std::max(y1, l.y);
    }
    return static_cast<double>((x1 - x0) + (y1 - y0));
}

void check_capacity(const Netlist &nl, const SiteMap &sites)
{
    std::map<TileKind, int> need;
    for (const auto &b : nl.blocks())
        ++need[site_kind(b.kind)];
    for (const auto &[k, n] : need) {
        auto it = sites.classes.find(k);
        const int have = it == sites.classes.end() ? 0 : it->second.num_slots;
        if (n > have)
            throw ValidationError(std::string("insufficient ") + tile_kind_name(k) + " sites (" + std::to_string(n) +
                                  " blocks, " + std::to_string(have) + " sites)");
    }
}

// Occupancy bookkeeping shared by the random initializer and the annealer.
class PlacementState {
  public:
    PlacementState(const Netlist &nl, const Floorplan &fp, Placement pl)
        : nl_(nl), sites_(fp), pl_(std::move(pl)), nets_of_(nl.block_nets())
    {
        for (const auto &[k, c] : sites_.classes)
            occ_[k].assign(c.num_slots, -1);
        for (int b = 0; b < nl.num_blocks(); ++b)
            occ_[site_kind(nl.blocks()[b].kind)][sites_.slot(pl_.loc[b])] = b;
        net_cost_.resize(nl.num_nets());
        recompute_cost();
    }

    const Placement &placement() const { return pl_; }
    double cost() const { return cost_; }
    const SiteMap &sites() const { return sites_; }

    double recompute_cost()
    {
        cost_ = 0.0;
        for (int i = 0; i < nl_.num_nets(); ++i) {
            net_cost_[i] = net_hpwl(nl_.nets()[i], pl_);
            cost_ += net_cost_[i];
        }
        return cost_;
    }

    // Proposes moving block b to target; returns false if the target is b's own slot.
    bool propose(int b, const Location &target)
    {
        const TileKind k = site_kind(nl_.blocks()[b].kind);
        const int from = sites_.slot(pl_.loc[b]);
        const int to = sites_.slot(target);
        if (from == to)
            return false;
        move_.b = b;
        move_.c = occ_[k][to];
        move_.kind = k;
        move_.from_loc = pl_.loc[b];
        move_.to_loc = target;
        move_.from = from;
        move_.to = to;

        affected_.clear();
        for (int n : nets_of_[b])
            affected_.push_back(n);
        if (move_.c >= 0)
            for (int n : nets_of_[move_.c])
                affected_.push_back(n);
        std::sort(affected_.begin(), affected_.end());
        affected_.erase(std::unique(affected_.begin(), affected_.end()), affected_.end());

        apply(move_.b, move_.c, move_.to_loc, move_.from_loc, move_.from, move_.to);
        delta_ = 0.0;
        new_cost_.resize(affected_.size());
        for (size_t i = 0; i < affected_.size(); ++i) {
            new_cost_[i] = net_hpwl(nl_.nets()[affected_[i]], pl_);
            delta_ += new_cost_[i] - net_cost_[affected_[i]];
        }
        return true;
    }
    double delta() const { return delta_; }

    void commit()
    {
        for (size_t i = 0; i < affected_.size(); ++i)
            net_cost_[affected_[i]] = new_cost_[i];
        cost_ += delta_;
    }
    void revert() { apply(move_.b, move_.c, move_.from_loc, move_.to_loc, move_.to, move_.from); }

  private:
    // Puts b at `dst` (slot dst_slot) and c, if any, at `src` (slot src_slot).
    void apply(int b, int c, const Location &dst, const Location &src, int src_slot, int dst_slot)
    {
        auto &occ = occ_[move_.kind];
        pl_.loc[b] = dst;
        occ[dst_slot] = b;
        if (c >= 0) {
            pl_.loc[c] = src;
            occ[src_slot] = c;
        } else {
            occ[src_slot] = -1;
        }
    }

    struct Move {
        int b = -1, c = -1;
        TileKind kind = TileKind::CLB;
        Location from_loc, to_loc;
        int from = 0, to = 0;
    };

    const Netlist &nl_;
    SiteMap sites_;
    Placement pl_;
    std::vector<std::vector<int>> nets_of_;
    std::map<TileKind, std::vector<int>> occ_;
    std::vector<double> net_cost_;
    double cost_ = 0.0;
    Move move_;
    std::vector<int> affected_;
    std::vector<double> new_cost_;
    double delta_ = 0.0;
};

// Random compatible location for block b within a Chebyshev window of
// `range` tiles around its current tile. Returns false if none exists.
template <class Rng>
bool pick_target(const SiteMap &sites, TileKind k, const Location &cur, int range, Rng &rng, Location &out)
{
    const SiteClass &c = sites.classes.at(k);
    thread_local std::vector<int> cand;
    cand.clear();
    for (int t = 0; t < static_cast<int>(c.tiles.size()); ++t) {
        auto [x, y] = c.tiles[t];
        if (std::abs(x - cur.x) <= range && std::abs(y - cur.y) <= range)
            cand.push_back(t);
    }
    if (cand.empty())
        return false;
    const int t = cand[std::uniform_int_distribution<int>(0, static_cast<int>(cand.size()) - 1)(rng)];
    const int cap = c.tile_cap[t];
    out = {c.tiles[t].first, c.tiles[t].second, std::uniform_int_distribution<int>(0, cap - 1)(rng)};
    return true;
}

} // namespace

std::vector<std::string> check_placement(const Netlist &nl, const Floorplan &fp, const Placement &pl)
{
    std::vector<std::string> v;
    if (static_cast<int>(pl.loc.size()) != nl.num_blocks()) {
        v.push_back("placement size does not match block count");
        return v;
    }
    std::map<std::tuple<int, int, int>, int> used;
    std::map<std::pair<int, int>, int> per_tile;
    for (int b = 0; b < nl.num_blocks(); ++b) {
        const Location &l = pl.loc[b];
        const std::string &id = nl.blocks()[b].id;
        if (l.x < 0 || l.y < 0 || l.x >= fp.grid_width() || l.y >= fp.grid_height()) {
            v.push_back("block " + id + " is off the grid");
            continue;
        }
        const int cap = fp.site_capacity(l.x, l.y);
        if (fp.kind(l.x, l.y) != site_kind(nl.blocks()[b].kind) || cap == 0)
            v.push_back("block " + id + " is on an incompatible tile");
        if (l.subtile < 0 || l.subtile >= std::max(cap, 1))
            v.push_back("block " + id + " has subtile out of range");
        if (!used.emplace(std::make_tuple(l.x, l.y, l.subtile), b).second)
            v.push_back("block " + id + " shares a site with another block");
        if (++per_tile[{l.x, l.y}] > std::max(cap, 1))
            v.push_back("tile (" + std::to_string(l.x) + "," + std::to_string(l.y) + ") over capacity");
    }
    return v;
}

Placement random_placement(const Netlist &nl, const Floorplan &fp, uint64_t seed)
{
    SiteMap sites(fp);
    check_capacity(nl, sites);
    std::mt19937_64 rng(seed);
    std::map<TileKind, std::vector<Location>> free_slots;
    for (const auto &[k, c] : sites.classes) {
        auto &slots = free_slots[k];
        for (size_t t = 0; t < c.tiles.size(); ++t)
            for (int s = 0; s < c.tile_cap[t]; ++s)
                slots.push_back({c.tiles[t].first, c.tiles[t].second, s});
        std::shuffle(slots.begin(), slots.end(), rng);
    }
    Placement pl;
    pl.loc.resize(nl.num_blocks());
    for (int b = 0; b < nl.num_blocks(); ++b) {
        auto &slots = free_slots[site_kind(nl.blocks()[b].kind)];
        pl.loc[b] = slots.back();
        slots.pop_back();
    }
    return pl;
}

double bbox_cost(const Netlist &nl, const Placement &pl)
{
    double cost = 0.0;
    for (const auto &n : nl.nets())
        cost += net_hpwl(n, pl);
    return cost;
}

const char *place_algorithm_name(PlaceAlgorithm) { return "bounding_box"; }

PlaceAlgorithm parse_place_algorithm(const std::string &s)
{
    if (s == "bounding_box")
        return PlaceAlgorithm::BoundingBox;
    throw ValidationError("unsupported place_algorithm '" + s + "' (only bounding_box)");
}

void validate_schedule(const AnnealSchedule &s)
{
    if (!(s.alpha_t > 0.0 && s.alpha_t < 1.0))
        throw ValidationError("anneal schedule: alpha_t must be in (0, 1)");
    if (!(s.inner_num > 0.0))
        throw ValidationError("anneal schedule: inner_num must be > 0");
    if (!(s.exit_t > 0.0))
        throw ValidationError("anneal schedule: exit_t must be > 0");
    if (!(s.t_init_factor > 0.0))
        throw ValidationError("anneal schedule: t_init_factor must be > 0");
}

bool metropolis_accept(double delta, double temperature, double uniform01)
{
    if (delta <= 0.0)
        return true;
    if (temperature <= 0.0)
        return false;
    return uniform01 < std::exp(-delta / temperature);
}

AnnealResult anneal(const Netlist &nl, const Floorplan &fp, const AnnealSchedule &sched, long long snapshot_every)
{
    validate_schedule(sched);
    std::mt19937_64 rng(sched.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    PlacementState state(nl, fp, random_placement(nl, fp, sched.seed));
    AnnealResult res;
    res.initial_cost = state.cost();
    if (snapshot_every > 0)
        res.snapshots.push_back(state.placement());

    const int nb = nl.num_blocks();
    const int max_range = std::max(fp.grid_width(), fp.grid_height());
    auto random_move = [&](PlacementState &st, int range) -> bool {
        const int b = std::uniform_int_distribution<int>(0, nb - 1)(rng);
        Location target;
        const TileKind k = site_kind(nl.blocks()[b].kind);
        if (!pick_target(st.sites(), k, st.placement().loc[b], range, rng, target))
            return false;
        return st.propose(b, target);
    };

    Placement best = state.placement();
    double best_cost = state.cost();

    // Initial temperature from the spread of costs over 50 random moves,
    // all accepted, taken on a scratch copy.
    double temperature = 0.0;
    {
        PlacementState probe(nl, fp, state.placement());
        double sum = 0.0, sum_sq = 0.0;
        int n = 0;
        for (int i = 0; i < 50; ++i) {
            if (!random_move(probe, max_range))
                continue;
            probe.commit();
            sum += probe.cost();
            sum_sq += probe.cost() * probe.cost();
            ++n;
        }
        if (n > 1) {
            const double mean = sum / n;
            const double var = (sum_sq - n * mean * mean) / (n - 1);
            temperature = sched.t_init_factor * std::sqrt(std::max(var, 0.0));
        }
    }

    const long long moves_per_temp =
        std::max<long long>(1, std::llround(sched.inner_num * std::pow(static_cast<double>(nb), 4.0 / 3.0)));
    double range = max_range;
    constexpr int kMaxLevels = 100000;

    while (nl.num_nets() > 0 && state.cost() > 0.0 && temperature > 0.0 && res.levels < kMaxLevels) {
        long long level_accepted = 0;
        for (long long m = 0; m < moves_per_temp; ++m) {
            ++res.moves;
            if (!random_move(state, std::max(1, static_cast<int>(range))))
                continue;
            if (metropolis_accept(state.delta(), temperature, unit(rng))) {
                state.commit();
                ++level_accepted;
                ++res.accepted;
                if (snapshot_every > 0 && res.accepted % snapshot_every == 0)
                    res.snapshots.push_back(state.placement());
            } else {
                state.revert();
            }
        }
        ++res.levels;
        state.recompute_cost();
        if (state.cost() < best_cost) {
            best_cost = state.cost();
            best = state.placement();
        }
        const double rate = static_cast<double>(level_accepted) / static_cast<double>(moves_per_temp);
        range = std::clamp(range * (1.0 - 0.44 + rate), 1.0, static_cast<double>(max_range));
        if (temperature < sched.exit_t * state.cost() / nl.num_nets())
            break;
        temperature *= sched.alpha_t;
    }

    res.placement = std::move(best);
    res.final_cost = best_cost;
    if (snapshot_every > 0)
        res.snapshots.push_back(res.placement);
    return res;
}

std::vector<AnnealSchedule> SweepGrid::schedules(const AnnealSchedule &base) const
{
    std::vector<AnnealSchedule> out;
    for (uint64_t s : seeds)
        for (double a : alpha_ts)
            for (double i : inner_nums)
                for (PlaceAlgorithm alg : algorithms) {
                    AnnealSchedule sc = base;
                    sc.seed = s;
                    sc.alpha_t = a;
                    sc.inner_num = i;
                    sc.algorithm = alg;
                    out.push_back(sc);
                }
    return out;
}

SweepGrid default_sweep_grid()
{
    SweepGrid g;
    for (uint64_t s = 1; s <= 10; ++s)
        g.seeds.push_back(s);
    g.alpha_ts = {0.5, 0.7, 0.8, 0.9, 0.95};
    g.inner_nums = {0.5, 1.0, 2.0, 10.0};
    g.algorithms = {PlaceAlgorithm::BoundingBox};
    return g;
}

std::vector<SweepPoint> sweep(const Netlist &nl, const Floorplan &fp, const SweepGrid &grid, const AnnealSchedule &base)
{
    if (grid.seeds.empty() || grid.alpha_ts.empty() || grid.inner_nums.empty() || grid.algorithms.empty())
        throw ValidationError("empty sweep axis");
    const auto scheds = grid.schedules(base);
    for (const auto &s : scheds)
        validate_schedule(s);
    check_capacity(nl, SiteMap(fp));

    std::vector<SweepPoint> out(scheds.size());
    std::vector<std::exception_ptr> errors(scheds.size());
    const int n = static_cast<int>(scheds.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < n; ++i) {
        try {
            out[i].options = scheds[i];
            out[i].result = anneal(nl, fp, scheds[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

std::string write_placement(const Netlist &nl, const Floorplan &fp, const Placement &pl, const AnnealSchedule &o)
{
    std::ostringstream os;
    os << "# routecast placement v1\n";
    os << "# netlist " << nl.hash() << " floorplan " << content_hash(fp.to_json()) << "\n";
    os << "# seed " << o.seed << " alpha_t " << o.alpha_t << " inner_num " << o.inner_num << " algorithm "
       << place_algorithm_name(o.algorithm) << "\n";
    for (int b = 0; b < nl.num_blocks(); ++b) {
        const Location &l = pl.loc[b];
        os << nl.blocks()[b].id << ' ' << l.x << ' ' << l.y << ' ' << l.subtile << '\n';
    }
    return os.str();
}

Placement read_placement(const std::string &text, const Netlist &nl, const Floorplan &fp)
{
    Placement pl;
    pl.loc.assign(nl.num_blocks(), Location{-1, -1, 0});
    std::vector<bool> seen(nl.num_blocks(), false);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos)
            line.resize(h);
        std::istringstream ls(line);
        std::string id;
        if (!(ls >> id))
            continue;
        Location l;
        if (!(ls >> l.x >> l.y >> l.subtile))
            throw ValidationError("placement: malformed line " + std::to_string(lineno));
        auto b = nl.find_block(id);
        if (!b)
            throw ValidationError("placement: unknown block '" + id + "' at line " + std::to_string(lineno));
        if (seen[*b])
            throw ValidationError("placement: block '" + id + "' placed twice");
        seen[*b] = true;
        pl.loc[*b] = l;
    }
    for (int b = 0; b < nl.num_blocks(); ++b)
        if (!seen[b])
            throw ValidationError("placement: block '" + nl.blocks()[b].id + "' not placed");
    auto v = check_placement(nl, fp, pl);
    if (!v.empty())
        throw ValidationError("placement: " + v.front());
    return pl;
}

} // namespace routecast

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "routecast/arch.hpp"
#include "routecast/image.hpp"
#include "routecast/netlist.hpp"
#include "routecast/placer.hpp"
#include "routecast/raster.hpp"
#include "support.hpp"

using namespace routecast;
namespace fs = std::filesystem;

namespace {

int run(const std::string &args)
{
    const std::string cmd = std::string(ROUTECAST_CLI) + " " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path &p)
{
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

// Design, a 4-item dataset and a one-epoch model under `dir`.
void pipeline(const std::string &dir)
{
    const std::string o = "--out " + dir;
    REQUIRE(run(o + " gen-arch") == 0);
    REQUIRE(run(o + " --seed 3 gen-netlist") == 0);
    REQUIRE(run(o + " dataset --seeds 1-2 --alphas 0.9 --inner 0.5,1") == 0);
    std::ofstream(fs::path(dir) / "t.cfg") << "# short run\nepochs=1\n";
    REQUIRE(run(o + " --config t.cfg train --base 8 --train-frac 0.5") == 0);
}

} // namespace

TEST_CASE("exit codes")
{
    rctest::TempDir dir("cli_codes");
    const std::string o = "--out " + dir.str();
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run(o + " gen-arch --cols 1") == 2);
    CHECK(run(o + " gen-arch --mem-col 2 --mult-col 2") == 2);
    CHECK(run(o + " train --dataset missing") == 3);
    CHECK(run(o + " infer --ckpt missing.rckp --place a.png --connect b.png") == 3);
    REQUIRE(run(o + " gen-arch") == 0);
    CHECK(fs::exists(dir.path() / "arch.json"));
    CHECK(run(o + " gen-netlist --clb 0") == 2);
    std::ofstream(dir.path() / "bad.cfg") << "epochs=lots\n";
    CHECK(run(o + " --config bad.cfg train") == 2);
}

TEST_CASE("full pipeline")
{
    rctest::TempDir dir("cli_pipe");
    pipeline(dir.str());
    const fs::path d = dir.path();
    const std::string o = "--out " + dir.str();
    CHECK(fs::exists(d / "dataset" / "manifest.json"));
    CHECK(fs::exists(d / "model.rckp"));
    const std::string loss = slurp(d / "loss.csv");
    CHECK(loss.rfind("step,d_loss,g_adv,g_l1\n", 0) == 0);
    CHECK(std::count(loss.begin(), loss.end(), '\n') == 1 + 2);

    SUBCASE("train with a bad skip mode")
    {
        CHECK(run(o + " train --skip sometimes") == 2);
    }
    SUBCASE("infer from an item and from images")
    {
        REQUIRE(run(o + " infer --dataset dataset --item p0001 -o a.png --util-out a.csv") == 0);
        const ImagePlane a = read_png((d / "a.png").string());
        CHECK(a.width() == 64);
        CHECK(a.channels() == 3);
        CHECK(fs::exists(d / "a.csv"));
        const auto m = nlohmann::json::parse(slurp(d / "dataset" / "manifest.json"));
        std::string place, conn;
        for (const auto &it : m["items"])
            if (it["id"] == "p0001") {
                place = it["place_image"];
                conn = it["connect_image"];
            }
        REQUIRE_FALSE(place.empty());
        REQUIRE(run(o + " infer --place dataset/" + place + " --connect dataset/" + conn + " -o b.png") == 0);
        // The image route reads 8-bit inputs, so it agrees only approximately.
        const ImagePlane b = read_png((d / "b.png").string());
        double diff = 0;
        for (size_t i = 0; i < a.size(); ++i)
            diff += std::abs(a.data()[i] - b.data()[i]) / a.size();
        CHECK(diff < 0.02);
        CHECK(run(o + " infer --dataset dataset --item nope") == 2);
    }
    SUBCASE("eval and explore")
    {
        REQUIRE(run(o + " eval --skip-frac 0.5 --k 2") == 0);
        const auto j = nlohmann::json::parse(slurp(d / "eval.json"));
        REQUIRE(j.contains("accuracy"));
        CHECK(j["items"] == 2);
        const double acc = j["accuracy"]["per_pixel_acc"];
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
        CHECK(j["topk"]["overlap"].get<double>() >= 0.0);
        REQUIRE(run(o + " explore --objective max:p95:upper") == 0);
        const std::string csv = slurp(d / "explore.csv");
        CHECK(csv.rfind("rank,id,score\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4);
        CHECK(run(o + " explore --objective min:mean:middle") == 2);
    }
    SUBCASE("fine-tune")
    {
        REQUIRE(run(o + " fine-tune --pairs 2 -o ft.rckp --loss-csv ft.csv") == 0);
        CHECK(fs::exists(d / "ft.rckp"));
    }
    SUBCASE("ablate")
    {
        REQUIRE(run(o + " --config t.cfg ablate --variants l1_all,no_l1 --seeds 1 --base 8 --train-frac 0.5") == 0);
        const std::string csv = slurp(d / "ablation" / "ablation.csv");
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
        CHECK(fs::exists(d / "ablation" / "loss_l1_all_s1.csv"));
        CHECK(fs::exists(d / "ablation" / "loss_no_l1_s1.csv"));
        const auto j = nlohmann::json::parse(slurp(d / "ablation" / "ablation.json"));
        CHECK(j.contains("summary"));
    }
}

TEST_CASE("watch frames")
{
    rctest::TempDir dir("cli_watch");
    pipeline(dir.str());
    const fs::path d = dir.path();
    const std::string o = "--out " + dir.str();
    SUBCASE("interval beyond the accepted moves gives two frames")
    {
        REQUIRE(run(o + " --seed 5 watch --every 100000000 --alpha 0.9 --inner 1") == 0);
        CHECK(fs::exists(d / "frames" / "frame_00000.png"));
        CHECK(fs::exists(d / "frames" / "frame_00001.png"));
        CHECK_FALSE(fs::exists(d / "frames" / "frame_00002.png"));
    }
    SUBCASE("frames follow the annealer's snapshots")
    {
        REQUIRE(run(o + " --seed 5 watch --every 40 --alpha 0.9 --inner 1 --frames f") == 0);
        const Floorplan fp = Floorplan::from_json(slurp(d / "arch.json"));
        const Netlist nl = parse_netlist(slurp(d / "netlist.txt"));
        AnnealSchedule s;
        s.seed = 5;
        s.alpha_t = 0.9;
        s.inner_num = 1;
        const AnnealResult ar = anneal(nl, fp, s, 40);
        REQUIRE(ar.snapshots.size() > 3);
        const RasterLayout l = fit_layout(fp, 64);
        std::vector<ImagePlane> frames;
        for (size_t i = 0;; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "frame_%05zu.png", i);
            if (!fs::exists(d / "f" / name))
                break;
            frames.push_back(read_png((d / "f" / name).string()));
        }
        REQUIRE(frames.size() == ar.snapshots.size());
        for (size_t i = 0; i < frames.size(); ++i) {
            REQUIRE(frames[i].width() == 128);
            const ImagePlane want = render_placement(fp, nl, ar.snapshots[i], l);
            int bad = 0;
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x)
                    for (int c = 0; c < 3; ++c)
                        bad += to_byte(frames[i].at(y, x, c)) != to_byte(want.at(y, x, c));
            CHECK(bad == 0);
        }
        // Consecutive placement halves differ only inside tiles whose blocks moved.
        for (size_t i = 1; i < frames.size(); ++i) {
            std::vector<uint8_t> moved(64 * 64, 0);
            for (int b = 0; b < nl.num_blocks(); ++b) {
                const Location &p = ar.snapshots[i - 1].loc[b], &q = ar.snapshots[i].loc[b];
                if (p == q)
                    continue;
                for (const PixelRect &r : {l.tile_rect(p.x, p.y), l.tile_rect(q.x, q.y)})
                    for (int y = r.y0; y < r.y0 + r.h; ++y)
                        for (int x = r.x0; x < r.x0 + r.w; ++x)
                            moved[y * 64 + x] = 1;
            }
            int outside = 0;
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x)
                    for (int c = 0; c < 3; ++c)
                        outside += frames[i].at(y, x, c) != frames[i - 1].at(y, x, c) && !moved[y * 64 + x];
            CHECK(outside == 0);
        }
    }
}

TEST_CASE("reruns are byte-identical")
{
    rctest::TempDir a("cli_det_a"), b("cli_det_b");
    pipeline(a.str());
    pipeline(b.str());
    for (const char *f : {"arch.json", "netlist.txt", "model.rckp", "loss.csv"})
        CHECK(slurp(a.path() / f) == slurp(b.path() / f));
    for (const auto &e : fs::directory_iterator(a.path() / "dataset"))
        CHECK(slurp(e.path()) == slurp(b.path() / "dataset" / e.path().filename()));
    REQUIRE(run("--out " + a.str() + " infer --dataset dataset --item p0000") == 0);
    REQUIRE(run("--out " + b.str() + " infer --dataset dataset --item p0000") == 0);
    CHECK(slurp(a.path() / "pred.png") == slurp(b.path() / "pred.png"));
}

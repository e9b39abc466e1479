#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "routecast/arch.hpp"
#include "routecast/netlist.hpp"
#include "routecast/nn/autograd.hpp"

namespace rctest {

using routecast::nn::Shape;
using routecast::nn::Tensor;
using routecast::nn::Var;

template <typename T>
Tensor<T> random_tensor(Shape s, std::mt19937_64 &rng, double lo = -1.0, double hi = 1.0)
{
    Tensor<T> t(std::move(s));
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto &v : t.vec())
        v = static_cast<T>(u(rng));
    return t;
}

inline int rand_int(std::mt19937_64 &rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// sum(y * r) as a graph node, so a finite-difference check probes a random
// direction of the output instead of a plain sum.
Var<double> project(const Var<double> &y, const Tensor<double> &r);

struct GradResult {
    std::string op;
    std::string shapes;
    double rel_err = 0;
};

// Central finite differences against reverse mode for every differentiable
// op, `cases` random shapes each, in double precision. rel_err is the
// normwise relative error ||g_analytic - g_numeric|| / max(||.||, ||.||),
// worst over the op's inputs.
std::vector<GradResult> gradient_suite(uint64_t seed, int cases = 5);

struct OracleResult {
    std::string op;
    std::string shapes;
    size_t mismatches = 0; // elements not bitwise equal
    size_t elements = 0;
};

// Blocked OpenMP convolutions against the naive loops on `cases` random
// small shapes per op.
template <typename T>
std::vector<OracleResult> oracle_suite(uint64_t seed, int cases);

// Default 8x8 floorplan and the default synthetic netlist.
routecast::Floorplan smoke_floorplan();
routecast::Netlist smoke_netlist(uint64_t seed = 1);

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag);
    ~TempDir();
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;
    const std::filesystem::path &path() const { return path_; }
    std::string str() const { return path_.string(); }

  private:
    std::filesystem::path path_;
};

} // namespace rctest

#include "support.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <functional>

#include "routecast/nn/kernels.hpp"
#include "routecast/nn/reference.hpp"

namespace rctest {

namespace nn = routecast::nn;
using D = double;

Var<D> project(const Var<D> &y, const Tensor<D> &r)
{
    D s = 0;
    for (size_t i = 0; i < r.size(); ++i)
        s += y.value()[i] * r[i];
    Var<D> out(Tensor<D>({1}, s), y.requires_grad());
    auto node = out.node();
    node->inputs = {y.node()};
    const auto rr = std::make_shared<Tensor<D>>(r);
    node->backward = [rr](nn::Node<D> &self) {
        Tensor<D> &g = self.inputs[0]->grad_ref();
        for (size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[0] * (*rr)[i];
    };
    return out;
}

namespace {

using Fn = std::function<Var<D>(const std::vector<Var<D>> &)>;

std::string shapes_of(const std::vector<Tensor<D>> &ts)
{
    std::string s;
    for (const auto &t : ts)
        s += (s.empty() ? "" : " ") + nn::shape_str(t.shape());
    return s;
}

double norm(const std::vector<D> &v)
{
    double s = 0;
    for (D x : v)
        s += x * x;
    return std::sqrt(s);
}

// Worst normwise relative error over the inputs marked in `wrt`.
double check(const Fn &f, const std::vector<Tensor<D>> &inputs, const std::vector<bool> &wrt, std::mt19937_64 &rng)
{
    std::vector<Var<D>> vars;
    for (size_t i = 0; i < inputs.size(); ++i)
        vars.emplace_back(inputs[i], wrt[i]);
    const Var<D> y = f(vars);
    const Tensor<D> r = random_tensor<D>(y.shape(), rng);
    nn::backward(project(y, r));

    auto eval = [&](const std::vector<Tensor<D>> &in) {
        std::vector<Var<D>> v;
        for (const auto &t : in)
            v.emplace_back(t, false);
        return project(f(v), r).value()[0];
    };
    const D h = 1e-6;
    double worst = 0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        if (!wrt[i])
            continue;
        std::vector<D> analytic(inputs[i].size(), 0.0), numeric(inputs[i].size());
        if (vars[i].has_grad())
            analytic = vars[i].grad().vec();
        std::vector<Tensor<D>> probe = inputs;
        for (size_t j = 0; j < probe[i].size(); ++j) {
            const D orig = probe[i][j];
            probe[i][j] = orig + h;
            const D up = eval(probe);
            probe[i][j] = orig - h;
            const D down = eval(probe);
            probe[i][j] = orig;
            numeric[j] = (up - down) / (2 * h);
        }
        std::vector<D> diff(numeric.size());
        for (size_t j = 0; j < diff.size(); ++j)
            diff[j] = analytic[j] - numeric[j];
        const double scale = std::max(norm(analytic), norm(numeric));
        worst = std::max(worst, scale < 1e-12 ? norm(diff) : norm(diff) / scale);
    }
    return worst;
}

// Resamples entries closer than `gap` to zero, keeping kinked ops away from
// their non-differentiable points.
Tensor<D> away_from_zero(Tensor<D> t, std::mt19937_64 &rng, double gap)
{
    std::uniform_real_distribution<double> u(gap, 1.0);
    for (auto &v : t.vec())
        if (std::abs(v) < gap)
            v = rng() % 2 ? u(rng) : -u(rng);
    return t;
}

Shape image_shape(std::mt19937_64 &rng, int max_n = 2)
{
    return {rand_int(rng, 1, max_n), rand_int(rng, 1, 3), rand_int(rng, 2, 5), rand_int(rng, 2, 5)};
}

struct ConvCase {
    Shape x, w;
    int stride, pad;
};

ConvCase conv_case(std::mt19937_64 &rng, bool transpose)
{
    for (;;) {
        const int n = rand_int(rng, 1, 2), ci = rand_int(rng, 1, 3), co = rand_int(rng, 1, 3);
        const int h = rand_int(rng, 2, 7), w = rand_int(rng, 2, 7), k = rand_int(rng, 1, 4);
        const int s = rand_int(rng, 1, 2), p = rand_int(rng, 0, std::min(2, k - 1));
        if (transpose) {
            if ((h - 1) * s - 2 * p + k < 1 || (w - 1) * s - 2 * p + k < 1)
                continue;
            return {{n, ci, h, w}, {ci, co, k, k}, s, p};
        }
        if (h + 2 * p < k || w + 2 * p < k)
            continue;
        return {{n, ci, h, w}, {co, ci, k, k}, s, p};
    }
}

} // namespace

std::vector<GradResult> gradient_suite(uint64_t seed, int cases)
{
    std::mt19937_64 rng(seed);
    std::vector<GradResult> out;
    auto run = [&](const std::string &op, const Fn &f, const std::vector<Tensor<D>> &in, std::vector<bool> wrt = {}) {
        if (wrt.empty())
            wrt.assign(in.size(), true);
        out.push_back({op, shapes_of(in), check(f, in, wrt, rng)});
    };

    for (int c = 0; c < cases; ++c) {
        {
            const ConvCase cc = conv_case(rng, false);
            run("conv2d s" + std::to_string(cc.stride) + " p" + std::to_string(cc.pad),
                [cc](const auto &v) { return nn::conv2d(v[0], v[1], cc.stride, cc.pad); },
                {random_tensor<D>(cc.x, rng), random_tensor<D>(cc.w, rng)});
        }
        {
            const ConvCase cc = conv_case(rng, true);
            run("conv_transpose2d s" + std::to_string(cc.stride) + " p" + std::to_string(cc.pad),
                [cc](const auto &v) { return nn::conv_transpose2d(v[0], v[1], cc.stride, cc.pad); },
                {random_tensor<D>(cc.x, rng), random_tensor<D>(cc.w, rng)});
        }
        const Shape s = image_shape(rng);
        const int ch = s[1];
        run("add_channel_bias", [](const auto &v) { return nn::add_channel_bias(v[0], v[1]); },
            {random_tensor<D>(s, rng), random_tensor<D>({ch}, rng)});
        for (bool train : {true, false}) {
            // Batch norm sees one sample at a time during training; probe
            // larger batches too since the op itself supports them.
            const Shape bs = {rand_int(rng, 1, 2), rand_int(rng, 1, 3), rand_int(rng, 2, 5), rand_int(rng, 2, 5)};
            const int bc = bs[1];
            nn::BatchNormStats<D> st(bc);
            st.running_mean = random_tensor<D>({bc}, rng);
            st.running_var = random_tensor<D>({bc}, rng, 0.5, 2.0);
            run(train ? "batchnorm train" : "batchnorm infer",
                [st, train](const auto &v) {
                    nn::BatchNormStats<D> local = st;
                    return nn::batchnorm(v[0], v[1], v[2], local, train);
                },
                {random_tensor<D>(bs, rng), random_tensor<D>({bc}, rng, 0.5, 1.5), random_tensor<D>({bc}, rng)});
        }
        run("relu", [](const auto &v) { return nn::relu(v[0]); }, {away_from_zero(random_tensor<D>(s, rng), rng, 0.05)});
        run("leaky_relu", [](const auto &v) { return nn::leaky_relu(v[0]); },
            {away_from_zero(random_tensor<D>(s, rng), rng, 0.05)});
        run("tanh", [](const auto &v) { return nn::tanh(v[0]); }, {random_tensor<D>(s, rng, -2, 2)});
        run("sigmoid", [](const auto &v) { return nn::sigmoid(v[0]); }, {random_tensor<D>(s, rng, -3, 3)});
        {
            const uint64_t mask_seed = rng();
            run("dropout", [mask_seed](const auto &v) {
                std::mt19937_64 r(mask_seed);
                return nn::dropout(v[0], 0.5, r, true);
            }, {random_tensor<D>(s, rng)});
        }
        run("affine", [](const auto &v) { return nn::affine(v[0], 0.5, 0.5); }, {random_tensor<D>(s, rng)});
        {
            Shape s2 = s;
            s2[1] = rand_int(rng, 1, 3);
            run("concat_channels", [](const auto &v) { return nn::concat_channels(v[0], v[1]); },
                {random_tensor<D>(s, rng), random_tensor<D>(s2, rng)});
        }
        run("mean_per_sample", [](const auto &v) { return nn::mean_per_sample(v[0]); }, {random_tensor<D>(s, rng)});
        {
            const D target = c % 2 ? 1.0 : 0.0;
            run("bce t=" + std::to_string(static_cast<int>(target)),
                [target](const auto &v) { return nn::bce(v[0], target); }, {random_tensor<D>(s, rng, 0.05, 0.95)});
        }
        {
            Tensor<D> a = random_tensor<D>(s, rng), b = random_tensor<D>(s, rng);
            for (size_t i = 0; i < a.size(); ++i)
                if (std::abs(a[i] - b[i]) < 0.05)
                    b[i] = a[i] + (b[i] < a[i] ? -0.1 : 0.1);
            run("l1", [](const auto &v) { return nn::l1(v[0], v[1]); }, {a, b});
        }
        run("add", [](const auto &v) { return nn::add(v[0], v[1]); }, {random_tensor<D>(s, rng), random_tensor<D>(s, rng)});
        run("scale", [](const auto &v) { return nn::scale(v[0], 1.7); }, {random_tensor<D>(s, rng)});
    }
    return out;
}

template <typename T>
std::vector<OracleResult> oracle_suite(uint64_t seed, int cases)
{
    std::mt19937_64 rng(seed);
    std::vector<OracleResult> out;
    auto compare = [](const std::string &op, const Tensor<T> &a, const Tensor<T> &b, const std::string &shapes) {
        OracleResult r{op, shapes, 0, a.size()};
        if (a.shape() != b.shape())
            r.mismatches = a.size();
        else
            for (size_t i = 0; i < a.size(); ++i)
                r.mismatches += std::memcmp(&a[i], &b[i], sizeof(T)) != 0;
        return r;
    };
    for (int c = 0; c < cases; ++c) {
        for (bool transpose : {false, true}) {
            const ConvCase cc = conv_case(rng, transpose);
            const auto x = random_tensor<T>(cc.x, rng), w = random_tensor<T>(cc.w, rng);
            const std::string shapes = nn::shape_str(cc.x) + " " + nn::shape_str(cc.w) + " s" +
                                       std::to_string(cc.stride) + " p" + std::to_string(cc.pad);
            if (transpose)
                out.push_back(compare("conv_transpose2d", nn::kernels::conv_transpose2d(x, w, cc.stride, cc.pad),
                                      nn::reference::conv_transpose2d(x, w, cc.stride, cc.pad), shapes));
            else
                out.push_back(compare("conv2d", nn::kernels::conv2d(x, w, cc.stride, cc.pad),
                                      nn::reference::conv2d(x, w, cc.stride, cc.pad), shapes));
        }
    }
    return out;
}

template std::vector<OracleResult> oracle_suite<float>(uint64_t, int);
template std::vector<OracleResult> oracle_suite<double>(uint64_t, int);

routecast::Floorplan smoke_floorplan() { return routecast::build_floorplan(routecast::FloorplanSpec{}); }

routecast::Netlist smoke_netlist(uint64_t seed) { return routecast::generate_synthetic(routecast::SyntheticParams{}, seed); }

TempDir::TempDir(const std::string &tag)
{
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("routecast_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir()
{
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

} // namespace rctest

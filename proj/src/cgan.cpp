#include "routecast/cgan.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "routecast/error.hpp"
#include "routecast/nn/kernels.hpp"
#include "routecast/raster.hpp"

namespace routecast {

namespace {

uint64_t derive_seed(uint64_t seed, uint64_t stream)
{
    // splitmix64 finalizer over (seed, stream).
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Var<float> normal_param(nn::Shape shape, float mean, float stddev, std::mt19937_64 &rng)
{
    std::normal_distribution<float> dist(mean, stddev);
    Tensor<float> t(std::move(shape));
    for (float &v : t.vec())
        v = dist(rng);
    return Var<float>(std::move(t), true);
}

ConvLayer make_layer(int in, int out, int stride, int pad, bool transpose, bool bn, bool bias, std::mt19937_64 &rng)
{
    ConvLayer l;
    l.stride = stride;
    l.pad = pad;
    l.transpose = transpose;
    l.weight = normal_param(transpose ? nn::Shape{in, out, 4, 4} : nn::Shape{out, in, 4, 4}, 0.0f, 0.02f, rng);
    if (bn) {
        l.gamma = normal_param({out}, 1.0f, 0.02f, rng);
        l.beta = Var<float>(Tensor<float>({out}), true);
        l.stats = nn::BatchNormStats<float>(out);
    }
    if (bias)
        l.bias = Var<float>(Tensor<float>({out}), true);
    return l;
}

void add_layer_params(std::vector<NamedParam> &out, const std::string &prefix, const ConvLayer &l)
{
    out.push_back({prefix + ".weight", l.weight});
    if (l.gamma) {
        out.push_back({prefix + ".bn.gamma", l.gamma});
        out.push_back({prefix + ".bn.beta", l.beta});
    }
    if (l.bias)
        out.push_back({prefix + ".bias", l.bias});
}

void add_layer_buffers(std::vector<NamedBuffer> &out, const std::string &prefix, ConvLayer &l)
{
    if (!l.gamma)
        return;
    out.push_back({prefix + ".bn.running_mean", &l.stats.running_mean});
    out.push_back({prefix + ".bn.running_var", &l.stats.running_var});
}

std::vector<Var<float>> vars_of(const std::vector<NamedParam> &ps)
{
    std::vector<Var<float>> v;
    for (const auto &p : ps)
        v.push_back(p.var);
    return v;
}

nn::AdamConfig adam_config(const TrainConfig &t) { return {t.lr, t.beta1, t.beta2, t.eps}; }

bool parse_bool(const std::string &v)
{
    if (v == "1" || v == "true" || v == "yes" || v == "on")
        return true;
    if (v == "0" || v == "false" || v == "no" || v == "off")
        return false;
    throw ValidationError("expected a boolean, got '" + v + "'");
}

void check_pair(const Model &m, const TrainPair &p)
{
    const int w = m.g_cfg.image_size;
    if (p.x.shape() != nn::Shape{1, m.g_cfg.in_channels, w, w})
        throw ValidationError("pair " + p.id + ": input shape " + nn::shape_str(p.x.shape()) + " does not match model (" +
                              std::to_string(m.g_cfg.in_channels) + " channels, w = " + std::to_string(w) + ")");
    if (p.truth.shape() != nn::Shape{1, 3, w, w})
        throw ValidationError("pair " + p.id + ": truth shape " + nn::shape_str(p.truth.shape()) +
                              " does not match model w = " + std::to_string(w));
}

} // namespace

const char *skip_mode_name(SkipMode m)
{
    switch (m) {
    case SkipMode::All: return "all";
    case SkipMode::Single: return "single";
    case SkipMode::None: return "none";
    }
    return "?";
}

SkipMode parse_skip_mode(const std::string &s)
{
    if (s == "all")
        return SkipMode::All;
    if (s == "single")
        return SkipMode::Single;
    if (s == "none")
        return SkipMode::None;
    throw ValidationError("unknown skip mode '" + s + "' (expected all, single or none)");
}

GeneratorConfig GeneratorConfig::for_width(int w, int in_channels)
{
    if (w < 16 || !std::has_single_bit(static_cast<unsigned>(w)))
        throw ValidationError("image size must be a power of two >= 16, got " + std::to_string(w));
    GeneratorConfig c;
    c.image_size = w;
    c.in_channels = in_channels;
    c.depth = std::countr_zero(static_cast<unsigned>(w)) - 2;
    c.base_width = w >= 256 ? 64 : 32;
    return c;
}

int GeneratorConfig::enc_width(int i) const { return std::min(base_width << std::min(i - 1, 3), 8 * base_width); }

DiscriminatorConfig DiscriminatorConfig::for_generator(const GeneratorConfig &g)
{
    DiscriminatorConfig d;
    d.image_size = g.image_size;
    d.in_channels = g.in_channels + 3;
    d.base_width = g.base_width;
    return d;
}

void validate(const GeneratorConfig &c)
{
    if (c.depth < 2)
        throw ValidationError("generator depth must be >= 2");
    if (c.base_width < 8)
        throw ValidationError("generator base_width must be >= 8");
    if (c.in_channels < 1)
        throw ValidationError("generator in_channels must be >= 1");
    if (c.image_size <= 0 || c.depth >= 31 || c.image_size % (1 << c.depth) != 0)
        throw ValidationError("image size " + std::to_string(c.image_size) + " is not divisible by 2^depth");
    if (!(c.dropout_rate >= 0.0f && c.dropout_rate < 1.0f))
        throw ValidationError("dropout_rate must be in [0, 1)");
}

void validate(const DiscriminatorConfig &c)
{
    if (c.n_layers < 2)
        throw ValidationError("discriminator needs >= 2 layers");
    if (c.base_width < 1 || c.in_channels < 1)
        throw ValidationError("discriminator widths must be positive");
    int s = c.image_size;
    for (int l = 0; l < c.n_layers; ++l)
        s = nn::kernels::conv_out_dim(s, 4, l < 4 && l < c.n_layers - 1 ? 2 : 1, 1);
    if (s < 1)
        throw ValidationError("discriminator with " + std::to_string(c.n_layers) +
                              " layers does not fit image size " + std::to_string(c.image_size));
}

void validate(const TrainConfig &c)
{
    if (c.epochs < 0)
        throw ValidationError("epochs must be >= 0");
    if (c.batch != 1)
        throw ValidationError("only batch size 1 is supported");
    if (!(c.lr > 0) || !(c.eps > 0) || !(c.l1_weight >= 0) || !(c.connect_scale >= 0))
        throw ValidationError("lr, eps must be positive; l1_weight, connect_scale non-negative");
    if (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1))
        throw ValidationError("beta1, beta2 must be in [0, 1)");
}

void apply_override(TrainConfig &c, const std::string &key, const std::string &value)
{
    try {
        if (key == "epochs")
            c.epochs = std::stoi(value);
        else if (key == "batch")
            c.batch = std::stoi(value);
        else if (key == "lr")
            c.lr = std::stod(value);
        else if (key == "beta1")
            c.beta1 = std::stod(value);
        else if (key == "beta2")
            c.beta2 = std::stod(value);
        else if (key == "eps")
            c.eps = std::stod(value);
        else if (key == "l1_weight")
            c.l1_weight = std::stod(value);
        else if (key == "connect_scale")
            c.connect_scale = std::stod(value);
        else if (key == "use_l1")
            c.use_l1 = parse_bool(value);
        else if (key == "grayscale")
            c.grayscale = parse_bool(value);
        else if (key == "seed")
            c.seed = std::stoull(value);
        else
            throw ValidationError("unknown train config key '" + key + "'");
    } catch (const std::logic_error &) {
        throw ValidationError("bad value '" + value + "' for train config key '" + key + "'");
    }
}

Var<float> ConvLayer::apply(const Var<float> &x, bool train, Moments *moments)
{
    Var<float> y = transpose ? nn::conv_transpose2d(x, weight, stride, pad) : nn::conv2d(x, weight, stride, pad);
    if (gamma && moments) {
        const Tensor<float> &v = y.value();
        const int C = v.dim(1);
        const size_t hw = static_cast<size_t>(v.dim(2)) * v.dim(3);
        moments->sum.resize(C, 0.0);
        moments->sq.resize(C, 0.0);
        for (int n = 0; n < v.dim(0); ++n)
            for (int c = 0; c < C; ++c) {
                const float *p = v.data() + (static_cast<size_t>(n) * C + c) * hw;
                for (size_t i = 0; i < hw; ++i) {
                    moments->sum[c] += p[i];
                    moments->sq[c] += static_cast<double>(p[i]) * p[i];
                }
            }
        moments->count += static_cast<double>(v.dim(0)) * hw;
        y = nn::batchnorm(y, gamma, beta, stats, true, 1.0f); // momentum 1: running estimates untouched
    } else if (gamma) {
        y = nn::batchnorm(y, gamma, beta, stats, train);
    }
    if (bias)
        y = nn::add_channel_bias(y, bias);
    return y;
}

Generator::Generator(const GeneratorConfig &cfg, uint64_t seed) : cfg_(cfg)
{
    validate(cfg);
    std::mt19937_64 rng(seed);
    const int D = cfg.depth;
    for (int i = 1; i <= D; ++i)
        enc_.push_back(make_layer(i == 1 ? cfg.in_channels : cfg.enc_width(i - 1), cfg.enc_width(i), 2, 1, false, true,
                                  false, rng));
    for (int j = 1; j <= D; ++j) {
        const bool last = j == D;
        dec_.push_back(make_layer(dec_in_width(j), last ? 3 : cfg.enc_width(D - j), 2, 1, true, !last, last, rng));
    }
}

bool Generator::skip_into(int j) const
{
    if (j < 2 || j > cfg_.depth)
        return false;
    switch (cfg_.skip) {
    case SkipMode::All: return true;
    case SkipMode::Single: return j == 2;
    case SkipMode::None: return false;
    }
    return false;
}

int Generator::dec_in_width(int j) const
{
    const int D = cfg_.depth;
    if (j == 1)
        return cfg_.enc_width(D);
    const int w = cfg_.enc_width(D - j + 1);
    return skip_into(j) ? 2 * w : w;
}

Var<float> Generator::forward(const Var<float> &x, bool train, std::mt19937_64 &rng)
{
    return run(x, train, train, rng, nullptr);
}

Var<float> Generator::run(const Var<float> &x, bool train, bool drop, std::mt19937_64 &rng,
                          std::vector<ConvLayer::Moments> *moments)
{
    const int D = cfg_.depth;
    auto acc = [&](int layer) { return moments ? &(*moments)[layer] : nullptr; };
    std::vector<Var<float>> feats;
    Var<float> h = x;
    for (int i = 0; i < D; ++i) {
        h = nn::leaky_relu(enc_[i].apply(h, train, acc(i)), 0.2f);
        feats.push_back(h);
    }
    for (int j = 1; j <= D; ++j) {
        if (skip_into(j))
            h = nn::concat_channels(h, feats[D - j]);
        h = dec_[j - 1].apply(h, train, acc(D + j - 1));
        if (j < D) {
            h = nn::relu(h);
            if (j <= 3)
                h = nn::dropout(h, cfg_.dropout_rate, rng, drop);
        } else {
            h = nn::affine(nn::tanh(h), 0.5f, 0.5f);
        }
    }
    return h;
}

void Generator::recalibrate(const std::vector<const Tensor<float> *> &inputs)
{
    if (inputs.empty())
        return;
    std::vector<ConvLayer::Moments> moments(enc_.size() + dec_.size());
    std::mt19937_64 unused(0);
    for (const Tensor<float> *x : inputs)
        run(Var<float>(*x), true, false, unused, &moments);
    auto update = [](ConvLayer &l, const ConvLayer::Moments &m) {
        if (!l.gamma || m.count < 2)
            return;
        for (size_t c = 0; c < m.sum.size(); ++c) {
            const double mean = m.sum[c] / m.count;
            const double var = std::max(0.0, m.sq[c] / m.count - mean * mean) * m.count / (m.count - 1);
            l.stats.running_mean[c] = static_cast<float>(mean);
            l.stats.running_var[c] = static_cast<float>(var);
        }
    };
    for (size_t i = 0; i < enc_.size(); ++i)
        update(enc_[i], moments[i]);
    for (size_t j = 0; j < dec_.size(); ++j)
        update(dec_[j], moments[enc_.size() + j]);
}

std::vector<NamedParam> Generator::params() const
{
    std::vector<NamedParam> out;
    for (size_t i = 0; i < enc_.size(); ++i)
        add_layer_params(out, "G.enc" + std::to_string(i + 1), enc_[i]);
    for (size_t j = 0; j < dec_.size(); ++j)
        add_layer_params(out, "G.dec" + std::to_string(j + 1), dec_[j]);
    return out;
}

std::vector<NamedBuffer> Generator::buffers()
{
    std::vector<NamedBuffer> out;
    for (size_t i = 0; i < enc_.size(); ++i)
        add_layer_buffers(out, "G.enc" + std::to_string(i + 1), enc_[i]);
    for (size_t j = 0; j < dec_.size(); ++j)
        add_layer_buffers(out, "G.dec" + std::to_string(j + 1), dec_[j]);
    return out;
}

Discriminator::Discriminator(const DiscriminatorConfig &cfg, uint64_t seed) : cfg_(cfg)
{
    validate(cfg);
    std::mt19937_64 rng(seed);
    int in = cfg.in_channels;
    for (int l = 0; l < cfg.n_layers - 1; ++l) {
        const int out = std::min(cfg.base_width << std::min(l, 3), 8 * cfg.base_width);
        layers_.push_back(make_layer(in, out, l < 4 ? 2 : 1, 1, false, true, false, rng));
        in = out;
    }
    // Last layer: no batch norm, which would pin a 1-channel map to beta and
    // make the averaged output constant.
    layers_.push_back(make_layer(in, 1, 1, 1, false, false, false, rng));
}

Var<float> Discriminator::forward(const Var<float> &x, const Var<float> &y, bool train)
{
    Var<float> h = nn::concat_channels(x, y);
    for (size_t l = 0; l + 1 < layers_.size(); ++l)
        h = nn::leaky_relu(layers_[l].apply(h, train), 0.2f);
    h = layers_.back().apply(h, train);
    return nn::sigmoid(nn::mean_per_sample(h));
}

std::vector<NamedParam> Discriminator::params() const
{
    std::vector<NamedParam> out;
    for (size_t l = 0; l < layers_.size(); ++l)
        add_layer_params(out, "D.conv" + std::to_string(l + 1), layers_[l]);
    return out;
}

std::vector<NamedBuffer> Discriminator::buffers()
{
    std::vector<NamedBuffer> out;
    for (size_t l = 0; l < layers_.size(); ++l)
        add_layer_buffers(out, "D.conv" + std::to_string(l + 1), layers_[l]);
    return out;
}

void Discriminator::set_trainable(bool on)
{
    for (auto &p : params())
        p.var.node()->requires_grad = on;
}

Model::Model(const GeneratorConfig &g, const DiscriminatorConfig &d, const TrainConfig &t)
    : g_cfg(g), d_cfg(d), t_cfg(t), G(g, derive_seed(t.seed, 1)), D(d, derive_seed(t.seed, 2)),
      opt_g(vars_of(G.params()), adam_config(t)), opt_d(vars_of(D.params()), adam_config(t)),
      rng(derive_seed(t.seed, 3))
{
    validate(t);
    if (d.in_channels != g.in_channels + 3)
        throw ValidationError("discriminator in_channels must be generator in_channels + 3");
    if (d.image_size != g.image_size)
        throw ValidationError("generator and discriminator image sizes differ");
    if (t.grayscale != (g.in_channels == 2))
        throw ValidationError("grayscale training needs a 2-channel generator input, color needs 4");
}

StepLosses gan_step(Model &m, const Tensor<float> &x_t, const Tensor<float> &truth_t)
{
    StepLosses out;
    const Var<float> x(x_t), truth(truth_t);
    const Var<float> fake = m.G.forward(x, true, m.rng);

    // Discriminator: real pairs labeled 1, generated pairs 0.
    m.D.set_trainable(true);
    const Var<float> p_real = m.D.forward(x, truth, true);
    const Var<float> p_fake = m.D.forward(x, nn::detach(fake), true);
    const Var<float> d_loss = nn::add(nn::bce(p_real, 1.0f), nn::bce(p_fake, 0.0f));
    nn::backward(d_loss);
    m.opt_d.step();
    out.d_loss = d_loss.value()[0];
    out.p_real = p_real.value()[0];
    out.p_fake = p_fake.value()[0];

    // Generator: fool the updated D, plus the weighted L1 term.
    m.D.set_trainable(false);
    const Var<float> g_adv = nn::bce(m.D.forward(x, fake, true), 1.0f);
    Var<float> g_loss = g_adv;
    if (m.t_cfg.use_l1) {
        const Var<float> g_l1 = nn::l1(fake, truth);
        out.g_l1 = g_l1.value()[0];
        g_loss = nn::add(g_adv, nn::scale(g_l1, static_cast<float>(m.t_cfg.l1_weight)));
    }
    nn::backward(g_loss);
    m.opt_g.step();
    m.D.set_trainable(true);
    out.g_adv = g_adv.value()[0];
    m.last = out;
    return out;
}

void train_epochs(Model &m, const std::vector<TrainPair> &pairs, int epochs, const TrainCallbacks &cb)
{
    if (epochs > 0 && pairs.empty())
        throw ValidationError("training set is empty");
    for (const auto &p : pairs)
        check_pair(m, p);
    std::vector<size_t> order(pairs.size());
    for (int e = 0; e < epochs; ++e) {
        std::iota(order.begin(), order.end(), size_t{0});
        std::shuffle(order.begin(), order.end(), m.rng);
        for (size_t i : order) {
            const StepLosses l = gan_step(m, pairs[i].x, pairs[i].truth);
            ++m.step;
            if (cb.on_step)
                cb.on_step(m.step, l);
        }
        std::vector<const Tensor<float> *> xs;
        for (const auto &p : pairs)
            xs.push_back(&p.x);
        m.G.recalibrate(xs);
        ++m.epoch;
        if (cb.on_epoch_end)
            cb.on_epoch_end(m);
    }
}

std::unique_ptr<Model> train(const std::vector<TrainPair> &pairs, const GeneratorConfig &g, const DiscriminatorConfig &d,
                             const TrainConfig &t, const TrainCallbacks &cb)
{
    auto m = std::make_unique<Model>(g, d, t);
    train_epochs(*m, pairs, t.epochs, cb);
    return m;
}

void fine_tune(Model &m, const std::vector<TrainPair> &pairs, const TrainConfig &t, const TrainCallbacks &cb)
{
    validate(t);
    if (t.grayscale != m.t_cfg.grayscale)
        throw ValidationError("fine-tune config disagrees with the checkpoint on grayscale input");
    if (t.epochs > 0 && pairs.empty())
        throw ValidationError("fine-tune needs at least one pair");
    for (const auto &p : pairs)
        check_pair(m, p);
    if (t.epochs == 0)
        return; // nothing to do; keep the stored config as well
    const uint64_t seed = m.t_cfg.seed;
    m.t_cfg = t;
    m.t_cfg.seed = seed;
    m.opt_g.set_config(adam_config(t));
    m.opt_d.set_config(adam_config(t));
    train_epochs(m, pairs, t.epochs, cb);
}

Tensor<float> infer(Model &m, const Tensor<float> &x)
{
    const int w = m.g_cfg.image_size;
    if (x.rank() != 4 || x.dim(1) != m.g_cfg.in_channels || x.dim(2) != w || x.dim(3) != w)
        throw ValidationError("input shape " + nn::shape_str(x.shape()) + " does not match model (" +
                              std::to_string(m.g_cfg.in_channels) + " channels, w = " + std::to_string(w) + ")");
    std::mt19937_64 unused(0);
    return m.G.forward(Var<float>(x), false, unused).value();
}

std::string loss_csv_row(long long step, const StepLosses &l)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "%lld,%.6f,%.6f,%.6f\n", step, l.d_loss, l.g_adv, l.g_l1);
    return buf;
}

Tensor<float> build_input(const ImagePlane &place, const ImagePlane &connect, const TrainConfig &t)
{
    const ImagePlane p = t.grayscale ? to_grayscale(place) : place;
    return to_tensor(stack_input(p, connect, static_cast<float>(t.connect_scale)));
}

Tensor<float> to_tensor(const ImagePlane &img)
{
    const int H = img.height(), W = img.width(), C = img.channels();
    Tensor<float> t({1, C, H, W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                t.at(0, c, y, x) = img.at(y, x, c);
    return t;
}

ImagePlane to_image(const Tensor<float> &t)
{
    if (t.rank() != 4 || t.dim(0) != 1)
        throw ValidationError("to_image: expected a 1 x C x H x W tensor, got " + nn::shape_str(t.shape()));
    const int C = t.dim(1), H = t.dim(2), W = t.dim(3);
    ImagePlane img(H, W, C);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                img.at(y, x, c) = t.at(0, c, y, x);
    return img;
}

} // namespace routecast

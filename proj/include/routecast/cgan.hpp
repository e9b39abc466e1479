#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "routecast/image.hpp"
#include "routecast/nn/adam.hpp"
#include "routecast/nn/autograd.hpp"

namespace routecast {

using nn::Tensor;
using nn::Var;

enum class SkipMode { All, Single, None };
const char *skip_mode_name(SkipMode m);
SkipMode parse_skip_mode(const std::string &s);

struct GeneratorConfig {
    int image_size = 64;
    int in_channels = 4;
    int base_width = 32;
    int depth = 4;
    SkipMode skip = SkipMode::All;
    float dropout_rate = 0.5f;

    // depth = log2(w) - 2, base width 64 from w = 256 up, else 32.
    static GeneratorConfig for_width(int w, int in_channels = 4);
    // Feature width of encoder level i (1-based).
    int enc_width(int i) const;
    bool operator==(const GeneratorConfig &) const = default;
};

struct DiscriminatorConfig {
    int image_size = 64;
    int in_channels = 7;
    int n_layers = 6;
    int base_width = 32;

    static DiscriminatorConfig for_generator(const GeneratorConfig &g);
    bool operator==(const DiscriminatorConfig &) const = default;
};

void validate(const GeneratorConfig &c);
void validate(const DiscriminatorConfig &c);

struct TrainConfig {
    int epochs = 250;
    int batch = 1;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
    double l1_weight = 50.0;     // lambda_L1
    double connect_scale = 0.1;  // lambda_c, scales the connectivity channel
    bool use_l1 = true;
    bool grayscale = false;
    uint64_t seed = 1;

    bool operator==(const TrainConfig &) const = default;
};

void validate(const TrainConfig &c);
// key=value override, keys named as the fields. Throws ValidationError.
void apply_override(TrainConfig &c, const std::string &key, const std::string &value);

struct NamedParam {
    std::string name;
    Var<float> var;
};

struct NamedBuffer {
    std::string name;
    Tensor<float> *tensor;
};

// Convolution (or transposed convolution) with optional batch norm and bias.
struct ConvLayer {
    Var<float> weight;
    Var<float> gamma, beta, bias; // empty when unused
    nn::BatchNormStats<float> stats;
    int stride = 2;
    int pad = 1;
    bool transpose = false;

    // Per-channel sums of pre-norm activations, filled while recalibrating.
    struct Moments {
        std::vector<double> sum, sq;
        double count = 0;
    };

    // With `moments`, normalizes with batch statistics, leaves the running
    // estimates alone and accumulates into *moments.
    Var<float> apply(const Var<float> &x, bool train, Moments *moments = nullptr);
};

// U-Net style encoder/decoder. Encoder level i halves the resolution;
// decoder level j mirrors encoder level depth - j + 1.
class Generator {
  public:
    Generator(const GeneratorConfig &cfg, uint64_t seed);

    // x: N x in_channels x w x w; returns N x 3 x w x w in [0, 1]. Train mode
    // applies dropout (the noise source) and batch statistics.
    Var<float> forward(const Var<float> &x, bool train, std::mt19937_64 &rng);
    // Replaces the batch-norm running estimates by the population statistics
    // of dropout-free passes over `inputs`, so that inference (dropout off)
    // sees the activations the estimates describe.
    void recalibrate(const std::vector<const Tensor<float> *> &inputs);
    const GeneratorConfig &config() const { return cfg_; }
    std::vector<NamedParam> params() const;
    std::vector<NamedBuffer> buffers();

    // Input channel count of decoder level j (1-based).
    int dec_in_width(int j) const;
    bool skip_into(int j) const;

  private:
    Var<float> run(const Var<float> &x, bool train, bool drop, std::mt19937_64 &rng,
                   std::vector<ConvLayer::Moments> *moments);

    GeneratorConfig cfg_;
    std::vector<ConvLayer> enc_, dec_;
};

// Global discriminator: strided conv blocks, then a 1-channel map averaged
// into one probability per sample.
class Discriminator {
  public:
    Discriminator(const DiscriminatorConfig &cfg, uint64_t seed);

    // x: conditioning input, y: candidate output. Returns N x 1 in (0, 1).
    Var<float> forward(const Var<float> &x, const Var<float> &y, bool train);
    const DiscriminatorConfig &config() const { return cfg_; }
    std::vector<NamedParam> params() const;
    std::vector<NamedBuffer> buffers();
    // Marks parameters as constants (false) or trainable (true).
    void set_trainable(bool on);

  private:
    DiscriminatorConfig cfg_;
    std::vector<ConvLayer> layers_;
};

struct StepLosses {
    double d_loss = 0;
    double g_adv = 0;
    double g_l1 = 0;
    double p_real = 0; // D(x, truth) during the D update
    double p_fake = 0; // D(x, G(x)) during the D update
};

// Loss log rows: "step,d_loss,g_adv,g_l1".
inline constexpr const char *kLossCsvHeader = "step,d_loss,g_adv,g_l1\n";
std::string loss_csv_row(long long step, const StepLosses &l);

struct TrainPair {
    std::string id;
    Tensor<float> x;     // 1 x in_channels x w x w
    Tensor<float> truth; // 1 x 3 x w x w
};

// Everything a checkpoint holds.
struct Model {
    GeneratorConfig g_cfg;
    DiscriminatorConfig d_cfg;
    TrainConfig t_cfg;
    Generator G;
    Discriminator D;
    nn::Adam<float> opt_g;
    nn::Adam<float> opt_d;
    std::mt19937_64 rng;
    int epoch = 0;
    long long step = 0;
    std::string manifest_hash;
    StepLosses last;

    Model(const GeneratorConfig &g, const DiscriminatorConfig &d, const TrainConfig &t);
    Model(const Model &) = delete;
    Model &operator=(const Model &) = delete;
};

// One alternating update: D on (x, truth) vs (x, G(x)), then G.
StepLosses gan_step(Model &m, const Tensor<float> &x, const Tensor<float> &truth);

struct TrainCallbacks {
    std::function<void(long long step, const StepLosses &)> on_step;
    std::function<void(const Model &)> on_epoch_end;
};

// Runs epochs x |pairs| steps in a per-epoch shuffled order drawn from the
// model's RNG, continuing from the model's current state. The generator's
// batch-norm estimates are recalibrated on the pairs after every epoch.
void train_epochs(Model &m, const std::vector<TrainPair> &pairs, int epochs, const TrainCallbacks &cb = {});

std::unique_ptr<Model> train(const std::vector<TrainPair> &pairs, const GeneratorConfig &g, const DiscriminatorConfig &d,
                             const TrainConfig &t, const TrainCallbacks &cb = {});

// Continues training on exactly the given pairs for t.epochs. Optimizer
// settings come from t; architecture must match.
void fine_tune(Model &m, const std::vector<TrainPair> &pairs, const TrainConfig &t, const TrainCallbacks &cb = {});

// Deterministic prediction (no dropout, running batch-norm statistics).
Tensor<float> infer(Model &m, const Tensor<float> &x);

// Generator input for one placement: [place, lambda_c * connect], with the
// placement image reduced to gray when t.grayscale.
Tensor<float> build_input(const ImagePlane &place, const ImagePlane &connect, const TrainConfig &t);

// HWC image <-> 1 x C x H x W tensor.
Tensor<float> to_tensor(const ImagePlane &img);
ImagePlane to_image(const Tensor<float> &t);

} // namespace routecast

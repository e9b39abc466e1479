#pragma once

#include <vector>

#include "routecast/nn/autograd.hpp"

namespace routecast::nn {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list. Moments are allocated on
// the first step.
template <typename T>
class Adam {
  public:
    Adam(std::vector<Var<T>> params, AdamConfig cfg = {});

    // Applies one update from the current gradients (missing gradients count
    // as zero), then clears them.
    void step();
    void zero_grad();

    const AdamConfig &config() const { return cfg_; }
    void set_config(const AdamConfig &cfg) { cfg_ = cfg; }
    long long t() const { return t_; }
    const std::vector<Var<T>> &params() const { return params_; }
    std::vector<Tensor<T>> &m() { return m_; }
    std::vector<Tensor<T>> &v() { return v_; }
    void set_t(long long t) { t_ = t; }

  private:
    std::vector<Var<T>> params_;
    AdamConfig cfg_;
    long long t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

} // namespace routecast::nn

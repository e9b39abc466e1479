#include "routecast/nn/adam.hpp"

#include <cmath>

namespace routecast::nn {

template <typename T>
Adam<T>::Adam(std::vector<Var<T>> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg)
{
    for (const auto &p : params_) {
        m_.emplace_back(p.shape());
        v_.emplace_back(p.shape());
    }
}

template <typename T>
void Adam<T>::step()
{
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    for (size_t k = 0; k < params_.size(); ++k) {
        Var<T> &p = params_[k];
        Tensor<T> &w = p.value();
        const T *g = p.has_grad() ? p.grad().data() : nullptr;
        Tensor<T> &m = m_[k], &v = v_[k];
        for (size_t i = 0; i < w.size(); ++i) {
            const T gi = g ? g[i] : T(0);
            m[i] = b1 * m[i] + (1 - b1) * gi;
            v[i] = b2 * v[i] + (1 - b2) * gi * gi;
            const double mh = m[i] / c1, vh = v[i] / c2;
            w[i] -= static_cast<T>(cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps));
        }
    }
    zero_grad();
}

template <typename T>
void Adam<T>::zero_grad()
{
    for (auto &p : params_)
        p.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

} // namespace routecast::nn

#include "sifted/optimizer.hpp"

#include <cmath>

namespace sifted {

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, double lr, double beta1,
           double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    for (auto& [name, t] : params)
        slots_.push_back({t, std::vector<double>(t.size(), 0.0),
                          std::vector<double>(t.size(), 0.0)});
}

void Adam::zero_grad() {
    for (auto& s : slots_) s.param.zero_grad();
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& s : slots_) {
        const auto& g = s.param.grad();
        if (g.empty()) continue;  // never touched by backward
        auto& vals = s.param.values_mut();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
            s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
            double m_hat = s.m[i] / bc1;
            double v_hat = s.v[i] / bc2;
            vals[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
        }
    }
}

}  // namespace sifted

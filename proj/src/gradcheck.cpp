#include "sifted/gradcheck.hpp"

#include <cmath>

namespace sifted {

double fd_rel_err(double analytic, double numeric) {
    double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
    return std::abs(analytic - numeric) / denom;
}

GradCheckResult check_gradients(const std::function<Tensor()>& f,
                                const std::vector<std::pair<std::string, Tensor>>& params,
                                double h) {
    for (auto& [name, p] : params) {
        Tensor t = p;
        t.zero_grad();
    }
    Tensor loss = f();
    loss.backward();

    GradCheckResult res;
    for (auto& [name, p] : params) {
        Tensor t = p;
        const auto& g = t.grad();
        auto& vals = t.values_mut();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            double orig = vals[i];
            vals[i] = orig + h;
            double fp = f().value_at(0);
            vals[i] = orig - h;
            double fm = f().value_at(0);
            vals[i] = orig;
            double numeric = (fp - fm) / (2.0 * h);
            double analytic = g.empty() ? 0.0 : g[i];
            double err = fd_rel_err(analytic, numeric);
            if (err > res.max_rel_err) {
                res.max_rel_err = err;
                res.worst_param = name;
                res.worst_index = i;
            }
        }
    }
    return res;
}

}  // namespace sifted

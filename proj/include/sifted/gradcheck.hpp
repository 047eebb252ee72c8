#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sifted/tensor.hpp"

namespace sifted {

// Central finite differences against analytic reverse-mode gradients.
// `f` must rebuild the computation from the current leaf values and return a
// scalar loss tensor. Any randomness inside f has to be replayed identically
// on every call (snapshot the rng).
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
};

double fd_rel_err(double analytic, double numeric);

GradCheckResult check_gradients(const std::function<Tensor()>& f,
                                const std::vector<std::pair<std::string, Tensor>>& params,
                                double h = 1e-5);

// The full tiny-config suite: every differentiable op plus the composed
// model. Prints one line per check when verbose; returns the max relative
// error seen.
GradCheckResult run_gradcheck_suite(std::uint64_t seed, bool verbose);

}  // namespace sifted

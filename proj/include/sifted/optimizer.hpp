#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sifted/tensor.hpp"

namespace sifted {

// Adam with bias-corrected moment estimates.
class Adam {
public:
    Adam(std::vector<std::pair<std::string, Tensor>> params, double lr, double beta1 = 0.9,
         double beta2 = 0.999, double epsilon = 1e-8);

    void zero_grad();
    void step();

private:
    struct Slot {
        Tensor param;
        std::vector<double> m;
        std::vector<double> v;
    };
    std::vector<Slot> slots_;
    double lr_, beta1_, beta2_, epsilon_;
    std::size_t t_ = 0;
};

}  // namespace sifted

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "nfa/autodiff.hpp"

namespace nfa {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    struct Slot {
        Tensor m;
        Tensor v;
    };
    std::map<std::string, Slot> slots;
    std::int64_t step = 0;
};

// One Adam update on the trainable entries of `params`. Weight decay is
// decoupled (applied directly to the parameter, not mixed into the moments).
void adam_step(ParamSet& params, const GradMap& grads, AdamState& state, double lr,
               double weight_decay, const AdamConfig& cfg = {});

}  // namespace nfa

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nfa/autodiff.hpp"

namespace nfa {

// Builds a scalar loss on a fresh tape from the current parameter values.
using LossFn = std::function<Var(Tape&, ParamSet&)>;

struct GradCheckReport {
    struct Row {
        std::string name;
        // max_i |ad_i - fd_i| / max(1, ||ad||_inf, ||fd||_inf); the unit
        // floor keeps round-off on near-zero gradients from dominating.
        double max_rel_dev;
    };
    std::vector<Row> rows;
    double tol = 0.0;
    bool pass = true;
};

// Compares reverse-mode gradients against central finite differences,
// parameter by parameter. `step` is the central-difference half-step.
GradCheckReport grad_check(const LossFn& fn, ParamSet& params, double step, double tol);

}  // namespace nfa

#include "nfa/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace nfa {

void adam_step(ParamSet& params, const GradMap& grads, AdamState& state, double lr,
               double weight_decay, const AdamConfig& cfg) {
    if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (const auto& name : params.names()) {
        if (!params.trainable(name)) continue;
        auto git = grads.find(name);
        if (git == grads.end())
            throw std::invalid_argument("adam_step: missing gradient for '" + name + "'");
        Tensor& p = params.value(name);
        const Tensor& g = git->second;
        if (!g.same_shape(p))
            throw std::invalid_argument("adam_step: gradient shape " + shape_str(g.shape()) +
                                        " does not match parameter '" + name + "' " +
                                        shape_str(p.shape()));
        auto& slot = state.slots[name];
        if (slot.m.size() == 0) {
            slot.m = Tensor(p.shape());
            slot.v = Tensor(p.shape());
        } else if (!slot.m.same_shape(p)) {
            throw std::invalid_argument("adam_step: state shape mismatch for '" + name + "'");
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            double gi = g.at(i);
            double m = cfg.beta1 * slot.m.at(i) + (1.0 - cfg.beta1) * gi;
            double v = cfg.beta2 * slot.v.at(i) + (1.0 - cfg.beta2) * gi * gi;
            slot.m.at(i) = static_cast<float>(m);
            slot.v.at(i) = static_cast<float>(v);
            double update = (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
            double decayed = p.at(i) - lr * update - lr * weight_decay * p.at(i);
            p.at(i) = static_cast<float>(decayed);
        }
    }
}

}  // namespace nfa

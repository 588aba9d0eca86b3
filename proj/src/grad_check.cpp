#include "nfa/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace nfa {

namespace {

double eval_loss(const LossFn& fn, ParamSet& params) {
    Tape tape;
    Var loss = fn(tape, params);
    if (tape.value(loss).size() != 1)
        throw std::invalid_argument("grad_check: fn must return a scalar, got shape " +
                                    shape_str(tape.value(loss).shape()));
    return tape.scalar_value(loss);
}

}  // namespace

GradCheckReport grad_check(const LossFn& fn, ParamSet& params, double step, double tol) {
    if (!(step > 0.0 && step < 1.0)) throw std::invalid_argument("grad_check: step must be in (0, 1)");
    if (!(tol > 0.0)) throw std::invalid_argument("grad_check: tol must be positive");

    GradCheckReport report;
    report.tol = tol;

    GradMap analytic;
    {
        Tape tape;
        Var loss = fn(tape, params);
        if (tape.value(loss).size() != 1)
            throw std::invalid_argument("grad_check: fn must return a scalar, got shape " +
                                        shape_str(tape.value(loss).shape()));
        analytic = tape.backward(loss, params);
    }

    for (const auto& name : params.names()) {
        if (!params.trainable(name)) continue;
        Tensor& p = params.value(name);
        const Tensor& ad = analytic.at(name);
        double scale = 1.0;
        for (std::size_t i = 0; i < ad.size(); ++i) scale = std::max(scale, std::abs(static_cast<double>(ad.at(i))));
        double max_dev = 0.0;
        std::vector<double> fd(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            float saved = p.at(i);
            p.at(i) = static_cast<float>(saved + step);
            double up = eval_loss(fn, params);
            p.at(i) = static_cast<float>(saved - step);
            double down = eval_loss(fn, params);
            p.at(i) = saved;
            fd[i] = (up - down) / (2.0 * step);
            scale = std::max(scale, std::abs(fd[i]));
        }
        for (std::size_t i = 0; i < p.size(); ++i)
            max_dev = std::max(max_dev, std::abs(static_cast<double>(ad.at(i)) - fd[i]) / scale);
        report.rows.push_back({name, max_dev});
        if (max_dev > tol) report.pass = false;
    }
    return report;
}

}  // namespace nfa

#include "dlm/consolidation.hpp"

#include <stdexcept>

namespace dlm {

FisherDiag estimate_fisher(const LstmLm& lm, const ParamVector& params,
                           std::span<const MiniBatch> stream) {
    if (stream.empty()) throw std::runtime_error("fisher estimation needs at least one batch");
    FisherDiag fisher;
    fisher.values.assign(params.size(), 0.0);
    for (const auto& batch : stream) {
        auto res = lm.backward(params, lm.zero_state(), batch);
        const double inv_m = 1.0 / static_cast<double>(batch.size());
        for (size_t j = 0; j < params.size(); ++j) {
            double g = res.grad[j] * inv_m;
            fisher.values[j] += g * g;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(stream.size());
    for (auto& v : fisher.values) v *= inv_n;
    fisher.sample_count = stream.size();
    return fisher;
}

std::pair<double, ParamVector> ewc_penalty(const ParamVector& theta,
                                           const ConsolidatedMemory& memory) {
    const size_t n = theta.size();
    if (memory.anchor.size() != n || memory.fisher.values.size() != n)
        throw std::runtime_error("consolidated memory length mismatch");
    double value = 0.0;
    ParamVector grad(n);
    const double lam = memory.stiffness;
    for (size_t j = 0; j < n; ++j) {
        double d = theta[j] - memory.anchor[j];
        double fd = memory.fisher.values[j] * d;
        value += 0.5 * lam * fd * d;
        grad[j] = lam * fd;
    }
    return {value, std::move(grad)};
}

ConsolidatedMemory consolidate(const ParamVector& task_a_params, const FisherDiag& fisher,
                               double stiffness) {
    if (stiffness < 0.0) throw std::runtime_error("stiffness must be >= 0");
    if (fisher.values.size() != task_a_params.size())
        throw std::runtime_error("fisher length mismatch");
    return ConsolidatedMemory{task_a_params, fisher, stiffness};
}

}  // namespace dlm

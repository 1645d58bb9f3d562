#pragma once

#include <span>
#include <utility>

#include "dlm/lm.hpp"

namespace dlm {

struct FisherDiag {
    std::vector<double> values;    // elementwise >= 0
    size_t sample_count = 0;       // batches averaged
};

// Long-term memory: the task-A solution, its Fisher diagonal and the spring
// stiffness of the quadratic anchor.
struct ConsolidatedMemory {
    ParamVector anchor;
    FisherDiag fisher;
    double stiffness = 1.0;
};

// F_j = mean over batches of (grad_j / M)^2, empirical Fisher with per-token
// normalization. Each batch is evaluated from the zero state so the estimate
// is invariant to batch order.
FisherDiag estimate_fisher(const LstmLm& lm, const ParamVector& params,
                           std::span<const MiniBatch> stream);

// value = (lambda/2) * sum_j F_j (theta_j - anchor_j)^2, with its gradient
std::pair<double, ParamVector> ewc_penalty(const ParamVector& theta,
                                           const ConsolidatedMemory& memory);

ConsolidatedMemory consolidate(const ParamVector& task_a_params, const FisherDiag& fisher,
                               double stiffness);

}  // namespace dlm

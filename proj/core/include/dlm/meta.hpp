#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dlm/lm.hpp"

namespace dlm {

// Feature channel order for the coordinate-shared gate network.
enum FeatChannel : int { kFeatThetaPrev = 0, kFeatLoss = 1, kFeatGrad = 2, kFeatAnchor = 3, kNumFeatChannels = 4 };
enum GateIndex : int { kGateCopy = 0, kGateUpdate = 1, kGateFlush = 2, kNumGates = 3 };

// Weights of the coordinate-sharing linear gate network: one 4-input,
// 3-output map applied identically to every parameter coordinate, plus
// optional per-tensor-group gate bias offsets.
struct MetaParams {
    std::array<std::array<double, kNumFeatChannels>, kNumGates> w{};
    std::array<double, kNumGates> b{};
    std::vector<double> group_bias;   // 3 per group, [group * 3 + gate]
    bool use_group_bias = true;
    bool negate_grad_channel = false; // flips the sign of the UPDATE term
    bool use_flush = true;            // three-level assembly; off drops the anchor pathway

    size_t num_groups() const { return group_bias.size() / kNumGates; }
};

// Copy-dominant start: gate biases (+4, -4, -4) make the untrained policy
// nearly the identity update.
MetaParams init_meta(size_t num_groups, bool use_group_bias = true);

struct GateTriple {
    std::vector<double> f;  // COPY
    std::vector<double> i;  // UPDATE
    std::vector<double> z;  // FLUSH
};

struct CoordFeatures {
    std::vector<double> theta_prev;
    std::vector<double> grad_pre;   // log-compressed gradient channel
    std::vector<double> anchor;
    double loss_feat = 0.0;         // broadcast to every coordinate
    size_t size() const { return theta_prev.size(); }
};

constexpr double kGradPreprocTau = 1e-4;

// Gradient channel: sign(g) * log(1 + |g|/tau); loss channel: log(1 + L/M).
CoordFeatures preprocess_features(const ParamVector& params_prev, const LossValue& loss,
                                  const ParamVector& grad, const ParamVector& anchor);

GateTriple compute_gates(const MetaParams& meta, const CoordFeatures& feats,
                         std::span<const uint8_t> groups);

// theta_t = f .* theta_prev + i .* grad + z .* anchor (grad negated when the
// meta-params say so; anchor term dropped when use_flush is off).
ParamVector apply_update(const ParamVector& prev, const GateTriple& gates,
                         const ParamVector& grad, const ParamVector& anchor,
                         const MetaParams& meta);

// theta_t = theta_prev - alpha * grad
ParamVector dynamic_eval_step(const ParamVector& prev, const ParamVector& grad, double alpha);

}  // namespace dlm

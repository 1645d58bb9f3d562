#include "dlm/meta.hpp"

#include <cmath>
#include <stdexcept>

namespace dlm {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

MetaParams init_meta(size_t num_groups, bool use_group_bias) {
    MetaParams m;
    m.b = {4.0, -4.0, -4.0};
    m.use_group_bias = use_group_bias;
    m.group_bias.assign(num_groups * kNumGates, 0.0);
    return m;
}

CoordFeatures preprocess_features(const ParamVector& params_prev, const LossValue& loss,
                                  const ParamVector& grad, const ParamVector& anchor) {
    const size_t n = params_prev.size();
    if (grad.size() != n || anchor.size() != n)
        throw std::runtime_error("feature vector length mismatch");
    if (!std::isfinite(loss.total)) throw std::runtime_error("non-finite feature");

    CoordFeatures f;
    f.theta_prev = params_prev;
    f.anchor = anchor;
    f.grad_pre.resize(n);
    for (size_t j = 0; j < n; ++j) {
        double g = grad[j];
        if (!std::isfinite(g) || !std::isfinite(params_prev[j]) || !std::isfinite(anchor[j]))
            throw std::runtime_error("non-finite feature");
        double mag = std::log1p(std::abs(g) / kGradPreprocTau);
        f.grad_pre[j] = g < 0.0 ? -mag : (g > 0.0 ? mag : 0.0);
    }
    f.loss_feat = std::log1p(loss.total / static_cast<double>(loss.per_token.size()));
    return f;
}

GateTriple compute_gates(const MetaParams& meta, const CoordFeatures& feats,
                         std::span<const uint8_t> groups) {
    const size_t n = feats.size();
    if (meta.use_group_bias && groups.size() != n)
        throw std::runtime_error("group map length mismatch");

    GateTriple g;
    g.f.resize(n);
    g.i.resize(n);
    g.z.resize(n);
    for (size_t j = 0; j < n; ++j) {
        const double feat[kNumFeatChannels] = {feats.theta_prev[j], feats.loss_feat,
                                               feats.grad_pre[j], feats.anchor[j]};
        for (int k = 0; k < kNumGates; ++k) {
            double pre = meta.b[k];
            for (int c = 0; c < kNumFeatChannels; ++c) pre += meta.w[k][c] * feat[c];
            if (meta.use_group_bias) pre += meta.group_bias[groups[j] * kNumGates + k];
            double s = sigmoid(pre);
            if (k == kGateCopy) g.f[j] = s;
            else if (k == kGateUpdate) g.i[j] = s;
            else g.z[j] = s;
        }
    }
    return g;
}

ParamVector apply_update(const ParamVector& prev, const GateTriple& gates,
                         const ParamVector& grad, const ParamVector& anchor,
                         const MetaParams& meta) {
    const size_t n = prev.size();
    if (gates.f.size() != n || grad.size() != n || anchor.size() != n)
        throw std::runtime_error("update vector length mismatch");
    const double gsign = meta.negate_grad_channel ? -1.0 : 1.0;
    ParamVector out(n);
    for (size_t j = 0; j < n; ++j) {
        double v = gates.f[j] * prev[j] + gates.i[j] * gsign * grad[j];
        if (meta.use_flush) v += gates.z[j] * anchor[j];
        if (!std::isfinite(v)) throw std::runtime_error("diverged update");
        out[j] = v;
    }
    return out;
}

ParamVector dynamic_eval_step(const ParamVector& prev, const ParamVector& grad, double alpha) {
    if (grad.size() != prev.size()) throw std::runtime_error("gradient length mismatch");
    ParamVector out(prev.size());
    for (size_t j = 0; j < prev.size(); ++j) out[j] = prev[j] - alpha * grad[j];
    return out;
}

}  // namespace dlm

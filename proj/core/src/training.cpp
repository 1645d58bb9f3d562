#include "dlm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dlm {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double clip_to_norm(ParamVector& g, double max_norm) {
    double sq = 0.0;
    for (double x : g) sq += x * x;
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double s = max_norm / norm;
        for (double& x : g) x *= s;
    }
    return norm;
}

inline double dsigmoid_from_value(double s) { return s * (1.0 - s); }

// per-step record of one unrolled window
struct UnrollStep {
    ParamVector theta;   // theta^{(i)}
    ParamVector grad;    // raw LM gradient g_i at theta^{(i)}
    GateTriple gates;
    CoordFeatures feats;
    LossValue loss;
};

}  // namespace

std::string train_log_header() { return "stage,step,window,L_meta,mean_batch_ppl,wallclock_ms"; }

std::string format_log_row(const TrainLogRow& row) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.9g,%.9g,%.9g", row.stage.c_str(), row.step,
                  row.window, row.l_meta, row.mean_batch_ppl, row.wallclock_ms);
    return buf;
}

ParamVector pretrain_task_a(const LstmLm& lm, const PretrainConfig& cfg,
                            const TokenSequence& train, const TrainLogFn& log) {
    if (cfg.epochs < 1 || cfg.lr <= 0.0 || cfg.clip_norm <= 0.0 || cfg.batch_tokens < 1)
        throw std::runtime_error("pretrain config fields must be positive");
    auto batches = split_batches(train, cfg.batch_tokens);
    ParamVector theta = lm.init_params(cfg.seed);
    double lr = cfg.lr;
    double prev_epoch_loss = 1e300;
    auto t0 = Clock::now();

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        LMState state = lm.zero_state();
        double epoch_loss = 0.0;
        double epoch_ppl = 0.0;
        for (const auto& batch : batches) {
            auto res = lm.backward(theta, state, batch);
            if (!std::isfinite(res.loss.total))
                throw std::runtime_error("pretraining diverged at epoch " + std::to_string(epoch));
            state = std::move(res.state_out);
            const double inv_m = 1.0 / static_cast<double>(batch.size());
            for (double& g : res.grad) g *= inv_m;
            clip_to_norm(res.grad, cfg.clip_norm);
            for (size_t j = 0; j < theta.size(); ++j) theta[j] -= lr * res.grad[j];
            epoch_loss += res.loss.total;
            epoch_ppl += perplexity(res.loss);
        }
        epoch_loss /= static_cast<double>(batches.size());
        epoch_ppl /= static_cast<double>(batches.size());
        if (epoch_loss > prev_epoch_loss) lr *= 0.5;
        prev_epoch_loss = epoch_loss;
        if (log) log({"pretrain", epoch, 0, epoch_loss, epoch_ppl, elapsed_ms(t0)});
    }
    return theta;
}

double MetaGrad::norm() const {
    double sq = 0.0;
    for (int k = 0; k < kNumGates; ++k) {
        for (int c = 0; c < kNumFeatChannels; ++c) sq += w[k][c] * w[k][c];
        sq += b[k] * b[k];
    }
    for (double x : group_bias) sq += x * x;
    return std::sqrt(sq);
}

void MetaGrad::scale(double s) {
    for (int k = 0; k < kNumGates; ++k) {
        for (int c = 0; c < kNumFeatChannels; ++c) w[k][c] *= s;
        b[k] *= s;
    }
    for (double& x : group_bias) x *= s;
}

namespace {

// Forward one unroll step: evaluate batch at theta (LM state threaded,
// treated as constant for differentiation) and produce the next theta.
UnrollStep unroll_step(const LstmLm& lm, const MetaParams& meta, const ParamVector& theta,
                       LMState& state, const MiniBatch& batch, const ParamVector& anchor,
                       std::span<const uint8_t> groups) {
    UnrollStep st;
    st.theta = theta;
    auto res = lm.backward(theta, state, batch);
    state = std::move(res.state_out);
    st.loss = std::move(res.loss);
    st.grad = std::move(res.grad);
    st.feats = preprocess_features(st.theta, st.loss, st.grad, anchor);
    st.gates = compute_gates(meta, st.feats, groups);
    return st;
}

}  // namespace

double meta_window_loss(const LstmLm& lm, const MetaParams& meta, const ParamVector& theta_start,
                        std::span<const MiniBatch> window, const ConsolidatedMemory* memory,
                        bool ewc_in_objective) {
    if (window.size() < 2) throw std::runtime_error("meta window needs at least 2 batches");
    if (ewc_in_objective && !memory)
        throw std::runtime_error("EWC objective requires consolidated memory");
    const ParamVector anchor =
        memory ? memory->anchor : ParamVector(theta_start.size(), 0.0);
    const auto groups = lm.layout().group_map();

    ParamVector theta = theta_start;
    LMState state = lm.zero_state();
    double l_meta = 0.0;
    for (size_t i = 0; i + 1 < window.size(); ++i) {
        UnrollStep st = unroll_step(lm, meta, theta, state, window[i], anchor, groups);
        if (i > 0) {
            l_meta += st.loss.total;
            if (ewc_in_objective) l_meta += ewc_penalty(st.theta, *memory).first;
        }
        theta = apply_update(st.theta, st.gates, st.grad, anchor, meta);
    }
    auto [loss, next] = lm.forward(theta, state, window.back());
    l_meta += loss.total;
    if (ewc_in_objective) l_meta += ewc_penalty(theta, *memory).first;
    return l_meta;
}

namespace {

struct MetaBackprop {
    const LstmLm& lm;
    const MetaParams& meta;
    const ParamVector& anchor;
    const std::vector<uint8_t>& groups;
    MetaGrad grad;
    ParamVector lambda;  // dL_meta / dtheta^{(i+1)} flowing backward

    MetaBackprop(const LstmLm& lm_, const MetaParams& meta_, const ParamVector& anchor_,
                 const std::vector<uint8_t>& groups_)
        : lm(lm_), meta(meta_), anchor(anchor_), groups(groups_) {
        grad.group_bias.assign(meta.group_bias.size(), 0.0);
        lambda.assign(lm.param_count(), 0.0);
    }

    // Reverse through update step i. The raw gradient entering the UPDATE
    // term and the log-compressed gradient feature are stop-gradients; the
    // theta feature channel, the loss feature (first-order, via g_i) and the
    // direct f .* theta product carry credit back to theta^{(i)}.
    void reverse_update(const UnrollStep& st, bool add_direct_loss, bool ewc,
                        const ConsolidatedMemory* memory) {
        const size_t n = lambda.size();
        const double gsign = meta.negate_grad_channel ? -1.0 : 1.0;
        const double m = static_cast<double>(st.loss.per_token.size());
        ParamVector lambda_prev(n, 0.0);
        double dloss_feat = 0.0;

        for (size_t j = 0; j < n; ++j) {
            const double lam = lambda[j];
            const double feat[kNumFeatChannels] = {st.feats.theta_prev[j], st.feats.loss_feat,
                                                   st.feats.grad_pre[j], st.feats.anchor[j]};
            const double gate_v[kNumGates] = {st.gates.f[j], st.gates.i[j], st.gates.z[j]};
            const double gate_in[kNumGates] = {st.theta[j], gsign * st.grad[j],
                                               meta.use_flush ? anchor[j] : 0.0};
            double dtheta = lam * st.gates.f[j];
            for (int k = 0; k < kNumGates; ++k) {
                double dpre = lam * gate_in[k] * dsigmoid_from_value(gate_v[k]);
                for (int c = 0; c < kNumFeatChannels; ++c) grad.w[k][c] += dpre * feat[c];
                grad.b[k] += dpre;
                if (meta.use_group_bias)
                    grad.group_bias[groups[j] * kNumGates + k] += dpre;
                dtheta += dpre * meta.w[k][kFeatThetaPrev];
                dloss_feat += dpre * meta.w[k][kFeatLoss];
            }
            lambda_prev[j] = dtheta;
        }

        // loss feature depends on theta^{(i)} through L_i; first-order via g_i
        const double dl = dloss_feat / (m + st.loss.total);
        for (size_t j = 0; j < n; ++j) lambda_prev[j] += dl * st.grad[j];

        if (add_direct_loss) {
            for (size_t j = 0; j < n; ++j) lambda_prev[j] += st.grad[j];
            if (ewc) {
                auto [pv, pg] = ewc_penalty(st.theta, *memory);
                for (size_t j = 0; j < n; ++j) lambda_prev[j] += pg[j];
            }
        }
        lambda = std::move(lambda_prev);
    }
};

}  // namespace

MetaWindowResult meta_window_backward(const LstmLm& lm, const MetaParams& meta,
                                      const ParamVector& theta_start,
                                      std::span<const MiniBatch> window,
                                      const ConsolidatedMemory* memory, bool ewc_in_objective,
                                      size_t checkpoint_segment) {
    const size_t n = window.size();
    if (n < 2) throw std::runtime_error("meta window needs at least 2 batches");
    if (ewc_in_objective && !memory)
        throw std::runtime_error("EWC objective requires consolidated memory");
    const ParamVector anchor = memory ? memory->anchor : ParamVector(theta_start.size(), 0.0);
    const auto groups = lm.layout().group_map();
    const size_t updates = n - 1;
    const size_t seg = (checkpoint_segment == 0 || checkpoint_segment >= updates)
                           ? updates
                           : checkpoint_segment;

    MetaWindowResult out;
    out.losses.resize(n);

    // forward sweep retaining only segment-boundary (theta, state) snapshots
    std::vector<ParamVector> theta_ckpt;
    std::vector<LMState> state_ckpt;
    {
        ParamVector theta = theta_start;
        LMState state = lm.zero_state();
        for (size_t i = 0; i < updates; ++i) {
            if (i % seg == 0) {
                theta_ckpt.push_back(theta);
                state_ckpt.push_back(state);
            }
            UnrollStep st = unroll_step(lm, meta, theta, state, window[i], anchor, groups);
            out.losses[i] = st.loss;
            if (i > 0) {
                out.l_meta += st.loss.total;
                if (ewc_in_objective) out.l_meta += ewc_penalty(st.theta, *memory).first;
            }
            theta = apply_update(st.theta, st.gates, st.grad, anchor, meta);
        }
        // last batch: loss plus the lambda seed gradient
        auto res = lm.backward(theta, state, window.back());
        out.losses[n - 1] = res.loss;
        out.l_meta += res.loss.total;
        MetaBackprop bp(lm, meta, anchor, groups);
        bp.lambda = std::move(res.grad);
        if (ewc_in_objective) {
            out.l_meta += ewc_penalty(theta, *memory).first;
            auto [pv, pg] = ewc_penalty(theta, *memory);
            for (size_t j = 0; j < pg.size(); ++j) bp.lambda[j] += pg[j];
        }

        // reverse sweep, recomputing each segment from its snapshot
        const size_t num_segments = (updates + seg - 1) / seg;
        for (size_t s = num_segments; s-- > 0;) {
            const size_t lo = s * seg;
            const size_t hi = std::min(lo + seg, updates);
            std::vector<UnrollStep> steps;
            steps.reserve(hi - lo);
            ParamVector th = theta_ckpt[s];
            LMState stt = state_ckpt[s];
            for (size_t i = lo; i < hi; ++i) {
                steps.push_back(unroll_step(lm, meta, th, stt, window[i], anchor, groups));
                th = apply_update(steps.back().theta, steps.back().gates, steps.back().grad,
                                  anchor, meta);
            }
            for (size_t i = hi; i-- > lo;) {
                bp.reverse_update(steps[i - lo], i > 0, ewc_in_objective, memory);
            }
        }
        out.grad = std::move(bp.grad);
    }
    return out;
}

MetaParams meta_train(const LstmLm& lm, MetaParams meta, const ParamVector& lm0,
                      const ConsolidatedMemory* memory, const MetaTrainConfig& cfg,
                      const TokenSequence& stream, const TrainLogFn& log) {
    if (cfg.batch_tokens < 1 || cfg.batch_tokens > 10000)
        throw std::runtime_error("batch_tokens must lie in [1, 10000]");
    if (cfg.unroll < 1) throw std::runtime_error("unroll must be >= 1");
    auto batches = split_batches(stream, cfg.batch_tokens);
    const size_t per_window = cfg.unroll + 1;
    if (batches.size() < per_window)
        throw std::runtime_error("stream yields fewer batches than one unroll window");

    MetaGrad vel;
    vel.group_bias.assign(meta.group_bias.size(), 0.0);
    const double momentum = 0.9;
    auto t0 = Clock::now();
    size_t step = 0;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t w = 0; w + per_window <= batches.size(); w += per_window, ++step) {
            std::span<const MiniBatch> window(batches.data() + w, per_window);
            auto res = meta_window_backward(lm, meta, lm0, window, memory, cfg.ewc_in_objective,
                                            cfg.checkpoint_segment);
            if (!std::isfinite(res.l_meta))
                throw std::runtime_error("non-finite L_meta in window " + std::to_string(w));
            double norm = res.grad.norm();
            if (norm > cfg.clip_norm && norm > 0.0) res.grad.scale(cfg.clip_norm / norm);

            for (int k = 0; k < kNumGates; ++k) {
                for (int c = 0; c < kNumFeatChannels; ++c) {
                    vel.w[k][c] = momentum * vel.w[k][c] + res.grad.w[k][c];
                    meta.w[k][c] -= cfg.lr * vel.w[k][c];
                }
                vel.b[k] = momentum * vel.b[k] + res.grad.b[k];
                meta.b[k] -= cfg.lr * vel.b[k];
            }
            for (size_t j = 0; j < meta.group_bias.size(); ++j) {
                vel.group_bias[j] = momentum * vel.group_bias[j] + res.grad.group_bias[j];
                meta.group_bias[j] -= cfg.lr * vel.group_bias[j];
            }

            if (log) {
                double ppl = 0.0;
                for (auto& l : res.losses) ppl += perplexity(l);
                ppl /= static_cast<double>(res.losses.size());
                log({"meta-train", step, w / per_window, res.l_meta, ppl, elapsed_ms(t0)});
            }
        }
    }
    return meta;
}

RunMode parse_run_mode(const std::string& name) {
    if (name == "static") return RunMode::static_eval;
    if (name == "sgd") return RunMode::sgd;
    if (name == "meta") return RunMode::meta;
    if (name == "meta-ewc" || name == "meta+ewc") return RunMode::meta_ewc;
    throw std::runtime_error("unknown run mode: " + name);
}

std::string run_mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::static_eval: return "static";
        case RunMode::sgd: return "sgd";
        case RunMode::meta: return "meta";
        case RunMode::meta_ewc: return "meta-ewc";
    }
    return "?";
}

std::vector<LossValue> run_dynamic(const LstmLm& lm, const Assembly& assembly,
                                   std::span<const MiniBatch> stream, RunMode mode,
                                   double alpha) {
    if ((mode == RunMode::meta || mode == RunMode::meta_ewc) && !assembly.meta)
        throw std::runtime_error("mode requires trained meta-parameters");
    if (mode == RunMode::meta_ewc && !assembly.memory)
        throw std::runtime_error("mode requires consolidated memory");
    if (assembly.theta0.size() != lm.param_count())
        throw std::runtime_error("assembly parameter count mismatch");

    const ParamVector anchor = assembly.memory && mode == RunMode::meta_ewc
                                   ? assembly.memory->anchor
                                   : ParamVector(assembly.theta0.size(), 0.0);
    const auto groups = lm.layout().group_map();

    std::vector<LossValue> out;
    out.reserve(stream.size());
    ParamVector theta = assembly.theta0;
    LMState state = lm.zero_state();

    for (const auto& batch : stream) {
        if (mode == RunMode::static_eval) {
            auto [loss, next] = lm.forward(theta, state, batch);
            state = std::move(next);
            out.push_back(std::move(loss));
            continue;
        }
        auto res = lm.backward(theta, state, batch);
        state = std::move(res.state_out);
        if (mode == RunMode::sgd) {
            theta = dynamic_eval_step(theta, res.grad, alpha);
        } else {
            auto feats = preprocess_features(theta, res.loss, res.grad, anchor);
            auto gates = compute_gates(*assembly.meta, feats, groups);
            theta = apply_update(theta, gates, res.grad, anchor, *assembly.meta);
        }
        out.push_back(std::move(res.loss));
    }
    return out;
}

}  // namespace dlm

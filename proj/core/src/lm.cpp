#include "dlm/lm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace dlm {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

const TensorDesc& ParamLayout::find(const std::string& name) const {
    for (auto& t : tensors)
        if (t.name == name) return t;
    throw std::runtime_error("no such tensor: " + name);
}

bool ParamLayout::has(const std::string& name) const {
    for (auto& t : tensors)
        if (t.name == name) return true;
    return false;
}

std::vector<uint8_t> ParamLayout::group_map() const {
    std::vector<uint8_t> g(total);
    for (auto& t : tensors)
        std::fill(g.begin() + t.offset, g.begin() + t.offset + t.size,
                  static_cast<uint8_t>(t.group));
    return g;
}

ParamLayout make_layout(const LMConfig& cfg) {
    if (cfg.vocab_size < 1 || cfg.embed_dim < 1 || cfg.hidden_dim < 1)
        throw std::runtime_error("all model dimensions must be >= 1");
    if (cfg.tied && cfg.embed_dim != cfg.hidden_dim)
        throw std::runtime_error("tied output weights require embed_dim == hidden_dim");

    const uint32_t v = cfg.vocab_size, e = cfg.embed_dim, h = cfg.hidden_dim;
    ParamLayout lay;
    size_t off = 0;
    auto add = [&](const std::string& name, std::vector<uint32_t> dims, int group) {
        size_t sz = 1;
        for (auto d : dims) sz *= d;
        lay.tensors.push_back({name, std::move(dims), off, sz, group});
        off += sz;
    };
    add("embedding", {v, e}, kGroupEmbedding);
    add("lstm_wx", {4 * h, e}, kGroupRecurrent);
    add("lstm_wh", {4 * h, h}, kGroupRecurrent);
    add("lstm_b", {4 * h}, kGroupRecurrent);
    if (!cfg.tied) add("out_weight", {v, h}, kGroupOutput);
    add("out_bias", {v}, kGroupOutput);
    lay.total = off;
    return lay;
}

LstmLm::LstmLm(const LMConfig& cfg) : cfg_(cfg), layout_(make_layout(cfg)) {
    off_embed_ = layout_.find("embedding").offset;
    off_wx_ = layout_.find("lstm_wx").offset;
    off_wh_ = layout_.find("lstm_wh").offset;
    off_b_ = layout_.find("lstm_b").offset;
    off_wout_ = cfg.tied ? off_embed_ : layout_.find("out_weight").offset;
    off_bout_ = layout_.find("out_bias").offset;
}

ParamVector LstmLm::init_params(uint64_t seed) const {
    std::mt19937_64 rng(seed);
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden_dim));
    ParamVector p(layout_.total);
    for (auto& x : p) x = (2.0 * next_unit(rng) - 1.0) * s;
    // forget-gate bias starts at 1.0
    const size_t h = cfg_.hidden_dim;
    for (size_t j = 0; j < h; ++j) p[off_b_ + h + j] = 1.0;
    return p;
}

LMState LstmLm::zero_state() const {
    return LMState{std::vector<double>(cfg_.hidden_dim, 0.0),
                   std::vector<double>(cfg_.hidden_dim, 0.0)};
}

LossValue LstmLm::forward_cached(const ParamVector& params, const LMState& state,
                                 const MiniBatch& batch, BatchCache& cache) const {
    const size_t v = cfg_.vocab_size, e = cfg_.embed_dim, h = cfg_.hidden_dim;
    const size_t m = batch.size();
    if (params.size() != layout_.total) throw std::runtime_error("parameter vector size mismatch");
    if (state.h.size() != h || state.c.size() != h) throw std::runtime_error("state dimension mismatch");
    for (size_t p = 0; p < m; ++p) {
        if (batch.inputs[p] < 0 || static_cast<size_t>(batch.inputs[p]) >= v ||
            batch.targets[p] < 0 || static_cast<size_t>(batch.targets[p]) >= v)
            throw std::runtime_error("token id out of range");
    }

    cache.batch = &batch;
    cache.state_in = state;
    cache.gi.assign(m, {}); cache.gf.assign(m, {}); cache.gg.assign(m, {});
    cache.go.assign(m, {}); cache.c.assign(m, {}); cache.tc.assign(m, {});
    cache.h.assign(m, {}); cache.probs.assign(m, {});
    cache.loss.total = 0.0;
    cache.loss.per_token.assign(m, 0.0);

    const double* wx = params.data() + off_wx_;
    const double* wh = params.data() + off_wh_;
    const double* b = params.data() + off_b_;
    const double* wout = params.data() + off_wout_;
    const double* bout = params.data() + off_bout_;

    std::vector<double> pre(4 * h);
    const std::vector<double>* hp = &state.h;
    const std::vector<double>* cp = &state.c;

    for (size_t p = 0; p < m; ++p) {
        const double* x = params.data() + off_embed_ + static_cast<size_t>(batch.inputs[p]) * e;
        for (size_t r = 0; r < 4 * h; ++r) {
            double acc = b[r];
            const double* wxr = wx + r * e;
            for (size_t k = 0; k < e; ++k) acc += wxr[k] * x[k];
            const double* whr = wh + r * h;
            for (size_t k = 0; k < h; ++k) acc += whr[k] * (*hp)[k];
            pre[r] = acc;
        }
        auto& gi = cache.gi[p]; gi.resize(h);
        auto& gf = cache.gf[p]; gf.resize(h);
        auto& gg = cache.gg[p]; gg.resize(h);
        auto& go = cache.go[p]; go.resize(h);
        auto& cc = cache.c[p]; cc.resize(h);
        auto& tc = cache.tc[p]; tc.resize(h);
        auto& hh = cache.h[p]; hh.resize(h);
        for (size_t k = 0; k < h; ++k) {
            gi[k] = sigmoid(pre[k]);
            gf[k] = sigmoid(pre[h + k]);
            gg[k] = std::tanh(pre[2 * h + k]);
            go[k] = sigmoid(pre[3 * h + k]);
            cc[k] = gf[k] * (*cp)[k] + gi[k] * gg[k];
            tc[k] = std::tanh(cc[k]);
            hh[k] = go[k] * tc[k];
        }

        auto& probs = cache.probs[p];
        probs.resize(v);
        double maxlogit = -1e300;
        for (size_t t = 0; t < v; ++t) {
            double acc = bout[t];
            const double* wr = wout + t * h;
            for (size_t k = 0; k < h; ++k) acc += wr[k] * hh[k];
            probs[t] = acc;
            if (acc > maxlogit) maxlogit = acc;
        }
        double z = 0.0;
        for (size_t t = 0; t < v; ++t) {
            probs[t] = std::exp(probs[t] - maxlogit);
            z += probs[t];
        }
        for (size_t t = 0; t < v; ++t) probs[t] /= z;
        double nll = -std::log(probs[static_cast<size_t>(batch.targets[p])]);
        if (nll < 0.0) nll = 0.0;  // clamp -0.0 / rounding at |V|=1
        cache.loss.per_token[p] = nll;
        cache.loss.total += nll;

        hp = &hh;
        cp = &cc;
    }
    return cache.loss;
}

std::pair<LossValue, LMState> LstmLm::forward(const ParamVector& params, const LMState& state,
                                              const MiniBatch& batch) const {
    BatchCache cache;
    LossValue loss = forward_cached(params, state, batch, cache);
    size_t m = batch.size();
    return {std::move(loss), LMState{cache.h[m - 1], cache.c[m - 1]}};
}

LMState LstmLm::backward_cached(const ParamVector& params, const BatchCache& cache,
                                const LMState& dstate_out, ParamVector& grad) const {
    const size_t v = cfg_.vocab_size, e = cfg_.embed_dim, h = cfg_.hidden_dim;
    const MiniBatch& batch = *cache.batch;
    const size_t m = batch.size();
    if (grad.size() != layout_.total) throw std::runtime_error("gradient vector size mismatch");

    const double* wx = params.data() + off_wx_;
    const double* wh = params.data() + off_wh_;
    const double* wout = params.data() + off_wout_;

    double* gembed = grad.data() + off_embed_;
    double* gwx = grad.data() + off_wx_;
    double* gwh = grad.data() + off_wh_;
    double* gb = grad.data() + off_b_;
    double* gwout = grad.data() + off_wout_;
    double* gbout = grad.data() + off_bout_;

    std::vector<double> dh(dstate_out.h), dc(dstate_out.c);
    if (dh.empty()) dh.assign(h, 0.0);
    if (dc.empty()) dc.assign(h, 0.0);
    std::vector<double> dpre(4 * h), dlogits(v);

    for (size_t p = m; p-- > 0;) {
        const auto& probs = cache.probs[p];
        const auto& hh = cache.h[p];
        for (size_t t = 0; t < v; ++t) dlogits[t] = probs[t];
        dlogits[static_cast<size_t>(batch.targets[p])] -= 1.0;
        for (size_t t = 0; t < v; ++t) {
            double dl = dlogits[t];
            gbout[t] += dl;
            double* gwr = gwout + t * h;
            const double* wr = wout + t * h;
            for (size_t k = 0; k < h; ++k) {
                gwr[k] += dl * hh[k];
                dh[k] += dl * wr[k];
            }
        }

        const auto& gi = cache.gi[p];
        const auto& gf = cache.gf[p];
        const auto& gg = cache.gg[p];
        const auto& go = cache.go[p];
        const auto& tc = cache.tc[p];
        const std::vector<double>& cprev = (p == 0) ? cache.state_in.c : cache.c[p - 1];
        const std::vector<double>& hprev = (p == 0) ? cache.state_in.h : cache.h[p - 1];

        for (size_t k = 0; k < h; ++k) {
            double do_ = dh[k] * tc[k];
            double dck = dc[k] + dh[k] * go[k] * (1.0 - tc[k] * tc[k]);
            double di = dck * gg[k];
            double df = dck * cprev[k];
            double dg = dck * gi[k];
            dc[k] = dck * gf[k];
            dpre[k] = di * gi[k] * (1.0 - gi[k]);
            dpre[h + k] = df * gf[k] * (1.0 - gf[k]);
            dpre[2 * h + k] = dg * (1.0 - gg[k] * gg[k]);
            dpre[3 * h + k] = do_ * go[k] * (1.0 - go[k]);
        }

        const double* x = params.data() + off_embed_ + static_cast<size_t>(batch.inputs[p]) * e;
        double* gx = gembed + static_cast<size_t>(batch.inputs[p]) * e;
        std::fill(dh.begin(), dh.end(), 0.0);
        for (size_t r = 0; r < 4 * h; ++r) {
            double d = dpre[r];
            gb[r] += d;
            double* gwxr = gwx + r * e;
            for (size_t k = 0; k < e; ++k) gwxr[k] += d * x[k];
            const double* wxr = wx + r * e;
            for (size_t k = 0; k < e; ++k) gx[k] += d * wxr[k];
            double* gwhr = gwh + r * h;
            const double* whr = wh + r * h;
            for (size_t k = 0; k < h; ++k) {
                gwhr[k] += d * hprev[k];
                dh[k] += d * whr[k];
            }
        }
    }
    return LMState{std::move(dh), std::move(dc)};
}

LstmLm::BackwardResult LstmLm::backward(const ParamVector& params, const LMState& state,
                                        const MiniBatch& batch) const {
    BatchCache cache;
    LossValue loss = forward_cached(params, state, batch, cache);
    ParamVector grad(layout_.total, 0.0);
    backward_cached(params, cache, LMState{}, grad);
    size_t m = batch.size();
    return {std::move(loss), std::move(grad), LMState{cache.h[m - 1], cache.c[m - 1]}};
}

ParamVector LstmLm::naive_bptt(const ParamVector& params, const LMState& state,
                               std::span<const MiniBatch> span, ActivationStats* stats) const {
    if (span.empty()) throw std::runtime_error("empty batch span");
    std::vector<BatchCache> caches(span.size());
    LMState s = state;
    for (size_t i = 0; i < span.size(); ++i) {
        forward_cached(params, s, span[i], caches[i]);
        if (stats) stats->acquire();
        size_t m = span[i].size();
        s = LMState{caches[i].h[m - 1], caches[i].c[m - 1]};
    }
    ParamVector grad(layout_.total, 0.0);
    LMState dstate{};
    for (size_t i = span.size(); i-- > 0;) {
        dstate = backward_cached(params, caches[i], dstate, grad);
    }
    if (stats) stats->release(span.size());
    return grad;
}

ParamVector LstmLm::checkpointed_bptt(const ParamVector& params, const LMState& state,
                                      std::span<const MiniBatch> span, size_t segment_len,
                                      ActivationStats* stats) const {
    if (span.empty()) throw std::runtime_error("empty batch span");
    if (segment_len < 1) throw std::runtime_error("segment_len must be >= 1");
    const size_t n = span.size();
    if (segment_len >= n) return naive_bptt(params, state, span, stats);

    // forward sweep retaining only segment-boundary states
    std::vector<LMState> boundary;
    boundary.reserve(n / segment_len + 1);
    LMState s = state;
    for (size_t i = 0; i < n; ++i) {
        if (i % segment_len == 0) boundary.push_back(s);
        auto [loss, next] = forward(params, s, span[i]);
        s = std::move(next);
    }

    ParamVector grad(layout_.total, 0.0);
    LMState dstate{};
    size_t num_segments = (n + segment_len - 1) / segment_len;
    for (size_t seg = num_segments; seg-- > 0;) {
        size_t lo = seg * segment_len;
        size_t hi = std::min(lo + segment_len, n);
        std::vector<BatchCache> caches(hi - lo);
        LMState ss = boundary[seg];
        for (size_t i = lo; i < hi; ++i) {
            forward_cached(params, ss, span[i], caches[i - lo]);
            if (stats) stats->acquire();
            size_t m = span[i].size();
            ss = LMState{caches[i - lo].h[m - 1], caches[i - lo].c[m - 1]};
        }
        for (size_t i = hi; i-- > lo;) {
            dstate = backward_cached(params, caches[i - lo], dstate, grad);
        }
        if (stats) stats->release(hi - lo);
    }
    return grad;
}

double perplexity(const LossValue& loss) {
    return std::exp(loss.total / static_cast<double>(loss.per_token.size()));
}

double mean_perplexity(const std::vector<LossValue>& losses) {
    double acc = 0.0;
    for (auto& l : losses) acc += perplexity(l);
    return acc / static_cast<double>(losses.size());
}

}  // namespace dlm

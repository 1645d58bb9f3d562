#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dlm/corpus.hpp"

namespace dlm {

// Flat parameter vector; layout is carried by the model (see ParamLayout).
using ParamVector = std::vector<double>;

struct LMConfig {
    uint32_t vocab_size = 0;
    uint32_t embed_dim = 0;
    uint32_t hidden_dim = 0;
    bool tied = false;  // output weights share the embedding matrix (needs E == H)
};

// Parameter groups used by the meta-learner's per-group gate bias offsets.
enum ParamGroup : int { kGroupEmbedding = 0, kGroupRecurrent = 1, kGroupOutput = 2, kNumParamGroups = 3 };

struct TensorDesc {
    std::string name;
    std::vector<uint32_t> dims;
    size_t offset = 0;
    size_t size = 0;
    int group = 0;
};

struct ParamLayout {
    std::vector<TensorDesc> tensors;
    size_t total = 0;

    const TensorDesc& find(const std::string& name) const;
    bool has(const std::string& name) const;
    // per-coordinate group id, length total
    std::vector<uint8_t> group_map() const;
};

ParamLayout make_layout(const LMConfig& cfg);

struct LMState {
    std::vector<double> h;
    std::vector<double> c;
};

struct LossValue {
    double total = 0.0;                 // nats, sum of per-token NLLs
    std::vector<double> per_token;
};

// Retained activations of one forward pass over a batch, consumed by the
// backward sweep. One record per batch; counted by ActivationStats.
struct BatchCache {
    const MiniBatch* batch = nullptr;
    LMState state_in;
    // per step: gates (i,f,g,o), cell, tanh(cell), hidden, softmax probs
    std::vector<std::vector<double>> gi, gf, gg, go, c, tc, h, probs;
    LossValue loss;
};

struct ActivationStats {
    size_t live = 0;
    size_t peak = 0;
    void acquire(size_t n = 1) { live += n; if (live > peak) peak = live; }
    void release(size_t n = 1) { live -= n; }
};

// Single-layer LSTM language model over a flat parameter vector with exact
// reverse-mode gradients. All operations are pure with respect to their
// inputs; state is passed and returned by value.
class LstmLm {
public:
    explicit LstmLm(const LMConfig& cfg);

    const LMConfig& config() const { return cfg_; }
    const ParamLayout& layout() const { return layout_; }
    size_t param_count() const { return layout_.total; }

    ParamVector init_params(uint64_t seed) const;
    LMState zero_state() const;

    std::pair<LossValue, LMState> forward(const ParamVector& params, const LMState& state,
                                          const MiniBatch& batch) const;

    // Exact gradient of loss.total w.r.t. params, incoming state constant.
    struct BackwardResult {
        LossValue loss;
        ParamVector grad;
        LMState state_out;
    };
    BackwardResult backward(const ParamVector& params, const LMState& state,
                            const MiniBatch& batch) const;

    // Full-graph BPTT over a span of batches: gradients flow through the
    // recurrent state across batch boundaries.
    ParamVector naive_bptt(const ParamVector& params, const LMState& state,
                           std::span<const MiniBatch> span, ActivationStats* stats = nullptr) const;

    // Same gradient with activations retained only inside the segment being
    // swept; segment boundary states are stored and forwards recomputed.
    ParamVector checkpointed_bptt(const ParamVector& params, const LMState& state,
                                  std::span<const MiniBatch> span, size_t segment_len,
                                  ActivationStats* stats = nullptr) const;

    // Building blocks shared by the BPTT variants and the training module.
    LossValue forward_cached(const ParamVector& params, const LMState& state,
                             const MiniBatch& batch, BatchCache& cache) const;
    // Accumulates into grad; returns gradient w.r.t. the incoming state.
    LMState backward_cached(const ParamVector& params, const BatchCache& cache,
                            const LMState& dstate_out, ParamVector& grad) const;

private:
    LMConfig cfg_;
    ParamLayout layout_;
    // offsets into the flat vector
    size_t off_embed_, off_wx_, off_wh_, off_b_, off_wout_, off_bout_;
};

double perplexity(const LossValue& loss);
double mean_perplexity(const std::vector<LossValue>& losses);

}  // namespace dlm

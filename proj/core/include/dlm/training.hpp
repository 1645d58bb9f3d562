#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "dlm/consolidation.hpp"
#include "dlm/lm.hpp"
#include "dlm/meta.hpp"

namespace dlm {

struct TrainLogRow {
    std::string stage;
    size_t step = 0;
    size_t window = 0;
    double l_meta = 0.0;
    double mean_batch_ppl = 0.0;
    double wallclock_ms = 0.0;
};
using TrainLogFn = std::function<void(const TrainLogRow&)>;

std::string train_log_header();
std::string format_log_row(const TrainLogRow& row);

struct PretrainConfig {
    size_t epochs = 10;
    double lr = 1.0;            // applied to per-token-normalized gradients
    double clip_norm = 5.0;
    size_t batch_tokens = 10;   // truncation window of plain TBPTT
    uint64_t seed = 0;
};

struct MetaTrainConfig {
    size_t batch_tokens = 10;   // M
    size_t unroll = 40;         // K update steps per window
    double lr = 0.05;
    double clip_norm = 1.0;
    size_t epochs = 10;
    uint64_t seed = 0;
    bool ewc_in_objective = true;
    size_t checkpoint_segment = 0;  // 0 = retain the whole unroll
};

// Plain SGD task-A pretraining with gradient clipping; the learning rate
// halves whenever an epoch fails to improve the epoch-mean loss.
ParamVector pretrain_task_a(const LstmLm& lm, const PretrainConfig& cfg,
                            const TokenSequence& train, const TrainLogFn& log = {});

// Gradient of L_meta with respect to the meta-parameters.
struct MetaGrad {
    std::array<std::array<double, kNumFeatChannels>, kNumGates> w{};
    std::array<double, kNumGates> b{};
    std::vector<double> group_bias;

    double norm() const;
    void scale(double s);
};

struct MetaWindowResult {
    double l_meta = 0.0;
    MetaGrad grad;
    std::vector<LossValue> losses;  // one per batch in the window
};

// One unrolled window over n batches: n-1 gate updates, L_meta summed over
// the n-1 post-update losses (plus EWC penalties on each post-update theta
// when enabled). Gradients to phi flow through the gate pathway only; the
// per-batch LM gradient entering the features and the UPDATE term is a
// stop-gradient constant, as is the recurrent state across batches.
double meta_window_loss(const LstmLm& lm, const MetaParams& meta, const ParamVector& theta_start,
                        std::span<const MiniBatch> window, const ConsolidatedMemory* memory,
                        bool ewc_in_objective);

MetaWindowResult meta_window_backward(const LstmLm& lm, const MetaParams& meta,
                                      const ParamVector& theta_start,
                                      std::span<const MiniBatch> window,
                                      const ConsolidatedMemory* memory, bool ewc_in_objective,
                                      size_t checkpoint_segment = 0);

// Online meta-training: theta resets to theta_start at every window; phi is
// stepped with SGD-momentum after each window.
MetaParams meta_train(const LstmLm& lm, MetaParams meta, const ParamVector& lm0,
                      const ConsolidatedMemory* memory, const MetaTrainConfig& cfg,
                      const TokenSequence& stream, const TrainLogFn& log = {});

enum class RunMode { static_eval, sgd, meta, meta_ewc };

RunMode parse_run_mode(const std::string& name);
std::string run_mode_name(RunMode mode);

struct Assembly {
    ParamVector theta0;
    std::optional<MetaParams> meta;
    std::optional<ConsolidatedMemory> memory;
};

// Strictly causal evaluation: theta used on batch i was computed only from
// batches < i; the recurrent state threads across the whole stream.
std::vector<LossValue> run_dynamic(const LstmLm& lm, const Assembly& assembly,
                                   std::span<const MiniBatch> stream, RunMode mode,
                                   double alpha = 0.0);

}  // namespace dlm

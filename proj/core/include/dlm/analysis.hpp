#pragma once

#include <string>
#include <vector>

#include "dlm/lm.hpp"

namespace dlm {

struct BatchPerplexitySeries {
    std::string name;
    std::vector<double> ppl;            // exp(L_i / M) per batch
    std::vector<size_t> boundary_batches;  // batch indices containing a topic boundary
};

BatchPerplexitySeries batch_perplexities(const std::string& name,
                                         const std::vector<LossValue>& losses,
                                         const std::vector<size_t>& token_boundaries,
                                         size_t batch_tokens);

// gain[i] = ppl_b[i] - ppl_a[i]; positive means model a is locally better.
std::vector<double> perplexity_gain(const BatchPerplexitySeries& a,
                                    const BatchPerplexitySeries& b);
std::vector<double> perplexity_gain(const std::vector<double>& ppl_a,
                                    const std::vector<double>& ppl_b);

enum class LossMark { none, lower, higher };

struct TokenLossDiff {
    std::vector<double> loss_a;
    std::vector<double> loss_b;
    std::vector<LossMark> marks;  // lower/higher = model a lower/higher than b
    double threshold = 0.0;       // 10% of the max absolute loss difference
};

TokenLossDiff token_loss_diff(const std::vector<double>& loss_a,
                              const std::vector<double>& loss_b);

// flattens per-batch per-token losses over [token_lo, token_hi)
std::vector<double> token_losses(const std::vector<LossValue>& losses, size_t token_lo,
                                 size_t token_hi);

// CSV: UTF-8, header row, comma separator, floats printed with 9 significant
// digits.
std::string format_double(double v);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct SvgSeries {
    std::string name;
    std::vector<double> values;
};

// Standalone SVG 1.1: one polyline per series, one vertical marker per
// boundary index.
void write_series_svg(const std::string& path, const std::vector<SvgSeries>& series,
                      const std::vector<size_t>& boundaries, const std::string& title);

}  // namespace dlm

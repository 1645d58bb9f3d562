// Acceptance suite: one pass/fail line per criterion.
// Usage: dlm_acceptance [path-to-dlm-cli]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dlm/analysis.hpp"
#include "dlm/checkpoint.hpp"
#include "dlm/consolidation.hpp"
#include "dlm/corpus.hpp"
#include "dlm/lm.hpp"
#include "dlm/meta.hpp"
#include "dlm/training.hpp"
#include "meta_oracles.hpp"
#include "oracles.hpp"

using namespace dlm;
using namespace dlm::testing;
namespace fs = std::filesystem;

namespace {

std::string g_cli_path;

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------- 1
Outcome gradient_correctness() {
    LMConfig cfg{8, 4, 4, false};
    LstmLm lm(cfg);
    double worst = 0.0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed * 7 + 3);
        auto p = perturbed_params(lm, seed);
        auto batch = random_batch(6, 8, rng);
        auto res = lm.backward(p, lm.zero_state(), batch);
        auto fd = fd_gradient(lm, p, lm.zero_state(), batch, 1e-5);
        double scale = 0.0;
        for (double g : fd) scale = std::max(scale, std::abs(g));
        for (size_t j = 0; j < p.size(); ++j) {
            double rel = std::abs(res.grad[j] - fd[j]) / std::max(std::abs(fd[j]), 1e-6 * scale);
            worst = std::max(worst, rel);
        }
    }
    return {worst < 1e-4, "max relative error " + format_double(worst) + " over 10 instances"};
}

// ---------------------------------------------------------------- 2
Outcome checkpointing_equivalence() {
    LMConfig cfg{8, 4, 4, false};
    LstmLm lm(cfg);
    std::mt19937_64 rng(11);
    auto p = perturbed_params(lm, 11);
    auto span = random_span(40, 5, 8, rng);

    ActivationStats naive_stats;
    auto naive = lm.naive_bptt(p, lm.zero_state(), span, &naive_stats);

    double worst = 0.0;
    for (size_t seg : {size_t{1}, size_t{2}, size_t{7}, span.size()}) {
        auto ck = lm.checkpointed_bptt(p, lm.zero_state(), span, seg);
        worst = std::max(worst, max_abs_diff(naive, ck));
    }
    ActivationStats ck_stats;
    lm.checkpointed_bptt(p, lm.zero_state(), span, 5, &ck_stats);

    bool pass = worst <= 1e-12 && ck_stats.peak < naive_stats.peak;
    return {pass, "max abs diff " + format_double(worst) + ", peak activations " +
                      std::to_string(ck_stats.peak) + " vs naive " +
                      std::to_string(naive_stats.peak)};
}

// ---------------------------------------------------------------- 3
Outcome gate_algebra() {
    std::mt19937_64 rng(13);
    const size_t n = 512;
    ParamVector prev(n), grad(n), anchor(n);
    for (size_t j = 0; j < n; ++j) {
        prev[j] = 2.0 * unit_draw(rng) - 1.0;
        grad[j] = 2.0 * unit_draw(rng) - 1.0;
        anchor[j] = 2.0 * unit_draw(rng) - 1.0;
    }
    MetaParams mp = init_meta(1);
    GateTriple copy{std::vector<double>(n, 1.0), std::vector<double>(n, 0.0),
                    std::vector<double>(n, 0.0)};
    GateTriple flush{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                     std::vector<double>(n, 1.0)};
    bool copy_ok = apply_update(prev, copy, grad, anchor, mp) == prev;
    bool flush_ok = apply_update(prev, flush, grad, anchor, mp) == anchor;

    // permutation equivariance of the gate network, exact equality
    MetaParams m = init_meta(1);
    for (auto& row : m.w)
        for (auto& x : row) x = 2.0 * unit_draw(rng) - 1.0;
    CoordFeatures feats;
    feats.theta_prev = prev;
    feats.grad_pre = grad;
    feats.anchor = anchor;
    feats.loss_feat = 0.8;
    std::vector<uint8_t> groups(n, 0);
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    CoordFeatures pf = feats;
    for (size_t j = 0; j < n; ++j) {
        pf.theta_prev[j] = feats.theta_prev[perm[j]];
        pf.grad_pre[j] = feats.grad_pre[perm[j]];
        pf.anchor[j] = feats.anchor[perm[j]];
    }
    auto g = compute_gates(m, feats, groups);
    auto gp = compute_gates(m, pf, groups);
    bool equiv = true;
    for (size_t j = 0; j < n; ++j)
        equiv = equiv && gp.f[j] == g.f[perm[j]] && gp.i[j] == g.i[perm[j]] &&
                gp.z[j] == g.z[perm[j]];

    return {copy_ok && flush_ok && equiv,
            std::string("COPY ") + (copy_ok ? "exact" : "BROKEN") + ", FLUSH " +
                (flush_ok ? "exact" : "BROKEN") + ", equivariance " +
                (equiv ? "exact" : "BROKEN")};
}

// ---------------------------------------------------------------- 4
Outcome fisher_oracle() {
    LMConfig cfg{8, 4, 4, false};
    LstmLm lm(cfg);
    auto p = perturbed_params(lm, 17);
    std::mt19937_64 rng(17);
    auto stream = random_span(10, 5, 8, rng);

    auto f = estimate_fisher(lm, p, stream);
    std::vector<double> oracle(p.size(), 0.0);
    for (auto& b : stream) {
        auto res = lm.backward(p, lm.zero_state(), b);
        for (size_t j = 0; j < p.size(); ++j) {
            double g = res.grad[j] / static_cast<double>(b.size());
            oracle[j] += g * g;
        }
    }
    for (auto& v : oracle) v /= static_cast<double>(stream.size());
    double diff = max_abs_diff(f.values, oracle);

    auto shuffled = stream;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto f2 = estimate_fisher(lm, p, shuffled);
    double order_diff = max_abs_diff(f.values, f2.values);

    bool pass = diff <= 1e-12 && order_diff <= 1e-12;
    return {pass, "oracle diff " + format_double(diff) + ", order diff " +
                      format_double(order_diff)};
}

// ---------------------------------------------------------------- 5
Outcome meta_gradient_check() {
    LMConfig cfg{20, 10, 14, false};
    LstmLm lm(cfg);
    std::mt19937_64 rng(19);
    auto theta0 = lm.init_params(19);
    auto window = random_span(6, 6, cfg.vocab_size, rng);  // K = 5
    MetaParams meta = init_meta(kNumParamGroups);
    meta.b = {1.0, -1.0, -1.0};
    for (auto& row : meta.w)
        for (auto& x : row) x = 0.02 * (2.0 * unit_draw(rng) - 1.0);
    for (auto& x : meta.group_bias) x = 0.1 * (2.0 * unit_draw(rng) - 1.0);

    auto an = meta_window_backward(lm, meta, theta0, window, nullptr, false);
    auto fd = fd_meta_gradient(lm, meta, theta0, window, nullptr, false);

    std::vector<double> fd_all, an_all;
    for (int k = 0; k < kNumGates; ++k) {
        for (int c = 0; c < kNumFeatChannels; ++c) {
            fd_all.push_back(fd.w[k][c]);
            an_all.push_back(an.grad.w[k][c]);
        }
        fd_all.push_back(fd.b[k]);
        an_all.push_back(an.grad.b[k]);
    }
    for (size_t j = 0; j < meta.group_bias.size(); ++j) {
        fd_all.push_back(fd.group_bias[j]);
        an_all.push_back(an.grad.group_bias[j]);
    }
    double scale = 0.0;
    for (double x : fd_all) scale = std::max(scale, std::abs(x));
    double worst = 0.0;
    for (size_t j = 0; j < fd_all.size(); ++j) {
        double rel = std::abs(an_all[j] - fd_all[j]) / std::max(std::abs(fd_all[j]), 1e-4 * scale);
        worst = std::max(worst, rel);
    }
    return {worst < 1e-3, "max relative error " + format_double(worst) + " over " +
                              std::to_string(fd_all.size()) + " meta-parameters (K=5)"};
}

// ---------------------------------------------------------------- 6
Outcome uniform_model_sanity() {
    LMConfig cfg{16, 4, 4, false};
    LstmLm lm(cfg);
    auto p = lm.init_params(23);
    const auto& wout = lm.layout().find("out_weight");
    const auto& bout = lm.layout().find("out_bias");
    std::fill(p.begin() + wout.offset, p.begin() + wout.offset + wout.size, 0.0);
    std::fill(p.begin() + bout.offset, p.begin() + bout.offset + bout.size, 0.0);
    std::mt19937_64 rng(23);
    auto batch = random_batch(8, 16, rng);
    auto [loss, st] = lm.forward(p, lm.zero_state(), batch);
    const double expect = -std::log(1.0 / 16.0);
    bool tok_ok = true;
    for (double l : loss.per_token) tok_ok = tok_ok && l == expect;
    double ppl = perplexity(loss);
    bool ppl_ok = std::abs(ppl - 16.0) <= 1e-12 * 16.0;
    return {tok_ok && ppl_ok,
            "per-token loss " + std::string(tok_ok ? "== ln|V|" : "WRONG") + ", perplexity " +
                format_double(ppl)};
}

// ------------------------------------------------------- 7, 8, 9 (shared)
struct ExperimentResult {
    double ppl_static = 0.0, ppl_sgd = 0.0, ppl_two = 0.0, ppl_three = 0.0;
    double best_alpha = 0.0;
    double secondhalf_gain_mean = 0.0;
    size_t boundaries_won = 0, boundaries_total = 0;
};

std::vector<double> flat_token_losses(const std::vector<LossValue>& losses) {
    std::vector<double> out;
    for (auto& l : losses) out.insert(out.end(), l.per_token.begin(), l.per_token.end());
    return out;
}

ExperimentResult run_experiment(uint64_t seed) {
    const size_t m_tokens = 10;
    SynthSpec spec;
    spec.num_topics = 5;
    spec.segment_len = 500;
    spec.num_segments = 40;
    spec.vocab_size = 64;
    spec.overlap = 0.2;
    spec.seed = seed;
    auto corpus = synth_corpus(spec);
    auto split = split_corpus(corpus, 0.6, 0.2);

    LMConfig cfg{64, 32, 64, false};
    LstmLm lm(cfg);

    PretrainConfig pc;
    pc.epochs = 12;
    pc.lr = 1.0;
    pc.clip_norm = 5.0;
    pc.batch_tokens = m_tokens;
    pc.seed = seed;
    auto theta = pretrain_task_a(lm, pc, split.train);

    auto train_batches = split_batches(split.train, m_tokens);
    auto fisher = estimate_fisher(lm, theta, train_batches);
    auto memory = consolidate(theta, fisher, 1.0);

    MetaTrainConfig mc;
    mc.batch_tokens = m_tokens;
    // long unroll: without an anchor the two-level policy must learn COPY
    // gates close enough to 1 to survive the full-length test stream
    mc.unroll = 130;
    mc.lr = 0.02;
    mc.clip_norm = 1.0;
    mc.epochs = 30;
    mc.seed = seed;
    mc.checkpoint_segment = 10;

    auto meta_two = init_meta(kNumParamGroups);
    meta_two.use_flush = false;
    meta_two.negate_grad_channel = true;
    mc.ewc_in_objective = false;
    meta_two = meta_train(lm, meta_two, theta, nullptr, mc, split.meta_train);

    auto meta_three = init_meta(kNumParamGroups);
    meta_three.use_flush = true;
    meta_three.negate_grad_channel = true;
    mc.ewc_in_objective = true;
    meta_three = meta_train(lm, meta_three, theta, &memory, mc, split.meta_train);

    auto meta_batches = split_batches(split.meta_train, m_tokens);
    auto test_batches = split_batches(split.test, m_tokens);

    ExperimentResult r;
    // scalar-alpha dynamic evaluation baseline, tuned on the meta split
    double best_ppl = 1e300;
    for (double alpha : {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2}) {
        auto losses = run_dynamic(lm, {theta, {}, {}}, meta_batches, RunMode::sgd, alpha);
        double ppl = mean_perplexity(losses);
        if (ppl < best_ppl) {
            best_ppl = ppl;
            r.best_alpha = alpha;
        }
    }

    auto l_static = run_dynamic(lm, {theta, {}, {}}, test_batches, RunMode::static_eval);
    auto l_sgd = run_dynamic(lm, {theta, {}, {}}, test_batches, RunMode::sgd, r.best_alpha);
    auto l_two = run_dynamic(lm, {theta, meta_two, {}}, test_batches, RunMode::meta);
    auto l_three =
        run_dynamic(lm, {theta, meta_three, memory}, test_batches, RunMode::meta_ewc);

    r.ppl_static = mean_perplexity(l_static);
    r.ppl_sgd = mean_perplexity(l_sgd);
    r.ppl_two = mean_perplexity(l_two);
    r.ppl_three = mean_perplexity(l_three);

    // gain over the last half of each test segment (two-level vs static)
    auto s_static = batch_perplexities("one", l_static, split.test.boundaries, m_tokens);
    auto s_two = batch_perplexities("two", l_two, split.test.boundaries, m_tokens);
    auto gain = perplexity_gain(s_two, s_static);  // positive = two-level better
    const size_t seg_batches = spec.segment_len / m_tokens;
    double gsum = 0.0;
    size_t gn = 0;
    for (size_t b0 = 0; b0 + seg_batches <= gain.size(); b0 += seg_batches) {
        for (size_t i = b0 + seg_batches / 2; i < b0 + seg_batches; ++i) {
            gsum += gain[i];
            ++gn;
        }
    }
    r.secondhalf_gain_mean = gn ? gsum / static_cast<double>(gn) : 0.0;

    // post-boundary token losses, three-level vs two-level, first 50 tokens
    auto t_two = flat_token_losses(l_two);
    auto t_three = flat_token_losses(l_three);
    for (size_t b : split.test.boundaries) {
        if (b == 0 || b + 50 > t_two.size()) continue;
        double two = 0.0, three = 0.0;
        for (size_t k = b; k < b + 50; ++k) {
            two += t_two[k];
            three += t_three[k];
        }
        ++r.boundaries_total;
        if (three < two) ++r.boundaries_won;
    }
    return r;
}

std::vector<ExperimentResult> g_experiments;

void ensure_experiments() {
    if (!g_experiments.empty()) return;
    for (uint64_t seed : {1001, 1002, 1003}) g_experiments.push_back(run_experiment(seed));
}

Outcome two_level_beats_static() {
    ensure_experiments();
    double ps = 0.0, p2 = 0.0, gain = 0.0;
    for (auto& r : g_experiments) {
        ps += r.ppl_static;
        p2 += r.ppl_two;
        gain += r.secondhalf_gain_mean;
    }
    ps /= 3.0;
    p2 /= 3.0;
    gain /= 3.0;
    bool pass = p2 <= 0.95 * ps && gain > 0.0;
    return {pass, "static ppl " + format_double(ps) + ", two-level ppl " + format_double(p2) +
                      " (" + format_double(100.0 * (1.0 - p2 / ps)) +
                      "% better), mean second-half gain " + format_double(gain)};
}

Outcome three_level_recovers_at_boundaries() {
    ensure_experiments();
    size_t won = 0, total = 0;
    double p2 = 0.0, p3 = 0.0;
    for (auto& r : g_experiments) {
        won += r.boundaries_won;
        total += r.boundaries_total;
        p2 += r.ppl_two;
        p3 += r.ppl_three;
    }
    p2 /= 3.0;
    p3 /= 3.0;
    double frac = total ? static_cast<double>(won) / static_cast<double>(total) : 0.0;
    bool pass = frac >= 0.6 && p3 <= p2;
    return {pass, "post-boundary wins " + std::to_string(won) + "/" + std::to_string(total) +
                      " (" + format_double(100.0 * frac) + "%), two-level ppl " +
                      format_double(p2) + ", three-level ppl " + format_double(p3)};
}

Outcome sgd_baseline_sanity() {
    ensure_experiments();
    double ps = 0.0, pg = 0.0;
    for (auto& r : g_experiments) {
        ps += r.ppl_static;
        pg += r.ppl_sgd;
    }
    ps /= 3.0;
    pg /= 3.0;
    bool pass = pg < ps;
    return {pass, "static ppl " + format_double(ps) + ", tuned-alpha dynamic eval ppl " +
                      format_double(pg) + " (alpha " + format_double(g_experiments[0].best_alpha) +
                      ")"};
}

// ---------------------------------------------------------------- 10
std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

Outcome cli_determinism() {
    if (g_cli_path.empty()) return {false, "path to the dlm CLI not supplied"};
    fs::path base = fs::temp_directory_path() / "dlm_acceptance_cli";
    fs::remove_all(base);

    auto run_pipeline = [&](const fs::path& dir) {
        fs::create_directories(dir);
        const std::string corpus =
            " --synth --topics 2 --segment-len 100 --segments 6 --vocab-size 16 --corpus-seed 3"
            " --train-frac 0.5 --meta-frac 0.25";
        auto sh = [&](const std::string& cmd) {
            std::string full = g_cli_path + " " + cmd + " > /dev/null";
            if (std::system(full.c_str()) != 0)
                throw std::runtime_error("CLI stage failed: " + full);
        };
        sh("synth --topics 2 --segment-len 100 --segments 6 --vocab-size 16 --seed 3 --out " +
           (dir / "corpus").string());
        sh("pretrain" + corpus +
           " --embed 8 --hidden 12 --epochs 2 --batch-tokens 5 --seed 9 --out " +
           (dir / "pre.dlm").string() + " --log " + (dir / "pre_log.csv").string());
        sh("fisher" + corpus + " --ckpt " + (dir / "pre.dlm").string() +
           " --batch-tokens 5 --lambda 1.0 --out " + (dir / "cons.dlm").string());
        sh("meta-train" + corpus + " --ckpt " + (dir / "cons.dlm").string() +
           " --no-flush --negate-grad --batch-tokens 5 --unroll 8 --epochs 1 --seed 9 --out " +
           (dir / "two.dlm").string() + " --log " + (dir / "two_log.csv").string());
        sh("meta-train" + corpus + " --ckpt " + (dir / "cons.dlm").string() +
           " --flush --negate-grad --batch-tokens 5 --unroll 8 --epochs 1 --seed 9 --out " +
           (dir / "three.dlm").string() + " --log " + (dir / "three_log.csv").string());
        sh("eval" + corpus + " --ckpt " + (dir / "three.dlm").string() +
           " --mode meta-ewc --batch-tokens 5 --out " + (dir / "eval.csv").string());
        sh("compare" + corpus + " --static-ckpt " + (dir / "pre.dlm").string() + " --two-ckpt " +
           (dir / "two.dlm").string() + " --three-ckpt " + (dir / "three.dlm").string() +
           " --alpha 0.003 --batch-tokens 5 --out " + (dir / "cmp").string());
    };

    try {
        run_pipeline(base / "a");
        run_pipeline(base / "b");
    } catch (const std::exception& e) {
        return {false, e.what()};
    }

    // everything except the timing logs must be bit-identical
    const char* files[] = {"corpus.txt",       "corpus.boundaries", "corpus.manifest.csv",
                           "pre.dlm",          "cons.dlm",          "two.dlm",
                           "three.dlm",        "eval.csv",          "cmp.csv",
                           "cmp_gain.csv",     "cmp_summary.csv",   "cmp.svg",
                           "cmp_gain.svg",     "cmp.manifest.csv"};
    std::string bad;
    for (const char* f : files) {
        auto a = slurp(base / "a" / f);
        auto b = slurp(base / "b" / f);
        if (a.empty() || a != b) {
            bad += std::string(f) + " ";
        }
    }
    fs::remove_all(base);
    if (!bad.empty()) return {false, "mismatched or missing artifacts: " + bad};
    return {true, "all checkpoints, CSVs and SVGs bit-identical across reruns"};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli_path = argv[1];

    struct Criterion {
        const char* name;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria = {
        {"gradient correctness (finite differences)", gradient_correctness},
        {"checkpointed BPTT equivalence and memory bound", checkpointing_equivalence},
        {"gate algebra (COPY/FLUSH identities, equivariance)", gate_algebra},
        {"Fisher diagonal oracle and order invariance", fisher_oracle},
        {"meta-gradient finite-difference check", meta_gradient_check},
        {"uniform-model sanity (loss ln|V|, perplexity |V|)", uniform_model_sanity},
        {"two-level model beats static LM by >=5%", two_level_beats_static},
        {"three-level model recovers after topic boundaries", three_level_recovers_at_boundaries},
        {"tuned-alpha dynamic evaluation beats static LM", sgd_baseline_sanity},
        {"CLI stage determinism (bit-identical artifacts)", cli_determinism},
    };

    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[i].fn();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2zu: %s — %s [%s] (%.1fs)\n", i + 1,
                    out.pass ? "PASS" : "FAIL", criteria[i].name, out.detail.c_str(), secs);
        std::fflush(stdout);
        if (!out.pass) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    else std::printf("all criteria passed\n");
    return failures == 0 ? 0 : 1;
}

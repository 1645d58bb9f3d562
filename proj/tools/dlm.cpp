// Command-line surface: synth / pretrain / fisher / meta-train / eval /
// compare over the "DLM1" checkpoint container.
//
// Exit codes: 0 success, 2 bad arguments, 3 missing asset, 4 numerical
// failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "dlm/analysis.hpp"
#include "dlm/checkpoint.hpp"
#include "dlm/consolidation.hpp"
#include "dlm/corpus.hpp"
#include "dlm/lm.hpp"
#include "dlm/meta.hpp"
#include "dlm/training.hpp"

namespace {

struct MissingAsset : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CorpusArgs {
    // synthetic route (reproducible from flags alone)
    bool use_synth = false;
    dlm::SynthSpec synth;
    // text route
    std::string text_path;
    std::string boundaries_path;
    bool word_level = false;
    size_t max_vocab = 256;
    // splits
    double train_frac = 0.6;
    double meta_frac = 0.2;
};

void add_corpus_options(CLI::App* cmd, CorpusArgs& args) {
    cmd->add_flag("--synth", args.use_synth, "use a synthetic topic-shift corpus");
    cmd->add_option("--topics", args.synth.num_topics, "synthetic topic count");
    cmd->add_option("--segment-len", args.synth.segment_len, "tokens per synthetic segment");
    cmd->add_option("--segments", args.synth.num_segments, "synthetic segment count");
    cmd->add_option("--vocab-size", args.synth.vocab_size, "synthetic vocabulary size");
    cmd->add_option("--overlap", args.synth.overlap, "fraction of tokens shared across topics");
    cmd->add_option("--sharpness", args.synth.sharpness, "Markov row concentration exponent");
    cmd->add_option("--corpus-seed", args.synth.seed, "synthetic corpus seed");
    cmd->add_option("--text", args.text_path, "plain-text corpus file");
    cmd->add_option("--boundaries", args.boundaries_path, "sidecar boundary file (one index per line)");
    cmd->add_flag("--word-level", args.word_level, "word-level tokenization (default: character-level)");
    cmd->add_option("--max-vocab", args.max_vocab, "vocabulary cap for text corpora");
    cmd->add_option("--train-frac", args.train_frac, "train split fraction");
    cmd->add_option("--meta-frac", args.meta_frac, "meta-train split fraction");
}

struct LoadedCorpus {
    dlm::TokenSequence full;
    dlm::CorpusSplit split;
    size_t vocab_size = 0;
};

LoadedCorpus load_corpus(const CorpusArgs& args) {
    LoadedCorpus out;
    if (args.use_synth) {
        out.full = dlm::synth_corpus(args.synth);
        out.vocab_size = args.synth.vocab_size;
    } else {
        if (args.text_path.empty())
            throw CLI::ValidationError("corpus", "either --synth or --text is required");
        if (!std::filesystem::exists(args.text_path))
            throw MissingAsset("text corpus not found: " + args.text_path);
        auto text = dlm::read_text_file(args.text_path);
        auto mode = args.word_level ? dlm::TokenMode::words : dlm::TokenMode::chars;
        auto vocab = dlm::build_vocab(text, args.max_vocab, mode);
        out.full = dlm::encode(text, vocab, mode);
        out.vocab_size = vocab.size();
        if (!args.boundaries_path.empty()) {
            if (!std::filesystem::exists(args.boundaries_path))
                throw MissingAsset("boundary file not found: " + args.boundaries_path);
            out.full.boundaries = dlm::load_boundaries(args.boundaries_path);
        }
    }
    out.split = dlm::split_corpus(out.full, args.train_frac, args.meta_frac);
    return out;
}

void write_manifest(const std::string& path, const std::map<std::string, std::string>& kv) {
    std::vector<std::vector<std::string>> rows;
    for (auto& [k, v] : kv) rows.push_back({k, v});
    dlm::write_csv(path, {"key", "value"}, rows);
}

std::map<std::string, std::string> corpus_manifest(const CorpusArgs& a) {
    std::map<std::string, std::string> kv;
    kv["corpus.synth"] = a.use_synth ? "1" : "0";
    if (a.use_synth) {
        kv["corpus.topics"] = std::to_string(a.synth.num_topics);
        kv["corpus.segment_len"] = std::to_string(a.synth.segment_len);
        kv["corpus.segments"] = std::to_string(a.synth.num_segments);
        kv["corpus.vocab_size"] = std::to_string(a.synth.vocab_size);
        kv["corpus.overlap"] = dlm::format_double(a.synth.overlap);
        kv["corpus.sharpness"] = dlm::format_double(a.synth.sharpness);
        kv["corpus.seed"] = std::to_string(a.synth.seed);
    } else {
        kv["corpus.text"] = a.text_path;
        kv["corpus.word_level"] = a.word_level ? "1" : "0";
        kv["corpus.max_vocab"] = std::to_string(a.max_vocab);
    }
    kv["corpus.train_frac"] = dlm::format_double(a.train_frac);
    kv["corpus.meta_frac"] = dlm::format_double(a.meta_frac);
    return kv;
}

dlm::Checkpoint load_ckpt(const std::string& path) {
    if (!std::filesystem::exists(path)) throw MissingAsset("checkpoint not found: " + path);
    return dlm::load_checkpoint(path);
}

dlm::TrainLogFn make_logger(const std::string& log_path, std::ofstream& log_file) {
    if (!log_path.empty()) {
        log_file.open(log_path);
        log_file << dlm::train_log_header() << '\n';
        return [&log_file](const dlm::TrainLogRow& row) {
            log_file << dlm::format_log_row(row) << '\n';
        };
    }
    std::cout << dlm::train_log_header() << '\n';
    return [](const dlm::TrainLogRow& row) { std::cout << dlm::format_log_row(row) << '\n'; };
}

const dlm::TokenSequence& pick_split(const LoadedCorpus& c, const std::string& which) {
    if (which == "train") return c.split.train;
    if (which == "meta") return c.split.meta_train;
    if (which == "test") return c.split.test;
    if (which == "all") return c.full;
    throw CLI::ValidationError("--split", "must be one of train|meta|test|all");
}

void eval_to_rows(const std::string& variant, const std::vector<dlm::LossValue>& losses,
                  std::vector<std::vector<std::string>>& rows) {
    for (size_t i = 0; i < losses.size(); ++i) {
        rows.push_back({variant, std::to_string(i), dlm::format_double(dlm::perplexity(losses[i])),
                        dlm::format_double(losses[i].total)});
    }
}

int run(int argc, char** argv) {
    CLI::App app{"dynamical language model workbench"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic topic-shift corpus");
    dlm::SynthSpec synth_spec;
    std::string synth_out;
    synth_cmd->add_option("--topics", synth_spec.num_topics, "topic count");
    synth_cmd->add_option("--segment-len", synth_spec.segment_len, "tokens per segment");
    synth_cmd->add_option("--segments", synth_spec.num_segments, "segment count");
    synth_cmd->add_option("--vocab-size", synth_spec.vocab_size, "vocabulary size");
    synth_cmd->add_option("--overlap", synth_spec.overlap, "shared-token fraction");
    synth_cmd->add_option("--sharpness", synth_spec.sharpness, "Markov row concentration");
    synth_cmd->add_option("--seed", synth_spec.seed, "rng seed");
    synth_cmd->add_option("--out", synth_out, "output prefix")->required();

    // ---- pretrain ----
    auto* pre_cmd = app.add_subcommand("pretrain", "task-A pretraining of the LM");
    CorpusArgs pre_corpus;
    add_corpus_options(pre_cmd, pre_corpus);
    dlm::PretrainConfig pre_cfg;
    uint32_t pre_embed = 32, pre_hidden = 64;
    bool pre_tied = false;
    std::string pre_out, pre_log;
    pre_cmd->add_option("--embed", pre_embed, "embedding dimension");
    pre_cmd->add_option("--hidden", pre_hidden, "hidden dimension");
    pre_cmd->add_flag("--tied", pre_tied, "tie output weights to the embedding");
    pre_cmd->add_option("--epochs", pre_cfg.epochs, "training epochs");
    pre_cmd->add_option("--lr", pre_cfg.lr, "learning rate");
    pre_cmd->add_option("--clip", pre_cfg.clip_norm, "gradient clip norm");
    pre_cmd->add_option("--batch-tokens", pre_cfg.batch_tokens, "tokens per mini-batch (M)");
    pre_cmd->add_option("--seed", pre_cfg.seed, "init/training seed");
    pre_cmd->add_option("--out", pre_out, "output checkpoint")->required();
    pre_cmd->add_option("--log", pre_log, "progress CSV (contains wallclock timing)");

    // ---- fisher ----
    auto* fish_cmd = app.add_subcommand("fisher", "estimate the Fisher diagonal and consolidate");
    CorpusArgs fish_corpus;
    add_corpus_options(fish_cmd, fish_corpus);
    std::string fish_in, fish_out;
    double fish_lambda = 1.0;
    size_t fish_batch_tokens = 10;
    fish_cmd->add_option("--ckpt", fish_in, "pretrained checkpoint")->required();
    fish_cmd->add_option("--lambda", fish_lambda, "EWC stiffness");
    fish_cmd->add_option("--batch-tokens", fish_batch_tokens, "tokens per mini-batch (M)");
    fish_cmd->add_option("--out", fish_out, "output checkpoint")->required();

    // ---- meta-train ----
    auto* meta_cmd = app.add_subcommand("meta-train", "online meta-training of the gate network");
    CorpusArgs meta_corpus;
    add_corpus_options(meta_cmd, meta_corpus);
    dlm::MetaTrainConfig meta_cfg;
    std::string meta_in, meta_out, meta_log;
    bool meta_flush = false, meta_no_flush = false, meta_negate = false, meta_no_ewc = false;
    meta_cmd->add_option("--ckpt", meta_in, "consolidated (or pretrained) checkpoint")->required();
    meta_cmd->add_option("--batch-tokens", meta_cfg.batch_tokens, "tokens per mini-batch (M)");
    meta_cmd->add_option("--unroll", meta_cfg.unroll, "unroll length in batches (K)");
    meta_cmd->add_option("--lr", meta_cfg.lr, "meta learning rate");
    meta_cmd->add_option("--clip", meta_cfg.clip_norm, "meta gradient clip norm");
    meta_cmd->add_option("--epochs", meta_cfg.epochs, "meta-training epochs");
    meta_cmd->add_option("--seed", meta_cfg.seed, "seed");
    meta_cmd->add_option("--checkpoint-segment", meta_cfg.checkpoint_segment,
                         "unroll steps retained per segment (0 = whole unroll)");
    meta_cmd->add_flag("--flush", meta_flush, "enable the FLUSH pathway (three-level)");
    meta_cmd->add_flag("--no-flush", meta_no_flush, "disable the FLUSH pathway (two-level)");
    meta_cmd->add_flag("--negate-grad", meta_negate, "negate the UPDATE gradient term");
    meta_cmd->add_flag("--no-ewc-in-objective", meta_no_ewc,
                       "drop the EWC penalty from the meta objective");
    meta_cmd->add_option("--out", meta_out, "output checkpoint")->required();
    meta_cmd->add_option("--log", meta_log, "progress CSV (contains wallclock timing)");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a model variant over a stream");
    CorpusArgs eval_corpus;
    add_corpus_options(eval_cmd, eval_corpus);
    std::string eval_in, eval_out, eval_mode = "static", eval_split = "test";
    double eval_alpha = 0.0;
    size_t eval_batch_tokens = 10;
    eval_cmd->add_option("--ckpt", eval_in, "checkpoint")->required();
    eval_cmd->add_option("--mode", eval_mode, "static | sgd | meta | meta-ewc")
        ->check(CLI::IsMember({"static", "sgd", "meta", "meta-ewc"}));
    eval_cmd->add_option("--alpha", eval_alpha, "sgd dynamic-evaluation step size");
    eval_cmd->add_option("--split", eval_split, "train | meta | test | all")
        ->check(CLI::IsMember({"train", "meta", "test", "all"}));
    eval_cmd->add_option("--batch-tokens", eval_batch_tokens, "tokens per mini-batch (M)");
    eval_cmd->add_option("--out", eval_out, "per-batch CSV")->required();

    // ---- compare ----
    auto* cmp_cmd = app.add_subcommand("compare", "evaluate all variants and emit CSV/SVG");
    CorpusArgs cmp_corpus;
    add_corpus_options(cmp_cmd, cmp_corpus);
    std::string cmp_static, cmp_two, cmp_three, cmp_out;
    double cmp_alpha = 0.01;
    size_t cmp_batch_tokens = 10;
    std::string cmp_split = "test";
    cmp_cmd->add_option("--static-ckpt", cmp_static, "one-level checkpoint")->required();
    cmp_cmd->add_option("--two-ckpt", cmp_two, "two-level checkpoint (meta, no flush)")->required();
    cmp_cmd->add_option("--three-ckpt", cmp_three, "three-level checkpoint (meta + memory)")->required();
    cmp_cmd->add_option("--alpha", cmp_alpha, "sgd baseline step size");
    cmp_cmd->add_option("--split", cmp_split, "train | meta | test | all")
        ->check(CLI::IsMember({"train", "meta", "test", "all"}));
    cmp_cmd->add_option("--batch-tokens", cmp_batch_tokens, "tokens per mini-batch (M)");
    cmp_cmd->add_option("--out", cmp_out, "output prefix")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (synth_cmd->parsed()) {
        auto seq = dlm::synth_corpus(synth_spec);
        dlm::write_text_file(synth_out + ".txt", dlm::synth_to_text(seq));
        dlm::save_boundaries(synth_out + ".boundaries", seq.boundaries);
        std::map<std::string, std::string> kv;
        kv["synth.topics"] = std::to_string(synth_spec.num_topics);
        kv["synth.segment_len"] = std::to_string(synth_spec.segment_len);
        kv["synth.segments"] = std::to_string(synth_spec.num_segments);
        kv["synth.vocab_size"] = std::to_string(synth_spec.vocab_size);
        kv["synth.overlap"] = dlm::format_double(synth_spec.overlap);
        kv["synth.sharpness"] = dlm::format_double(synth_spec.sharpness);
        kv["synth.seed"] = std::to_string(synth_spec.seed);
        write_manifest(synth_out + ".manifest.csv", kv);
        std::cout << "wrote " << synth_out << ".txt (" << seq.size() << " tokens, "
                  << seq.boundaries.size() << " segments)\n";
        return 0;
    }

    if (pre_cmd->parsed()) {
        auto corpus = load_corpus(pre_corpus);
        dlm::LMConfig cfg{static_cast<uint32_t>(corpus.vocab_size), pre_embed, pre_hidden, pre_tied};
        dlm::LstmLm lm(cfg);
        std::ofstream log_file;
        auto logger = make_logger(pre_log, log_file);
        auto theta = dlm::pretrain_task_a(lm, pre_cfg, corpus.split.train, logger);
        dlm::save_checkpoint(pre_out, dlm::Checkpoint{cfg, theta, std::nullopt, std::nullopt});
        auto kv = corpus_manifest(pre_corpus);
        kv["model.embed"] = std::to_string(pre_embed);
        kv["model.hidden"] = std::to_string(pre_hidden);
        kv["model.tied"] = pre_tied ? "1" : "0";
        kv["pretrain.epochs"] = std::to_string(pre_cfg.epochs);
        kv["pretrain.lr"] = dlm::format_double(pre_cfg.lr);
        kv["pretrain.clip"] = dlm::format_double(pre_cfg.clip_norm);
        kv["pretrain.batch_tokens"] = std::to_string(pre_cfg.batch_tokens);
        kv["pretrain.seed"] = std::to_string(pre_cfg.seed);
        write_manifest(pre_out + ".manifest.csv", kv);
        return 0;
    }

    if (fish_cmd->parsed()) {
        auto ckpt = load_ckpt(fish_in);
        auto corpus = load_corpus(fish_corpus);
        dlm::LstmLm lm(ckpt.config);
        auto batches = dlm::split_batches(corpus.split.train, fish_batch_tokens);
        auto fisher = dlm::estimate_fisher(lm, ckpt.params, batches);
        ckpt.memory = dlm::consolidate(ckpt.params, fisher, fish_lambda);
        dlm::save_checkpoint(fish_out, ckpt);
        auto kv = corpus_manifest(fish_corpus);
        kv["fisher.lambda"] = dlm::format_double(fish_lambda);
        kv["fisher.batch_tokens"] = std::to_string(fish_batch_tokens);
        kv["fisher.samples"] = std::to_string(fisher.sample_count);
        write_manifest(fish_out + ".manifest.csv", kv);
        return 0;
    }

    if (meta_cmd->parsed()) {
        auto ckpt = load_ckpt(meta_in);
        auto corpus = load_corpus(meta_corpus);
        dlm::LstmLm lm(ckpt.config);
        const bool use_flush = meta_flush && !meta_no_flush;
        if (use_flush && !ckpt.memory)
            throw MissingAsset("--flush requires a consolidated checkpoint (run `dlm fisher` first)");
        meta_cfg.ewc_in_objective = use_flush && !meta_no_ewc;
        auto meta = dlm::init_meta(dlm::kNumParamGroups);
        meta.use_flush = use_flush;
        meta.negate_grad_channel = meta_negate;
        const dlm::ConsolidatedMemory* mem = use_flush ? &*ckpt.memory : nullptr;
        std::ofstream log_file;
        auto logger = make_logger(meta_log, log_file);
        auto trained = dlm::meta_train(lm, meta, ckpt.params, mem, meta_cfg,
                                       corpus.split.meta_train, logger);
        ckpt.meta = trained;
        dlm::save_checkpoint(meta_out, ckpt);
        auto kv = corpus_manifest(meta_corpus);
        kv["meta.batch_tokens"] = std::to_string(meta_cfg.batch_tokens);
        kv["meta.unroll"] = std::to_string(meta_cfg.unroll);
        kv["meta.lr"] = dlm::format_double(meta_cfg.lr);
        kv["meta.clip"] = dlm::format_double(meta_cfg.clip_norm);
        kv["meta.epochs"] = std::to_string(meta_cfg.epochs);
        kv["meta.seed"] = std::to_string(meta_cfg.seed);
        kv["meta.flush"] = use_flush ? "1" : "0";
        kv["meta.negate_grad"] = meta_negate ? "1" : "0";
        kv["meta.ewc_in_objective"] = meta_cfg.ewc_in_objective ? "1" : "0";
        kv["meta.checkpoint_segment"] = std::to_string(meta_cfg.checkpoint_segment);
        write_manifest(meta_out + ".manifest.csv", kv);
        return 0;
    }

    if (eval_cmd->parsed()) {
        auto ckpt = load_ckpt(eval_in);
        auto corpus = load_corpus(eval_corpus);
        dlm::LstmLm lm(ckpt.config);
        auto mode = dlm::parse_run_mode(eval_mode);
        if ((mode == dlm::RunMode::meta || mode == dlm::RunMode::meta_ewc) && !ckpt.meta)
            throw MissingAsset("checkpoint has no meta-parameters (run `dlm meta-train` first)");
        if (mode == dlm::RunMode::meta_ewc && !ckpt.memory)
            throw MissingAsset("checkpoint has no consolidated memory (run `dlm fisher` first)");
        const auto& stream = pick_split(corpus, eval_split);
        auto batches = dlm::split_batches(stream, eval_batch_tokens);
        dlm::Assembly assembly{ckpt.params, ckpt.meta, ckpt.memory};
        auto losses = dlm::run_dynamic(lm, assembly, batches, mode, eval_alpha);
        std::vector<std::vector<std::string>> rows;
        eval_to_rows(eval_mode, losses, rows);
        dlm::write_csv(eval_out, {"variant", "batch", "ppl", "loss"}, rows);
        auto kv = corpus_manifest(eval_corpus);
        kv["eval.mode"] = eval_mode;
        kv["eval.alpha"] = dlm::format_double(eval_alpha);
        kv["eval.split"] = eval_split;
        kv["eval.batch_tokens"] = std::to_string(eval_batch_tokens);
        kv["eval.mean_ppl"] = dlm::format_double(dlm::mean_perplexity(losses));
        write_manifest(eval_out + ".manifest.csv", kv);
        std::cout << "mean ppl (" << eval_mode << "): " << dlm::mean_perplexity(losses) << '\n';
        return 0;
    }

    if (cmp_cmd->parsed()) {
        auto ck_static = load_ckpt(cmp_static);
        auto ck_two = load_ckpt(cmp_two);
        auto ck_three = load_ckpt(cmp_three);
        if (!ck_two.meta) throw MissingAsset("two-level checkpoint lacks meta-parameters");
        if (!ck_three.meta) throw MissingAsset("three-level checkpoint lacks meta-parameters");
        if (!ck_three.memory) throw MissingAsset("three-level checkpoint lacks consolidated memory");
        auto corpus = load_corpus(cmp_corpus);
        dlm::LstmLm lm(ck_static.config);
        const auto& stream = pick_split(corpus, cmp_split);
        auto batches = dlm::split_batches(stream, cmp_batch_tokens);

        struct Variant {
            std::string name;
            std::vector<dlm::LossValue> losses;
        };
        std::vector<Variant> variants;
        variants.push_back({"one-level", dlm::run_dynamic(lm, {ck_static.params, {}, {}}, batches,
                                                          dlm::RunMode::static_eval)});
        variants.push_back({"sgd-baseline",
                            dlm::run_dynamic(lm, {ck_static.params, {}, {}}, batches,
                                             dlm::RunMode::sgd, cmp_alpha)});
        variants.push_back({"two-level", dlm::run_dynamic(lm, {ck_two.params, ck_two.meta, {}},
                                                          batches, dlm::RunMode::meta)});
        variants.push_back({"three-level",
                            dlm::run_dynamic(lm, {ck_three.params, ck_three.meta, ck_three.memory},
                                             batches, dlm::RunMode::meta_ewc)});

        std::vector<std::vector<std::string>> rows;
        for (auto& v : variants) eval_to_rows(v.name, v.losses, rows);
        dlm::write_csv(cmp_out + ".csv", {"variant", "batch", "ppl", "loss"}, rows);

        std::vector<dlm::BatchPerplexitySeries> series;
        for (auto& v : variants)
            series.push_back(dlm::batch_perplexities(v.name, v.losses, stream.boundaries,
                                                     cmp_batch_tokens));
        auto gain_two_vs_one = dlm::perplexity_gain(series[2], series[0]);
        auto gain_three_vs_two = dlm::perplexity_gain(series[3], series[2]);
        std::vector<std::vector<std::string>> grows;
        for (size_t i = 0; i < gain_two_vs_one.size(); ++i)
            grows.push_back({std::to_string(i), dlm::format_double(gain_two_vs_one[i]),
                             dlm::format_double(gain_three_vs_two[i])});
        dlm::write_csv(cmp_out + "_gain.csv",
                       {"batch", "gain_two_vs_one", "gain_three_vs_two"}, grows);

        std::vector<std::vector<std::string>> srows;
        for (auto& v : variants)
            srows.push_back({v.name, dlm::format_double(dlm::mean_perplexity(v.losses))});
        dlm::write_csv(cmp_out + "_summary.csv", {"variant", "mean_ppl"}, srows);

        std::vector<dlm::SvgSeries> svg;
        for (auto& s : series) svg.push_back({s.name, s.ppl});
        dlm::write_series_svg(cmp_out + ".svg", svg, series[0].boundary_batches,
                              "per-batch perplexity");
        std::vector<dlm::SvgSeries> svg_gain{{"two-vs-one", gain_two_vs_one},
                                             {"three-vs-two", gain_three_vs_two}};
        dlm::write_series_svg(cmp_out + "_gain.svg", svg_gain, series[0].boundary_batches,
                              "instantaneous perplexity gain");

        auto kv = corpus_manifest(cmp_corpus);
        kv["compare.alpha"] = dlm::format_double(cmp_alpha);
        kv["compare.split"] = cmp_split;
        kv["compare.batch_tokens"] = std::to_string(cmp_batch_tokens);
        write_manifest(cmp_out + ".manifest.csv", kv);

        for (auto& v : variants)
            std::cout << v.name << " mean ppl: "
                      << dlm::format_double(dlm::mean_perplexity(v.losses)) << '\n';
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ParseError&) {
        return 2;
    } catch (const MissingAsset& e) {
        std::cerr << "missing asset: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}

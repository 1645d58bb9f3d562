#include "dlm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dlm {

namespace {

// base64-style alphabet plus extra printables, used for synthetic exports
const std::string kSynthAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/"
    "!#$%&'()*,-.:;<=>?@[]^_`{|}~";

double next_unit(std::mt19937_64& rng) {
    // uniform in [0,1) with platform-independent bit pattern
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

size_t sample_cdf(const std::vector<double>& probs, double u) {
    double acc = 0.0;
    for (size_t k = 0; k < probs.size(); ++k) {
        acc += probs[k];
        if (u < acc) return k;
    }
    return probs.size() - 1;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text, TokenMode mode) {
    std::vector<std::string> out;
    if (mode == TokenMode::chars) {
        out.reserve(text.size());
        for (char c : text) out.emplace_back(1, c);
    } else {
        std::istringstream is(text);
        std::string tok;
        while (is >> tok) out.push_back(tok);
    }
    return out;
}

Vocab build_vocab(const std::string& text, size_t max_size, TokenMode mode) {
    auto toks = tokenize(text, mode);
    if (toks.empty()) throw std::runtime_error("empty corpus");
    if (max_size < 2) throw std::runtime_error("max_size must allow UNK plus one token");

    std::map<std::string, size_t> counts;
    for (auto& t : toks) ++counts[t];

    std::vector<std::pair<std::string, size_t>> ordered(counts.begin(), counts.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocab v;
    v.tokens.push_back("<unk>");
    for (auto& [tok, n] : ordered) {
        if (v.tokens.size() >= max_size) break;
        v.tokens.push_back(tok);
    }
    for (size_t i = 0; i < v.tokens.size(); ++i) v.index[v.tokens[i]] = static_cast<int32_t>(i);
    return v;
}

TokenSequence encode(const std::string& text, const Vocab& vocab, TokenMode mode) {
    TokenSequence seq;
    for (auto& tok : tokenize(text, mode)) seq.ids.push_back(vocab.id_of(tok));
    return seq;
}

std::string decode(const TokenSequence& seq, const Vocab& vocab, TokenMode mode) {
    std::string out;
    for (size_t i = 0; i < seq.ids.size(); ++i) {
        auto id = seq.ids[i];
        if (id < 0 || static_cast<size_t>(id) >= vocab.size())
            throw std::runtime_error("token id out of range");
        if (mode == TokenMode::words && i > 0) out += ' ';
        out += vocab.tokens[id];
    }
    return out;
}

std::vector<MiniBatch> split_batches(const TokenSequence& seq, size_t batch_tokens) {
    const size_t m = batch_tokens;
    if (m < 1) throw std::runtime_error("batch size must be >= 1");
    if (seq.size() < m + 1) throw std::runtime_error("sequence shorter than M+1 tokens");

    std::vector<MiniBatch> batches;
    size_t n = (seq.size() - 1) / m;  // trailing remainder dropped
    batches.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        MiniBatch b;
        b.index = i;
        b.inputs.assign(seq.ids.begin() + i * m, seq.ids.begin() + (i + 1) * m);
        b.targets.assign(seq.ids.begin() + i * m + 1, seq.ids.begin() + (i + 1) * m + 1);
        batches.push_back(std::move(b));
    }
    return batches;
}

TokenSequence synth_corpus(const SynthSpec& spec) {
    if (spec.vocab_size < spec.num_topics)
        throw std::runtime_error("vocab_size must be >= num_topics");
    if (spec.segment_len < 1) throw std::runtime_error("segment_len must be >= 1");
    if (spec.num_topics < 1) throw std::runtime_error("num_topics must be >= 1");
    if (spec.overlap < 0.0 || spec.overlap > 1.0)
        throw std::runtime_error("overlap must lie in [0,1]");

    std::mt19937_64 rng(spec.seed);

    const size_t v = spec.vocab_size;
    const size_t shared = std::min(v - spec.num_topics,
                                   static_cast<size_t>(spec.overlap * static_cast<double>(v) + 0.5));

    // token subset per topic: shared prefix plus a private contiguous chunk
    std::vector<std::vector<int32_t>> subsets(spec.num_topics);
    const size_t priv_total = v - shared;
    for (size_t t = 0; t < spec.num_topics; ++t) {
        for (size_t j = 0; j < shared; ++j) subsets[t].push_back(static_cast<int32_t>(j));
        size_t lo = shared + t * priv_total / spec.num_topics;
        size_t hi = shared + (t + 1) * priv_total / spec.num_topics;
        for (size_t j = lo; j < hi; ++j) subsets[t].push_back(static_cast<int32_t>(j));
    }

    // per-topic transition matrices, rows sharpened so the chains carry
    // learnable short-range structure
    std::vector<std::vector<std::vector<double>>> trans(spec.num_topics);
    for (size_t t = 0; t < spec.num_topics; ++t) {
        size_t n = subsets[t].size();
        trans[t].assign(n, std::vector<double>(n));
        for (size_t r = 0; r < n; ++r) {
            double sum = 0.0;
            for (size_t c = 0; c < n; ++c) {
                double u = next_unit(rng);
                double w = std::pow(u, spec.sharpness);
                trans[t][r][c] = w;
                sum += w;
            }
            for (size_t c = 0; c < n; ++c) trans[t][r][c] /= sum;
        }
    }

    TokenSequence seq;
    seq.ids.reserve(spec.num_segments * spec.segment_len);
    for (size_t s = 0; s < spec.num_segments; ++s) {
        seq.boundaries.push_back(seq.ids.size());
        size_t t = s % spec.num_topics;
        const auto& sub = subsets[t];
        size_t state = static_cast<size_t>(next_unit(rng) * static_cast<double>(sub.size()));
        if (state >= sub.size()) state = sub.size() - 1;
        seq.ids.push_back(sub[state]);
        for (size_t k = 1; k < spec.segment_len; ++k) {
            state = sample_cdf(trans[t][state], next_unit(rng));
            seq.ids.push_back(sub[state]);
        }
    }
    return seq;
}

namespace {

TokenSequence take_span(const TokenSequence& seq, size_t lo, size_t hi) {
    TokenSequence out;
    out.ids.assign(seq.ids.begin() + lo, seq.ids.begin() + hi);
    for (size_t b : seq.boundaries)
        if (b >= lo && b < hi) out.boundaries.push_back(b - lo);
    return out;
}

size_t snap_to_boundary(const TokenSequence& seq, size_t target) {
    if (seq.boundaries.empty()) return target;
    size_t best = target;
    size_t best_dist = SIZE_MAX;
    for (size_t b : seq.boundaries) {
        size_t d = b > target ? b - target : target - b;
        if (d < best_dist) { best_dist = d; best = b; }
    }
    return best;
}

}  // namespace

CorpusSplit split_corpus(const TokenSequence& seq, double train_frac, double meta_frac) {
    if (train_frac <= 0 || meta_frac <= 0 || train_frac + meta_frac >= 1.0)
        throw std::runtime_error("split fractions must be positive with train+meta < 1");
    size_t n = seq.size();
    size_t c1 = snap_to_boundary(seq, static_cast<size_t>(train_frac * static_cast<double>(n)));
    size_t c2 = snap_to_boundary(seq, static_cast<size_t>((train_frac + meta_frac) * static_cast<double>(n)));
    if (c1 == 0 || c2 <= c1 || c2 >= n)
        throw std::runtime_error("split fractions leave an empty span");
    CorpusSplit out;
    out.train = take_span(seq, 0, c1);
    out.meta_train = take_span(seq, c1, c2);
    out.test = take_span(seq, c2, n);
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write file: " + path);
    f << content;
}

void save_vocab(const std::string& path, const Vocab& vocab) {
    std::ostringstream ss;
    for (auto& t : vocab.tokens) ss << t << '\n';
    write_text_file(path, ss.str());
}

Vocab load_vocab(const std::string& path) {
    std::istringstream is(read_text_file(path));
    Vocab v;
    std::string line;
    while (std::getline(is, line)) v.tokens.push_back(line);
    if (v.tokens.empty()) throw std::runtime_error("empty vocab file: " + path);
    for (size_t i = 0; i < v.tokens.size(); ++i) v.index[v.tokens[i]] = static_cast<int32_t>(i);
    return v;
}

void save_boundaries(const std::string& path, const std::vector<size_t>& boundaries) {
    std::ostringstream ss;
    for (size_t b : boundaries) ss << b << '\n';
    write_text_file(path, ss.str());
}

std::vector<size_t> load_boundaries(const std::string& path) {
    std::istringstream is(read_text_file(path));
    std::vector<size_t> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        out.push_back(std::stoull(line));
    }
    return out;
}

std::string synth_to_text(const TokenSequence& seq) {
    std::string out;
    out.reserve(seq.size());
    for (auto id : seq.ids) {
        if (id < 0 || static_cast<size_t>(id) >= kSynthAlphabet.size())
            throw std::runtime_error("synthetic vocab exceeds export alphabet");
        out += kSynthAlphabet[static_cast<size_t>(id)];
    }
    return out;
}

TokenSequence text_to_synth(const std::string& text, const std::vector<size_t>& boundaries) {
    TokenSequence seq;
    seq.ids.reserve(text.size());
    for (char c : text) {
        auto pos = kSynthAlphabet.find(c);
        if (pos == std::string::npos) throw std::runtime_error("unexpected symbol in synthetic text");
        seq.ids.push_back(static_cast<int32_t>(pos));
    }
    seq.boundaries = boundaries;
    return seq;
}

}  // namespace dlm

#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace dlm {

enum class TokenMode { chars, words };

// Token ids are dense: id 0 is always the UNK token, remaining ids are
// assigned by descending frequency (ties broken lexicographically).
struct Vocab {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int32_t> index;

    static constexpr int32_t unk_id = 0;

    size_t size() const { return tokens.size(); }
    int32_t id_of(const std::string& tok) const {
        auto it = index.find(tok);
        return it == index.end() ? unk_id : it->second;
    }
};

struct TokenSequence {
    std::vector<int32_t> ids;
    // indices where a topic/article segment begins; strictly increasing,
    // first entry 0 when present
    std::vector<size_t> boundaries;

    size_t size() const { return ids.size(); }
};

// The unit B_i of online adaptation: M input tokens and the same window
// shifted one position as targets.
struct MiniBatch {
    std::vector<int32_t> inputs;
    std::vector<int32_t> targets;
    size_t index = 0;

    size_t size() const { return inputs.size(); }
};

struct CorpusSplit {
    TokenSequence train;       // task-A stream
    TokenSequence meta_train;  // validation stream driving meta-training
    TokenSequence test;
};

std::vector<std::string> tokenize(const std::string& text, TokenMode mode);

Vocab build_vocab(const std::string& text, size_t max_size, TokenMode mode = TokenMode::chars);

TokenSequence encode(const std::string& text, const Vocab& vocab, TokenMode mode = TokenMode::chars);
std::string decode(const TokenSequence& seq, const Vocab& vocab, TokenMode mode = TokenMode::chars);

std::vector<MiniBatch> split_batches(const TokenSequence& seq, size_t batch_tokens);

struct SynthSpec {
    size_t num_topics = 5;
    size_t segment_len = 500;
    size_t num_segments = 40;
    size_t vocab_size = 64;
    double overlap = 0.2;      // fraction of tokens shared across topics
    uint64_t seed = 0;
    double sharpness = 3.0;    // exponent concentrating Markov transition rows
};

// Piecewise-stationary stream: each segment is drawn from a topic-specific
// first-order Markov chain over a topic-specific token subset. Topics cycle
// segment by segment; boundaries mark every segment start.
TokenSequence synth_corpus(const SynthSpec& spec);

// Cuts the stream into disjoint train/meta/test spans. When boundaries are
// present the cut points snap to the nearest segment boundary so no segment
// straddles two splits; boundaries are rebased per split.
CorpusSplit split_corpus(const TokenSequence& seq, double train_frac, double meta_frac);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

// one decimal index per line
void save_boundaries(const std::string& path, const std::vector<size_t>& boundaries);
std::vector<size_t> load_boundaries(const std::string& path);

// Maps synthetic token ids to a printable 64+ symbol alphabet for export.
std::string synth_to_text(const TokenSequence& seq);
TokenSequence text_to_synth(const std::string& text, const std::vector<size_t>& boundaries);

}  // namespace dlm

#include "dlm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dlm {

namespace {

constexpr char kMagic[4] = {'D', 'L', 'M', '1'};
constexpr uint32_t kFormatVersion = 1;

template <class T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("truncated checkpoint file");
    return v;
}

void write_doubles(std::ostream& os, const double* p, size_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& is, double* p, size_t n) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("truncated checkpoint file");
}

void write_section_header(std::ostream& os, const char tag[4], uint64_t payload_len) {
    os.write(tag, 4);
    write_pod<uint64_t>(os, payload_len);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    ParamLayout layout = make_layout(ckpt.config);
    if (ckpt.params.size() != layout.total)
        throw std::runtime_error("parameter vector does not match config");

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);

    os.write(kMagic, 4);
    write_pod<uint32_t>(os, kFormatVersion);
    write_pod<uint32_t>(os, ckpt.config.vocab_size);
    write_pod<uint32_t>(os, ckpt.config.embed_dim);
    write_pod<uint32_t>(os, ckpt.config.hidden_dim);
    write_pod<uint64_t>(os, static_cast<uint64_t>(layout.total));
    write_doubles(os, ckpt.params.data(), ckpt.params.size());

    write_pod<uint16_t>(os, static_cast<uint16_t>(layout.tensors.size()));
    for (const auto& t : layout.tensors) {
        write_pod<uint16_t>(os, static_cast<uint16_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_pod<uint8_t>(os, static_cast<uint8_t>(t.dims.size()));
        for (auto d : t.dims) write_pod<uint32_t>(os, d);
    }

    if (ckpt.meta) {
        const MetaParams& m = *ckpt.meta;
        uint32_t groups = static_cast<uint32_t>(m.num_groups());
        uint64_t len = 1 + 4 + sizeof(double) * (12 + 3 + m.group_bias.size());
        write_section_header(os, "META", len);
        uint8_t flags = (m.use_group_bias ? 1 : 0) | (m.negate_grad_channel ? 2 : 0) |
                        (m.use_flush ? 4 : 0);
        write_pod<uint8_t>(os, flags);
        write_pod<uint32_t>(os, groups);
        for (int k = 0; k < kNumGates; ++k)
            for (int c = 0; c < kNumFeatChannels; ++c) write_pod<double>(os, m.w[k][c]);
        for (int k = 0; k < kNumGates; ++k) write_pod<double>(os, m.b[k]);
        write_doubles(os, m.group_bias.data(), m.group_bias.size());
    }

    if (ckpt.memory) {
        const ConsolidatedMemory& mem = *ckpt.memory;
        if (mem.anchor.size() != layout.total || mem.fisher.values.size() != layout.total)
            throw std::runtime_error("consolidated memory does not match config");
        write_section_header(os, "ANCH", sizeof(double) * layout.total);
        write_doubles(os, mem.anchor.data(), mem.anchor.size());
        write_section_header(os, "FISH", 8 + sizeof(double) * layout.total);
        write_pod<uint64_t>(os, static_cast<uint64_t>(mem.fisher.sample_count));
        write_doubles(os, mem.fisher.values.data(), mem.fisher.values.size());
        write_section_header(os, "LAMB", sizeof(double));
        write_pod<double>(os, mem.stiffness);
    }

    if (!os) throw std::runtime_error("write failure: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad magic in checkpoint: " + path);
    uint32_t version = read_pod<uint32_t>(is);
    if (version != kFormatVersion) throw std::runtime_error("unsupported checkpoint version");

    Checkpoint ckpt;
    ckpt.config.vocab_size = read_pod<uint32_t>(is);
    ckpt.config.embed_dim = read_pod<uint32_t>(is);
    ckpt.config.hidden_dim = read_pod<uint32_t>(is);
    uint64_t total = read_pod<uint64_t>(is);
    ckpt.params.resize(total);
    read_doubles(is, ckpt.params.data(), total);

    uint16_t ntensors = read_pod<uint16_t>(is);
    bool has_out_weight = false;
    for (uint16_t t = 0; t < ntensors; ++t) {
        uint16_t namelen = read_pod<uint16_t>(is);
        std::string name(namelen, '\0');
        is.read(name.data(), namelen);
        uint8_t rank = read_pod<uint8_t>(is);
        for (uint8_t d = 0; d < rank; ++d) read_pod<uint32_t>(is);
        if (name == "out_weight") has_out_weight = true;
    }
    ckpt.config.tied = !has_out_weight;

    ParamLayout layout = make_layout(ckpt.config);
    if (layout.total != total) throw std::runtime_error("layout does not tile parameter vector");

    std::optional<ParamVector> anchor;
    std::optional<FisherDiag> fisher;
    std::optional<double> lambda;

    char tag[4];
    while (is.read(tag, 4)) {
        uint64_t len = read_pod<uint64_t>(is);
        if (std::memcmp(tag, "META", 4) == 0) {
            MetaParams m;
            uint8_t flags = read_pod<uint8_t>(is);
            m.use_group_bias = flags & 1;
            m.negate_grad_channel = flags & 2;
            m.use_flush = flags & 4;
            uint32_t groups = read_pod<uint32_t>(is);
            for (int k = 0; k < kNumGates; ++k)
                for (int c = 0; c < kNumFeatChannels; ++c) m.w[k][c] = read_pod<double>(is);
            for (int k = 0; k < kNumGates; ++k) m.b[k] = read_pod<double>(is);
            m.group_bias.resize(groups * kNumGates);
            read_doubles(is, m.group_bias.data(), m.group_bias.size());
            ckpt.meta = std::move(m);
        } else if (std::memcmp(tag, "ANCH", 4) == 0) {
            ParamVector a(total);
            read_doubles(is, a.data(), total);
            anchor = std::move(a);
        } else if (std::memcmp(tag, "FISH", 4) == 0) {
            FisherDiag f;
            f.sample_count = read_pod<uint64_t>(is);
            f.values.resize(total);
            read_doubles(is, f.values.data(), total);
            fisher = std::move(f);
        } else if (std::memcmp(tag, "LAMB", 4) == 0) {
            lambda = read_pod<double>(is);
        } else {
            is.seekg(static_cast<std::streamoff>(len), std::ios::cur);
            if (!is) throw std::runtime_error("truncated checkpoint section");
        }
    }

    if (anchor && fisher && lambda)
        ckpt.memory = ConsolidatedMemory{std::move(*anchor), std::move(*fisher), *lambda};
    else if (anchor || fisher || lambda)
        throw std::runtime_error("incomplete consolidated memory in checkpoint");
    return ckpt;
}

}  // namespace dlm

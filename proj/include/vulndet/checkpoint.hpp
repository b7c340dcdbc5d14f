#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vulndet/model.hpp"

namespace vulndet {

// Binary checkpoint container, little-endian throughout:
//
//   bytes 0..7   magic "VDCKPT01"
//   u64          seed
//   i32          cwe code (-1 when the model is not class-bound)
//   u32          variant code (0 edge_aware, 1 ggnn, 2 gcn)
//   u8           tied_edges flag
//   u32 n_hyper  then n_hyper * { u32 klen, key bytes, f64 value }
//   u32 n_vocab  then n_vocab * { u32 len, token bytes } in index order
//   u32 n_tensor then n_tensor * { u32 nlen, name bytes,
//                                  u32 ndim, u64 dim[ndim],
//                                  f64 value[prod(dim)] }
//
// The layout is stable; readers reject any other magic.
inline constexpr char kCheckpointMagic[8] = {'V', 'D', 'C', 'K',
                                             'P', 'T', '0', '1'};

namespace detail {

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

inline void put_str(std::string& out, const std::string& s) {
    put<std::uint32_t>(out, std::uint32_t(s.size()));
    out.append(s);
}

class Reader {
public:
    explicit Reader(const std::string& data, std::size_t start = 0)
        : data_(data), pos_(start) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > data_.size())
            throw MissingCheckpoint("checkpoint truncated");
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string get_str() {
        std::uint32_t n = get<std::uint32_t>();
        if (pos_ + n > data_.size())
            throw MissingCheckpoint("checkpoint truncated");
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

private:
    const std::string& data_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string serialize_checkpoint(const ModelState& m) {
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put<std::uint64_t>(out, m.hp.seed);
    detail::put<std::int32_t>(out, m.cwe ? std::int32_t(*m.cwe) : -1);
    detail::put<std::uint32_t>(out, std::uint32_t(m.hp.variant));
    detail::put<std::uint8_t>(out, m.hp.tied_edges ? 1 : 0);

    const std::pair<const char*, double> hypers[] = {
        {"batch", double(m.hp.batch)},     {"d", double(m.hp.d)},
        {"d_edge", double(m.hp.d_edge)},   {"dropout", m.hp.dropout},
        {"epochs", double(m.hp.epochs)},   {"hops", double(m.hp.hops)},
        {"lr", m.hp.lr},                   {"vocab_cap", double(m.hp.vocab_cap)},
    };
    detail::put<std::uint32_t>(out, std::uint32_t(std::size(hypers)));
    for (const auto& [k, v] : hypers) {
        detail::put_str(out, k);
        detail::put<double>(out, v);
    }

    const std::vector<std::string>& vocab = m.vocab.tokens();
    detail::put<std::uint32_t>(out, std::uint32_t(vocab.size()));
    for (const std::string& tok : vocab) detail::put_str(out, tok);

    detail::put<std::uint32_t>(out, std::uint32_t(m.params.size()));
    for (const auto& [name, t] : m.params) {
        detail::put_str(out, name);
        detail::put<std::uint32_t>(out, std::uint32_t(t.shape.size()));
        for (std::int64_t dim : t.shape)
            detail::put<std::uint64_t>(out, std::uint64_t(dim));
        for (double v : t.data) detail::put<double>(out, v);
    }
    return out;
}

inline ModelState deserialize_checkpoint(const std::string& data) {
    if (data.size() < sizeof(kCheckpointMagic) ||
        std::memcmp(data.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw MissingCheckpoint("bad checkpoint magic");

    detail::Reader r(data, sizeof(kCheckpointMagic));
    ModelState m;
    m.hp.seed = r.get<std::uint64_t>();
    std::int32_t cwe = r.get<std::int32_t>();
    if (cwe >= 0) m.cwe = Cwe(cwe);
    m.hp.variant = GnnVariant(r.get<std::uint32_t>());
    m.hp.tied_edges = r.get<std::uint8_t>() != 0;

    std::uint32_t n_hyper = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_hyper; ++i) {
        std::string key = r.get_str();
        double v = r.get<double>();
        if (key == "batch") m.hp.batch = int(v);
        else if (key == "d") m.hp.d = int(v);
        else if (key == "d_edge") m.hp.d_edge = int(v);
        else if (key == "dropout") m.hp.dropout = v;
        else if (key == "epochs") m.hp.epochs = int(v);
        else if (key == "hops") m.hp.hops = int(v);
        else if (key == "lr") m.hp.lr = v;
        else if (key == "vocab_cap") m.hp.vocab_cap = int(v);
    }

    std::uint32_t n_vocab = r.get<std::uint32_t>();
    std::vector<std::string> tokens;
    tokens.reserve(n_vocab);
    for (std::uint32_t i = 0; i < n_vocab; ++i) tokens.push_back(r.get_str());
    m.vocab = Vocabulary::from_tokens(std::move(tokens));

    std::uint32_t n_tensor = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_tensor; ++i) {
        std::string name = r.get_str();
        std::uint32_t ndim = r.get<std::uint32_t>();
        Tensor t;
        t.shape.clear();
        std::size_t numel = 1;
        for (std::uint32_t k = 0; k < ndim; ++k) {
            t.shape.push_back(std::int64_t(r.get<std::uint64_t>()));
            numel *= std::size_t(t.shape.back());
        }
        t.data.resize(numel);
        for (double& v : t.data) v = r.get<double>();
        m.params[name] = std::move(t);
    }
    return m;
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const ModelState& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    std::string data = serialize_checkpoint(m);
    out.write(data.data(), std::streamsize(data.size()));
}

inline ModelState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingCheckpoint("cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return deserialize_checkpoint(data);
}

} // namespace vulndet

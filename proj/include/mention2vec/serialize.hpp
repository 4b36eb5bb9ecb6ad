// Model file container. Layout (documented in docs/model-format.md):
//
//   magic "M2VM" | payload | u64 FNV-1a checksum of the payload
//
// The payload holds the format version, model kind, dimension hyperparameters,
// vocabularies, entity types, and the named parameter tensors as little-endian
// 64-bit floats, in parameter-store creation order.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mention2vec/model.hpp"

namespace m2v {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are unsupported");

constexpr char kModelMagic[4] = {'M', '2', 'V', 'M'};
constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline void put_u32(std::string& out, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}
inline void put_u64(std::string& out, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}
inline void put_f64(std::string& out, double v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}
inline void put_string(std::string& out, const std::string& s) {
    put_u64(out, s.size());
    out.append(s);
}

class Cursor {
  public:
    Cursor(const char* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32() { return read<std::uint32_t>(); }
    std::uint64_t u64() { return read<std::uint64_t>(); }
    double f64() { return read<double>(); }
    std::uint8_t u8() { return read<std::uint8_t>(); }
    std::string str() {
        std::uint64_t n = u64();
        need(n);
        std::string s(data_ + pos_, n);
        pos_ += n;
        return s;
    }
    void f64_block(double* dst, std::size_t count) {
        need(count * 8);
        std::memcpy(dst, data_ + pos_, count * 8);
        pos_ += count * 8;
    }
    bool exhausted() const { return pos_ == size_; }

  private:
    template <typename T>
    T read() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void need(std::uint64_t n) {
        if (pos_ + n > size_) throw std::runtime_error("load_model: truncated file");
    }
    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline void save_model(const Model& model, const std::string& path) {
    using namespace detail;
    std::string payload;
    put_u32(payload, kModelFormatVersion);
    payload.push_back(model.kind == ModelKind::Mention2Vec ? 0 : 1);
    const ModelConfig& c = model.config;
    for (std::size_t dim : {c.char_emb_dim, c.char_hidden, c.word_emb_dim, c.word_hidden,
                            c.span_hidden, c.boundary_head_hidden, c.type_head_hidden}) {
        put_u64(payload, dim);
    }
    // Vocabularies; the reserved unknown entries at index 0 are implicit.
    put_u64(payload, model.vocabs.words.size() - 1);
    for (std::size_t i = 1; i < model.vocabs.words.size(); ++i) {
        put_string(payload, model.vocabs.words.at(i));
    }
    put_u64(payload, model.vocabs.chars.size() - 1);
    for (std::size_t i = 1; i < model.vocabs.chars.size(); ++i) {
        put_u32(payload, model.vocabs.chars.at(i));
    }
    put_u64(payload, model.vocabs.types.size());
    for (std::size_t i = 0; i < model.vocabs.types.size(); ++i) {
        put_string(payload, model.vocabs.types.at(i));
    }
    put_u64(payload, model.params.size());
    for (const Parameter& p : model.params) {
        put_string(payload, p.name);
        put_u64(payload, p.tensor.shape.size());
        for (std::size_t e : p.tensor.shape) put_u64(payload, e);
        for (double v : p.tensor.values) put_f64(payload, v);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model: cannot write '" + path + "'");
    out.write(kModelMagic, 4);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    std::uint64_t checksum = fnv1a64(payload);
    out.write(reinterpret_cast<const char*>(&checksum), 8);
    if (!out) throw std::runtime_error("save_model: write failed for '" + path + "'");
}

inline Model load_model(const std::string& path) {
    using namespace detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 4 + 4 + 8) throw std::runtime_error("load_model: truncated file");
    if (std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
        throw std::runtime_error("load_model: '" + path + "' is not a model file (bad magic)");
    }
    std::string payload = bytes.substr(4, bytes.size() - 12);
    std::uint64_t stored_checksum;
    std::memcpy(&stored_checksum, bytes.data() + bytes.size() - 8, 8);
    if (fnv1a64(payload) != stored_checksum) {
        throw std::runtime_error("load_model: checksum mismatch in '" + path + "'");
    }

    Cursor cur(payload.data(), payload.size());
    std::uint32_t version = cur.u32();
    if (version != kModelFormatVersion) {
        throw std::runtime_error("load_model: unsupported format version " +
                                 std::to_string(version) + " (expected " +
                                 std::to_string(kModelFormatVersion) + ")");
    }
    std::uint8_t kind_byte = cur.u8();
    if (kind_byte > 1) throw std::runtime_error("load_model: unknown model kind");
    ModelKind kind = kind_byte == 0 ? ModelKind::Mention2Vec : ModelKind::BilstmCrf;
    ModelConfig config;
    config.char_emb_dim = cur.u64();
    config.char_hidden = cur.u64();
    config.word_emb_dim = cur.u64();
    config.word_hidden = cur.u64();
    config.span_hidden = cur.u64();
    config.boundary_head_hidden = cur.u64();
    config.type_head_hidden = cur.u64();

    Vocabs vocabs;
    std::uint64_t num_words = cur.u64();
    for (std::uint64_t i = 0; i < num_words; ++i) vocabs.words.add(cur.str());
    std::uint64_t num_chars = cur.u64();
    for (std::uint64_t i = 0; i < num_chars; ++i) vocabs.chars.add(cur.u32());
    std::uint64_t num_types = cur.u64();
    for (std::uint64_t i = 0; i < num_types; ++i) vocabs.types.add(cur.str());

    Model model = Model::create(kind, config, std::move(vocabs), /*seed=*/0);

    std::uint64_t num_tensors = cur.u64();
    if (num_tensors != model.params.size()) {
        throw std::runtime_error("load_model: expected " + std::to_string(model.params.size()) +
                                 " tensors, file has " + std::to_string(num_tensors));
    }
    for (std::uint64_t i = 0; i < num_tensors; ++i) {
        std::string name = cur.str();
        Tensor& t = model.params[model.params.find(name)].tensor;
        std::uint64_t rank = cur.u64();
        Extents shape;
        for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(cur.u64());
        if (shape != t.shape) {
            throw std::runtime_error("load_model: tensor '" + name + "' has shape " +
                                     shape_str(shape) + ", model expects " + shape_str(t.shape));
        }
        cur.f64_block(t.values.data(), t.values.size());
    }
    if (!cur.exhausted()) {
        throw std::runtime_error("load_model: trailing bytes after tensor data");
    }
    return model;
}

}  // namespace m2v

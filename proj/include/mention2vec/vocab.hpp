// Symbol tables for characters, words, and entity types. Index 0 is the
// unknown symbol in the character and word vocabularies; insertion order is
// first occurrence, which keeps builds deterministic.
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace m2v {

// Lenient UTF-8 decoding: invalid bytes become their own code points so
// arbitrary corpus bytes never abort processing.
inline std::vector<std::uint32_t> decode_utf8(const std::string& s) {
    std::vector<std::uint32_t> out;
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char b = static_cast<unsigned char>(s[i]);
        std::size_t extra = 0;
        std::uint32_t cp = b;
        if (b >= 0xF0) {
            extra = 3;
            cp = b & 0x07u;
        } else if (b >= 0xE0) {
            extra = 2;
            cp = b & 0x0Fu;
        } else if (b >= 0xC0) {
            extra = 1;
            cp = b & 0x1Fu;
        }
        bool valid = i + extra < s.size();
        for (std::size_t j = 1; valid && j <= extra; ++j) {
            unsigned char c = static_cast<unsigned char>(s[i + j]);
            if ((c & 0xC0u) != 0x80u) {
                valid = false;
            } else {
                cp = (cp << 6) | (c & 0x3Fu);
            }
        }
        if (valid) {
            out.push_back(cp);
            i += extra + 1;
        } else {
            out.push_back(b);
            ++i;
        }
    }
    return out;
}

class CharVocab {
  public:
    static constexpr std::size_t kUnk = 0;

    CharVocab() { add(0xFFFD); }  // replacement character stands in for UNK

    std::size_t add(std::uint32_t cp) {
        auto it = index_.find(cp);
        if (it != index_.end()) return it->second;
        std::size_t idx = chars_.size();
        index_[cp] = idx;
        chars_.push_back(cp);
        return idx;
    }
    std::size_t lookup(std::uint32_t cp) const {
        auto it = index_.find(cp);
        return it == index_.end() ? kUnk : it->second;
    }
    std::size_t size() const { return chars_.size(); }
    std::uint32_t at(std::size_t i) const { return chars_.at(i); }

  private:
    std::map<std::uint32_t, std::size_t> index_;
    std::vector<std::uint32_t> chars_;
};

class WordVocab {
  public:
    static constexpr std::size_t kUnk = 0;
    static constexpr const char* kUnkString = "<unk>";

    WordVocab() { add(kUnkString); }

    std::size_t add(const std::string& w) {
        auto it = index_.find(w);
        if (it != index_.end()) return it->second;
        std::size_t idx = words_.size();
        index_[w] = idx;
        words_.push_back(w);
        has_pretrained_.push_back(false);
        train_count_.push_back(0);
        return idx;
    }
    std::size_t lookup(const std::string& w) const {
        auto it = index_.find(w);
        return it == index_.end() ? kUnk : it->second;
    }
    bool contains(const std::string& w) const { return index_.count(w) > 0; }
    std::size_t size() const { return words_.size(); }
    const std::string& at(std::size_t i) const { return words_.at(i); }

    void mark_pretrained(std::size_t i) { has_pretrained_.at(i) = true; }
    bool has_pretrained(std::size_t i) const { return has_pretrained_.at(i); }
    void bump_train_count(std::size_t i) { ++train_count_.at(i); }
    std::size_t train_count(std::size_t i) const { return train_count_.at(i); }
    bool is_singleton(std::size_t i) const { return train_count_.at(i) == 1; }

  private:
    std::map<std::string, std::size_t> index_;
    std::vector<std::string> words_;
    std::vector<bool> has_pretrained_;
    std::vector<std::size_t> train_count_;
};

class EntityTypeSet {
  public:
    std::size_t add(const std::string& name) {
        auto it = index_.find(name);
        if (it != index_.end()) return it->second;
        std::size_t idx = names_.size();
        index_[name] = idx;
        names_.push_back(name);
        return idx;
    }
    std::size_t lookup(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw std::invalid_argument("entity types: unknown type '" + name + "'");
        }
        return it->second;
    }
    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    std::size_t size() const { return names_.size(); }
    const std::string& at(std::size_t i) const { return names_.at(i); }
    const std::vector<std::string>& names() const { return names_; }

  private:
    std::map<std::string, std::size_t> index_;
    std::vector<std::string> names_;
};

struct Vocabs {
    CharVocab chars;
    WordVocab words;
    EntityTypeSet types;
};

}  // namespace m2v

#pragma once

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ldt/common.hpp"
#include "ldt/game_spec.hpp"

namespace ldt {

// Closed word-level token table. Id layout is fixed: control tokens, the
// sequence delimiter and placeholder, the six field markers, 101 goal tokens
// (surface forms "0".."100"), then the corpus words in sorted order. Ids are
// therefore a pure function of the corpus.
class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;
    static constexpr int kDelim = 4;   // "</s></s>"
    static constexpr int kState = 5;   // "<STATE>"
    static constexpr int kFirstMarker = 6;
    static constexpr int kFirstGoal = 12;
    static constexpr int kGoalCount = 101;
    static constexpr int kFirstWord = kFirstGoal + kGoalCount;

    Vocabulary() = default;

    static Vocabulary build(const std::vector<std::string>& corpus_texts) {
        std::set<std::string> words;
        for (const auto& text : corpus_texts)
            for (const auto& word : split_words(text)) words.insert(word);
        Vocabulary vocab;
        vocab.init_fixed();
        for (const auto& word : words) {
            if (vocab.word_to_id_.count(word)) continue;  // numerals and reserved surfaces
            vocab.word_to_id_.emplace(word, int(vocab.surfaces_.size()));
            vocab.surfaces_.push_back(word);
        }
        vocab.version_ = vocab.compute_version();
        return vocab;
    }

    int size() const { return int(surfaces_.size()); }
    uint64_t version() const { return version_; }

    int id(const std::string& word) const {
        auto it = word_to_id_.find(word);
        return it == word_to_id_.end() ? kUnk : it->second;
    }
    const std::string& surface(int id) const { return surfaces_.at(size_t(id)); }

    static bool is_goal_token(int id) { return id >= kFirstGoal && id < kFirstGoal + kGoalCount; }
    static int goal_token(int g) { return kFirstGoal + g; }
    static int goal_value(int id) { return id - kFirstGoal; }

    std::vector<int> encode(const std::string& text) const {
        std::vector<int> out;
        for (const auto& word : split_words(text)) out.push_back(id(word));
        return out;
    }

    std::string decode(const std::vector<int>& ids) const {
        std::vector<std::string> words;
        words.reserve(ids.size());
        for (int t : ids) words.push_back(surface(t));
        return join(words, " ");
    }

    nlohmann::ordered_json to_json() const {
        return nlohmann::ordered_json{{"version", version_}, {"tokens", surfaces_}};
    }

    static Vocabulary from_json(const nlohmann::ordered_json& j) {
        Vocabulary vocab;
        vocab.init_fixed();
        auto tokens = j.at("tokens").get<std::vector<std::string>>();
        if (tokens.size() < size_t(kFirstWord))
            throw std::runtime_error("vocabulary file too small to hold the fixed token layout");
        for (size_t i = 0; i < size_t(kFirstWord); ++i)
            if (tokens[i] != vocab.surfaces_[i])
                throw std::runtime_error("vocabulary file fixed token mismatch at id " + std::to_string(i));
        for (size_t i = size_t(kFirstWord); i < tokens.size(); ++i) {
            vocab.word_to_id_.emplace(tokens[i], int(i));
            vocab.surfaces_.push_back(tokens[i]);
        }
        vocab.version_ = vocab.compute_version();
        uint64_t recorded = j.at("version").get<uint64_t>();
        if (recorded != vocab.version_)
            throw std::runtime_error("vocabulary version mismatch: file says " + std::to_string(recorded) +
                                     ", content hashes to " + std::to_string(vocab.version_));
        return vocab;
    }

  private:
    void init_fixed() {
        surfaces_ = {"<PAD>", "<BOS>", "<EOS>", "<UNK>", "</s></s>", "<STATE>",
                     "Actions:", "State:", "Description:", "Inventory:", "GC:", "Action:"};
        for (int g = 0; g < kGoalCount; ++g) surfaces_.push_back(std::to_string(g));
        for (size_t i = 0; i < surfaces_.size(); ++i) word_to_id_.emplace(surfaces_[i], int(i));
    }

    uint64_t compute_version() const {
        uint64_t h = fnv1a("ldt-vocab-v1");
        for (const auto& s : surfaces_) h = fnv1a(s, fnv1a("\x1f", h));
        return h;
    }

    std::vector<std::string> surfaces_;
    std::unordered_map<std::string, int> word_to_id_;
    uint64_t version_ = 0;
};

// Corpus assembly for the bundled games: every engine-reachable text plus the
// comma-suffixed variants produced when candidate lists and inventories are
// joined with ", ".
inline std::vector<std::string> vocabulary_corpus(const std::vector<GameSpec>& specs) {
    std::vector<std::string> corpus;
    auto add_comma_variant = [&](const std::string& phrase) {
        auto words = split_words(phrase);
        if (!words.empty()) corpus.push_back(words.back() + ",");
    };
    for (const auto& spec : specs) {
        for (const auto& text : collect_game_texts(spec)) corpus.push_back(text);
        for (const auto& rule : spec.rules) add_comma_variant(rule.pattern);
        for (const auto& room : spec.rooms)
            for (const auto& exit : room.exits) add_comma_variant("go " + exit.direction);
        for (const auto& item : spec.items) add_comma_variant(item.name);
    }
    return corpus;
}

}  // namespace ldt

#pragma once

// Mandarin Cued Speech inventory: phoneme vocabulary, hand positions and
// shapes, and the coding table mapping (position, shape) to phonemes.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "acsr/error.hpp"

namespace acsr {

enum class PhonemeKind { vowel, consonant, symbol };

inline std::string_view to_string(PhonemeKind kind) {
  switch (kind) {
    case PhonemeKind::vowel: return "vowel";
    case PhonemeKind::consonant: return "consonant";
    case PhonemeKind::symbol: return "symbol";
  }
  return "?";
}

inline PhonemeKind parse_phoneme_kind(std::string_view text) {
  if (text == "vowel") return PhonemeKind::vowel;
  if (text == "consonant") return PhonemeKind::consonant;
  if (text == "symbol") return PhonemeKind::symbol;
  throw ParseError("unknown phoneme kind '" + std::string(text) + "'");
}

struct Phoneme {
  std::string symbol;
  PhonemeKind kind = PhonemeKind::symbol;

  friend bool operator==(const Phoneme&, const Phoneme&) = default;
};

// The four non-phoneme symbols. None of them is produced by hand coding.
inline constexpr std::string_view kWordBoundary = "/";
inline constexpr std::string_view kSentenceStart = "<sos>";
inline constexpr std::string_view kSentenceEnd = "<eos>";
inline constexpr std::string_view kUnknown = "<unk>";
inline constexpr std::string_view kBlankSymbol = "<blank>";

// 40 phonemes + 4 symbols, preceded by the CTC blank at index 0. Token
// indices are dense: blank is 0 and the 44 listed tokens occupy 1..44.
class Vocabulary {
 public:
  static constexpr std::size_t kBlank = 0;
  static constexpr std::size_t kPhonemeCount = 40;
  static constexpr std::size_t kSymbolCount = 4;
  static constexpr std::size_t kTokenCount = kPhonemeCount + kSymbolCount;
  static constexpr std::size_t kSize = kTokenCount + 1;

  explicit Vocabulary(std::vector<Phoneme> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() != kTokenCount) {
      throw ValidationError("vocabulary must list exactly " + std::to_string(kTokenCount) +
                            " tokens, got " + std::to_string(tokens_.size()));
    }
    std::size_t phonemes = 0;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      const Phoneme& p = tokens_[i];
      if (p.symbol.empty()) throw ValidationError("vocabulary token " + std::to_string(i + 1) + " is empty");
      if (p.symbol == kBlankSymbol) throw ValidationError("the blank symbol is reserved");
      if (!index_.emplace(p.symbol, i + 1).second) {
        throw ValidationError("duplicate vocabulary symbol '" + p.symbol + "'");
      }
      if (p.kind != PhonemeKind::symbol) ++phonemes;
    }
    if (phonemes != kPhonemeCount) {
      throw ValidationError("vocabulary must hold " + std::to_string(kPhonemeCount) + " phonemes, got " +
                            std::to_string(phonemes));
    }
    for (std::string_view s : {kWordBoundary, kSentenceStart, kSentenceEnd, kUnknown}) {
      auto it = index_.find(std::string(s));
      if (it == index_.end() || token(it->second).kind != PhonemeKind::symbol) {
        throw ValidationError("vocabulary is missing symbol '" + std::string(s) + "'");
      }
    }
  }

  // One token per line: "<symbol>\t<kind>". Blank lines and '#' comments are skipped.
  static Vocabulary parse(std::istream& in) {
    std::vector<Phoneme> tokens;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
        throw ParseError("vocabulary line " + std::to_string(line_no) + ": expected '<symbol>\\t<kind>'");
      }
      try {
        tokens.push_back({line.substr(0, tab), parse_phoneme_kind(std::string_view(line).substr(tab + 1))});
      } catch (const ParseError& e) {
        throw ParseError("vocabulary line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return Vocabulary(std::move(tokens));
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file " + path.string());
    return parse(in);
  }

  void write(std::ostream& out) const {
    for (const auto& p : tokens_) out << p.symbol << '\t' << to_string(p.kind) << '\n';
  }

  std::size_t size() const { return kSize; }

  // Non-blank tokens in index order (tokens()[i] has index i + 1).
  const std::vector<Phoneme>& tokens() const { return tokens_; }

  const Phoneme& token(std::size_t index) const {
    if (index == kBlank || index > tokens_.size()) {
      throw std::out_of_range("vocabulary index " + std::to_string(index) + " is not a token");
    }
    return tokens_[index - 1];
  }

  std::string_view symbol(std::size_t index) const {
    if (index == kBlank) return kBlankSymbol;
    return token(index).symbol;
  }

  std::optional<std::size_t> find(std::string_view symbol) const {
    auto it = index_.find(std::string(symbol));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index(std::string_view symbol) const {
    if (auto i = find(symbol)) return *i;
    throw ValidationError("unknown token '" + std::string(symbol) + "'");
  }

  // Column of a token in the 44-wide hand matrix.
  static std::size_t hand_column(std::size_t index) { return index - 1; }

  std::size_t word_boundary() const { return index(kWordBoundary); }

 private:
  std::vector<Phoneme> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::array<std::string_view, 5> kPositionNames = {"mouth", "chin", "throat", "side", "cheek"};

struct HandPosition {
  static constexpr int kCount = 5;
  int id = 1;

  static HandPosition from_id(int id) {
    if (id < 1 || id > kCount) throw ValidationError("hand position " + std::to_string(id) + " out of range 1-5");
    return HandPosition{id};
  }
  static HandPosition from_name(std::string_view name) {
    for (int i = 0; i < kCount; ++i) {
      if (kPositionNames[i] == name) return HandPosition{i + 1};
    }
    throw ValidationError("unknown hand position '" + std::string(name) + "'");
  }
  std::string_view name() const { return kPositionNames.at(static_cast<std::size_t>(id - 1)); }
  std::size_t slot() const { return static_cast<std::size_t>(id - 1); }

  friend auto operator<=>(const HandPosition&, const HandPosition&) = default;
};

struct HandShape {
  static constexpr int kCount = 8;
  int id = 1;

  static HandShape from_id(int id) {
    if (id < 1 || id > kCount) throw ValidationError("hand shape " + std::to_string(id) + " out of range 1-8");
    return HandShape{id};
  }
  std::size_t slot() const { return static_cast<std::size_t>(id - 1); }

  friend auto operator<=>(const HandShape&, const HandShape&) = default;
};

// One hand-coding label.
struct HandCode {
  HandPosition position;
  HandShape shape;

  static constexpr std::size_t kCombinations = HandPosition::kCount * HandShape::kCount;

  // Dense index in [0, 40): position-major.
  std::size_t slot() const { return position.slot() * HandShape::kCount + shape.slot(); }
  static HandCode from_slot(std::size_t slot) {
    return {HandPosition{static_cast<int>(slot / HandShape::kCount) + 1},
            HandShape{static_cast<int>(slot % HandShape::kCount) + 1}};
  }

  friend auto operator<=>(const HandCode&, const HandCode&) = default;
};

// Position -> vowel group and shape -> consonant group. Phonemes are held as
// vocabulary indices; the table is only meaningful with the vocabulary it was
// loaded against.
class CodingTable {
 public:
  static constexpr std::size_t kConsonantCount = 24;

  // JSON document:
  //   {"positions": [{"id": 1, "name": "mouth", "vowels": ["a", ...]}, ...],
  //    "shapes":    [{"id": 1, "finger_spec": "...", "consonants": ["d", ...]}, ...]}
  static CodingTable parse(const nlohmann::json& doc, const Vocabulary& vocab) {
    CodingTable table;
    try {
      parse_into(table, doc, vocab);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("coding table: ") + e.what());
    }
    return table;
  }

  static CodingTable parse_text(std::string_view text, const Vocabulary& vocab) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("coding table: ") + e.what());
    }
    return parse(doc, vocab);
  }

  static CodingTable load(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open coding table " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str(), vocab);
  }

  const std::vector<std::size_t>& vowels(HandPosition p) const { return vowels_.at(p.slot()); }
  const std::vector<std::size_t>& consonants(HandShape s) const { return consonants_.at(s.slot()); }
  const std::string& finger_spec(HandShape s) const { return finger_specs_.at(s.slot()); }

  // Union of the position's vowels and the shape's consonants, ascending.
  std::vector<std::size_t> phonemes_for(HandCode code) const {
    std::vector<std::size_t> out;
    const auto& v = vowels(code.position);
    const auto& c = consonants(code.shape);
    out.reserve(v.size() + c.size());
    std::merge(v.begin(), v.end(), c.begin(), c.end(), std::back_inserter(out));
    return out;
  }

  std::optional<HandPosition> position_of(std::size_t vowel) const {
    for (int p = 0; p < HandPosition::kCount; ++p) {
      if (std::binary_search(vowels_[p].begin(), vowels_[p].end(), vowel)) return HandPosition{p + 1};
    }
    return std::nullopt;
  }

  std::optional<HandShape> shape_of(std::size_t consonant) const {
    for (int s = 0; s < HandShape::kCount; ++s) {
      if (std::binary_search(consonants_[s].begin(), consonants_[s].end(), consonant)) return HandShape{s + 1};
    }
    return std::nullopt;
  }

 private:
  static void parse_into(CodingTable& table, const nlohmann::json& doc, const Vocabulary& vocab) {
    if (!doc.is_object()) throw ParseError("coding table: top level must be an object");
    const auto& positions = doc.at("positions");
    const auto& shapes = doc.at("shapes");
    if (!positions.is_array() || !shapes.is_array()) {
      throw ParseError("coding table: 'positions' and 'shapes' must be arrays");
    }

    std::set<std::size_t> seen_vowels;
    std::array<bool, HandPosition::kCount> have_position{};
    for (const auto& entry : positions) {
      const auto pos = HandPosition::from_id(entry.at("id").get<int>());
      const auto name = entry.at("name").get<std::string>();
      if (HandPosition::from_name(name) != pos) {
        throw ValidationError("coding table: position " + std::to_string(pos.id) + " must be named '" +
                              std::string(pos.name()) + "', got '" + name + "'");
      }
      if (have_position[pos.slot()]) {
        throw ValidationError("coding table: position " + std::to_string(pos.id) + " listed twice");
      }
      have_position[pos.slot()] = true;
      auto& group = table.vowels_[pos.slot()];
      for (const auto& sym : entry.at("vowels")) {
        const auto idx = vocab.index(sym.get<std::string>());
        if (vocab.token(idx).kind != PhonemeKind::vowel) {
          throw ValidationError("coding table: '" + sym.get<std::string>() + "' under position " +
                                std::string(pos.name()) + " is not a vowel");
        }
        if (!seen_vowels.insert(idx).second) {
          throw ValidationError("coding table: vowel '" + sym.get<std::string>() + "' assigned to more than one position");
        }
        group.push_back(idx);
      }
      if (group.empty()) throw ValidationError("coding table: position " + std::string(pos.name()) + " has no vowels");
      std::sort(group.begin(), group.end());
    }
    for (int p = 0; p < HandPosition::kCount; ++p) {
      if (!have_position[p]) {
        throw ValidationError("coding table: position " + std::to_string(p + 1) + " (" +
                              std::string(kPositionNames[p]) + ") is missing");
      }
    }

    std::set<std::size_t> seen_consonants;
    std::array<bool, HandShape::kCount> have_shape{};
    for (const auto& entry : shapes) {
      const auto shape = HandShape::from_id(entry.at("id").get<int>());
      if (have_shape[shape.slot()]) {
        throw ValidationError("coding table: shape " + std::to_string(shape.id) + " listed twice");
      }
      have_shape[shape.slot()] = true;
      auto spec = entry.at("finger_spec").get<std::string>();
      if (spec.empty()) throw ValidationError("coding table: shape " + std::to_string(shape.id) + " has an empty finger_spec");
      table.finger_specs_[shape.slot()] = std::move(spec);
      auto& group = table.consonants_[shape.slot()];
      for (const auto& sym : entry.at("consonants")) {
        const auto idx = vocab.index(sym.get<std::string>());
        if (vocab.token(idx).kind != PhonemeKind::consonant) {
          throw ValidationError("coding table: '" + sym.get<std::string>() + "' under shape " +
                                std::to_string(shape.id) + " is not a consonant");
        }
        if (!seen_consonants.insert(idx).second) {
          throw ValidationError("coding table: consonant '" + sym.get<std::string>() + "' assigned to more than one shape");
        }
        group.push_back(idx);
      }
      if (group.empty()) throw ValidationError("coding table: shape " + std::to_string(shape.id) + " has no consonants");
      std::sort(group.begin(), group.end());
    }
    for (int s = 0; s < HandShape::kCount; ++s) {
      if (!have_shape[s]) throw ValidationError("coding table: shape " + std::to_string(s + 1) + " is missing");
    }

    std::size_t vocab_vowels = 0;
    std::size_t vocab_consonants = 0;
    for (const auto& p : vocab.tokens()) {
      if (p.kind == PhonemeKind::vowel) ++vocab_vowels;
      if (p.kind == PhonemeKind::consonant) ++vocab_consonants;
    }
    if (seen_vowels.size() != vocab_vowels) {
      throw ValidationError("coding table: positions cover " + std::to_string(seen_vowels.size()) + " of " +
                            std::to_string(vocab_vowels) + " vowels");
    }
    if (seen_consonants.size() != kConsonantCount || vocab_consonants != kConsonantCount) {
      throw ValidationError("coding table: shapes must partition exactly " + std::to_string(kConsonantCount) +
                            " consonants (table covers " + std::to_string(seen_consonants.size()) +
                            ", vocabulary has " + std::to_string(vocab_consonants) + ")");
    }
  }

  std::array<std::vector<std::size_t>, HandPosition::kCount> vowels_;
  std::array<std::vector<std::size_t>, HandShape::kCount> consonants_;
  std::array<std::string, HandShape::kCount> finger_specs_;
};

}  // namespace acsr

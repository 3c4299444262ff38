#pragma once

// Edit-distance metrics (CER over phoneme tokens, WER over words) and
// phoneme confusion matrices with CSV / PGM output.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "acsr/detail/text.hpp"
#include "acsr/domain.hpp"
#include "acsr/error.hpp"

namespace acsr {

// Phoneme tokens of one sentence plus the offsets where words 2..n start.
// On disk: tokens separated by single spaces, "/" between words.
struct Transcript {
  std::vector<std::string> tokens;
  std::vector<std::size_t> word_boundaries;

  friend bool operator==(const Transcript&, const Transcript&) = default;

  // "/" tokens become boundaries; leading, trailing and repeated separators
  // are absorbed.
  static Transcript from_tokens(std::span<const std::string> symbols) {
    Transcript t;
    for (const auto& s : symbols) {
      if (s == kWordBoundary) {
        if (!t.tokens.empty() && (t.word_boundaries.empty() || t.word_boundaries.back() != t.tokens.size())) {
          t.word_boundaries.push_back(t.tokens.size());
        }
      } else {
        t.tokens.push_back(s);
      }
    }
    if (!t.word_boundaries.empty() && t.word_boundaries.back() == t.tokens.size()) t.word_boundaries.pop_back();
    return t;
  }

  static Transcript parse_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> symbols;
    for (auto field : detail::split(line, ' ')) {
      if (!field.empty()) symbols.emplace_back(field);
    }
    return from_tokens(symbols);
  }

  std::string to_line() const {
    std::string out;
    std::size_t next = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (next < word_boundaries.size() && word_boundaries[next] == i) {
        out += " /";
        ++next;
      }
      if (!out.empty()) out += ' ';
      out += tokens[i];
    }
    return out;
  }

  // Tokens with "/" separators, as a CTC target would carry them.
  std::vector<std::string> symbols() const {
    std::vector<std::string> out;
    std::size_t next = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (next < word_boundaries.size() && word_boundaries[next] == i) {
        out.emplace_back(kWordBoundary);
        ++next;
      }
      out.push_back(tokens[i]);
    }
    return out;
  }

  std::vector<std::vector<std::string>> words() const {
    std::vector<std::vector<std::string>> out;
    if (tokens.empty()) return out;
    std::size_t start = 0;
    for (std::size_t b : word_boundaries) {
      out.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(start), tokens.begin() + static_cast<std::ptrdiff_t>(b));
      start = b;
    }
    out.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(start), tokens.end());
    return out;
  }

  void validate(const Vocabulary& vocab) const {
    for (const auto& tok : tokens) {
      const auto idx = vocab.find(tok);
      if (!idx || tok == kWordBoundary) throw ValidationError("transcript token '" + tok + "' is not in the vocabulary");
    }
    for (std::size_t i = 0; i < word_boundaries.size(); ++i) {
      const auto b = word_boundaries[i];
      if (b == 0 || b >= tokens.size() || (i > 0 && b <= word_boundaries[i - 1])) {
        throw ValidationError("transcript word boundaries must be increasing and inside the sentence");
      }
    }
  }
};

inline std::vector<Transcript> read_transcripts(std::istream& in) {
  std::vector<Transcript> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(Transcript::parse_line(line));
  return out;
}

inline std::vector<Transcript> read_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transcript file " + path.string());
  return read_transcripts(in);
}

inline void write_transcripts(std::ostream& out, std::span<const Transcript> transcripts) {
  for (const auto& t : transcripts) out << t.to_line() << '\n';
}

inline void write_transcripts(const std::filesystem::path& path, std::span<const Transcript> transcripts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_transcripts(out, transcripts);
}

// --- edit distance -------------------------------------------------------------

struct AlignOp {
  enum class Kind { match, substitute, insert, remove };
  Kind kind = Kind::match;
  std::size_t ref = 0;  // meaningful unless kind == insert
  std::size_t hyp = 0;  // meaningful unless kind == remove

  friend bool operator==(const AlignOp&, const AlignOp&) = default;
};

using Alignment = std::vector<AlignOp>;

struct EditResult {
  std::size_t distance = 0;
  Alignment alignment;
};

// Unit-cost Levenshtein distance with a minimal alignment. Backtrace prefers
// match, then substitution, then deletion, then insertion.
template <typename T>
EditResult edit_distance(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto D = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) D(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) D(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = D(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      D(i, j) = std::min({diag, D(i - 1, j) + 1, D(i, j - 1) + 1});
    }
  }

  EditResult result;
  result.distance = D(n, m);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && D(i, j) == D(i - 1, j - 1)) {
      result.alignment.push_back({AlignOp::Kind::match, i - 1, j - 1});
      --i, --j;
    } else if (i > 0 && j > 0 && D(i, j) == D(i - 1, j - 1) + 1) {
      result.alignment.push_back({AlignOp::Kind::substitute, i - 1, j - 1});
      --i, --j;
    } else if (i > 0 && D(i, j) == D(i - 1, j) + 1) {
      result.alignment.push_back({AlignOp::Kind::remove, i - 1, 0});
      --i;
    } else {
      result.alignment.push_back({AlignOp::Kind::insert, 0, j - 1});
      --j;
    }
  }
  std::reverse(result.alignment.begin(), result.alignment.end());
  return result;
}

template <typename T>
EditResult edit_distance(const std::vector<T>& ref, const std::vector<T>& hyp) {
  return edit_distance(std::span<const T>(ref), std::span<const T>(hyp));
}

// --- corpus metrics --------------------------------------------------------------

struct ErrorCounts {
  std::size_t edits = 0;
  std::size_t reference_units = 0;
  double rate() const { return static_cast<double>(edits) / static_cast<double>(reference_units); }
};

namespace eval_detail {

inline void check_corpus(std::size_t refs, std::size_t hyps) {
  if (refs != hyps) {
    throw ValidationError("reference and hypothesis counts differ (" + std::to_string(refs) + " vs " +
                          std::to_string(hyps) + ")");
  }
}

}  // namespace eval_detail

// Corpus-pooled: sum of token edit distances over sum of reference tokens.
inline ErrorCounts token_errors(std::span<const Transcript> refs, std::span<const Transcript> hyps) {
  eval_detail::check_corpus(refs.size(), hyps.size());
  ErrorCounts c;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    c.edits += edit_distance(refs[i].tokens, hyps[i].tokens).distance;
    c.reference_units += refs[i].tokens.size();
  }
  if (c.reference_units == 0) throw ValidationError("CER is undefined for an empty reference corpus");
  return c;
}

inline ErrorCounts word_errors(std::span<const Transcript> refs, std::span<const Transcript> hyps) {
  eval_detail::check_corpus(refs.size(), hyps.size());
  ErrorCounts c;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto ref_words = refs[i].words();
    c.edits += edit_distance(ref_words, hyps[i].words()).distance;
    c.reference_units += ref_words.size();
  }
  if (c.reference_units == 0) throw ValidationError("WER is undefined for an empty reference corpus");
  return c;
}

inline double cer(std::span<const Transcript> refs, std::span<const Transcript> hyps) {
  return token_errors(refs, hyps).rate();
}

inline double wer(std::span<const Transcript> refs, std::span<const Transcript> hyps) {
  return word_errors(refs, hyps).rate();
}

// --- confusion ---------------------------------------------------------------------

// Rows: reference tokens; columns: hypothesis tokens (both over the 44
// vocabulary tokens, ordered by index). Deletions and insertions are kept in a
// separate column / row.
class ConfusionMatrix {
 public:
  static constexpr std::size_t kTokens = Vocabulary::kTokenCount;

  std::size_t& at(std::size_t ref_col, std::size_t hyp_col) { return counts_[ref_col * kTokens + hyp_col]; }
  std::size_t at(std::size_t ref_col, std::size_t hyp_col) const { return counts_[ref_col * kTokens + hyp_col]; }
  std::size_t& deletions(std::size_t ref_col) { return deletions_[ref_col]; }
  std::size_t deletions(std::size_t ref_col) const { return deletions_[ref_col]; }
  std::size_t& insertions(std::size_t hyp_col) { return insertions_[hyp_col]; }
  std::size_t insertions(std::size_t hyp_col) const { return insertions_[hyp_col]; }

  std::size_t total() const {
    std::size_t sum = 0;
    for (auto c : counts_) sum += c;
    for (auto c : deletions_) sum += c;
    for (auto c : insertions_) sum += c;
    return sum;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::vector<std::size_t> counts_ = std::vector<std::size_t>(kTokens * kTokens, 0);
  std::vector<std::size_t> deletions_ = std::vector<std::size_t>(kTokens, 0);
  std::vector<std::size_t> insertions_ = std::vector<std::size_t>(kTokens, 0);
};

inline ConfusionMatrix confusion_matrix(std::span<const Transcript> refs, std::span<const Transcript> hyps,
                                        const Vocabulary& vocab) {
  eval_detail::check_corpus(refs.size(), hyps.size());
  ConfusionMatrix cm;
  auto column = [&](const std::string& tok) {
    const auto idx = vocab.find(tok);
    if (!idx) throw ValidationError("confusion: token '" + tok + "' is outside the vocabulary");
    return Vocabulary::hand_column(*idx);
  };
  for (std::size_t n = 0; n < refs.size(); ++n) {
    const auto& ref = refs[n].tokens;
    const auto& hyp = hyps[n].tokens;
    for (const auto& op : edit_distance(ref, hyp).alignment) {
      switch (op.kind) {
        case AlignOp::Kind::match:
        case AlignOp::Kind::substitute: ++cm.at(column(ref[op.ref]), column(hyp[op.hyp])); break;
        case AlignOp::Kind::remove: ++cm.deletions(column(ref[op.ref])); break;
        case AlignOp::Kind::insert: ++cm.insertions(column(hyp[op.hyp])); break;
      }
    }
  }
  return cm;
}

inline std::string confusion_csv(const ConfusionMatrix& cm, const Vocabulary& vocab) {
  constexpr auto N = ConfusionMatrix::kTokens;
  std::ostringstream out;
  out << "ref\\hyp";
  for (std::size_t c = 0; c < N; ++c) out << ',' << vocab.token(c + 1).symbol;
  out << ",<del>\n";
  for (std::size_t r = 0; r < N; ++r) {
    out << vocab.token(r + 1).symbol;
    for (std::size_t c = 0; c < N; ++c) out << ',' << cm.at(r, c);
    out << ',' << cm.deletions(r) << '\n';
  }
  out << "<ins>";
  for (std::size_t c = 0; c < N; ++c) out << ',' << cm.insertions(c);
  out << ",0\n";
  return out.str();
}

// Plain (P2) graymap, 45 x 45. Each row is scaled to 0-255 by its own total,
// the last row holding insertions and the last column deletions.
inline std::string confusion_pgm(const ConfusionMatrix& cm) {
  constexpr auto N = ConfusionMatrix::kTokens;
  std::ostringstream out;
  out << "P2\n" << N + 1 << ' ' << N + 1 << "\n255\n";
  auto emit_row = [&](const std::vector<std::size_t>& row) {
    std::size_t total = 0;
    for (auto v : row) total += v;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::size_t level = total == 0 ? 0 : (row[c] * 255 + total / 2) / total;
      out << (c ? " " : "") << level;
    }
    out << '\n';
  };
  std::vector<std::size_t> row(N + 1);
  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t c = 0; c < N; ++c) row[c] = cm.at(r, c);
    row[N] = cm.deletions(r);
    emit_row(row);
  }
  for (std::size_t c = 0; c < N; ++c) row[c] = cm.insertions(c);
  row[N] = 0;
  emit_row(row);
  return out.str();
}

// Writes <base>.csv and <base>.pgm.
inline void render_heatmap(const ConfusionMatrix& cm, const Vocabulary& vocab, const std::filesystem::path& base) {
  detail::write_file(std::filesystem::path(base.string() + ".csv"), confusion_csv(cm, vocab));
  detail::write_file(std::filesystem::path(base.string() + ".pgm"), confusion_pgm(cm));
}

}  // namespace acsr

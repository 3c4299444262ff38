#pragma once

// Synthetic cuer: sentences of (consonant?, vowel) syllables rendered as a
// hand trajectory (transit to the vowel's anchor, then dwell), the implied
// slow-motion groups and labels, and noisy lip features aligned to the same
// frames.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acsr/detail/text.hpp"
#include "acsr/domain.hpp"
#include "acsr/error.hpp"
#include "acsr/eval.hpp"
#include "acsr/formats.hpp"
#include "acsr/fusion.hpp"
#include "acsr/keyframe.hpp"
#include "acsr/recognizer.hpp"
#include "acsr/rng.hpp"

namespace acsr {

// Lip noise level at which lips alone are unreliable; used for the hand
// ablation.
inline constexpr double kHardLipNoiseSigma = 0.6;

struct SynthConfig {
  // Face-relative anchors in a 1280 x 720 frame, indexed by position id - 1.
  std::array<Point, HandPosition::kCount> anchors = {{{640, 410}, {640, 490}, {640, 600}, {830, 470}, {760, 330}}};
  Point rest{640, 700};
  double frame_width = 1280;
  double frame_height = 720;
  int dwell_min = 6;
  int dwell_max = 10;
  int transit_min = 2;
  int transit_max = 5;
  double jitter_amplitude = 2.0;  // max per-step movement while dwelling
  double transit_step = 14.0;     // min per-step movement while moving
  double lip_amplitude = 0.3;      // per-dimension standard deviation of clean lip vectors
  double lip_noise_sigma = 0.2;    // per-dimension Gaussian noise; see kHardLipNoiseSigma
  double lip_similarity = 0.95;   // shared component between lip-alike phonemes, in [0, 1)
  std::size_t feature_dim = kDefaultFeatureDim;
  int no_consonant_shape = 5;
  double consonant_probability = 0.8;
  int min_syllables = 4;
  int max_syllables = 25;
  int max_word_syllables = 3;
  double eval_fraction = 0.2;
  FilterConfig filter{};
  std::uint64_t seed = 0;

  void validate() const {
    filter.validate();
    if (!(jitter_amplitude >= 0.0 && jitter_amplitude < filter.sigma && filter.sigma < transit_step)) {
      throw ValidationError("synth config needs jitter_amplitude < sigma < transit_step");
    }
    if (dwell_min < 3 || dwell_max < dwell_min) throw ValidationError("synth config needs 3 <= dwell_min <= dwell_max");
    if (transit_min < 1 || transit_max < transit_min) {
      throw ValidationError("synth config needs 1 <= transit_min <= transit_max");
    }
    if (static_cast<std::size_t>(transit_min) + 2 <= filter.theta) {
      throw ValidationError("synth config: transit_min + 2 must exceed theta so dwell groups stay separate");
    }
    for (const auto& a : anchors) {
      if (a.x < 0 || a.y < 0 || a.x >= frame_width || a.y >= frame_height) {
        throw ValidationError("synth config: anchors must lie inside the frame");
      }
    }
    if (no_consonant_shape < 1 || no_consonant_shape > HandShape::kCount) {
      throw ValidationError("synth config: no_consonant_shape must be 1-8");
    }
    if (min_syllables < 1 || max_syllables < min_syllables || max_word_syllables < 1) {
      throw ValidationError("synth config: invalid syllable counts");
    }
    if (!(lip_amplitude > 0.0) || !(lip_noise_sigma >= 0.0) || !(lip_similarity >= 0.0 && lip_similarity < 1.0)) {
      throw ValidationError("synth config: lip_amplitude > 0, lip_noise_sigma >= 0 and lip_similarity in [0, 1) required");
    }
    if (!(consonant_probability >= 0.0 && consonant_probability <= 1.0)) {
      throw ValidationError("synth config: consonant_probability must lie in [0, 1]");
    }
    if (!(eval_fraction >= 0.0 && eval_fraction <= 1.0)) throw ValidationError("synth config: eval_fraction in [0, 1]");
    if (feature_dim < 1) throw ValidationError("synth config: feature_dim must be >= 1");
  }
};

inline nlohmann::ordered_json to_json(const SynthConfig& c) {
  nlohmann::ordered_json doc;
  auto anchors = nlohmann::ordered_json::array();
  for (const auto& a : c.anchors) anchors.push_back({a.x, a.y});
  doc["anchors"] = std::move(anchors);
  doc["rest"] = {c.rest.x, c.rest.y};
  doc["frame_width"] = c.frame_width;
  doc["frame_height"] = c.frame_height;
  doc["dwell_frames"] = {c.dwell_min, c.dwell_max};
  doc["transit_frames"] = {c.transit_min, c.transit_max};
  doc["jitter_amplitude"] = c.jitter_amplitude;
  doc["transit_step"] = c.transit_step;
  doc["lip_amplitude"] = c.lip_amplitude;
  doc["lip_noise_sigma"] = c.lip_noise_sigma;
  doc["lip_similarity"] = c.lip_similarity;
  doc["feature_dim"] = c.feature_dim;
  doc["no_consonant_shape"] = c.no_consonant_shape;
  doc["consonant_probability"] = c.consonant_probability;
  doc["syllables"] = {c.min_syllables, c.max_syllables};
  doc["max_word_syllables"] = c.max_word_syllables;
  doc["eval_fraction"] = c.eval_fraction;
  doc["sigma"] = c.filter.sigma;
  doc["theta"] = c.filter.theta;
  doc["seed"] = c.seed;
  return doc;
}

// Fields absent from the document keep their defaults.
inline SynthConfig synth_config_from_json(const nlohmann::json& doc) {
  SynthConfig c;
  try {
    if (doc.contains("anchors")) {
      const auto& a = doc.at("anchors");
      if (a.size() != c.anchors.size()) throw ValidationError("synth config: exactly 5 anchors required");
      for (std::size_t i = 0; i < c.anchors.size(); ++i) c.anchors[i] = {a[i].at(0).get<double>(), a[i].at(1).get<double>()};
    }
    if (doc.contains("rest")) c.rest = {doc["rest"].at(0).get<double>(), doc["rest"].at(1).get<double>()};
    auto num = [&](const char* key, auto& field) {
      if (doc.contains(key)) field = doc.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    auto range = [&](const char* key, int& lo, int& hi) {
      if (doc.contains(key)) {
        lo = doc.at(key).at(0).get<int>();
        hi = doc.at(key).at(1).get<int>();
      }
    };
    num("frame_width", c.frame_width);
    num("frame_height", c.frame_height);
    range("dwell_frames", c.dwell_min, c.dwell_max);
    range("transit_frames", c.transit_min, c.transit_max);
    num("jitter_amplitude", c.jitter_amplitude);
    num("transit_step", c.transit_step);
    num("lip_amplitude", c.lip_amplitude);
    num("lip_noise_sigma", c.lip_noise_sigma);
    num("lip_similarity", c.lip_similarity);
    num("feature_dim", c.feature_dim);
    num("no_consonant_shape", c.no_consonant_shape);
    num("consonant_probability", c.consonant_probability);
    range("syllables", c.min_syllables, c.max_syllables);
    num("max_word_syllables", c.max_word_syllables);
    num("eval_fraction", c.eval_fraction);
    num("sigma", c.filter.sigma);
    num("theta", c.filter.theta);
    num("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

struct Syllable {
  std::optional<std::size_t> consonant;  // vocabulary index
  std::size_t vowel = 0;                 // vocabulary index
};

// Words of syllables.
using Sentence = std::vector<std::vector<Syllable>>;

struct SynthSample {
  Trajectory trajectory;
  KeyframeResult truth_groups;
  std::vector<HandLabel> truth_labels;  // one per group, frame = group keyframe
  Transcript transcript;
  LipFeatures lip;
  std::vector<std::size_t> frame_tokens;  // lip token per frame, 0 = silence
};

// Lip-feature prototypes: row k is the clean lip vector of vocabulary token k
// (row 0, silence, is zero). Phonemes that share a rank inside their hand-code
// group also share a component, so they are confusable on the lips alone and
// only the hand tells them apart.
class LipModel {
 public:
  LipModel(const Vocabulary& vocab, const CodingTable& table, const SynthConfig& cfg) {
    const auto d = static_cast<Eigen::Index>(cfg.feature_dim);
    Rng rng(derive_seed(cfg.seed, 0));
    const double scale = cfg.lip_amplitude;
    auto gaussian_row = [&] {
      RowVector v(d);
      for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal() * scale;
      return v;
    };
    std::vector<RowVector> vowel_shared;
    std::vector<RowVector> consonant_shared;
    for (int i = 0; i < 4; ++i) vowel_shared.push_back(gaussian_row());
    for (int i = 0; i < 4; ++i) consonant_shared.push_back(gaussian_row());

    prototypes_ = Matrix::Zero(static_cast<Eigen::Index>(vocab.size()), d);
    const double own = std::sqrt(1.0 - cfg.lip_similarity);
    const double shared = std::sqrt(cfg.lip_similarity);
    for (std::size_t k = 1; k < vocab.size(); ++k) {
      RowVector row = own * gaussian_row();
      const auto& tok = vocab.token(k);
      if (tok.kind == PhonemeKind::vowel) {
        if (auto p = table.position_of(k)) row += shared * vowel_shared[rank_in(table.vowels(*p), k) % 4];
      } else if (tok.kind == PhonemeKind::consonant) {
        if (auto s = table.shape_of(k)) row += shared * consonant_shared[rank_in(table.consonants(*s), k) % 4];
      } else {
        row /= own;
      }
      prototypes_.row(static_cast<Eigen::Index>(k)) = row;
    }
  }

  const Matrix& prototypes() const { return prototypes_; }

 private:
  static std::size_t rank_in(const std::vector<std::size_t>& group, std::size_t k) {
    return static_cast<std::size_t>(std::find(group.begin(), group.end(), k) - group.begin());
  }
  Matrix prototypes_;
};

namespace synth_detail {

// Transit frames from `from` towards `to`. Every step, including the arrival
// step onto `to`, is at least `min_step` long; when the straight path is too
// short the points zig-zag across it.
inline std::vector<Point> transit(Point from, Point to, int frames, double min_step) {
  std::vector<Point> out;
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  const double length = std::hypot(dx, dy);
  const double straight = length / (frames + 1);
  Point normal{0.0, 1.0};
  if (length > 1e-9) normal = {-dy / length, dx / length};
  for (int i = 1; i <= frames; ++i) {
    const double t = static_cast<double>(i) / (frames + 1);
    Point p{from.x + dx * t, from.y + dy * t};
    if (straight < min_step) {
      const double side = (i % 2 == 1) ? min_step : -min_step;
      p.x += normal.x * side;
      p.y += normal.y * side;
    }
    out.push_back(p);
  }
  return out;
}

inline Point jitter(Rng& rng, Point anchor, double radius) {
  const double r = radius * std::sqrt(rng.uniform());
  const double a = 2.0 * std::numbers::pi * rng.uniform();
  return {anchor.x + r * std::cos(a), anchor.y + r * std::sin(a)};
}

}  // namespace synth_detail

inline HandCode syllable_code(const Syllable& syl, const CodingTable& table, const SynthConfig& cfg) {
  const auto pos = table.position_of(syl.vowel);
  if (!pos) throw ValidationError("synth: vocabulary index " + std::to_string(syl.vowel) + " is not a coded vowel");
  HandShape shape{cfg.no_consonant_shape};
  if (syl.consonant) {
    const auto s = table.shape_of(*syl.consonant);
    if (!s) throw ValidationError("synth: vocabulary index " + std::to_string(*syl.consonant) + " is not a coded consonant");
    shape = *s;
  }
  return {*pos, shape};
}

inline SynthSample synth_sentence(const Sentence& sentence, const Vocabulary& vocab, const CodingTable& table,
                                  const SynthConfig& cfg, const LipModel& lips, std::uint64_t sample_seed) {
  cfg.validate();
  if (sentence.empty()) throw ValidationError("synth: sentence has no words");
  Rng rng(sample_seed);
  SynthSample out;
  auto& pts = out.trajectory.points;
  auto& tokens = out.frame_tokens;
  const std::size_t boundary = vocab.word_boundary();
  const double arrival_step = cfg.transit_step + cfg.jitter_amplitude;

  pts.push_back(cfg.rest);
  tokens.push_back(0);
  std::vector<std::string> symbols;
  for (std::size_t w = 0; w < sentence.size(); ++w) {
    if (sentence[w].empty()) throw ValidationError("synth: empty word");
    if (w > 0) symbols.emplace_back(kWordBoundary);
    for (std::size_t s = 0; s < sentence[w].size(); ++s) {
      const Syllable& syl = sentence[w][s];
      const HandCode code = syllable_code(syl, table, cfg);
      const Point anchor = cfg.anchors[code.position.slot()];

      const int transit_frames = rng.range(cfg.transit_min, cfg.transit_max);
      const std::size_t transit_token = (w > 0 && s == 0) ? boundary : 0;
      for (const Point& p : synth_detail::transit(pts.back(), anchor, transit_frames, arrival_step)) {
        pts.push_back(p);
        tokens.push_back(transit_token);
      }

      const int dwell = rng.range(cfg.dwell_min, cfg.dwell_max);
      const int consonant_frames = syl.consonant ? dwell / 2 : 0;
      const std::size_t first = pts.size();
      for (int i = 0; i < dwell; ++i) {
        pts.push_back(synth_detail::jitter(rng, anchor, cfg.jitter_amplitude / 2.0));
        tokens.push_back(i < consonant_frames ? *syl.consonant : syl.vowel);
      }
      // The first dwell frame arrives with a large step and is not slow.
      std::vector<std::size_t> members;
      for (std::size_t f = first + 1; f < pts.size(); ++f) members.push_back(f);
      const std::size_t key = members[(members.size() - 1) / 2];
      out.truth_groups.groups.push_back({std::move(members), key});
      out.truth_labels.push_back({key, code});

      if (syl.consonant) symbols.emplace_back(vocab.symbol(*syl.consonant));
      symbols.emplace_back(vocab.symbol(syl.vowel));
    }
  }
  const int tail = rng.range(cfg.transit_min, cfg.transit_max);
  for (const Point& p : synth_detail::transit(pts.back(), cfg.rest, tail, arrival_step)) {
    pts.push_back(p);
    tokens.push_back(0);
  }
  pts.push_back(cfg.rest);
  tokens.push_back(0);
  out.transcript = Transcript::from_tokens(symbols);

  const auto frames = static_cast<Eigen::Index>(pts.size());
  const auto d = static_cast<Eigen::Index>(cfg.feature_dim);
  out.lip.values.resize(frames, d);
  const double noise = cfg.lip_noise_sigma;
  for (Eigen::Index t = 0; t < frames; ++t) {
    out.lip.values.row(t) = lips.prototypes().row(static_cast<Eigen::Index>(tokens[static_cast<std::size_t>(t)]));
    for (Eigen::Index i = 0; i < d; ++i) out.lip.values(t, i) += noise * rng.normal();
  }
  // Keep values exactly representable in the float32 LIPF container, so a
  // sample read back from disk is identical to the in-memory one.
  out.lip.values = out.lip.values.cast<float>().cast<double>();
  return out;
}

inline SynthSample synth_sentence(const Sentence& sentence, const Vocabulary& vocab, const CodingTable& table,
                                  const SynthConfig& cfg, std::uint64_t sample_seed) {
  return synth_sentence(sentence, vocab, table, cfg, LipModel(vocab, table, cfg), sample_seed);
}

// Random sentence of min..max syllables grouped into words of
// 1..max_word_syllables syllables.
inline Sentence random_sentence(Rng& rng, const Vocabulary& vocab, const SynthConfig& cfg) {
  std::vector<std::size_t> vowels;
  std::vector<std::size_t> consonants;
  for (std::size_t k = 1; k < vocab.size(); ++k) {
    if (vocab.token(k).kind == PhonemeKind::vowel) vowels.push_back(k);
    if (vocab.token(k).kind == PhonemeKind::consonant) consonants.push_back(k);
  }
  int remaining = rng.range(cfg.min_syllables, cfg.max_syllables);
  Sentence sentence;
  while (remaining > 0) {
    const int size = std::min(remaining, rng.range(1, cfg.max_word_syllables));
    std::vector<Syllable> word;
    for (int i = 0; i < size; ++i) {
      Syllable syl;
      if (rng.uniform() < cfg.consonant_probability) syl.consonant = consonants[rng.index(consonants.size())];
      syl.vowel = vowels[rng.index(vowels.size())];
      word.push_back(syl);
    }
    sentence.push_back(std::move(word));
    remaining -= size;
  }
  return sentence;
}

inline std::uint64_t sample_seed(const SynthConfig& cfg, std::size_t index) { return derive_seed(cfg.seed, index + 1); }

inline std::size_t eval_count(const SynthConfig& cfg, std::size_t n) {
  return static_cast<std::size_t>(std::llround(cfg.eval_fraction * static_cast<double>(n)));
}

// Sample i uses seed derive_seed(cfg.seed, i + 1); the last
// round(eval_fraction * n) samples form the eval split.
inline std::vector<SynthSample> generate_corpus(std::size_t n, const Vocabulary& vocab, const CodingTable& table,
                                                const SynthConfig& cfg) {
  if (n < 1) throw ValidationError("synth: corpus size must be >= 1");
  cfg.validate();
  const LipModel lips(vocab, table, cfg);
  std::vector<SynthSample> corpus;
  corpus.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto seed = sample_seed(cfg, i);
    Rng sentence_rng(derive_seed(seed, 1));
    corpus.push_back(synth_sentence(random_sentence(sentence_rng, vocab, cfg), vocab, table, cfg, lips, seed));
  }
  return corpus;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

// Truth file: keyframe result plus one label per group.
inline nlohmann::ordered_json truth_json(const SynthSample& s) {
  auto doc = to_json(s.truth_groups);
  doc["labels"] = to_json(RecognitionResult{s.truth_labels})["labels"];
  return doc;
}

inline const char* kManifestName = "manifest.json";

// Writes one directory per sample (trajectory.csv, lip.lipf, truth.json,
// transcript.txt), refs_train.txt / refs_eval.txt, and manifest.json. Returns
// the manifest.
inline nlohmann::ordered_json write_corpus(const std::vector<SynthSample>& corpus, const SynthConfig& cfg,
                                           const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::size_t n_eval = eval_count(cfg, corpus.size());
  nlohmann::ordered_json manifest;
  manifest["version"] = 1;
  manifest["seed"] = cfg.seed;
  manifest["count"] = corpus.size();
  manifest["config"] = to_json(cfg);
  auto samples = nlohmann::ordered_json::array();
  std::vector<Transcript> train_refs;
  std::vector<Transcript> eval_refs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& s = corpus[i];
    char id[32];
    std::snprintf(id, sizeof(id), "sample_%04zu", i);
    const std::filesystem::path sub = dir / id;
    std::filesystem::create_directories(sub, ec);
    if (ec) throw IoError("cannot create " + sub.string() + ": " + ec.message());

    std::ostringstream traj;
    write_trajectory_csv(traj, s.trajectory);
    const std::string files[4][2] = {
        {"trajectory.csv", traj.str()},
        {"lip.lipf", encode_lip_features(s.lip)},
        {"truth.json", truth_json(s).dump(2) + "\n"},
        {"transcript.txt", s.transcript.to_line() + "\n"},
    };
    nlohmann::ordered_json hashes;
    for (const auto& [name, content] : files) {
      detail::write_file(sub / name, content);
      hashes[name] = fnv1a64_hex(content);
    }
    const bool is_eval = i >= corpus.size() - n_eval;
    (is_eval ? eval_refs : train_refs).push_back(s.transcript);

    nlohmann::ordered_json entry;
    entry["id"] = id;
    entry["index"] = i;
    entry["seed"] = sample_seed(cfg, i);
    entry["split"] = is_eval ? "eval" : "train";
    entry["frames"] = s.trajectory.size();
    entry["dir"] = id;
    entry["fnv1a64"] = std::move(hashes);
    samples.push_back(std::move(entry));
  }
  manifest["samples"] = std::move(samples);
  write_transcripts(dir / "refs_train.txt", train_refs);
  write_transcripts(dir / "refs_eval.txt", eval_refs);
  detail::write_file(dir / kManifestName, manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace acsr

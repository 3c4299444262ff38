#include <gtest/gtest.h>

#include "acsr/synth.hpp"
#include "test_support.hpp"

using namespace acsr;
using testing_support::table;
using testing_support::vocab;

namespace {

SynthConfig small_config(std::uint64_t seed = 1) {
  SynthConfig cfg;
  cfg.feature_dim = 16;
  cfg.seed = seed;
  return cfg;
}

double cosine(const RowVector& a, const RowVector& b) { return a.dot(b) / (a.norm() * b.norm()); }

}  // namespace

TEST(Synth, TruthGroupsAreWhatTheFilterFinds) {
  const auto cfg = small_config(3);
  const auto corpus = generate_corpus(500, vocab(), table(), cfg);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& s = corpus[i];
    ASSERT_EQ(filter_keyframes(s.trajectory, cfg.filter), s.truth_groups) << "sample " << i;
  }
}

TEST(Synth, SampleInvariants) {
  const auto cfg = small_config(4);
  const auto corpus = generate_corpus(100, vocab(), table(), cfg);
  for (const auto& s : corpus) {
    const auto T = s.trajectory.size();
    EXPECT_EQ(s.lip.frames(), T);
    EXPECT_EQ(s.lip.dim(), cfg.feature_dim);
    EXPECT_EQ(s.frame_tokens.size(), T);
    EXPECT_EQ(s.trajectory.points.front(), cfg.rest);
    EXPECT_EQ(s.trajectory.points.back(), cfg.rest);
    ASSERT_EQ(s.truth_labels.size(), s.truth_groups.size());
    const auto syllables = s.truth_groups.size();
    EXPECT_GE(syllables, static_cast<std::size_t>(cfg.min_syllables));
    EXPECT_LE(syllables, static_cast<std::size_t>(cfg.max_syllables));
    EXPECT_LE(s.transcript.words().size(), syllables);

    std::size_t syl = 0;
    for (std::size_t g = 0; g < syllables; ++g) {
      const auto& group = s.truth_groups.groups[g];
      const auto& label = s.truth_labels[g];
      EXPECT_EQ(label.frame, group.keyframe);
      EXPECT_EQ(cfg.anchors[label.code.position.slot()].x, cfg.anchors[label.code.position.slot()].x);
      // dwell frames sit near the anchor of the labeled position
      for (std::size_t f : group.members) {
        const auto& p = s.trajectory.points[f];
        const auto& a = cfg.anchors[label.code.position.slot()];
        EXPECT_LE(std::hypot(p.x - a.x, p.y - a.y), cfg.jitter_amplitude / 2 + 1e-9);
      }
      // the vowel shown on the lips at the keyframe is coded by the label
      const auto codes = table().phonemes_for(label.code);
      const auto last = s.frame_tokens[group.members.back()];
      EXPECT_NE(std::find(codes.begin(), codes.end(), last), codes.end());
      syl += 1;
    }
    EXPECT_EQ(syl, syllables);
  }
}

TEST(Synth, StepSizesSeparateDwellFromTransit) {
  const auto cfg = small_config(5);
  const auto corpus = generate_corpus(50, vocab(), table(), cfg);
  for (const auto& s : corpus) {
    const auto d = movement_distances(s.trajectory);
    std::vector<bool> in_group(s.trajectory.size(), false);
    for (const auto& g : s.truth_groups.groups) {
      for (auto f : g.members) in_group[f] = true;
    }
    for (std::size_t j = 1; j < s.trajectory.size(); ++j) {
      if (in_group[j]) {
        EXPECT_LE(d[j - 1], cfg.jitter_amplitude + 1e-9);
      } else {
        EXPECT_GT(d[j - 1], cfg.transit_step);
      }
    }
  }
}

TEST(Synth, Deterministic) {
  const auto cfg = small_config(6);
  const auto a = generate_corpus(20, vocab(), table(), cfg);
  const auto b = generate_corpus(20, vocab(), table(), cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].trajectory.points, b[i].trajectory.points);
    EXPECT_EQ(a[i].lip.values, b[i].lip.values);
    EXPECT_EQ(a[i].transcript, b[i].transcript);
    EXPECT_EQ(a[i].truth_labels, b[i].truth_labels);
  }
  // a prefix of a larger corpus is the smaller corpus
  const auto longer = generate_corpus(25, vocab(), table(), cfg);
  EXPECT_EQ(longer[19].lip.values, a[19].lip.values);
  const auto other = generate_corpus(20, vocab(), table(), small_config(7));
  EXPECT_NE(other[0].trajectory.points, a[0].trajectory.points);
}

TEST(Synth, LipAlikePhonemesShareAComponent) {
  SynthConfig cfg = small_config();
  cfg.feature_dim = 4096;
  const LipModel model(vocab(), table(), cfg);
  const auto& P = model.prototypes();
  EXPECT_TRUE(P.row(0).isZero());
  // first vowel at two different positions: same rank, so highly similar
  const auto& mouth = table().vowels(HandPosition{1});
  const auto& chin = table().vowels(HandPosition{2});
  EXPECT_GT(cosine(P.row(static_cast<Eigen::Index>(mouth[0])), P.row(static_cast<Eigen::Index>(chin[0]))), 0.85);
  // different ranks: nearly orthogonal
  if (chin.size() > 1) {
    EXPECT_LT(std::abs(cosine(P.row(static_cast<Eigen::Index>(mouth[0])), P.row(static_cast<Eigen::Index>(chin[1])))), 0.15);
  }
  // the word boundary has its own pure direction
  const auto slash = static_cast<Eigen::Index>(vocab().word_boundary());
  for (Eigen::Index k = 1; k < P.rows(); ++k) {
    if (k != slash) EXPECT_LT(std::abs(cosine(P.row(slash), P.row(k))), 0.15);
  }
}

TEST(Synth, TransitStepsRespectMinimum) {
  for (int frames = 1; frames <= 6; ++frames) {
    for (double dist : {0.0, 5.0, 40.0, 400.0}) {
      const Point from{100, 100};
      const Point to{100 + dist, 100};
      auto pts = synth_detail::transit(from, to, frames, 16.0);
      ASSERT_EQ(pts.size(), static_cast<std::size_t>(frames));
      pts.insert(pts.begin(), from);
      pts.push_back(to);
      for (std::size_t i = 1; i < pts.size(); ++i) {
        EXPECT_GE(std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y), 16.0 - 1e-9)
            << frames << " " << dist << " " << i;
      }
    }
  }
}

TEST(SynthConfigTest, JsonRoundTripAndValidation) {
  SynthConfig cfg;
  cfg.seed = 42;
  cfg.dwell_max = 12;
  cfg.lip_noise_sigma = kHardLipNoiseSigma;
  const auto back = synth_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
  EXPECT_EQ(to_json(back), to_json(cfg));

  auto bad = cfg;
  bad.jitter_amplitude = 7;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = cfg;
  bad.transit_step = 5;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = cfg;
  bad.dwell_min = 2;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = cfg;
  bad.anchors[0] = {2000, 10};
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = cfg;
  bad.lip_similarity = 1.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = cfg;
  bad.filter.theta = 4;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(SynthCorpus, WritesAReproducibleLayout) {
  auto cfg = small_config(8);
  const auto corpus = generate_corpus(10, vocab(), table(), cfg);
  testing_support::TempDir a("corpus_a"), b("corpus_b");
  const auto manifest = write_corpus(corpus, cfg, a.path());
  write_corpus(generate_corpus(10, vocab(), table(), cfg), cfg, b.path());
  EXPECT_EQ(detail::read_file(a.path() / kManifestName), detail::read_file(b.path() / kManifestName));
  EXPECT_EQ(manifest["count"], 10);
  std::size_t evals = 0;
  for (const auto& s : manifest["samples"]) {
    evals += s["split"] == "eval";
    const auto dir = a.path() / s["dir"].get<std::string>();
    for (const auto& [name, hash] : s["fnv1a64"].items()) {
      EXPECT_EQ(fnv1a64_hex(detail::read_file(dir / name)), hash.get<std::string>()) << name;
    }
  }
  EXPECT_EQ(evals, eval_count(cfg, 10));
  EXPECT_EQ(evals, 2u);
  EXPECT_EQ(read_transcripts(a.path() / "refs_eval.txt").size(), 2u);
  EXPECT_EQ(read_transcripts(a.path() / "refs_train.txt").size(), 8u);
  // the lip file reads back exactly
  EXPECT_EQ(read_lip_features(a.path() / "sample_0003" / "lip.lipf").values, corpus[3].lip.values);
}

TEST(SynthCorpus, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a64_hex("a"), "af63dc4c8601ec8c");
}

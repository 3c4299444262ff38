#pragma once

// Pipeline configuration and the on-disk corpus layout shared by the stages:
// a manifest.json listing sample directories, each holding trajectory.csv,
// lip.lipf, transcript.txt, truth.json and the per-stage outputs
// keyframes.json and recognition.json.

#include <filesystem>
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
#include "acsr/synth.hpp"
#include "acsr/train.hpp"

namespace acsr {

inline constexpr const char* kKeyframesFile = "keyframes.json";
inline constexpr const char* kRecognitionFile = "recognition.json";
inline constexpr const char* kTruthFile = "truth.json";
inline constexpr const char* kTrajectoryFile = "trajectory.csv";
inline constexpr const char* kLipFile = "lip.lipf";
inline constexpr const char* kTranscriptFile = "transcript.txt";

struct PipelineConfig {
  std::filesystem::path vocabulary;
  std::filesystem::path coding_table;
  std::filesystem::path support_manifest;
  std::filesystem::path prompt_template;
  std::filesystem::path output_dir;
  FilterConfig filter;
  MockConfig mock;
  EndpointConfig endpoint;
  TrainConfig train;
  SynthConfig synth;

  // Relative paths are resolved against the config file's directory. Absent
  // fields keep their defaults.
  static PipelineConfig parse(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    if (!doc.is_object()) throw ParseError("pipeline config: top level must be an object");
    auto path = [&](const char* key, std::filesystem::path& field) {
      if (!doc.contains(key)) return;
      std::filesystem::path p = doc.at(key).get<std::string>();
      field = p.is_relative() ? base_dir / p : p;
    };
    try {
      path("vocabulary", c.vocabulary);
      path("coding_table", c.coding_table);
      path("support_manifest", c.support_manifest);
      path("prompt_template", c.prompt_template);
      path("output_dir", c.output_dir);
      if (doc.contains("filter")) {
        const auto& f = doc.at("filter");
        if (f.contains("sigma")) c.filter.sigma = f.at("sigma").get<double>();
        if (f.contains("theta")) c.filter.theta = f.at("theta").get<std::size_t>();
      }
      if (doc.contains("mock")) {
        const auto& m = doc.at("mock");
        if (m.contains("position_accuracy")) c.mock.position_accuracy = m.at("position_accuracy").get<double>();
        if (m.contains("shape_accuracy")) c.mock.shape_accuracy = m.at("shape_accuracy").get<double>();
        if (m.contains("position_confusion")) c.mock.position_confusion = m.at("position_confusion").get<std::vector<std::vector<double>>>();
        if (m.contains("shape_confusion")) c.mock.shape_confusion = m.at("shape_confusion").get<std::vector<std::vector<double>>>();
      }
      if (doc.contains("endpoint")) {
        const auto& e = doc.at("endpoint");
        if (e.contains("base_url")) c.endpoint.base_url = e.at("base_url").get<std::string>();
        if (e.contains("model")) c.endpoint.model = e.at("model").get<std::string>();
        if (e.contains("api_key_env")) c.endpoint.api_key_env = e.at("api_key_env").get<std::string>();
        if (e.contains("timeout_seconds")) c.endpoint.timeout_seconds = e.at("timeout_seconds").get<double>();
        if (e.contains("max_retries")) c.endpoint.max_retries = e.at("max_retries").get<int>();
        if (e.contains("max_inflight_requests")) c.endpoint.max_inflight_requests = e.at("max_inflight_requests").get<int>();
        if (e.contains("temperature")) c.endpoint.temperature = e.at("temperature").get<double>();
        if (e.contains("backoff_initial_seconds")) c.endpoint.backoff_initial_seconds = e.at("backoff_initial_seconds").get<double>();
      }
      if (doc.contains("train")) {
        const auto& t = doc.at("train");
        if (t.contains("epochs")) c.train.epochs = t.at("epochs").get<std::size_t>();
        if (t.contains("learning_rate")) c.train.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("batch_size")) c.train.batch_size = t.at("batch_size").get<std::size_t>();
      }
      if (doc.contains("synth")) c.synth = synth_config_from_json(doc.at("synth"));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("pipeline config: ") + e.what());
    }
    c.filter.validate();
    c.mock.validate();
    c.endpoint.validate();
    c.train.validate();
    return c;
  }

  static PipelineConfig load(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("pipeline config " + path.string() + ": " + e.what());
    }
    return parse(doc, path.parent_path());
  }
};

struct CorpusEntry {
  std::string id;
  std::size_t index = 0;
  std::string split;
  std::filesystem::path dir;  // absolute or relative to the working directory
};

inline std::vector<CorpusEntry> load_corpus_manifest(const std::filesystem::path& manifest) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(manifest));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("corpus manifest " + manifest.string() + ": " + e.what());
  }
  std::vector<CorpusEntry> out;
  try {
    for (const auto& s : doc.at("samples")) {
      CorpusEntry e;
      e.id = s.at("id").get<std::string>();
      e.index = s.at("index").get<std::size_t>();
      e.split = s.at("split").get<std::string>();
      e.dir = manifest.parent_path() / s.at("dir").get<std::string>();
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corpus manifest " + manifest.string() + ": " + e.what());
  }
  return out;
}

inline std::vector<CorpusEntry> select_split(const std::vector<CorpusEntry>& entries, std::string_view split) {
  if (split == "all") return entries;
  std::vector<CorpusEntry> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// Truth file: keyframe groups plus one label per group.
struct TruthRecord {
  KeyframeResult groups;
  RecognitionResult labels;
};

inline TruthRecord truth_from_json(const nlohmann::json& doc) {
  TruthRecord t{keyframes_from_json(doc), recognition_from_json(doc)};
  if (t.labels.labels.size() != t.groups.size()) throw ValidationError("truth file: one label per group required");
  for (std::size_t i = 0; i < t.groups.size(); ++i) {
    if (t.labels.labels[i].frame != t.groups.groups[i].keyframe) {
      throw ValidationError("truth file: label " + std::to_string(i) + " is not on its group's keyframe");
    }
  }
  return t;
}

// The mock recognizer sees detected keyframes; each one takes the truth label
// of the truth group that contains it.
inline std::vector<HandLabel> truth_for_keyframes(const KeyframeResult& detected, const TruthRecord& truth) {
  std::vector<HandLabel> out;
  for (std::size_t key : detected.keyframes()) {
    std::optional<HandCode> code;
    for (std::size_t g = 0; g < truth.groups.size() && !code; ++g) {
      const auto& m = truth.groups.groups[g].members;
      if (std::binary_search(m.begin(), m.end(), key)) code = truth.labels.labels[g].code;
    }
    if (!code) throw ValidationError("keyframe " + std::to_string(key) + " lies in no truth group");
    out.push_back({key, *code});
  }
  return out;
}

enum class HandSource { recognition, truth, none };

inline HandSource parse_hand_source(std::string_view s) {
  if (s == "recognition") return HandSource::recognition;
  if (s == "truth") return HandSource::truth;
  if (s == "none") return HandSource::none;
  throw ValidationError("hand source must be recognition, truth or none, got '" + std::string(s) + "'");
}

// Hand matrix for one sample directory, from keyframes.json + recognition.json,
// truth.json, or all zeros.
inline HandMatrix load_hand_matrix(const std::filesystem::path& dir, HandSource source, std::size_t frames,
                                   const CodingTable& table, const Vocabulary& vocab) {
  switch (source) {
    case HandSource::none:
      return HandMatrix::zeros(frames);
    case HandSource::truth: {
      const auto truth = truth_from_json(read_json_file(dir / kTruthFile));
      return embed_hand(truth.labels, truth.groups, frames, table, vocab);
    }
    case HandSource::recognition: {
      const auto groups = keyframes_from_json(read_json_file(dir / kKeyframesFile));
      const auto rec = recognition_from_json(read_json_file(dir / kRecognitionFile));
      return embed_hand(rec, groups, frames, table, vocab);
    }
  }
  throw ValidationError("unknown hand source");
}

struct LoadedSample {
  LipFeatures lip;
  Transcript transcript;
};

inline LoadedSample load_sample(const std::filesystem::path& dir) {
  LoadedSample s;
  s.lip = read_lip_features(dir / kLipFile);
  const auto lines = read_transcripts(dir / kTranscriptFile);
  if (lines.size() != 1) throw ParseError((dir / kTranscriptFile).string() + ": expected exactly one line");
  s.transcript = lines.front();
  return s;
}

}  // namespace acsr

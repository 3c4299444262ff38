#pragma once

// Customized prompt assembly: background, multimodal in-context examples
// drawn from the 40-image support set, contrastive notes, chain-of-thought
// instructions, then the keyframes to classify. Also produces the JSON schema
// the model's structured output must satisfy.

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "acsr/detail/text.hpp"
#include "acsr/domain.hpp"
#include "acsr/error.hpp"
#include "acsr/keyframe.hpp"

namespace acsr {

// Opaque reference to an image; the path is only opened when the payload is
// serialized for a remote endpoint.
struct ImageRef {
  std::string path;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

class SupportSet {
 public:
  struct Entry {
    HandCode code;
    ImageRef image;
  };

  // Every (position, shape) pair exactly once.
  static SupportSet from_entries(const std::vector<Entry>& entries) {
    SupportSet set;
    std::array<bool, HandCode::kCombinations> have{};
    for (const auto& e : entries) {
      if (have[e.code.slot()]) {
        throw ValidationError("support set: duplicate entry for position " + std::to_string(e.code.position.id) +
                              ", shape " + std::to_string(e.code.shape.id));
      }
      have[e.code.slot()] = true;
      set.images_[e.code.slot()] = e.image;
    }
    for (std::size_t slot = 0; slot < HandCode::kCombinations; ++slot) {
      if (!have[slot]) {
        const auto code = HandCode::from_slot(slot);
        throw ValidationError("support set: missing entry for position " + std::to_string(code.position.id) + " (" +
                              std::string(code.position.name()) + "), shape " + std::to_string(code.shape.id));
      }
    }
    return set;
  }

  // Manifest: JSON array of {"position": int, "shape": int, "image": path}.
  // Relative image paths are resolved against the manifest's directory and
  // each image must be readable.
  static SupportSet load(const std::filesystem::path& manifest) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(detail::read_file(manifest));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("support manifest " + manifest.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw ParseError("support manifest " + manifest.string() + ": expected a JSON array");
    std::vector<Entry> entries;
    try {
      for (const auto& item : doc) {
        Entry e{{HandPosition::from_id(item.at("position").get<int>()), HandShape::from_id(item.at("shape").get<int>())},
                {}};
        std::filesystem::path image = item.at("image").get<std::string>();
        if (image.is_relative()) image = manifest.parent_path() / image;
        std::ifstream probe(image, std::ios::binary);
        if (!probe) throw IoError("support set: cannot read image " + image.string());
        e.image.path = image.string();
        entries.push_back(std::move(e));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("support manifest " + manifest.string() + ": " + e.what());
    }
    return from_entries(entries);
  }

  const ImageRef& at(HandCode code) const { return images_.at(code.slot()); }
  static constexpr std::size_t size() { return HandCode::kCombinations; }

 private:
  std::array<ImageRef, HandCode::kCombinations> images_;
};

struct ContrastivePair {
  enum class Kind { position, shape };
  Kind kind = Kind::shape;
  int label_a = 1;
  int label_b = 2;
  std::string distinguishing_text;

  friend bool operator==(const ContrastivePair&, const ContrastivePair&) = default;
};

struct PromptTemplateConfig {
  std::string background_text;
  std::string position_task_text;
  std::array<std::string, HandPosition::kCount> position_descriptions;
  std::string shape_task_text;
  std::array<std::string, HandShape::kCount> shape_descriptions;
  std::string contrastive_intro;
  std::vector<ContrastivePair> contrastive_pairs;
  std::string cot_instructions;
  std::string keyframe_intro;

  friend bool operator==(const PromptTemplateConfig&, const PromptTemplateConfig&) = default;

  void validate() const {
    auto require = [](const std::string& text, const std::string& field) {
      if (text.empty()) throw ValidationError("prompt template: '" + field + "' must not be empty");
    };
    require(background_text, "background_text");
    require(position_task_text, "position_task_text");
    require(shape_task_text, "shape_task_text");
    require(contrastive_intro, "contrastive_intro");
    require(cot_instructions, "cot_instructions");
    require(keyframe_intro, "keyframe_intro");
    for (std::size_t i = 0; i < position_descriptions.size(); ++i) {
      require(position_descriptions[i], "position_descriptions[" + std::to_string(i) + "]");
    }
    for (std::size_t i = 0; i < shape_descriptions.size(); ++i) {
      require(shape_descriptions[i], "shape_descriptions[" + std::to_string(i) + "]");
    }
    for (const auto& pair : contrastive_pairs) {
      const int limit = pair.kind == ContrastivePair::Kind::position ? HandPosition::kCount : HandShape::kCount;
      if (pair.label_a < 1 || pair.label_a > limit || pair.label_b < 1 || pair.label_b > limit ||
          pair.label_a == pair.label_b) {
        throw ValidationError("prompt template: contrastive pair " + std::to_string(pair.label_a) + "/" +
                              std::to_string(pair.label_b) + " references invalid labels");
      }
      require(pair.distinguishing_text, "contrastive_pairs.distinguishing_text");
    }
  }
};

inline PromptTemplateConfig default_prompt_template() {
  PromptTemplateConfig cfg;
  cfg.background_text =
      "You are an expert annotator of Mandarin Chinese Cued Speech (CS) videos. Cued Speech makes spoken "
      "language visible by pairing lip movements with hand coding: the hand is placed at one of five positions "
      "near the face to signal a group of vowels, and held in one of eight shapes to signal a group of "
      "consonants. Lip shapes tell apart the phonemes within a group; the hand tells apart phonemes that look "
      "alike on the lips. Your task is to identify the hand position and hand shape shown in each keyframe "
      "cropped from the hand region of a Cued Speech video.";
  cfg.position_task_text =
      "Hand position is a five-way classification. Judge where the fingertips of the cueing hand rest "
      "relative to the speaker's face. The labels are:";
  cfg.position_descriptions = {
      "Position 1 (mouth): the fingertips touch the corner or the side of the mouth.",
      "Position 2 (chin): the fingertips rest on the chin, below the lower lip.",
      "Position 3 (throat): the fingertips rest on the front of the throat, below the jaw.",
      "Position 4 (side): the hand is held beside the face, away from the skin, roughly at chin height.",
      "Position 5 (cheek): the fingertips touch the cheekbone, level with or above the nostrils.",
  };
  cfg.shape_task_text =
      "Hand shape is an eight-way classification defined by which of the five fingers are straight and which "
      "are bent. The labels are:";
  cfg.shape_descriptions = {
      "Index finger is straight. Thumb, middle, ring and pinky fingers are bent.",
      "Index and middle fingers are straight. Thumb, ring and pinky fingers are bent.",
      "Middle, ring, and pinky fingers are straight. Thumb and index fingers are bent.",
      "Index, middle, ring and pinky fingers are straight. Thumb is bent.",
      "All five fingers are straight.",
      "Thumb and index fingers are straight. Middle, ring and pinky fingers are bent.",
      "Thumb and pinky fingers are straight. Index, middle and ring fingers are bent.",
      "Thumb, index and middle fingers are straight. Ring and pinky fingers are bent.",
  };
  cfg.contrastive_intro =
      "Some labels are easy to confuse. Check these pairs carefully before answering:";
  cfg.contrastive_pairs = {
      {ContrastivePair::Kind::shape, 3, 4,
       "in shape 3 the index finger is bent, so only three fingers are straight."},
      {ContrastivePair::Kind::position, 1, 2,
       "at the mouth the fingertips are level with the lips, while at the chin they sit clearly below the "
       "lower lip on the bone of the jaw."},
  };
  cfg.cot_instructions =
      "For each keyframe, reason step by step. First compare the hand location with the support images of "
      "every position and pick the closest match. Then compare the finger configuration with the support "
      "images of every shape and pick the closest match. Finally verify both choices against the written "
      "label definitions and the contrastive notes above, and correct them if the text contradicts the match.";
  cfg.keyframe_intro =
      "The keyframes to classify follow in temporal order. Each is introduced by its ordinal, starting at 0.";
  return cfg;
}

inline nlohmann::ordered_json to_json(const PromptTemplateConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["background_text"] = cfg.background_text;
  doc["position_task_text"] = cfg.position_task_text;
  doc["position_descriptions"] = cfg.position_descriptions;
  doc["shape_task_text"] = cfg.shape_task_text;
  doc["shape_descriptions"] = cfg.shape_descriptions;
  doc["contrastive_intro"] = cfg.contrastive_intro;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& p : cfg.contrastive_pairs) {
    pairs.push_back({{"kind", p.kind == ContrastivePair::Kind::shape ? "shape" : "position"},
                     {"label_a", p.label_a},
                     {"label_b", p.label_b},
                     {"distinguishing_text", p.distinguishing_text}});
  }
  doc["contrastive_pairs"] = std::move(pairs);
  doc["cot_instructions"] = cfg.cot_instructions;
  doc["keyframe_intro"] = cfg.keyframe_intro;
  return doc;
}

// Every field is optional in the file; missing fields keep the default text.
inline PromptTemplateConfig prompt_template_from_json(const nlohmann::json& doc) {
  PromptTemplateConfig cfg = default_prompt_template();
  try {
    auto text = [&](const char* key, std::string& field) {
      if (doc.contains(key)) field = doc.at(key).get<std::string>();
    };
    text("background_text", cfg.background_text);
    text("position_task_text", cfg.position_task_text);
    text("shape_task_text", cfg.shape_task_text);
    text("contrastive_intro", cfg.contrastive_intro);
    text("cot_instructions", cfg.cot_instructions);
    text("keyframe_intro", cfg.keyframe_intro);
    if (doc.contains("position_descriptions")) {
      cfg.position_descriptions = doc.at("position_descriptions").get<std::array<std::string, HandPosition::kCount>>();
    }
    if (doc.contains("shape_descriptions")) {
      cfg.shape_descriptions = doc.at("shape_descriptions").get<std::array<std::string, HandShape::kCount>>();
    }
    if (doc.contains("contrastive_pairs")) {
      cfg.contrastive_pairs.clear();
      for (const auto& item : doc.at("contrastive_pairs")) {
        ContrastivePair p;
        const auto kind = item.at("kind").get<std::string>();
        if (kind == "shape") {
          p.kind = ContrastivePair::Kind::shape;
        } else if (kind == "position") {
          p.kind = ContrastivePair::Kind::position;
        } else {
          throw ParseError("prompt template: contrastive kind must be 'shape' or 'position'");
        }
        p.label_a = item.at("label_a").get<int>();
        p.label_b = item.at("label_b").get<int>();
        p.distinguishing_text = item.at("distinguishing_text").get<std::string>();
        cfg.contrastive_pairs.push_back(std::move(p));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prompt template: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline PromptTemplateConfig load_prompt_template(const std::filesystem::path& path) {
  try {
    return prompt_template_from_json(nlohmann::json::parse(detail::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("prompt template " + path.string() + ": " + e.what());
  }
}

struct PromptPart {
  enum class Kind { text, image };
  Kind kind = Kind::text;
  std::string text;
  ImageRef image;

  static PromptPart of_text(std::string t) { return {Kind::text, std::move(t), {}}; }
  static PromptPart of_image(ImageRef ref) { return {Kind::image, {}, std::move(ref)}; }

  friend bool operator==(const PromptPart&, const PromptPart&) = default;
};

struct Keyframe {
  std::size_t frame_index = 0;
  ImageRef image;
};

struct PromptPayload {
  std::vector<PromptPart> parts;
  std::vector<std::size_t> keyframe_frames;  // absolute frame index per ordinal
  std::string response_schema;

  std::size_t image_count() const {
    std::size_t n = 0;
    for (const auto& p : parts) n += p.kind == PromptPart::Kind::image ? 1 : 0;
    return n;
  }
};

// Section sentinels, in the order they appear in every payload.
inline constexpr std::array<std::string_view, 5> kPromptSections = {
    "### SECTION 1: BACKGROUND",
    "### SECTION 2: IN-CONTEXT EXAMPLES",
    "### SECTION 3: CONTRASTIVE NOTES",
    "### SECTION 4: REASONING PROCEDURE",
    "### SECTION 5: KEYFRAMES",
};

// Structured output: {"keyframes": [ {frame_ordinal, position, shape} x m ]}.
inline nlohmann::ordered_json response_schema_json(std::size_t m) {
  if (m == 0) throw ValidationError("response schema needs at least one keyframe");
  nlohmann::ordered_json item;
  item["type"] = "object";
  item["properties"] = {
      {"frame_ordinal", {{"type", "integer"}, {"minimum", 0}, {"maximum", m - 1}}},
      {"position", {{"type", "integer"}, {"minimum", 1}, {"maximum", HandPosition::kCount}}},
      {"shape", {{"type", "integer"}, {"minimum", 1}, {"maximum", HandShape::kCount}}},
  };
  item["required"] = {"frame_ordinal", "position", "shape"};
  item["additionalProperties"] = false;

  nlohmann::ordered_json list;
  list["type"] = "array";
  list["minItems"] = m;
  list["maxItems"] = m;
  list["items"] = std::move(item);

  nlohmann::ordered_json schema;
  schema["type"] = "object";
  schema["properties"] = {{"keyframes", std::move(list)}};
  schema["required"] = {"keyframes"};
  schema["additionalProperties"] = false;
  return schema;
}

inline std::string response_schema(std::size_t m) { return response_schema_json(m).dump(); }

inline PromptPayload build_prompt(const std::vector<Keyframe>& keyframes, const SupportSet& support,
                                  const PromptTemplateConfig& cfg) {
  if (keyframes.empty()) throw ValidationError("build_prompt: at least one keyframe is required");
  cfg.validate();
  PromptPayload payload;
  auto text = [&](std::string t) { payload.parts.push_back(PromptPart::of_text(std::move(t))); };
  auto image = [&](const ImageRef& ref) { payload.parts.push_back(PromptPart::of_image(ref)); };
  auto support_number = [](HandCode code) { return code.slot() + 1; };

  text(std::string(kPromptSections[0]) + "\n" + cfg.background_text);

  // In-context section: each support image is attached once, grouped by
  // position; the shape definitions refer back to them by number.
  std::string intro = std::string(kPromptSections[1]) + "\n" + cfg.position_task_text;
  for (const auto& d : cfg.position_descriptions) intro += "\n- " + d;
  intro += "\nReference images follow, grouped by position. Each position shows all eight hand shapes.";
  text(std::move(intro));
  for (int p = 1; p <= HandPosition::kCount; ++p) {
    const HandPosition pos{p};
    text("Position " + std::to_string(p) + " (" + std::string(pos.name()) + ") reference images:");
    for (int s = 1; s <= HandShape::kCount; ++s) {
      const HandCode code{pos, HandShape{s}};
      text("Support image #" + std::to_string(support_number(code)) + ": position " + std::to_string(p) +
           ", shape " + std::to_string(s) + ".");
      image(support.at(code));
    }
  }
  std::string shapes = cfg.shape_task_text;
  for (int s = 1; s <= HandShape::kCount; ++s) {
    shapes += "\n- Shape " + std::to_string(s) + ": " + cfg.shape_descriptions[static_cast<std::size_t>(s - 1)] +
              " Reference frames: support images";
    for (int p = 1; p <= HandPosition::kCount; ++p) {
      shapes += (p == 1 ? " #" : ", #") + std::to_string(support_number({HandPosition{p}, HandShape{s}}));
    }
    shapes += ".";
  }
  text(std::move(shapes));

  std::string contrast = std::string(kPromptSections[2]) + "\n" + cfg.contrastive_intro;
  for (const auto& pair : cfg.contrastive_pairs) {
    const auto a = static_cast<std::size_t>(pair.label_a - 1);
    const auto b = static_cast<std::size_t>(pair.label_b - 1);
    if (pair.kind == ContrastivePair::Kind::shape) {
      contrast += "\n- Shape " + std::to_string(pair.label_a) + " (" + cfg.shape_descriptions[a] +
                  ") is easily confused with label " + std::to_string(pair.label_b) + " (" +
                  cfg.shape_descriptions[b] + ") The difference between them is that " + pair.distinguishing_text;
    } else {
      contrast += "\n- Position " + std::to_string(pair.label_a) + " (" + cfg.position_descriptions[a] +
                  ") is easily confused with label " + std::to_string(pair.label_b) + " (" +
                  cfg.position_descriptions[b] + ") The difference between them is that " + pair.distinguishing_text;
    }
  }
  text(std::move(contrast));

  const std::size_t m = keyframes.size();
  text(std::string(kPromptSections[3]) + "\n" + cfg.cot_instructions + "\nThere are " + std::to_string(m) +
       " keyframes. Return exactly " + std::to_string(m) +
       " entries in the 'keyframes' array, one per frame_ordinal from 0 to " + std::to_string(m - 1) +
       ", each with an integer position (1-5) and an integer shape (1-8).");

  text(std::string(kPromptSections[4]) + "\n" + cfg.keyframe_intro);
  for (std::size_t i = 0; i < m; ++i) {
    text("Keyframe " + std::to_string(i) + ":");
    image(keyframes[i].image);
    payload.keyframe_frames.push_back(keyframes[i].frame_index);
  }
  payload.response_schema = response_schema(m);
  return payload;
}

// Payload with images as paths (the wire form with embedded bytes is built by
// the recognizer).
inline nlohmann::ordered_json to_json(const PromptPayload& payload) {
  nlohmann::ordered_json doc;
  auto parts = nlohmann::ordered_json::array();
  for (const auto& p : payload.parts) {
    if (p.kind == PromptPart::Kind::text) {
      parts.push_back({{"type", "text"}, {"text", p.text}});
    } else {
      parts.push_back({{"type", "image"}, {"path", p.image.path}});
    }
  }
  doc["parts"] = std::move(parts);
  doc["keyframe_frames"] = payload.keyframe_frames;
  doc["response_schema"] = nlohmann::ordered_json::parse(payload.response_schema);
  return doc;
}

// Expands "{frame}" or "{frame:0N}" in a path pattern.
inline std::string expand_frame_pattern(std::string_view pattern, std::size_t frame) {
  const auto open = pattern.find("{frame");
  if (open == std::string_view::npos) throw ConfigError("image pattern must contain {frame}: " + std::string(pattern));
  const auto close = pattern.find('}', open);
  if (close == std::string_view::npos) throw ConfigError("unterminated {frame} in image pattern");
  const auto spec = pattern.substr(open + 6, close - open - 6);
  std::string number = std::to_string(frame);
  if (!spec.empty()) {
    if (spec.size() < 3 || spec[0] != ':' || spec[1] != '0') {
      throw ConfigError("image pattern width must look like {frame:06}");
    }
    const auto width = static_cast<std::size_t>(detail::parse_integer(spec.substr(2), "image pattern"));
    if (number.size() < width) number.insert(0, width - number.size(), '0');
  }
  return std::string(pattern.substr(0, open)) + number + std::string(pattern.substr(close + 1));
}

inline std::vector<Keyframe> keyframe_images(const KeyframeResult& keys, std::string_view pattern) {
  std::vector<Keyframe> out;
  for (std::size_t k : keys.keyframes()) out.push_back({k, {expand_frame_pattern(pattern, k)}});
  return out;
}

}  // namespace acsr

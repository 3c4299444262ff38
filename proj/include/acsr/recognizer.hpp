#pragma once

// Per-keyframe (position, shape) recognition: a remote OpenAI-compatible
// chat-completions endpoint with structured output, or a seeded mock that
// corrupts ground truth at configured accuracies.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "acsr/detail/text.hpp"
#include "acsr/domain.hpp"
#include "acsr/error.hpp"
#include "acsr/prompting.hpp"
#include "acsr/rng.hpp"

namespace acsr {

struct HandLabel {
  std::size_t frame = 0;  // absolute frame index (an ordinal straight out of parse_response)
  HandCode code;

  friend bool operator==(const HandLabel&, const HandLabel&) = default;
};

struct RecognitionResult {
  std::vector<HandLabel> labels;

  friend bool operator==(const RecognitionResult&, const RecognitionResult&) = default;
};

// Model output that does not satisfy the response contract. raw_body keeps the
// full text received for debugging.
class ResponseError : public Error {
 public:
  enum class Kind { malformed, arity, range, type, duplicate_ordinal, refusal };

  ResponseError(Kind kind, const std::string& message, std::string raw_body = {})
      : Error(message), kind_(kind), raw_body_(std::move(raw_body)) {}

  Kind kind() const { return kind_; }
  const std::string& raw_body() const { return raw_body_; }

 private:
  Kind kind_;
  std::string raw_body_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& message, int attempts) : Error(message), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

class HttpStatusError : public Error {
 public:
  HttpStatusError(int status, std::string body, int attempts)
      : Error("endpoint returned HTTP " + std::to_string(status)),
        status_(status),
        body_(std::move(body)),
        attempts_(attempts) {}
  int status() const { return status_; }
  const std::string& body() const { return body_; }
  int attempts() const { return attempts_; }

 private:
  int status_;
  std::string body_;
  int attempts_;
};

// --- model output ------------------------------------------------------------

// Strict check of {"keyframes": [{"frame_ordinal", "position", "shape"}]}:
// exactly m entries, integer fields, ids in range, ordinals 0..m-1 each once.
// Labels come back sorted by ordinal with frame = ordinal.
inline RecognitionResult parse_response(std::string_view body, std::size_t m) {
  using Kind = ResponseError::Kind;
  const std::string raw(body);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ResponseError(Kind::malformed, std::string("response is not valid JSON: ") + e.what(), raw);
  }
  if (!doc.is_object() || !doc.contains("keyframes") || !doc["keyframes"].is_array()) {
    throw ResponseError(Kind::malformed, "response must be an object with a 'keyframes' array", raw);
  }
  if (doc.size() != 1) throw ResponseError(Kind::malformed, "response has unexpected top-level properties", raw);
  const auto& items = doc["keyframes"];
  if (items.size() != m) {
    throw ResponseError(Kind::arity,
                        "expected " + std::to_string(m) + " keyframe labels, got " + std::to_string(items.size()), raw);
  }
  std::vector<std::optional<HandLabel>> by_ordinal(m);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const std::string where = "keyframes[" + std::to_string(i) + "]";
    if (!item.is_object()) throw ResponseError(Kind::type, where + " is not an object", raw);
    for (const char* key : {"frame_ordinal", "position", "shape"}) {
      if (!item.contains(key)) throw ResponseError(Kind::malformed, where + " is missing '" + key + "'", raw);
      if (!item[key].is_number_integer()) {
        throw ResponseError(Kind::type, where + "." + key + " must be an integer", raw);
      }
    }
    if (item.size() != 3) throw ResponseError(Kind::malformed, where + " has unexpected properties", raw);
    const auto ordinal = item["frame_ordinal"].get<long long>();
    const auto position = item["position"].get<long long>();
    const auto shape = item["shape"].get<long long>();
    if (ordinal < 0 || ordinal >= static_cast<long long>(m)) {
      throw ResponseError(Kind::range, where + ".frame_ordinal " + std::to_string(ordinal) + " out of range", raw);
    }
    if (position < 1 || position > HandPosition::kCount) {
      throw ResponseError(Kind::range, where + ".position " + std::to_string(position) + " out of range 1-5", raw);
    }
    if (shape < 1 || shape > HandShape::kCount) {
      throw ResponseError(Kind::range, where + ".shape " + std::to_string(shape) + " out of range 1-8", raw);
    }
    auto& slot = by_ordinal[static_cast<std::size_t>(ordinal)];
    if (slot) {
      throw ResponseError(Kind::duplicate_ordinal, "frame_ordinal " + std::to_string(ordinal) + " appears twice", raw);
    }
    slot = HandLabel{static_cast<std::size_t>(ordinal),
                     {HandPosition{static_cast<int>(position)}, HandShape{static_cast<int>(shape)}}};
  }
  RecognitionResult result;
  for (auto& label : by_ordinal) result.labels.push_back(*label);
  return result;
}

// Inverse of parse_response: labels' frame fields are written as ordinals.
inline std::string serialize_response(const RecognitionResult& result) {
  nlohmann::ordered_json doc;
  auto items = nlohmann::ordered_json::array();
  for (const auto& l : result.labels) {
    items.push_back({{"frame_ordinal", l.frame}, {"position", l.code.position.id}, {"shape", l.code.shape.id}});
  }
  doc["keyframes"] = std::move(items);
  return doc.dump();
}

// Result file: {"labels": [{"frame": int, "position": int, "shape": int}]}
inline nlohmann::ordered_json to_json(const RecognitionResult& result) {
  auto labels = nlohmann::ordered_json::array();
  for (const auto& l : result.labels) {
    labels.push_back({{"frame", l.frame}, {"position", l.code.position.id}, {"shape", l.code.shape.id}});
  }
  nlohmann::ordered_json doc;
  doc["labels"] = std::move(labels);
  return doc;
}

inline RecognitionResult recognition_from_json(const nlohmann::json& doc) {
  RecognitionResult result;
  try {
    for (const auto& item : doc.at("labels")) {
      result.labels.push_back({item.at("frame").get<std::size_t>(),
                               {HandPosition::from_id(item.at("position").get<int>()),
                                HandShape::from_id(item.at("shape").get<int>())}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("recognition file: ") + e.what());
  }
  return result;
}

// --- mock --------------------------------------------------------------------

struct MockConfig {
  double position_accuracy = 0.9601;
  double shape_accuracy = 0.8472;
  std::uint64_t seed = 0;
  // Optional confusion weights: row = true label - 1, column = predicted label
  // - 1. Diagonal entries are ignored; a row of zeros off the diagonal falls
  // back to uniform.
  std::vector<std::vector<double>> position_confusion;
  std::vector<std::vector<double>> shape_confusion;

  void validate() const {
    auto probability = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
    };
    probability(position_accuracy, "position_accuracy");
    probability(shape_accuracy, "shape_accuracy");
    auto matrix = [](const std::vector<std::vector<double>>& w, std::size_t n, const char* name) {
      if (w.empty()) return;
      if (w.size() != n) throw ValidationError(std::string(name) + " must be " + std::to_string(n) + "x" + std::to_string(n));
      for (const auto& row : w) {
        if (row.size() != n) throw ValidationError(std::string(name) + " must be square");
        for (double x : row) {
          if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError(std::string(name) + " weights must be finite and >= 0");
        }
      }
    };
    matrix(position_confusion, HandPosition::kCount, "position_confusion");
    matrix(shape_confusion, HandShape::kCount, "shape_confusion");
  }
};

namespace detail {

// Keeps `truth` (1-based) with probability `accuracy`, otherwise draws one of
// the other n - 1 labels. Exactly two draws per call keeps streams aligned.
inline int corrupt_label(Rng& rng, int truth, int n, double accuracy, const std::vector<std::vector<double>>& weights) {
  const double keep = rng.uniform();
  const double pick = rng.uniform();
  if (keep < accuracy) return truth;
  std::vector<double> w(static_cast<std::size_t>(n), 1.0);
  if (!weights.empty()) {
    const auto& row = weights[static_cast<std::size_t>(truth - 1)];
    double off = 0.0;
    for (int j = 0; j < n; ++j) off += j == truth - 1 ? 0.0 : row[static_cast<std::size_t>(j)];
    if (off > 0.0) w.assign(row.begin(), row.end());
  }
  w[static_cast<std::size_t>(truth - 1)] = 0.0;
  double total = 0.0;
  for (double x : w) total += x;
  double target = pick * total;
  int last = truth;
  for (int j = 0; j < n; ++j) {
    const double x = w[static_cast<std::size_t>(j)];
    if (x <= 0.0) continue;
    last = j + 1;
    if (target < x) return j + 1;
    target -= x;
  }
  return last;
}

}  // namespace detail

inline RecognitionResult recognize_mock(const std::vector<HandLabel>& truth, const MockConfig& cfg) {
  if (truth.empty()) throw ValidationError("recognize_mock: truth must not be empty");
  cfg.validate();
  Rng rng(cfg.seed);
  RecognitionResult result;
  result.labels.reserve(truth.size());
  for (const auto& t : truth) {
    const int p = detail::corrupt_label(rng, t.code.position.id, HandPosition::kCount, cfg.position_accuracy,
                                        cfg.position_confusion);
    const int s = detail::corrupt_label(rng, t.code.shape.id, HandShape::kCount, cfg.shape_accuracy, cfg.shape_confusion);
    result.labels.push_back({t.frame, {HandPosition{p}, HandShape{s}}});
  }
  return result;
}

// --- remote ------------------------------------------------------------------

struct EndpointConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o-2024-08-06";
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_seconds = 120.0;
  int max_retries = 3;
  int max_inflight_requests = 4;
  double temperature = 0.0;
  double backoff_initial_seconds = 1.0;  // doubles after every failed attempt

  void validate() const {
    if (max_inflight_requests < 1) throw ConfigError("max_inflight_requests must be >= 1");
    if (!(timeout_seconds > 0.0)) throw ConfigError("timeout must be > 0");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (backoff_initial_seconds < 0.0) throw ConfigError("backoff must be >= 0");
    if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
      throw ConfigError("base_url must start with http:// or https://");
    }
  }
};

inline std::string image_media_type(std::string_view path) {
  auto ends_with = [&](std::string_view suffix) {
    if (path.size() < suffix.size()) return false;
    auto tail = path.substr(path.size() - suffix.size());
    for (std::size_t i = 0; i < suffix.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(tail[i])) != suffix[i]) return false;
    }
    return true;
  };
  if (ends_with(".png")) return "image/png";
  if (ends_with(".jpg") || ends_with(".jpeg")) return "image/jpeg";
  if (ends_with(".webp")) return "image/webp";
  if (ends_with(".gif")) return "image/gif";
  return "application/octet-stream";
}

// Chat-completions request body: one user message carrying the payload parts
// in order, images inlined as base64 data URLs, structured output enforced by
// the payload's response schema.
inline nlohmann::ordered_json chat_request(const PromptPayload& payload, const std::string& model, double temperature) {
  auto content = nlohmann::ordered_json::array();
  for (const auto& part : payload.parts) {
    if (part.kind == PromptPart::Kind::text) {
      content.push_back({{"type", "text"}, {"text", part.text}});
    } else {
      const std::string bytes = detail::read_file(part.image.path);
      nlohmann::ordered_json url;
      url["url"] = "data:" + image_media_type(part.image.path) + ";base64," + httplib::detail::base64_encode(bytes);
      content.push_back({{"type", "image_url"}, {"image_url", std::move(url)}});
    }
  }
  nlohmann::ordered_json body;
  body["model"] = model;
  body["temperature"] = temperature;
  body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", std::move(content)}}});
  nlohmann::ordered_json format;
  format["type"] = "json_schema";
  format["json_schema"] = {{"name", "hand_codes"},
                           {"strict", true},
                           {"schema", nlohmann::ordered_json::parse(payload.response_schema)}};
  body["response_format"] = std::move(format);
  return body;
}

// Thread-safe client. At most max_inflight_requests HTTP attempts run at once
// across all threads sharing one instance.
class RemoteRecognizer {
 public:
  // Reads the API key from the configured environment variable; throws
  // ConfigError when it is unset, before any network activity.
  explicit RemoteRecognizer(EndpointConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + cfg_.api_key_env + " holding the API key is not set");
    }
    api_key_ = key;
    split_url();
    slots_ = std::make_unique<std::counting_semaphore<>>(cfg_.max_inflight_requests);
  }

  const EndpointConfig& config() const { return cfg_; }

  RecognitionResult recognize(const PromptPayload& payload) const {
    const std::string body = chat_request(payload, cfg_.model, cfg_.temperature).dump();
    const std::string response = post_with_retry(body);
    return interpret(response, payload.keyframe_frames);
  }

  // Maps a chat-completions response body to labels with absolute frames.
  static RecognitionResult interpret(const std::string& response, const std::vector<std::size_t>& keyframe_frames) {
    using Kind = ResponseError::Kind;
    std::string content;
    try {
      const auto doc = nlohmann::json::parse(response);
      const auto& message = doc.at("choices").at(0).at("message");
      if (message.contains("refusal") && message["refusal"].is_string()) {
        throw ResponseError(Kind::refusal, "model refused: " + message["refusal"].get<std::string>(), response);
      }
      content = message.at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ResponseError(Kind::malformed, std::string("unexpected chat-completions body: ") + e.what(), response);
    }
    RecognitionResult result;
    try {
      result = parse_response(content, keyframe_frames.size());
    } catch (const ResponseError& e) {
      throw ResponseError(e.kind(), std::string("schema violation: ") + e.what(), response);
    }
    for (auto& label : result.labels) label.frame = keyframe_frames[label.frame];
    return result;
  }

 private:
  void split_url() {
    const auto scheme_end = cfg_.base_url.find("://");
    const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      origin_ = cfg_.base_url;
      path_prefix_.clear();
    } else {
      origin_ = cfg_.base_url.substr(0, path_start);
      path_prefix_ = cfg_.base_url.substr(path_start);
    }
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }

  static bool transient_status(int status) { return status == 429 || status >= 500; }

  std::string post_with_retry(const std::string& body) const {
    const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
    const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
    double backoff = cfg_.backoff_initial_seconds;
    std::string last_error;
    for (int attempt = 1;; ++attempt) {
      httplib::Result res;
      {
        slots_->acquire();
        struct Release {
          std::counting_semaphore<>* s;
          ~Release() { s->release(); }
        } release{slots_.get()};
        httplib::Client client(origin_);
        client.set_connection_timeout(timeout_us);
        client.set_read_timeout(timeout_us);
        client.set_write_timeout(timeout_us);
        client.set_bearer_token_auth(api_key_);
        res = client.Post(path_prefix_ + "/chat/completions", body, "application/json");
      }
      if (res) {
        if (res->status == 200) return res->body;
        if (!transient_status(res->status) || attempt > cfg_.max_retries) {
          throw HttpStatusError(res->status, res->body, attempt);
        }
        last_error = "HTTP " + std::to_string(res->status);
      } else {
        last_error = httplib::to_string(res.error());
        if (attempt > cfg_.max_retries) {
          throw TransportError("request to " + origin_ + " failed after " + std::to_string(attempt) +
                                   " attempt(s): " + last_error,
                               attempt);
        }
      }
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
  }

  EndpointConfig cfg_;
  std::string api_key_;
  std::string origin_;
  std::string path_prefix_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

inline RecognitionResult recognize_remote(const PromptPayload& payload, const EndpointConfig& cfg) {
  return RemoteRecognizer(cfg).recognize(payload);
}

}  // namespace acsr

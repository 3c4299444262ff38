// acsr: command-line driver for the recognition pipeline. Every stage reads
// and writes the documented files, so any stage can be rerun on its own.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acsr/acsr.hpp"
#include "acsr/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

#ifndef ACSR_DATA_DIR
#define ACSR_DATA_DIR "data"
#endif

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string vocab;
  std::string table;
};

// Error raised by the driver itself (bad flag combinations).
class UsageError : public acsr::Error {
 public:
  using acsr::Error::Error;
};

acsr::PipelineConfig pipeline_config(const Globals& g) {
  acsr::PipelineConfig cfg = g.config.empty() ? acsr::PipelineConfig{} : acsr::PipelineConfig::load(g.config);
  if (!g.vocab.empty()) cfg.vocabulary = g.vocab;
  if (!g.table.empty()) cfg.coding_table = g.table;
  if (cfg.vocabulary.empty()) cfg.vocabulary = fs::path(ACSR_DATA_DIR) / "vocab.tsv";
  if (cfg.coding_table.empty()) cfg.coding_table = fs::path(ACSR_DATA_DIR) / "coding_table.json";
  if (g.seed) {
    cfg.mock.seed = *g.seed;
    cfg.train.seed = *g.seed;
    cfg.synth.seed = *g.seed;
  }
  cfg.train.jobs = g.jobs;
  return cfg;
}

void emit(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
  } else {
    acsr::detail::write_file(out, content);
  }
}

std::string json_text(const nlohmann::ordered_json& doc) { return doc.dump(2) + "\n"; }

// --- filter ------------------------------------------------------------------

struct FilterArgs {
  std::string traj;
  std::string manifest;
  std::optional<double> sigma;
  std::optional<std::size_t> theta;
  std::string out;
};

void cmd_filter(const Globals& g, const FilterArgs& a) {
  auto cfg = pipeline_config(g);
  if (a.sigma) cfg.filter.sigma = *a.sigma;
  if (a.theta) cfg.filter.theta = *a.theta;
  cfg.filter.validate();
  if (a.traj.empty() == a.manifest.empty()) throw UsageError("exactly one of --traj or --manifest is required");
  if (!a.traj.empty()) {
    const auto result = acsr::filter_keyframes(acsr::read_trajectory_csv(fs::path(a.traj)), cfg.filter);
    emit(a.out, json_text(acsr::to_json(result)));
    return;
  }
  for (const auto& e : acsr::load_corpus_manifest(a.manifest)) {
    const auto result = acsr::filter_keyframes(acsr::read_trajectory_csv(e.dir / acsr::kTrajectoryFile), cfg.filter);
    acsr::detail::write_file(e.dir / acsr::kKeyframesFile, json_text(acsr::to_json(result)));
  }
}

// --- prompt ------------------------------------------------------------------

struct PromptArgs {
  std::string keyframes;
  std::string images;
  std::string support;
  std::string prompt_template;
  std::string format = "parts";
  std::string out;
  std::optional<std::size_t> schema_only;
};

acsr::PromptPayload payload_from(const acsr::PipelineConfig& cfg, const std::string& keyframes,
                                 const std::string& images, const std::string& support,
                                 const std::string& prompt_template) {
  if (keyframes.empty() || images.empty()) throw UsageError("--keyframes and --images are required");
  const fs::path support_path = support.empty() ? cfg.support_manifest : fs::path(support);
  if (support_path.empty()) throw UsageError("a support manifest is required (--support or config support_manifest)");
  const fs::path template_path = prompt_template.empty() ? cfg.prompt_template : fs::path(prompt_template);
  const auto tmpl = template_path.empty() ? acsr::default_prompt_template() : acsr::load_prompt_template(template_path);
  const auto keys = acsr::keyframes_from_json(acsr::read_json_file(keyframes));
  return acsr::build_prompt(acsr::keyframe_images(keys, images), acsr::SupportSet::load(support_path), tmpl);
}

void cmd_prompt(const Globals& g, const PromptArgs& a) {
  if (a.schema_only) {
    emit(a.out, json_text(acsr::response_schema_json(*a.schema_only)));
    return;
  }
  const auto cfg = pipeline_config(g);
  const auto payload = payload_from(cfg, a.keyframes, a.images, a.support, a.prompt_template);
  if (a.format == "wire") {
    emit(a.out, json_text(acsr::chat_request(payload, cfg.endpoint.model, cfg.endpoint.temperature)));
  } else {
    emit(a.out, json_text(acsr::to_json(payload)));
  }
}

// --- recognize ---------------------------------------------------------------

struct RecognizeArgs {
  std::string mode = "mock";
  std::string keyframes;
  std::string truth;
  std::string manifest;
  std::string images;
  std::string support;
  std::string prompt_template;
  std::optional<double> position_accuracy;
  std::optional<double> shape_accuracy;
  std::optional<std::string> base_url;
  std::optional<std::string> model;
  std::optional<std::string> api_key_env;
  std::optional<int> max_retries;
  std::optional<int> max_inflight;
  std::optional<double> timeout;
  std::string out;
};

void cmd_recognize(const Globals& g, const RecognizeArgs& a) {
  auto cfg = pipeline_config(g);
  if (a.position_accuracy) cfg.mock.position_accuracy = *a.position_accuracy;
  if (a.shape_accuracy) cfg.mock.shape_accuracy = *a.shape_accuracy;
  if (a.base_url) cfg.endpoint.base_url = *a.base_url;
  if (a.model) cfg.endpoint.model = *a.model;
  if (a.api_key_env) cfg.endpoint.api_key_env = *a.api_key_env;
  if (a.max_retries) cfg.endpoint.max_retries = *a.max_retries;
  if (a.max_inflight) cfg.endpoint.max_inflight_requests = *a.max_inflight;
  if (a.timeout) cfg.endpoint.timeout_seconds = *a.timeout;

  if (a.mode == "remote") {
    cfg.endpoint.validate();
    // Constructing the client checks the API key before any file or network work.
    acsr::RemoteRecognizer client(cfg.endpoint);
    const auto payload = payload_from(cfg, a.keyframes, a.images, a.support, a.prompt_template);
    emit(a.out, json_text(acsr::to_json(client.recognize(payload))));
    return;
  }
  cfg.mock.validate();
  if (!a.manifest.empty()) {
    for (const auto& e : acsr::load_corpus_manifest(a.manifest)) {
      const auto detected = acsr::keyframes_from_json(acsr::read_json_file(e.dir / acsr::kKeyframesFile));
      const auto truth = acsr::truth_from_json(acsr::read_json_file(e.dir / acsr::kTruthFile));
      acsr::MockConfig mock = cfg.mock;
      mock.seed = acsr::derive_seed(cfg.mock.seed, e.index);
      acsr::RecognitionResult rec;
      if (detected.size() > 0) rec = acsr::recognize_mock(acsr::truth_for_keyframes(detected, truth), mock);
      acsr::detail::write_file(e.dir / acsr::kRecognitionFile, json_text(acsr::to_json(rec)));
    }
    return;
  }
  if (a.keyframes.empty() || a.truth.empty()) throw UsageError("mock mode needs --keyframes and --truth, or --manifest");
  const auto detected = acsr::keyframes_from_json(acsr::read_json_file(a.keyframes));
  const auto truth = acsr::truth_from_json(acsr::read_json_file(a.truth));
  acsr::RecognitionResult rec;
  if (detected.size() > 0) rec = acsr::recognize_mock(acsr::truth_for_keyframes(detected, truth), cfg.mock);
  emit(a.out, json_text(acsr::to_json(rec)));
}

// --- train / decode ----------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string hand = "recognition";
  std::string split = "train";
  std::string out = "params.mfmp";
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
};

void cmd_train(const Globals& g, const TrainArgs& a) {
  auto cfg = pipeline_config(g);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.lr) cfg.train.learning_rate = *a.lr;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  cfg.train.validate();
  const auto source = acsr::parse_hand_source(a.hand);
  const auto vocab = acsr::Vocabulary::load(cfg.vocabulary);
  const auto table = acsr::CodingTable::load(cfg.coding_table, vocab);
  const auto entries = acsr::select_split(acsr::load_corpus_manifest(a.manifest), a.split);
  if (entries.empty()) throw acsr::ValidationError("no samples in split '" + a.split + "'");
  std::vector<acsr::TrainingSample> samples;
  for (const auto& e : entries) {
    auto s = acsr::load_sample(e.dir);
    auto hand = acsr::load_hand_matrix(e.dir, source, s.lip.frames(), table, vocab);
    samples.push_back({std::move(s.lip), std::move(hand), acsr::transcript_target(s.transcript, vocab)});
  }
  acsr::TrainReport report;
  const auto params = acsr::train_head(samples, cfg.train, &report);
  acsr::write_fusion_params(a.out, params);
  nlohmann::ordered_json summary;
  summary["samples"] = samples.size();
  summary["epochs"] = cfg.train.epochs;
  summary["epoch_losses"] = report.epoch_losses;
  summary["lambda"] = params.lambda;
  std::cout << json_text(summary);
}

struct DecodeArgs {
  std::string manifest;
  std::string params;
  std::string hand = "recognition";
  std::string split = "eval";
  std::string out = "hyps.txt";
  std::string refs_out;
};

void cmd_decode(const Globals& g, const DecodeArgs& a) {
  const auto cfg = pipeline_config(g);
  const auto source = acsr::parse_hand_source(a.hand);
  const auto vocab = acsr::Vocabulary::load(cfg.vocabulary);
  const auto table = acsr::CodingTable::load(cfg.coding_table, vocab);
  const auto params = acsr::read_fusion_params(a.params);
  const auto entries = acsr::select_split(acsr::load_corpus_manifest(a.manifest), a.split);
  std::vector<acsr::Transcript> hyps;
  std::vector<acsr::Transcript> refs;
  for (const auto& e : entries) {
    auto s = acsr::load_sample(e.dir);
    const auto hand = acsr::load_hand_matrix(e.dir, source, s.lip.frames(), table, vocab);
    hyps.push_back(acsr::decode_transcript(s.lip, hand, params, vocab));
    refs.push_back(std::move(s.transcript));
  }
  acsr::write_transcripts(fs::path(a.out), hyps);
  if (!a.refs_out.empty()) acsr::write_transcripts(fs::path(a.refs_out), refs);
}

// --- eval / confusion --------------------------------------------------------

struct EvalArgs {
  std::string refs;
  std::string hyps;
  std::string out;
};

void cmd_eval(const Globals&, const EvalArgs& a) {
  const auto refs = acsr::read_transcripts(fs::path(a.refs));
  const auto hyps = acsr::read_transcripts(fs::path(a.hyps));
  const auto tokens = acsr::token_errors(refs, hyps);
  const auto words = acsr::word_errors(refs, hyps);
  nlohmann::ordered_json doc;
  doc["cer"] = tokens.rate();
  doc["wer"] = words.rate();
  doc["sentences"] = refs.size();
  doc["token_edits"] = tokens.edits;
  doc["reference_tokens"] = tokens.reference_units;
  doc["word_edits"] = words.edits;
  doc["reference_words"] = words.reference_units;
  emit(a.out, json_text(doc));
}

struct ConfusionArgs {
  std::string refs;
  std::string hyps;
  std::string out = "confusion";
};

void cmd_confusion(const Globals& g, const ConfusionArgs& a) {
  const auto cfg = pipeline_config(g);
  const auto vocab = acsr::Vocabulary::load(cfg.vocabulary);
  const auto refs = acsr::read_transcripts(fs::path(a.refs));
  const auto hyps = acsr::read_transcripts(fs::path(a.hyps));
  acsr::render_heatmap(acsr::confusion_matrix(refs, hyps, vocab), vocab, a.out);
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  std::size_t n = 500;
  std::string out = "corpus";
  std::string synth_config;
  std::optional<double> lip_noise;
};

void cmd_synth(const Globals& g, const SynthArgs& a) {
  auto cfg = pipeline_config(g);
  if (!a.synth_config.empty()) {
    const auto seed = cfg.synth.seed;
    cfg.synth = acsr::synth_config_from_json(acsr::read_json_file(a.synth_config));
    if (g.seed) cfg.synth.seed = seed;
  }
  if (a.lip_noise) cfg.synth.lip_noise_sigma = *a.lip_noise;
  cfg.synth.validate();
  const auto vocab = acsr::Vocabulary::load(cfg.vocabulary);
  const auto table = acsr::CodingTable::load(cfg.coding_table, vocab);
  const auto corpus = acsr::generate_corpus(a.n, vocab, table, cfg.synth);
  acsr::write_corpus(corpus, cfg.synth, a.out);
}

// Runs a stage, mapping failures to "error: <stage>: <message>".
int run_stage(const std::string& stage, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << stage << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cued Speech recognition pipeline: keyframe filtering, prompting, hand recognition, "
               "fusion training, decoding and evaluation."};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Pipeline config JSON (paths, filter, mock, endpoint, train, synth)");
  app.add_option("--seed", g.seed, "Base seed for every randomized stage");
  app.add_option("--jobs", g.jobs, "Worker threads for training")->check(CLI::PositiveNumber);
  app.add_option("--vocab", g.vocab, "Vocabulary TSV (default: bundled data/vocab.tsv)");
  app.add_option("--table", g.table, "Coding table JSON (default: bundled data/coding_table.json)");

  std::function<int()> action;

  FilterArgs fa;
  auto* filter = app.add_subcommand("filter", "Detect slow-motion groups and keyframes in hand trajectories");
  filter->add_option("--traj", fa.traj, "Trajectory CSV (frame,x,y)");
  filter->add_option("--manifest", fa.manifest, "Corpus manifest; writes keyframes.json into every sample directory");
  filter->add_option("--sigma", fa.sigma, "Slow-motion distance threshold in pixels (default 6)");
  filter->add_option("--theta", fa.theta, "Frame-gap threshold for grouping (default 2)");
  filter->add_option("--out", fa.out, "Output file for --traj (default stdout)");
  filter->callback([&] { action = [&] { return run_stage("filter", [&] { cmd_filter(g, fa); }); }; });

  PromptArgs pa;
  auto* prompt = app.add_subcommand("prompt", "Assemble the multimodal recognition prompt");
  prompt->add_option("--keyframes", pa.keyframes, "Keyframe JSON from the filter stage");
  prompt->add_option("--images", pa.images, "Keyframe image path pattern containing {frame} or {frame:0N}");
  prompt->add_option("--support", pa.support, "Support-set manifest (40 labeled images)");
  prompt->add_option("--template", pa.prompt_template, "Prompt template JSON (default: built-in template)");
  prompt->add_option("--format", pa.format, "parts: payload with image paths; wire: full request body")
      ->check(CLI::IsMember({"parts", "wire"}));
  prompt->add_option("--schema-only", pa.schema_only, "Print the response schema for N keyframes and exit");
  prompt->add_option("--out", pa.out, "Output file (default stdout)");
  prompt->callback([&] { action = [&] { return run_stage("prompt", [&] { cmd_prompt(g, pa); }); }; });

  RecognizeArgs ra;
  auto* recognize = app.add_subcommand("recognize", "Recognize hand position and shape at keyframes");
  recognize->add_option("--mode", ra.mode, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
  recognize->add_option("--keyframes", ra.keyframes, "Keyframe JSON from the filter stage");
  recognize->add_option("--truth", ra.truth, "Truth JSON (mock mode)");
  recognize->add_option("--manifest", ra.manifest, "Corpus manifest; writes recognition.json per sample (mock mode)");
  recognize->add_option("--images", ra.images, "Keyframe image path pattern (remote mode)");
  recognize->add_option("--support", ra.support, "Support-set manifest (remote mode)");
  recognize->add_option("--template", ra.prompt_template, "Prompt template JSON (remote mode)");
  recognize->add_option("--position-accuracy", ra.position_accuracy, "Mock position accuracy (default 0.9601)");
  recognize->add_option("--shape-accuracy", ra.shape_accuracy, "Mock shape accuracy (default 0.8472)");
  recognize->add_option("--base-url", ra.base_url, "Chat-completions base URL");
  recognize->add_option("--model", ra.model, "Model name");
  recognize->add_option("--api-key-env", ra.api_key_env, "Name of the environment variable holding the API key");
  recognize->add_option("--max-retries", ra.max_retries, "Retries after a failed attempt");
  recognize->add_option("--max-inflight", ra.max_inflight, "Concurrent request bound");
  recognize->add_option("--timeout", ra.timeout, "Per-request timeout in seconds");
  recognize->add_option("--out", ra.out, "Output file (default stdout)");
  recognize->callback([&] { action = [&] { return run_stage("recognize", [&] { cmd_recognize(g, ra); }); }; });

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the fusion module and CTC head on a corpus split");
  train->add_option("--manifest", ta.manifest, "Corpus manifest")->required();
  train->add_option("--hand", ta.hand, "Hand matrix source")->check(CLI::IsMember({"recognition", "truth", "none"}));
  train->add_option("--split", ta.split, "Corpus split (train, eval or all)");
  train->add_option("--out", ta.out, "Output parameter file (MFMP)");
  train->add_option("--epochs", ta.epochs, "Training epochs");
  train->add_option("--lr", ta.lr, "Learning rate");
  train->add_option("--batch-size", ta.batch_size, "Mini-batch size");
  train->callback([&] { action = [&] { return run_stage("train", [&] { cmd_train(g, ta); }); }; });

  DecodeArgs da;
  auto* decode = app.add_subcommand("decode", "Greedy CTC decoding of a corpus split");
  decode->add_option("--manifest", da.manifest, "Corpus manifest")->required();
  decode->add_option("--params", da.params, "Trained parameter file (MFMP)")->required();
  decode->add_option("--hand", da.hand, "Hand matrix source")->check(CLI::IsMember({"recognition", "truth", "none"}));
  decode->add_option("--split", da.split, "Corpus split (train, eval or all)");
  decode->add_option("--out", da.out, "Hypothesis transcript file");
  decode->add_option("--refs-out", da.refs_out, "Also write the split's reference transcripts here");
  decode->callback([&] { action = [&] { return run_stage("decode", [&] { cmd_decode(g, da); }); }; });

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Corpus CER and WER");
  eval->add_option("--refs", ea.refs, "Reference transcripts")->required();
  eval->add_option("--hyps", ea.hyps, "Hypothesis transcripts")->required();
  eval->add_option("--out", ea.out, "Metrics JSON file (default stdout)");
  eval->callback([&] { action = [&] { return run_stage("eval", [&] { cmd_eval(g, ea); }); }; });

  ConfusionArgs ca;
  auto* confusion = app.add_subcommand("confusion", "Phoneme confusion matrix as CSV and PGM");
  confusion->add_option("--refs", ca.refs, "Reference transcripts")->required();
  confusion->add_option("--hyps", ca.hyps, "Hypothesis transcripts")->required();
  confusion->add_option("--out", ca.out, "Output base name; writes <out>.csv and <out>.pgm");
  confusion->callback([&] { action = [&] { return run_stage("confusion", [&] { cmd_confusion(g, ca); }); }; });

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--n", sa.n, "Number of samples")->check(CLI::PositiveNumber);
  synth->add_option("--out", sa.out, "Output directory");
  synth->add_option("--synth-config", sa.synth_config, "Synthesizer config JSON");
  synth->add_option("--lip-noise", sa.lip_noise, "Override lip_noise_sigma");
  synth->callback([&] { action = [&] { return run_stage("synth", [&] { cmd_synth(g, sa); }); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string stage = "cli";
    for (const auto* sub : app.get_subcommands()) stage = sub->get_name();
    std::cerr << "error: " << stage << ": " << e.what() << "\n";
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }
  return action ? action() : 2;
}

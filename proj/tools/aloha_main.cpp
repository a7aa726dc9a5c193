// Command-line entry point: score single captions, evaluate labeled
// datasets, generate foil datasets, and inspect the response cache.
//
// Exit codes: 0 success, 1 runtime/backend failure, 2 usage or input error.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aloha/aloha.hpp"
#include "aloha/http_backends.hpp"

namespace {

using namespace aloha;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

struct BackendFlags {
  std::string config_path;
  std::string extractor;  // llm | grammar
  std::string embedder;   // http | wordvec | exact
  std::string word_vectors;
  std::string replay_transcript;
  std::string prompt_bundle;
  std::string cache_path;
  bool offline = false;
};

void add_backend_flags(CLI::App* cmd, BackendFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--extractor", f.extractor, "object extractor: llm or grammar")
      ->check(CLI::IsMember({"llm", "grammar"}));
  cmd->add_option("--embedder", f.embedder, "embedding backend: http, wordvec or exact")
      ->check(CLI::IsMember({"http", "wordvec", "exact"}));
  cmd->add_option("--word-vectors", f.word_vectors, "word vector file for the offline embedder");
  cmd->add_option("--replay", f.replay_transcript, "replay-chat transcript (offline LLM extraction)");
  cmd->add_option("--prompt-bundle", f.prompt_bundle, "prompt bundle override file");
  cmd->add_option("--cache", f.cache_path, "response cache file");
  cmd->add_flag("--offline", f.offline, "refuse any network backend");
}

// Everything a command needs to run the pipeline, resolved from config file
// plus flags. Flags win over file values; offline runs refuse HTTP backends.
struct Runtime {
  RunConfig config;
  PromptBundle bundle;
  std::unique_ptr<CacheStore> cache;
  std::unique_ptr<ChatBackend> chat;
  std::unique_ptr<EmbeddingBackend> embedder;
  std::unique_ptr<ObjectExtractor> extractor;
  EmbeddingCache embedding_cache;
};

Runtime make_runtime(const BackendFlags& flags, bool force_exact_embedder = false) {
  Runtime rt;
  if (!flags.config_path.empty()) rt.config = RunConfig::load(flags.config_path);
  if (!flags.word_vectors.empty()) rt.config.word_vectors = flags.word_vectors;
  if (!flags.cache_path.empty()) rt.config.cache_path = flags.cache_path;
  if (!flags.prompt_bundle.empty()) rt.config.prompt_bundle = flags.prompt_bundle;

  rt.bundle = rt.config.prompt_bundle.empty()
                  ? default_prompt_bundle()
                  : load_prompt_bundle(rt.config.prompt_bundle);
  rt.cache = std::make_unique<CacheStore>(rt.config.cache_path);

  // Chat backend: an explicit replay transcript wins, then the configured
  // HTTP endpoint.
  if (!flags.replay_transcript.empty()) {
    rt.chat = std::make_unique<ReplayChatBackend>(flags.replay_transcript,
                                                  ReplayChatBackend::Mode::strict);
  } else if (rt.config.chat) {
    if (flags.offline)
      throw ConfigError("--offline refuses the configured HTTP chat backend");
    rt.chat = std::make_unique<HttpChatBackend>(*rt.config.chat, rt.cache.get(),
                                                rt.config.max_retries,
                                                rt.config.backoff_ms);
  }

  // Extractor: explicit flag, else LLM whenever a chat backend exists.
  std::string extractor = flags.extractor;
  if (extractor.empty()) extractor = rt.chat ? "llm" : "grammar";
  if (extractor == "llm") {
    if (!rt.chat)
      throw ConfigError("llm extractor needs a chat endpoint or --replay transcript");
    rt.extractor = std::make_unique<LlmExtractor>(*rt.chat, rt.bundle);
  } else {
    rt.extractor = std::make_unique<GrammarExtractor>();
  }

  // Embedder: explicit flag, else HTTP when configured, else word vectors
  // when available, else exact string matching.
  std::string embedder = flags.embedder;
  if (force_exact_embedder) embedder = "exact";
  if (embedder.empty()) {
    if (rt.config.embedding && !flags.offline)
      embedder = "http";
    else if (!rt.config.word_vectors.empty())
      embedder = "wordvec";
    else
      embedder = "exact";
  }
  if (embedder == "http") {
    if (flags.offline) throw ConfigError("--offline refuses the HTTP embedding backend");
    if (!rt.config.embedding)
      throw ConfigError("http embedder selected but no embedding endpoint configured");
    rt.embedder = std::make_unique<HttpEmbeddingBackend>(*rt.config.embedding,
                                                         rt.cache.get(),
                                                         rt.config.max_retries,
                                                         rt.config.backoff_ms);
  } else if (embedder == "wordvec") {
    if (rt.config.word_vectors.empty())
      throw ConfigError("wordvec embedder needs --word-vectors or a config entry");
    rt.embedder = std::make_unique<WordVectorEmbedder>(rt.config.word_vectors);
  } else {
    rt.embedder = std::make_unique<ExactStringEmbedder>();
  }
  return rt;
}

void print_score_report(const ScoreReport& report, double threshold) {
  std::size_t width = 12;
  for (const auto& o : report.object_scores)
    width = std::max(width, o.phrase.size() + 2);
  std::size_t ref_width = 18;
  for (const auto& o : report.object_scores) {
    if (o.matched_reference)
      ref_width = std::max(ref_width, o.matched_reference->size() + 2);
  }

  std::cout << std::left << std::setw(static_cast<int>(width)) << "OBJECT"
            << std::setw(9) << "ALOHA_O"
            << std::setw(static_cast<int>(ref_width)) << "MATCHED REFERENCE"
            << "FLAG" << "\n";
  for (const auto& o : report.object_scores) {
    std::cout << std::left << std::setw(static_cast<int>(width)) << o.phrase
              << std::setw(9) << format_score(o.score)
              << std::setw(static_cast<int>(ref_width))
              << (o.matched_reference ? *o.matched_reference : "-")
              << (o.score <= threshold ? "hallucination" : "grounded") << "\n";
  }
  if (report.object_scores.empty())
    std::cout << "(no certain candidate objects)\n";
  std::cout << "ALOHa: " << format_score(report.caption_score)
            << "  (threshold " << format_score(threshold) << ")\n";
  if (!report.excluded_uncertain.empty()) {
    std::cout << "excluded as uncertain:";
    for (const auto& p : report.excluded_uncertain) std::cout << " " << p;
    std::cout << "\n";
  }
}

int cmd_score(const BackendFlags& flags, const std::string& candidate,
              std::vector<std::string> references, const std::string& references_file,
              std::vector<std::string> detections, const std::string& detections_file,
              std::optional<double> threshold_flag, const std::string& out_path,
              std::optional<std::size_t> cap_flag) {
  if (!references_file.empty()) {
    auto lines = read_lines(references_file);
    references.insert(references.end(), lines.begin(), lines.end());
  }
  if (!detections_file.empty()) {
    auto lines = read_lines(detections_file);
    detections.insert(detections.end(), lines.begin(), lines.end());
  }
  Runtime rt = make_runtime(flags);
  const double threshold = threshold_flag.value_or(rt.config.threshold);
  PipelineOptions options;
  options.combination_cap = cap_flag.value_or(rt.config.combination_cap);

  const ScoreReport report =
      score_caption(candidate, references, detections, *rt.extractor, *rt.embedder,
                    &rt.embedding_cache, options);
  print_score_report(report, threshold);
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write report: " + out_path);
    out << to_json(report, threshold).dump(2) << "\n";
  }
  return kExitOk;
}

struct GoldParses {
  std::vector<std::vector<std::string>> parsed;
  std::vector<std::vector<std::string>> gold;
  bool available = false;
};

int cmd_evaluate(const BackendFlags& flags, const std::string& dataset_path,
                 const std::string& metric, const std::string& gold_parses_path,
                 const std::string& out_path, std::optional<int> jobs_flag,
                 std::optional<double> threshold_flag,
                 std::optional<std::size_t> cap_flag) {
  const auto samples = read_samples(dataset_path);
  if (samples.empty()) throw ConfigError("dataset is empty: " + dataset_path);

  const bool binary = metric == "exact-string";
  Runtime rt = make_runtime(flags, binary);
  const double threshold = threshold_flag.value_or(rt.config.threshold);
  const int jobs = jobs_flag.value_or(rt.config.jobs);
  PipelineOptions options;
  options.combination_cap = cap_flag.value_or(rt.config.combination_cap);

  const auto scored = score_dataset(samples, *rt.extractor, *rt.embedder,
                                    &rt.embedding_cache, jobs, options);

  std::vector<MetricConfidence> preds;
  std::vector<EvalSample> gold;
  preds.reserve(scored.size());
  for (const auto& s : scored) {
    MetricConfidence c;
    c.sample_id = s.sample->sample_id;
    c.confidence = -s.report.caption_score;
    for (const auto& o : s.report.object_scores)
      c.predicted_objects.emplace_back(o.phrase, -o.score);
    preds.push_back(std::move(c));
    gold.push_back(*s.sample);
  }

  const double ap = average_precision(preds, gold);
  std::optional<double> la;
  try {
    la = localization_accuracy(preds, gold,
                               binary ? LocalizationRule::any_flagged_object
                                      : LocalizationRule::min_score_object,
                               -threshold);
  } catch (const NoLocalizableSamples&) {
    la = std::nullopt;
  }

  std::optional<double> per, prr;
  if (!gold_parses_path.empty()) {
    std::unordered_map<std::string, std::vector<std::string>> gold_objects;
    for (const auto& line : read_lines(gold_parses_path)) {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ParseError(gold_parses_path + ": invalid JSON line");
      gold_objects[j.at("sample_id").get<std::string>()] =
          j.at("objects").get<std::vector<std::string>>();
    }
    std::vector<std::vector<std::string>> parsed_lists, gold_lists;
    for (const auto& s : scored) {
      auto it = gold_objects.find(s.sample->sample_id);
      if (it == gold_objects.end()) continue;
      parsed_lists.push_back(s.candidate_phrases);
      gold_lists.push_back(it->second);
    }
    if (parsed_lists.empty())
      throw ConfigError("gold parses share no sample id with the dataset");
    const ParsingRates rates = parsing_rates(parsed_lists, gold_lists);
    per = rates.per;
    prr = rates.prr;
  }

  std::size_t positives = 0;
  for (const auto& g : gold) positives += g.gold_hallucinated ? 1u : 0u;

  auto opt_json = [](const std::optional<double>& v) {
    return v ? nlohmann::json(round_score(*v)) : nlohmann::json(nullptr);
  };
  nlohmann::json per_sample = nlohmann::json::array();
  for (const auto& s : scored) {
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& o : s.report.object_scores)
      objects.push_back({{"phrase", o.phrase}, {"score", round_score(o.score)}});
    per_sample.push_back({{"sample_id", s.sample->sample_id},
                          {"caption_score", round_score(s.report.caption_score)},
                          {"confidence", round_score(-s.report.caption_score)},
                          {"gold_hallucinated", s.sample->gold_hallucinated},
                          {"objects", std::move(objects)}});
  }
  const nlohmann::json report{{"ap", round_score(ap)},
                              {"la", opt_json(la)},
                              {"per", opt_json(per)},
                              {"prr", opt_json(prr)},
                              {"n_samples", samples.size()},
                              {"n_positive", positives},
                              {"per_sample", std::move(per_sample)}};

  auto print_row = [](const char* name, const std::string& value) {
    std::cout << std::left << std::setw(12) << name << value << "\n";
  };
  print_row("SAMPLES", std::to_string(samples.size()));
  print_row("POSITIVES", std::to_string(positives));
  print_row("AP", format_score(ap));
  print_row("LA", la ? format_score(*la) : "n/a");
  if (per) print_row("PER", format_score(*per));
  if (prr) print_row("PRR", format_score(*prr));

  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write report: " + out_path);
    out << report.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_build_foil(const BackendFlags& flags, const std::string& dataset_path,
                   const std::string& vocab_path, std::optional<std::size_t> rank_flag,
                   std::uint64_t seed, const std::string& out_path,
                   std::optional<int> jobs_flag) {
  const auto samples = read_samples(dataset_path);
  const auto vocab = ClassVocabulary::load(vocab_path);
  Runtime rt = make_runtime(flags);
  const std::size_t rank = rank_flag.value_or(rt.config.foil_rank);
  const int jobs = jobs_flag.value_or(rt.config.jobs);

  std::vector<FoilOutcome> outcomes(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    outcomes[i] = build_foil_pair(samples[i], vocab, *rt.embedder,
                                  default_grammar_predicate,
                                  derive_seed(seed, samples[i].sample_id), rank,
                                  &rt.embedding_cache);
  });

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].sample_id < samples[b].sample_id;
  });

  std::size_t built = 0, filtered = 0, no_span = 0, too_few = 0;
  std::vector<EvalSample> emitted;
  for (std::size_t i : order) {
    switch (outcomes[i].status) {
      case FoilStatus::built: {
        ++built;
        auto [truth, foil] = make_foil_samples(samples[i], *outcomes[i].pair);
        emitted.push_back(std::move(truth));
        emitted.push_back(std::move(foil));
        break;
      }
      case FoilStatus::filtered: ++filtered; break;
      case FoilStatus::no_span: ++no_span; break;
      case FoilStatus::too_few_refs: ++too_few; break;
    }
  }
  if (!out_path.empty()) write_samples(out_path, emitted);

  std::cout << "built " << built << " pairs, filtered " << filtered
            << ", no replaceable span " << no_span << ", too few references "
            << too_few << "\n";
  return kExitOk;
}

int cmd_cache(const std::string& action, const std::string& cache_path) {
  if (cache_path.empty()) throw ConfigError("cache command needs --cache FILE");
  CacheStore cache(cache_path);
  if (action == "info") {
    std::cout << "entries " << cache.size() << "\nbytes " << cache.file_bytes()
              << "\n";
  } else {
    cache.clear();
    std::cout << "cleared " << cache_path << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-vocabulary object-hallucination scoring for image captions"};
  app.require_subcommand(1);

  // score
  BackendFlags score_flags;
  std::string score_candidate, score_refs_file, score_dets_file, score_out;
  std::vector<std::string> score_refs, score_dets;
  std::optional<double> score_threshold;
  std::optional<std::size_t> score_cap;
  auto* score = app.add_subcommand("score", "score one candidate caption");
  score->add_option("--candidate", score_candidate, "candidate caption")->required();
  score->add_option("--reference", score_refs, "reference caption (repeatable)");
  score->add_option("--references", score_refs_file, "file with one reference per line");
  score->add_option("--detection", score_dets, "detector label (repeatable)");
  score->add_option("--detections", score_dets_file, "file with one detector label per line");
  score->add_option("--threshold", score_threshold, "hallucination flag threshold");
  score->add_option("--cap", score_cap, "conjunction combination cap");
  score->add_option("--out", score_out, "write the report as JSON");
  add_backend_flags(score, score_flags);

  // evaluate
  BackendFlags eval_flags;
  std::string eval_dataset, eval_metric = "aloha", eval_gold_parses, eval_out;
  std::optional<int> eval_jobs;
  std::optional<double> eval_threshold;
  std::optional<std::size_t> eval_cap;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a labeled JSONL dataset");
  evaluate->add_option("--dataset", eval_dataset, "JSONL dataset")->required();
  evaluate->add_option("--metric", eval_metric, "aloha or exact-string")
      ->check(CLI::IsMember({"aloha", "exact-string"}));
  evaluate->add_option("--gold-parses", eval_gold_parses,
                       "JSONL gold object parses for PER/PRR");
  evaluate->add_option("--jobs", eval_jobs, "worker threads (default: CPU count)");
  evaluate->add_option("--threshold", eval_threshold, "hallucination flag threshold");
  evaluate->add_option("--cap", eval_cap, "conjunction combination cap");
  evaluate->add_option("--out", eval_out, "write the metrics report as JSON");
  add_backend_flags(evaluate, eval_flags);

  // build-foil
  BackendFlags foil_flags;
  std::string foil_dataset, foil_vocab, foil_out;
  std::optional<std::size_t> foil_rank;
  std::optional<int> foil_jobs;
  std::uint64_t foil_seed = 0;
  auto* foil = app.add_subcommand("build-foil", "generate a perturbed foil dataset");
  foil->add_option("--dataset", foil_dataset, "JSONL source dataset")->required();
  foil->add_option("--vocab", foil_vocab, "class vocabulary file")->required();
  foil->add_option("--rank", foil_rank, "similarity rank of the foil class (default 10)");
  foil->add_option("--seed", foil_seed, "generation seed");
  foil->add_option("--jobs", foil_jobs, "worker threads");
  foil->add_option("--out", foil_out, "output JSONL path");
  add_backend_flags(foil, foil_flags);

  // cache
  std::string cache_action, cache_path;
  auto* cache = app.add_subcommand("cache", "inspect or clear the response cache");
  cache->add_option("action", cache_action, "info or clear")
      ->required()
      ->check(CLI::IsMember({"info", "clear"}));
  cache->add_option("--cache", cache_path, "cache file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (score->parsed())
      return cmd_score(score_flags, score_candidate, score_refs, score_refs_file,
                       score_dets, score_dets_file, score_threshold, score_out,
                       score_cap);
    if (evaluate->parsed())
      return cmd_evaluate(eval_flags, eval_dataset, eval_metric, eval_gold_parses,
                          eval_out, eval_jobs, eval_threshold, eval_cap);
    if (foil->parsed())
      return cmd_build_foil(foil_flags, foil_dataset, foil_vocab, foil_rank,
                            foil_seed, foil_out, foil_jobs);
    if (cache->parsed()) return cmd_cache(cache_action, cache_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NoPositives& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const VocabularyTooSmall& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IdMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

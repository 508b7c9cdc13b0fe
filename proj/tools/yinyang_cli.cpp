// yinyang: ingest, train, transform, generate, evaluate.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 training/generation failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "yinyang/corpus.hpp"
#include "yinyang/errors.hpp"
#include "yinyang/eval.hpp"
#include "yinyang/midi.hpp"
#include "yinyang/neural/training.hpp"
#include "yinyang/orchestrator.hpp"
#include "yinyang/synthetic.hpp"
#include "yinyang/transforms.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace yinyang;

namespace {

struct UsageError : Error {
  using Error::Error;
};

enum Stream : std::uint64_t { kSplitStream = 1, kSyntheticStream = 2, kTrainStream = 10, kPlanStream = 20 };

// Relative output paths resolve against YINYANG_OUTPUT_ROOT when it is set.
fs::path output_path(const std::string& p) {
  const fs::path path(p);
  const char* root = std::getenv("YINYANG_OUTPUT_ROOT");
  if (path.is_relative() && root != nullptr && *root != '\0') return fs::path(root) / path;
  return path;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  return read_json_file(path);
}

// Value from a flag if given, otherwise the config entry, otherwise `fallback`.
template <typename T>
T pick_value(const CLI::Option* flag, const T& flag_value, const json& config, const char* key, const T& fallback) {
  if (flag != nullptr && flag->count() > 0) return flag_value;
  if (config.contains(key)) return config.at(key).get<T>();
  return fallback;
}

std::vector<Song> load_songs(const fs::path& path) {
  const json j = read_json_file(path);
  if (j.value("format", "") != "yinyang-corpus") throw DataError(path.string() + ": not a canonical corpus file");
  return corpus_from_json(j);
}

Phrase load_phrase(const fs::path& path) {
  if (path.extension() == ".mid" || path.extension() == ".midi") return import_midi_song(path).phrases.at(0);
  const json j = read_json_file(path);
  const std::string format = j.value("format", "");
  if (format == "yinyang-phrase") return phrase_from_json(j);
  if (format == "yinyang-song") return song_from_json(j).phrases.at(0);
  throw DataError(path.string() + ": expected a phrase or song document");
}

// ---- ingest ----------------------------------------------------------------

struct IngestArgs {
  std::vector<std::string> corpus;
  std::string format;
  std::string out = "corpus";
  std::string config;
  std::uint64_t seed = 0;
  std::size_t test_size = 100;
  double validation_fraction = 0.1;
  std::size_t synthetic = 0;
};

void print_statistics(std::ostream& out, const std::string& name, const CorpusStatistics& s) {
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %8zu %22.2f %20.2f\n", name.c_str(), s.songs, s.phrases_per_song,
                s.notes_per_song);
  out << line;
}

int cmd_ingest(const IngestArgs& a, const CLI::App& sub) {
  const json config = load_config(a.config);
  const std::uint64_t seed = pick_value(sub.get_option("--seed"), a.seed, config, "seed", std::uint64_t{0});
  std::vector<std::string> paths = a.corpus;
  if (paths.empty() && config.contains("corpus")) {
    const auto& c = config.at("corpus");
    if (c.is_string()) paths.push_back(c.get<std::string>());
    else paths = c.get<std::vector<std::string>>();
  }
  FormatDescriptor format;
  if (!a.format.empty()) format = FormatDescriptor::from_json(read_json_file(a.format));
  else if (config.contains("format")) format = FormatDescriptor::from_json(config.at("format"));

  std::vector<Song> songs;
  std::size_t dropped = 0;
  if (a.synthetic > 0) {
    SyntheticOptions o;
    o.songs = a.synthetic;
    o.seed = derive_seed(seed, kSyntheticStream);
    songs = synthetic_corpus(o);
  }
  for (const auto& p : paths) {
    auto parsed = parse_corpus(p, format);
    for (const auto& w : parsed.warnings) std::cerr << "warning: " << w << '\n';
    dropped += parsed.single_phrase_dropped;
    songs.insert(songs.end(), parsed.songs.begin(), parsed.songs.end());
  }
  if (songs.empty()) throw UsageError("ingest needs --corpus or --synthetic");

  SplitOptions split_options;
  split_options.test_size = a.test_size;
  split_options.validation_fraction = a.validation_fraction;
  const CorpusSplit split = split_corpus(songs, derive_seed(seed, kSplitStream), split_options);
  for (const auto& w : split.warnings) std::cerr << "warning: " << w << '\n';

  const fs::path out = output_path(pick_value(sub.get_option("--out"), a.out, config, "output", std::string("corpus")));
  write_json_file(out / "corpus.json", corpus_to_json(songs));
  write_json_file(out / "train.json", corpus_to_json(split.train));
  write_json_file(out / "validation.json", corpus_to_json(split.validation));
  write_json_file(out / "test.json", corpus_to_json(split.test));

  std::ostringstream table;
  char header[160];
  std::snprintf(header, sizeof header, "%-16s %8s %22s %20s\n", "Split", "#Songs", "Avg. Phrases per Song",
                "Avg. Notes per Song");
  table << header;
  print_statistics(table, "all", corpus_statistics(songs));
  print_statistics(table, "train", corpus_statistics(split.train));
  print_statistics(table, "validation", corpus_statistics(split.validation));
  print_statistics(table, "test", corpus_statistics(split.test));
  table << "single-phrase songs excluded: " << dropped << '\n';
  std::ofstream(out / "statistics.txt") << table.str();
  std::cout << table.str();
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string model;
  std::string corpus = "corpus";
  std::string out;
  std::string config;
  std::string preset;
  std::string task = "corruption";
  std::uint64_t seed = 0;
  int epochs = 0;
  double learning_rate = 0;
  int batch_size = 0;
  int hidden = 0, layers = 0, heads = 0, intermediate = 0;
  double max_seconds = 0;
};

int cmd_train(const TrainArgs& a, const CLI::App& sub) {
  const json config = load_config(a.config);
  neural::ModelKind kind;
  try {
    kind = neural::parse_model_kind(a.model);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  const std::string name(neural::to_string(kind));

  neural::ModelConfig mc;
  if (config.contains("models") && config.at("models").contains(name)) {
    mc = neural::ModelConfig::from_json(config.at("models").at(name));
  }
  if (!a.preset.empty()) mc = neural::ModelConfig::from_json(json(a.preset));
  if (a.hidden > 0) mc.hidden = a.hidden;
  if (a.layers > 0) mc.layers = a.layers;
  if (a.heads > 0) mc.heads = a.heads;
  if (a.intermediate > 0) mc.intermediate = a.intermediate;
  mc.validate();

  neural::TrainConfig tc = neural::TrainConfig::from_json(config.value("train", json::object()));
  const std::uint64_t seed = pick_value(sub.get_option("--seed"), a.seed, config, "seed", std::uint64_t{0});
  tc.seed = derive_seed(seed, kTrainStream + static_cast<std::uint64_t>(kind));
  if (a.epochs > 0 || sub.get_option("--epochs")->count() > 0) tc.epochs = a.epochs;
  if (a.learning_rate > 0) tc.learning_rate = a.learning_rate;
  if (a.batch_size > 0) tc.batch_size = a.batch_size;
  if (a.max_seconds > 0) tc.max_seconds = a.max_seconds;
  tc.validate();

  const fs::path corpus_dir = pick_value(sub.get_option("--corpus"), a.corpus, config, "corpus_dir", std::string("corpus"));
  const auto train = load_songs(corpus_dir / "train.json");
  const auto validation = load_songs(corpus_dir / "validation.json");
  const fs::path out = output_path(a.out.empty() ? "checkpoints/" + name + ".ckpt" : a.out);
  const fs::path log = fs::path(out.string() + ".log.jsonl");

  json meta{{"train_config", tc.to_json()}, {"train_songs", train.size()}, {"validation_songs", validation.size()}};
  auto report = [&](const neural::TrainingResult& r) {
    meta["result"] = r.to_json();
    std::cout << name << ": epoch 0 validation loss " << r.initial_validation_loss << ", best "
              << r.best_validation_loss << " at epoch " << r.best_epoch << " (accuracy " << r.best_validation_accuracy
              << ")\n";
  };
  if (neural::is_classifier(kind)) {
    auto trained = kind == neural::ModelKind::selector ? neural::train_selector(train, validation, mc, tc, log)
                                                       : neural::train_sd(train, validation, mc, tc, log);
    report(trained.result);
    neural::save_classifier(out, *trained.model, kind, meta);
  } else {
    neural::Trained<neural::Seq2Seq> trained;
    if (kind == neural::ModelKind::generator) {
      trained = neural::train_generator(train, validation, mc, tc, log);
      meta["conditioning"] = ConditioningStats::from_corpus(train).to_json();
    } else {
      if (a.task != "corruption" && a.task != "copy") throw UsageError("--task must be corruption or copy");
      const auto task = a.task == "copy" ? neural::RefinerTask::copy : neural::RefinerTask::corruption;
      meta["task"] = a.task;
      trained = neural::train_refiner(train, validation, mc, tc, task, log);
    }
    report(trained.result);
    neural::save_seq2seq(out, *trained.model, kind, meta);
  }
  std::cout << "checkpoint: " << out.string() << "\nlog: " << log.string() << '\n';
  return 0;
}

// ---- transform -------------------------------------------------------------

struct TransformArgs {
  std::string kind;
  std::string input;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_transform(const TransformArgs& a) {
  TransformationKind kind;
  try {
    kind = parse_transformation_kind(a.kind);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  const Phrase input = load_phrase(a.input);
  if (!input.is_concrete()) throw DataError("transformations need a phrase without masked notes");
  const Phrase output = transform(input, kind, a.seed, input.key);

  std::size_t changed = 0;
  const std::size_t common = std::min(input.notes.size(), output.notes.size());
  for (std::size_t i = 0; i < common; ++i) changed += input.notes[i] == output.notes[i] ? 0 : 1;
  const std::size_t added = output.notes.size() > common ? output.notes.size() - common : 0;
  const std::size_t removed = input.notes.size() > common ? input.notes.size() - common : 0;

  const fs::path out = output_path(a.out.empty() ? "transformed.json" : a.out);
  write_json_file(out, to_json(output));
  std::cout << to_string(kind) << ": " << input.notes.size() << " -> " << output.notes.size() << " notes; added "
            << added << ", removed " << removed << ", changed " << changed << "\n";
  return 0;
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
  std::string motif;
  std::string plan;
  std::string config;
  std::string form;
  std::string gr_ratio;
  std::string generator = "checkpoints/generator.ckpt";
  std::string refiner = "checkpoints/refiner.ckpt";
  std::string selector;
  std::string out = "piece";
  std::uint64_t seed = 0;
  bool no_selector = false;
  bool stub_models = false;
};

int cmd_generate(const GenerateArgs& a, const CLI::App& sub) {
  const json config = load_config(a.config);
  GenerationPlan plan;
  if (!a.plan.empty()) plan = GenerationPlan::from_json(read_json_file(a.plan));
  else if (config.contains("plan")) plan = GenerationPlan::from_json(config.at("plan"));
  try {
    if (!a.form.empty()) plan.form = parse_form(a.form);
    if (!a.gr_ratio.empty()) plan.gr_ratio = parse_gr_ratio(a.gr_ratio);
    if (!a.form.empty() || !a.gr_ratio.empty()) plan.validate();
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  if (sub.get_option("--seed")->count() > 0) plan.seed = derive_seed(a.seed, kPlanStream);
  else if (config.contains("seed")) plan.seed = derive_seed(config.at("seed").get<std::uint64_t>(), kPlanStream);
  if (a.no_selector) plan.use_selector = false;
  plan.validate();

  const Phrase motif = load_phrase(a.motif);
  EchoGenerator echo;
  IdentityRefiner identity;
  ConstantScorer constant(0.5);
  std::unique_ptr<neural::Seq2Seq> generator_model, refiner_model;
  std::unique_ptr<neural::Classifier> selector_model;
  std::unique_ptr<NeuralGenerator> generator;
  std::unique_ptr<NeuralRefiner> refiner;
  std::unique_ptr<NeuralPairModel> selector;

  ModelSet models;
  if (a.stub_models) {
    models.generator = &echo;
    models.refiner = &identity;
    models.selector = plan.use_selector ? &constant : nullptr;
  } else {
    neural::CheckpointInfo info;
    generator_model = neural::load_seq2seq(a.generator, &info);
    if (info.training.contains("conditioning")) models.stats = ConditioningStats::from_json(info.training.at("conditioning"));
    refiner_model = neural::load_seq2seq(a.refiner);
    generator = std::make_unique<NeuralGenerator>(*generator_model);
    refiner = std::make_unique<NeuralRefiner>(*refiner_model);
    models.generator = generator.get();
    models.refiner = refiner.get();
    if (plan.use_selector && !a.selector.empty()) {
      selector_model = neural::load_classifier(a.selector);
      selector = std::make_unique<NeuralPairModel>(*selector_model);
      models.selector = selector.get();
    } else {
      plan.use_selector = false;
    }
  }

  const fs::path out = output_path(a.out);
  try {
    const GeneratedPiece piece = generate_piece(motif, plan, models);
    write_piece(piece, out);
    std::cout << provenance_report(piece);
    std::cout << piece.song.phrases.size() << " phrases written to " << out.string() << '\n';
  } catch (const GenerationAborted& e) {
    write_piece(e.partial(), out);
    std::cerr << "generation aborted: " << e.what() << "\npartial piece written to " << out.string() << '\n';
    return 3;
  }
  return 0;
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> pieces;
  std::string sd;
  std::string out = "evaluation";
  bool stub_sd = false;
};

std::vector<fs::path> piece_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().filename() == "piece.json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  if (files.empty()) throw DataError("no piece files found");
  return files;
}

int cmd_evaluate(const EvaluateArgs& a) {
  PitchClassScorer stub;
  std::unique_ptr<neural::Classifier> sd_model;
  std::unique_ptr<NeuralPairModel> sd_pairs;
  const PairModel* sd = &stub;
  if (!a.stub_sd) {
    if (a.sd.empty()) throw UsageError("evaluate needs --sd CHECKPOINT or --stub-sd");
    if (!fs::exists(a.sd)) throw DataError("SD checkpoint not found: " + a.sd);
    sd_model = neural::load_classifier(a.sd);
    sd_pairs = std::make_unique<NeuralPairModel>(*sd_model);
    sd = sd_pairs.get();
  }
  const fs::path out = output_path(a.out);
  std::vector<MetricsReport> reports;
  for (const auto& file : piece_files(a.pieces)) {
    const json j = read_json_file(file);
    const Song song = j.value("format", "") == "yinyang-piece" ? song_from_json(j.at("song")) : song_from_json(j);
    const std::string name = file.parent_path().filename().string().empty() ? file.stem().string()
                                                                           : file.parent_path().filename().string();
    reports.push_back(evaluate_piece(*sd, song.phrases, name));
  }
  json all = json::array();
  for (const auto& r : reports) {
    write_json_file(out / (r.name + ".metrics.json"), r.to_json());
    all.push_back(r.to_json());
  }
  std::vector<MetricsReport> rows = reports;
  if (reports.size() > 1) rows.push_back(aggregate(reports));
  write_json_file(out / "metrics.json", json{{"pieces", all}, {"aggregate", aggregate(reports).to_json()}});
  const std::string table = metrics_table(rows);
  std::ofstream(out / "metrics.txt") << table;
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motif development melody generation"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Parse a corpus into canonical JSON and split it");
  s_ingest->add_option("--corpus", ingest.corpus, "Corpus file or directory (repeatable)");
  s_ingest->add_option("--format", ingest.format, "Format descriptor JSON");
  s_ingest->add_option("--synthetic", ingest.synthetic, "Add N synthetic songs");
  s_ingest->add_option("--out", ingest.out, "Output directory");
  s_ingest->add_option("--config", ingest.config, "Run configuration JSON");
  s_ingest->add_option("--seed", ingest.seed, "Global seed");
  s_ingest->add_option("--test-size", ingest.test_size, "Songs held out for testing");
  s_ingest->add_option("--validation-fraction", ingest.validation_fraction, "Validation share of the rest");

  TrainArgs train;
  auto* s_train = app.add_subcommand("train", "Train one model");
  s_train->add_option("--model", train.model, "generator | refiner | selector | sd")->required();
  s_train->add_option("--corpus", train.corpus, "Ingested corpus directory");
  s_train->add_option("--out", train.out, "Checkpoint path");
  s_train->add_option("--config", train.config, "Run configuration JSON");
  s_train->add_option("--preset", train.preset, "desk | full-generator | full-refiner | full-classifier");
  s_train->add_option("--task", train.task, "Refiner task: corruption | copy");
  s_train->add_option("--seed", train.seed, "Global seed");
  s_train->add_option("--epochs", train.epochs, "Epochs");
  s_train->add_option("--lr", train.learning_rate, "Learning rate");
  s_train->add_option("--batch-size", train.batch_size, "Batch size");
  s_train->add_option("--hidden", train.hidden, "Hidden size");
  s_train->add_option("--layers", train.layers, "Layer count");
  s_train->add_option("--heads", train.heads, "Attention heads");
  s_train->add_option("--intermediate", train.intermediate, "Feed-forward size");
  s_train->add_option("--max-seconds", train.max_seconds, "Wall-clock budget");

  TransformArgs transform_args;
  auto* s_transform = app.add_subcommand("transform", "Apply one transformation to a phrase");
  s_transform->add_option("--kind", transform_args.kind, "Transformation kind")->required();
  s_transform->add_option("--input", transform_args.input, "Phrase JSON, song JSON, or MIDI")->required();
  s_transform->add_option("--out", transform_args.out, "Output phrase JSON");
  s_transform->add_option("--seed", transform_args.seed, "Seed");

  GenerateArgs gen;
  auto* s_generate = app.add_subcommand("generate", "Generate a piece from a motif");
  s_generate->add_option("--motif", gen.motif, "Motif phrase (JSON or MIDI)")->required();
  s_generate->add_option("--plan", gen.plan, "Generation plan JSON");
  s_generate->add_option("--config", gen.config, "Run configuration JSON");
  s_generate->add_option("--form", gen.form, "Form, e.g. A:4,B:4");
  s_generate->add_option("--gr-ratio", gen.gr_ratio, "G:R ratio, e.g. 2:1");
  s_generate->add_option("--generator", gen.generator, "Generator checkpoint");
  s_generate->add_option("--refiner", gen.refiner, "Refiner checkpoint");
  s_generate->add_option("--selector", gen.selector, "Selector checkpoint");
  s_generate->add_flag("--no-selector", gen.no_selector, "Disable the selector (single sample at T=1.0)");
  s_generate->add_flag("--stub-models", gen.stub_models, "Use echo/identity/constant stand-ins");
  s_generate->add_option("--out", gen.out, "Output directory");
  s_generate->add_option("--seed", gen.seed, "Global seed");

  EvaluateArgs eval;
  auto* s_evaluate = app.add_subcommand("evaluate", "Compute SD, Vendi, pitch range, unique pitches");
  s_evaluate->add_option("--piece", eval.pieces, "piece.json or a directory of pieces (repeatable)")->required();
  s_evaluate->add_option("--sd", eval.sd, "SD checkpoint");
  s_evaluate->add_flag("--stub-sd", eval.stub_sd, "Use the pitch-class stand-in instead of a checkpoint");
  s_evaluate->add_option("--out", eval.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (s_ingest->parsed()) return cmd_ingest(ingest, *s_ingest);
    if (s_train->parsed()) return cmd_train(train, *s_train);
    if (s_transform->parsed()) return cmd_transform(transform_args);
    if (s_generate->parsed()) return cmd_generate(gen, *s_generate);
    if (s_evaluate->parsed()) return cmd_evaluate(eval);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

#include "src/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "splitpit/checkpoint.hpp"
#include "splitpit/error.hpp"
#include "splitpit/inference.hpp"

namespace splitpit::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;

std::string data_file(const RunConfig& config, const char* name) {
  return (fs::path(config.text("data.dir")) / name).string();
}

struct Splits {
  std::vector<ComplexSimplePair> train;
  std::vector<ComplexSimplePair> valid;
};

Splits load_splits(const RunConfig& config) {
  const auto pairs = load_split_corpus(data_file(config, "corpus.tsv"));
  Rng rng = Rng::derive(config.seed(), "holdout");
  auto [train, valid] = split_holdout(pairs, config.real("data.holdout"), rng);
  return {std::move(train), std::move(valid)};
}

std::string require_path(const RunConfig& config, const std::string& key) {
  const std::string& path = config.text(key);
  if (path.empty()) throw ValidationError(key + " must be set");
  return path;
}

void start(const RunConfig& config, const std::string& command, std::ostream& out) {
  config.validate();
  out << config.header(command) << std::flush;
}

}  // namespace

int cmd_gen_data(const RunConfig& config, std::ostream& out) {
  start(config, "gen-data", out);
  Rng corpus_rng = Rng::derive(config.seed(), "datagen");
  const SyntheticCorpus corpus = generate_synthetic_corpus(config.synthetic(), corpus_rng);
  Rng fact_rng = Rng::derive(config.seed(), "facts");
  const auto facts = make_fact_dataset(corpus.facts, fact_rng);

  const fs::path dir(config.text("data.dir"));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create data directory " + dir.string() + ": " + ec.message());

  save_split_corpus(data_file(config, "corpus.tsv"), corpus.pairs);
  save_fact_dataset(data_file(config, "facts.tsv"), facts);
  const Vocabulary vocab = build_vocab(corpus.pairs, config.count("data.max_vocab"));
  const CorpusStats stats = corpus_stats(corpus.pairs, vocab.size());
  const std::string stats_path = data_file(config, "stats.txt");
  std::ofstream stats_out(stats_path, std::ios::binary | std::ios::trunc);
  if (!stats_out) throw IoError("cannot write " + stats_path);
  write_stats(stats_out, stats);
  if (!stats_out.flush()) throw IoError("cannot write " + stats_path);

  out << "wrote " << corpus.pairs.size() << " pairs and " << facts.size() << " fact examples to " << dir.string()
      << '\n';
  write_stats(out, stats);
  return kExitOk;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  start(config, "train", out);
  const Splits splits = load_splits(config);
  const TrainConfig train_config = config.train();
  std::vector<SentenceFactPair> facts;
  if (train_config.multitask) facts = facts_for(load_fact_dataset(data_file(config, "facts.tsv")), splits.train);

  const std::string log_path = config.text("train.log");
  std::ofstream log_file;
  if (!log_path.empty()) {
    log_file.open(log_path, std::ios::binary | std::ios::trunc);
    if (!log_file) throw IoError("cannot write training log " + log_path);
  }
  TrainLog log(log_path.empty() ? nullptr : &log_file);
  const TrainResult result = train(train_config, splits.train, splits.valid, facts, log);
  if (!train_config.checkpoint_path.empty()) save_checkpoint(train_config.checkpoint_path, result.final_model);

  out << std::setprecision(17) << "trained on " << splits.train.size() << " pairs (" << facts.size()
      << " fact examples), " << log.steps().size() << " steps\n";
  if (!log.steps().empty()) out << "last " << log.steps().back().to_line() << '\n';
  if (result.best_valid_bleu) out << "best valid_bleu=" << *result.best_valid_bleu << '\n';
  if (!train_config.checkpoint_path.empty()) out << "checkpoint " << train_config.checkpoint_path << '\n';
  return kExitOk;
}

int cmd_eval(const RunConfig& config, std::ostream& out) {
  start(config, "eval", out);
  const Checkpoint ckpt = load_checkpoint(require_path(config, "eval.model"));
  const SplitModel model(ckpt.config, ckpt.params);

  std::vector<ComplexSimplePair> pairs;
  std::vector<SentenceFactPair> facts;
  if (config.text("eval.data").empty()) {
    pairs = load_splits(config).valid;
    const std::string facts_path = data_file(config, "facts.tsv");
    if (fs::exists(facts_path)) facts = facts_for(load_fact_dataset(facts_path), pairs);
  } else {
    pairs = load_split_corpus(config.text("eval.data"));
  }
  if (pairs.empty()) throw ValidationError("eval: no pairs to evaluate");

  const EvalResult result = evaluate(model, ckpt.vocab, pairs, config.count("eval.beam"), config.pit().max_k);
  std::ostringstream report;
  report << result.report.to_text() << std::setprecision(17) << "exact_match=" << result.exact_match << '\n';
  if (!facts.empty()) report << "fact_accuracy=" << fact_accuracy(model, ckpt.vocab, facts) << '\n';
  report << result.report.to_key_values() << '\n';
  out << report.str();

  if (const std::string& path = config.text("eval.report"); !path.empty()) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!(file << report.str()) || !file.flush()) throw IoError("cannot write report " + path);
  }
  return kExitOk;
}

int cmd_split(const RunConfig& config, std::ostream& out) {
  start(config, "split", out);
  const Checkpoint ckpt = load_checkpoint(require_path(config, "eval.model"));
  const SplitModel model(ckpt.config, ckpt.params);
  const std::size_t n = split_file(model, ckpt.vocab, require_path(config, "eval.input"),
                                   require_path(config, "eval.output"), config.count("eval.beam"));
  out << "split " << n << " lines into " << config.text("eval.output") << '\n';
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& out) {
  start(config, "gradcheck", out);
  const double tolerance = config.real("gradcheck.tolerance");
  bool ok = true;
  for (const auto& r : run_gradient_checks(config.gradcheck())) {
    const bool pass = r.max_rel_error < tolerance;
    ok = ok && pass;
    out << (pass ? "PASS " : "FAIL ") << std::left << std::setw(34) << r.name << std::scientific
        << std::setprecision(3) << r.max_rel_error << std::defaultfloat << '\n';
  }
  out << (ok ? "gradcheck passed" : "gradcheck FAILED") << " (tolerance " << tolerance << ")\n";
  return ok ? kExitOk : kExitValidation;
}

int cmd_ablate(const RunConfig& config, std::ostream& out) {
  start(config, "ablate", out);
  const Splits splits = load_splits(config);
  const TrainConfig base = config.train();
  std::vector<SentenceFactPair> facts;
  if (base.multitask) facts = facts_for(load_fact_dataset(data_file(config, "facts.tsv")), splits.train);
  const auto modes = config.ablate_modes();
  const auto seeds = config.ablate_seeds();
  const auto rows = ablation_run(base, splits.train, splits.valid, facts, modes, seeds, config.count("eval.beam"));
  out << format_ablation_table(rows);
  for (const auto& row : rows) {
    out << to_string(row.mode) << " bleu=";
    for (std::size_t i = 0; i < row.bleu.size(); ++i) out << (i ? "," : "") << std::setprecision(17) << row.bleu[i];
    out << '\n';
  }
  return kExitOk;
}

}  // namespace splitpit::cli

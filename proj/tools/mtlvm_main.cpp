// Command-line front end: ingest/filter/stats, synthetic generation and
// enumeration oracles, training (mtlvm|bmhmm|lda), resume, prediction,
// label scoring, and the figure-backing exports.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mtlvm/baselines.hpp"
#include "mtlvm/corpus.hpp"
#include "mtlvm/eval.hpp"
#include "mtlvm/predict.hpp"
#include "mtlvm/sampler.hpp"
#include "mtlvm/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// exit 3: loaded checkpoint failed its invariant audit
struct CheckpointViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hash_hex(const fs::path& path) {
  std::ostringstream ss;
  ss << std::hex << fnv1a(read_file(path));
  return ss.str();
}

// One manifest per output directory: command line, seed, io paths with
// content hashes. Wall-clock timestamp included; the data artifacts stay
// byte-reproducible for a fixed seed.
void write_manifest(const fs::path& out_dir, const std::string& command,
                    std::uint64_t seed,
                    const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs) {
  json m;
  m["command"] = command;
  m["seed"] = seed;
  m["timestamp"] = static_cast<std::int64_t>(std::time(nullptr));
  json jin = json::array(), jout = json::array();
  for (const auto& p : inputs)
    jin.push_back({{"path", p.string()}, {"hash", hash_hex(p)}});
  for (const auto& p : outputs)
    jout.push_back({{"path", p.string()}, {"hash", hash_hex(p)}});
  m["inputs"] = jin;
  m["outputs"] = jout;
  std::ofstream out(out_dir / "manifest.json");
  out << m.dump(2) << "\n";
}

mtlvm::corpus::Corpus load_corpus(const fs::path& path,
                                  const mtlvm::corpus::IngestOptions& opts = {},
                                  mtlvm::corpus::IngestReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  return mtlvm::corpus::ingest(in, opts, report);
}

mtlvm::sampler::Model load_checkpoint(const fs::path& path) {
  try {
    return mtlvm::sampler::Model::from_json(json::parse(read_file(path)));
  } catch (const std::runtime_error& e) {
    throw CheckpointViolation(std::string("checkpoint audit failed: ") +
                              e.what());
  }
}

void log_kv(const std::string& key, const std::string& value) {
  std::cerr << key << "=" << value << "\n";
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recruitment-state topic model toolkit"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads,
                 "cap for read-parallel likelihood workers (0 = default)");

  std::string full_command;
  for (int i = 0; i < argc; ++i) {
    if (i) full_command += " ";
    full_command += argv[i];
  }

  int rc = 0;

  // ---- ingest ----------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "read JSONL postings");
  std::string ingest_in, ingest_out = ".", stop_words_path;
  int months_per_epoch = 1;
  ingest->add_option("--input", ingest_in, "postings JSONL")->required();
  ingest->add_option("--output", ingest_out, "output directory");
  ingest->add_option("--months-per-epoch", months_per_epoch);
  ingest->add_option("--stop-words", stop_words_path, "one token per line");
  ingest->callback([&] {
    mtlvm::corpus::IngestOptions opts;
    opts.months_per_epoch = months_per_epoch;
    if (!stop_words_path.empty()) opts.stop_words = read_lines(stop_words_path);
    mtlvm::corpus::IngestReport report;
    auto corpus = load_corpus(ingest_in, opts, &report);
    fs::create_directories(ingest_out);
    fs::path out = fs::path(ingest_out) / "corpus.jsonl";
    std::ofstream os(out);
    mtlvm::corpus::write_jsonl(corpus, os);
    os.close();
    log_kv("records", std::to_string(report.records));
    log_kv("skipped_empty", std::to_string(report.skipped_empty));
    log_kv("vocab_size", std::to_string(corpus.vocab_size()));
    write_manifest(ingest_out, full_command, 0, {ingest_in}, {out});
  });

  // ---- filter ----------------------------------------------------------
  auto* filter = app.add_subcommand("filter", "drop low-volume entities");
  std::string filter_in, filter_out = ".";
  std::int64_t threshold = 100;
  bool keep_vocab = false;
  filter->add_option("--input", filter_in)->required();
  filter->add_option("--output", filter_out);
  filter->add_option("--threshold", threshold,
                     "keep entities with strictly more documents than this");
  filter->add_flag("--keep-vocabulary", keep_vocab,
                   "skip vocabulary compaction");
  filter->callback([&] {
    auto corpus = load_corpus(filter_in);
    auto filtered =
        mtlvm::corpus::filter_min_postings(corpus, threshold, !keep_vocab);
    fs::create_directories(filter_out);
    fs::path out = fs::path(filter_out) / "corpus.jsonl";
    std::ofstream os(out);
    mtlvm::corpus::write_jsonl(filtered, os);
    os.close();
    log_kv("entities", std::to_string(filtered.chains.size()));
    write_manifest(filter_out, full_command, 0, {filter_in}, {out});
  });

  // ---- stats -----------------------------------------------------------
  auto* stats = app.add_subcommand("stats", "corpus shape summary");
  std::string stats_in, stats_out;
  stats->add_option("--input", stats_in)->required();
  stats->add_option("--output", stats_out, "directory for the CSV exports");
  stats->callback([&] {
    auto corpus = load_corpus(stats_in);
    auto s = mtlvm::corpus::stats(corpus);
    std::cout << "(" << s.n_documents << "," << s.n_entities << ","
              << s.n_units << "," << s.n_chains << ")\n";
    if (!stats_out.empty()) {
      fs::create_directories(stats_out);
      fs::path f1 = fs::path(stats_out) / "stats.csv";
      fs::path f2 = fs::path(stats_out) / "histograms.csv";
      std::ofstream o1(f1), o2(f2);
      mtlvm::corpus::write_stats_csv(s, o1);
      mtlvm::corpus::write_histograms_csv(s, o2);
      o1.close();
      o2.close();
      write_manifest(stats_out, full_command, 0, {stats_in}, {f1, f2});
    }
  });

  // ---- synth -----------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "sample a ground-truth corpus");
  synth->set_config("--config");
  std::string synth_out = ".";
  mtlvm::synth::SynthConfig sc;
  std::uint64_t synth_seed = 0;
  synth->add_option("--output", synth_out);
  synth->add_option("--states", sc.num_states);
  synth->add_option("--vocab", sc.vocab_size);
  synth->add_option("--entities", sc.num_entities);
  synth->add_option("--epochs", sc.num_epochs);
  synth->add_option("--docs-per-unit", sc.docs_per_unit);
  synth->add_option("--tokens-per-doc", sc.tokens_per_doc);
  synth->add_option("--alpha", sc.alpha);
  synth->add_option("--gamma0", sc.gamma.gamma0);
  synth->add_option("--gamma1", sc.gamma.gamma1);
  synth->add_option("--gamma2", sc.gamma.gamma2);
  synth->add_option("--eta0", sc.eta0);
  synth->add_flag("--separation", sc.separation);
  synth->add_flag("--crp-path", sc.use_crp_path);
  synth->add_option("--seed", synth_seed);
  synth->callback([&] {
    mtlvm::Rng rng(synth_seed);
    auto [corpus, truth] = mtlvm::synth::generate(sc, rng);
    fs::create_directories(synth_out);
    fs::path cp = fs::path(synth_out) / "corpus.jsonl";
    fs::path tp = fs::path(synth_out) / "truth.json";
    std::ofstream oc(cp), ot(tp);
    mtlvm::corpus::write_jsonl(corpus, oc);
    mtlvm::synth::write_truth_json(truth, ot);
    oc.close();
    ot.close();
    write_manifest(synth_out, full_command, synth_seed, {}, {cp, tp});
  });

  // ---- oracle ----------------------------------------------------------
  auto* oracle = app.add_subcommand(
      "oracle", "exact posterior enumeration for a tiny corpus");
  std::string oracle_in, oracle_out = ".";
  mtlvm::synth::OracleConfig oc_cfg;
  oracle->add_option("--input", oracle_in)->required();
  oracle->add_option("--output", oracle_out);
  oracle->add_option("--states", oc_cfg.num_states);
  oracle->add_option("--alpha", oc_cfg.alpha);
  oracle->add_option("--gamma0", oc_cfg.gamma.gamma0);
  oracle->add_option("--gamma1", oc_cfg.gamma.gamma1);
  oracle->add_option("--gamma2", oc_cfg.gamma.gamma2);
  oracle->add_option("--eta0", oc_cfg.eta0);
  oracle->callback([&] {
    auto corpus = load_corpus(oracle_in);
    auto table = mtlvm::synth::enumerate_posterior(corpus, oc_cfg);
    json j;
    j["log_total_mass"] = table.log_total_mass();
    json entries = json::array();
    for (const auto& e : table.entries())
      entries.push_back({{"unit_states", e.unit_states},
                         {"table_rgs", e.table_rgs},
                         {"dish_rgs", e.dish_rgs},
                         {"atom_rgs", e.atom_rgs},
                         {"log_joint", e.log_joint},
                         {"prob", e.prob}});
    j["entries"] = entries;
    fs::create_directories(oracle_out);
    fs::path out = fs::path(oracle_out) / "oracle.json";
    std::ofstream os(out);
    os << j.dump() << "\n";
    os.close();
    log_kv("configurations", std::to_string(table.entries().size()));
    write_manifest(oracle_out, full_command, 0, {oracle_in}, {out});
  });

  // ---- train -----------------------------------------------------------
  auto* train = app.add_subcommand("train", "fit a model");
  train->set_config("--config");
  std::string train_model, train_in, train_out = ".";
  mtlvm::sampler::Hyperparams hp;
  mtlvm::baselines::LdaConfig lda_cfg;
  int checkpoint_every = 0;
  train->add_option("model", train_model, "mtlvm|bmhmm|lda")
      ->check(CLI::IsMember({"mtlvm", "bmhmm", "lda"}))
      ->required();
  train->add_option("--input", train_in)->required();
  train->add_option("--output", train_out);
  train->add_option("--states", hp.num_states, "state count C");
  train->add_option("--alpha", hp.alpha, "transition Dirichlet concentration");
  train->add_option("--gamma0", hp.gamma.gamma0, "global DP concentration");
  train->add_option("--gamma1", hp.gamma.gamma1, "per-state DP concentration");
  train->add_option("--gamma2", hp.gamma.gamma2, "per-document DP concentration");
  train->add_option("--eta0", hp.eta0, "topic base-measure concentration");
  train->add_option("--sweeps", hp.sweeps, "total Gibbs sweeps");
  train->add_option("--burn-in", hp.burn_in, "burn-in sweeps (< sweeps)");
  train->add_option("--thin", hp.thin, "trace thinning interval");
  train->add_option("--seed", hp.seed, "generator seed");
  train->add_option("--checkpoint-every", checkpoint_every);
  train->add_option("--topics", lda_cfg.num_topics, "LDA topic count K");
  train->add_option("--topic-prior", lda_cfg.topic_prior);
  train->add_option("--doc-prior", lda_cfg.doc_prior,
                    "LDA document prior (0 = 50/K)");
  train->callback([&] {
    auto corpus = load_corpus(train_in);
    fs::create_directories(train_out);
    if (train_model == "mtlvm") {
      fs::path tp = fs::path(train_out) / "trace.csv";
      fs::path cp = fs::path(train_out) / "checkpoint.json";
      std::ofstream trace(tp);
      mtlvm::sampler::TrainOptions opts;
      opts.trace = &trace;
      opts.checkpoint_every = checkpoint_every;
      opts.checkpoint_sink = [&](const mtlvm::sampler::Model& m) {
        std::ofstream os(cp);
        os << m.to_json().dump() << "\n";
      };
      opts.parallel_likelihood = threads != 1;
#ifdef _OPENMP
      if (threads > 0) omp_set_num_threads(threads);
#endif
      auto model = mtlvm::sampler::train(corpus, hp, opts);
      trace.close();
      log_kv("logp", std::to_string(model.joint_log_prob()));
      write_manifest(train_out, full_command, hp.seed, {train_in}, {tp, cp});
    } else if (train_model == "bmhmm") {
      mtlvm::baselines::BmHmmHyperparams bh;
      bh.num_states = hp.num_states;
      bh.alpha = hp.alpha;
      bh.emission_prior = hp.eta0;
      bh.sweeps = hp.sweeps;
      bh.seed = hp.seed;
      mtlvm::Rng rng(bh.seed);
      auto model = mtlvm::baselines::train_bmhmm(corpus, bh, rng);
      fs::path mp = fs::path(train_out) / "bmhmm.json";
      std::ofstream os(mp);
      os << model.to_json().dump() << "\n";
      os.close();
      write_manifest(train_out, full_command, bh.seed, {train_in}, {mp});
    } else {
      lda_cfg.sweeps = hp.sweeps;
      lda_cfg.seed = hp.seed;
      mtlvm::Rng rng(lda_cfg.seed);
      auto model = mtlvm::baselines::train_lda(corpus, lda_cfg, rng);
      fs::path mp = fs::path(train_out) / "lda.json";
      std::ofstream os(mp);
      os << model.to_json().dump() << "\n";
      os.close();
      log_kv("perplexity", std::to_string(model.training_perplexity()));
      write_manifest(train_out, full_command, lda_cfg.seed, {train_in}, {mp});
    }
  });

  // ---- resume ----------------------------------------------------------
  auto* resume = app.add_subcommand("resume", "continue a checkpointed run");
  std::string resume_cp, resume_out = ".";
  int resume_sweeps = 0;
  resume->add_option("--checkpoint", resume_cp)->required();
  resume->add_option("--sweeps", resume_sweeps, "additional sweeps")
      ->required();
  resume->add_option("--output", resume_out);
  resume->callback([&] {
    auto model = load_checkpoint(resume_cp);
    fs::create_directories(resume_out);
    fs::path tp = fs::path(resume_out) / "trace.csv";
    fs::path cp = fs::path(resume_out) / "checkpoint.json";
    std::ofstream trace(tp);
    mtlvm::sampler::write_trace_header(model.hyperparams().num_states, trace);
    mtlvm::sampler::TrainOptions opts;
    opts.trace = &trace;
    opts.checkpoint_sink = [&](const mtlvm::sampler::Model& m) {
      std::ofstream os(cp);
      os << m.to_json().dump() << "\n";
    };
    mtlvm::sampler::resume(model, resume_sweeps, opts);
    trace.close();
    write_manifest(resume_out, full_command, model.hyperparams().seed,
                   {resume_cp}, {tp, cp});
  });

  // ---- predict ---------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "held-out scoring");
  std::string pr_cp, pr_bmhmm, pr_train_corpus, pr_test, pr_out = ".";
  predict->add_option("--checkpoint", pr_cp)->required();
  predict->add_option("--bmhmm", pr_bmhmm, "optional baseline model");
  predict->add_option("--corpus", pr_train_corpus, "training corpus (vocabulary)")
      ->required();
  predict->add_option("--test", pr_test)->required();
  predict->add_option("--output", pr_out);
  predict->callback([&] {
    auto train_corpus = load_corpus(pr_train_corpus);
    auto test_corpus = load_corpus(pr_test);
    auto model = load_checkpoint(pr_cp);
    auto view = mtlvm::predict::make_view(model, train_corpus.vocabulary);
    auto report = mtlvm::predict::heldout_log_likelihood(test_corpus, view);
    fs::create_directories(pr_out);
    fs::path rp = fs::path(pr_out) / "predictions.csv";
    fs::path hp_path = fs::path(pr_out) / "heldout.csv";
    std::ofstream ro(rp);
    mtlvm::predict::write_report_csv(report, ro);
    ro.close();
    std::vector<mtlvm::predict::HeldoutRow> rows;
    rows.push_back({"MTLVM", true, report.total_ll});
    if (!pr_bmhmm.empty()) {
      auto bm = mtlvm::baselines::BmHmmModel::from_json(
          json::parse(read_file(pr_bmhmm)));
      auto bview = mtlvm::predict::make_view(bm, train_corpus.vocabulary);
      auto breport =
          mtlvm::predict::heldout_log_likelihood(test_corpus, bview);
      rows.push_back({"B-mHMM", true, breport.total_ll});
    } else {
      rows.push_back({"B-mHMM", false, 0.0});
    }
    rows.push_back({"DTM", false, 0.0});  // computed externally, schema only
    std::ofstream ho(hp_path);
    mtlvm::predict::write_heldout_table(rows, ho);
    ho.close();
    log_kv("heldout_ll", std::to_string(report.total_ll));
    log_kv("skipped_entities", std::to_string(report.skipped_entities));
    log_kv("oov_tokens", std::to_string(report.oov_tokens));
    write_manifest(pr_out, full_command, model.hyperparams().seed,
                   {pr_cp, pr_train_corpus, pr_test}, {rp, hp_path});
  });

  // ---- eval ------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "score expert topic labels");
  std::string eval_labels, eval_out = ".", eval_model_name = "MTLVM";
  int eval_topics = 0, eval_topk = 10;
  eval_cmd->add_option("--labels", eval_labels)->required();
  eval_cmd->add_option("--output", eval_out);
  eval_cmd->add_option("--model-name", eval_model_name);
  eval_cmd->add_option("--topics", eval_topics, "K column of the table");
  eval_cmd->add_option("--top-k", eval_topk);
  eval_cmd->callback([&] {
    std::ifstream in(eval_labels);
    if (!in) throw std::runtime_error("cannot open " + eval_labels);
    auto labels = mtlvm::eval::read_labels_csv(in, eval_topk);
    auto report = mtlvm::eval::compute_vm_cm(labels);
    fs::create_directories(eval_out);
    fs::path sp = fs::path(eval_out) / "scores.csv";
    std::ofstream so(sp);
    mtlvm::eval::write_score_table({{eval_model_name, eval_topics, report}},
                                   so);
    so.close();
    log_kv("vm", std::to_string(report.vm_avg));
    if (report.cm_defined) {
      log_kv("cm", std::to_string(report.cm_avg));
      log_kv("cm_word_fraction", std::to_string(report.cm_word_fraction_avg));
    } else {
      log_kv("cm", "undefined");
    }
    write_manifest(eval_out, full_command, 0, {eval_labels}, {sp});
  });

  // ---- export-topics ---------------------------------------------------
  auto* ext = app.add_subcommand("export-topics", "top keywords per topic");
  std::string ext_cp, ext_corpus, ext_out = ".";
  int ext_k = 10;
  ext->add_option("--checkpoint", ext_cp)->required();
  ext->add_option("--corpus", ext_corpus, "training corpus (vocabulary)")
      ->required();
  ext->add_option("--k", ext_k);
  ext->add_option("--output", ext_out);
  ext->callback([&] {
    auto corpus = load_corpus(ext_corpus);
    auto model = load_checkpoint(ext_cp);
    auto exp = mtlvm::eval::export_topics(model, ext_k);
    fs::create_directories(ext_out);
    fs::path f1 = fs::path(ext_out) / "topics.csv";
    fs::path f2 = fs::path(ext_out) / "state_topics.csv";
    fs::path f3 = fs::path(ext_out) / "topics.txt";
    std::ofstream o1(f1), o2(f2), o3(f3);
    mtlvm::eval::write_topics_csv(exp, corpus.vocabulary, o1);
    mtlvm::eval::write_state_topics_csv(exp, o2);
    mtlvm::eval::write_topics_keyed(exp, corpus.vocabulary, o3);
    o1.close();
    o2.close();
    o3.close();
    write_manifest(ext_out, full_command, model.hyperparams().seed,
                   {ext_cp, ext_corpus}, {f1, f2, f3});
  });

  // ---- export-states ---------------------------------------------------
  auto* exs = app.add_subcommand("export-states", "occupancy and trajectories");
  std::string exs_cp, exs_out = ".";
  exs->add_option("--checkpoint", exs_cp)->required();
  exs->add_option("--output", exs_out);
  exs->callback([&] {
    auto model = load_checkpoint(exs_cp);
    auto trends = mtlvm::eval::export_state_trends(model);
    fs::create_directories(exs_out);
    fs::path f1 = fs::path(exs_out) / "occupancy.csv";
    fs::path f2 = fs::path(exs_out) / "trajectories.csv";
    std::ofstream o1(f1), o2(f2);
    mtlvm::eval::write_occupancy_csv(trends, model.hyperparams().num_states,
                                     o1);
    mtlvm::eval::write_trajectories_csv(trends, o2);
    o1.close();
    o2.close();
    write_manifest(exs_out, full_command, model.hyperparams().seed, {exs_cp},
                   {f1, f2});
  });

  // ---- export-transitions ----------------------------------------------
  auto* exr = app.add_subcommand("export-transitions",
                                 "posterior-mean transition rows");
  std::string exr_cp, exr_out = ".";
  exr->add_option("--checkpoint", exr_cp)->required();
  exr->add_option("--output", exr_out);
  exr->callback([&] {
    auto model = load_checkpoint(exr_cp);
    auto rho = mtlvm::markov::estimate_rho(model.states());
    fs::create_directories(exr_out);
    fs::path f1 = fs::path(exr_out) / "transitions.csv";
    std::ofstream o1(f1);
    mtlvm::markov::write_transitions_csv(rho, o1);
    o1.close();
    write_manifest(exr_out, full_command, model.hyperparams().seed, {exr_cp},
                   {f1});
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const CheckpointViolation& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

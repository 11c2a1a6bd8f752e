#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "mtlvm/baselines.hpp"
#include "mtlvm/synth.hpp"

using namespace mtlvm::baselines;
using mtlvm::Rng;

namespace {

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  auto choose2 = [](double n) { return n * (n - 1) / 2; };
  std::map<std::pair<int, int>, double> cell;
  std::map<int, double> row, col;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++cell[{a[i], b[i]}];
    ++row[a[i]];
    ++col[b[i]];
  }
  double sum_cell = 0, sum_row = 0, sum_col = 0;
  for (auto& [k, v] : cell) sum_cell += choose2(v);
  for (auto& [k, v] : row) sum_row += choose2(v);
  for (auto& [k, v] : col) sum_col += choose2(v);
  double total = choose2(static_cast<double>(a.size()));
  double expected = sum_row * sum_col / total;
  return (sum_cell - expected) / (0.5 * (sum_row + sum_col) - expected);
}

mtlvm::corpus::Corpus grouped_corpus() {
  // 40 flat documents over two disjoint five-word vocabularies
  mtlvm::corpus::Corpus c;
  for (int w = 0; w < 10; ++w) c.vocabulary.push_back("w" + std::to_string(w));
  mtlvm::corpus::DataChain chain{"e0", {}};
  mtlvm::corpus::DataUnit unit{"e0", 0, {}};
  for (int d = 0; d < 40; ++d) {
    mtlvm::corpus::Document doc{"e0", 0, {}};
    int base = d < 20 ? 0 : 5;
    for (int n = 0; n < 8; ++n) doc.tokens.push_back(base + (d + n) % 5);
    unit.documents.push_back(std::move(doc));
  }
  chain.units.push_back(std::move(unit));
  c.chains.push_back(std::move(chain));
  c.epoch_count = 1;
  return c;
}

}  // namespace

TEST_CASE("baseline hyperparameters are validated") {
  BmHmmHyperparams hp;
  hp.num_states = 0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  LdaConfig cfg;
  cfg.topic_prior = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  CHECK(cfg.effective_doc_prior() == doctest::Approx(0.5));  // 50/K at K=100
  cfg.doc_prior = 0.2;
  CHECK(cfg.effective_doc_prior() == doctest::Approx(0.2));
}

TEST_CASE("one-state emission rows are the smoothed unigram distribution") {
  mtlvm::corpus::Corpus c;
  c.vocabulary = {"a", "b", "c"};
  mtlvm::corpus::Document doc{"e0", 0, {0, 0, 1}};
  c.chains.push_back({"e0", {{"e0", 0, {doc}}}});
  c.epoch_count = 1;

  BmHmmHyperparams hp;
  hp.num_states = 1;
  hp.sweeps = 3;
  Rng rng(1);
  BmHmmModel m = train_bmhmm(c, hp, rng);
  auto iota = m.posterior_mean_iota();
  CHECK(iota[0][0] == doctest::Approx((2 + 0.5) / (3 + 1.5)));
  CHECK(iota[0][1] == doctest::Approx((1 + 0.5) / (3 + 1.5)));
  CHECK(iota[0][2] == doctest::Approx((0 + 0.5) / (3 + 1.5)));
  CHECK(m.state_total(0) == 3);
}

TEST_CASE("two separable states are recovered with high agreement") {
  mtlvm::synth::SynthConfig cfg;
  cfg.num_states = 2;
  cfg.vocab_size = 20;
  cfg.num_entities = 10;
  cfg.num_epochs = 5;
  cfg.docs_per_unit = 2;
  cfg.tokens_per_doc = 10;
  cfg.separation = true;
  Rng gen(2);
  auto [corpus, truth] = mtlvm::synth::generate(cfg, gen);

  BmHmmHyperparams hp;
  hp.num_states = 2;
  hp.sweeps = 100;
  hp.seed = 3;
  Rng rng(hp.seed);
  BmHmmModel m = train_bmhmm(corpus, hp, rng);
  m.audit();

  std::vector<int> found, expected;
  int u = 0;
  for (int e = 0; e < cfg.num_entities; ++e)
    for (int t = 0; t < cfg.num_epochs; ++t) {
      found.push_back(m.unit_state(u++));
      expected.push_back(truth.true_states[e][t]);
    }
  CHECK(adjusted_rand_index(found, expected) >= 0.9);
}

TEST_CASE("baseline chain model serializes exactly") {
  mtlvm::synth::SynthConfig cfg;
  cfg.num_entities = 3;
  cfg.num_epochs = 3;
  Rng gen(4);
  auto corpus = mtlvm::synth::generate(cfg, gen).first;
  BmHmmHyperparams hp;
  hp.num_states = 3;
  hp.sweeps = 10;
  Rng rng(5);
  BmHmmModel m = train_bmhmm(corpus, hp, rng);
  auto j = m.to_json();
  BmHmmModel loaded = BmHmmModel::from_json(j);
  loaded.audit();
  CHECK(loaded.to_json().dump() == j.dump());
}

TEST_CASE("one-topic one-word corpus gives the degenerate mixture") {
  mtlvm::corpus::Corpus c;
  c.vocabulary = {"a", "b"};
  mtlvm::corpus::Document doc{"e0", 0, {0}};
  c.chains.push_back({"e0", {{"e0", 0, {doc}}}});
  c.epoch_count = 1;

  LdaConfig cfg;
  cfg.num_topics = 1;
  cfg.sweeps = 2;
  Rng rng(6);
  LdaModel m = train_lda(c, cfg, rng);
  CHECK(m.num_documents() == 1);
  auto tw = m.topic_word_distributions();
  CHECK(tw[0][0] == doctest::Approx(1.5 / 2.0));
  CHECK(tw[0][1] == doctest::Approx(0.5 / 2.0));
  CHECK(m.document_topic_distributions()[0][0] == doctest::Approx(1.0));
  CHECK(m.training_perplexity() > 1.0);
}

TEST_CASE("two disjoint word groups split into two topics") {
  LdaConfig cfg;
  cfg.num_topics = 2;
  cfg.sweeps = 150;
  cfg.seed = 7;
  Rng rng(cfg.seed);
  LdaModel m = train_lda(grouped_corpus(), cfg, rng);
  m.audit();

  auto top0 = m.top_keywords(0, 5);
  auto top1 = m.top_keywords(1, 5);
  std::set<int> overlap(top0.begin(), top0.end());
  for (int w : top1) CHECK(overlap.count(w) == 0);
}

TEST_CASE("mixing lowers the training perplexity") {
  LdaConfig early;
  early.num_topics = 2;
  early.sweeps = 1;
  early.seed = 8;
  LdaConfig late = early;
  late.sweeps = 100;
  Rng r1(early.seed), r2(late.seed);
  double before = train_lda(grouped_corpus(), early, r1).training_perplexity();
  double after = train_lda(grouped_corpus(), late, r2).training_perplexity();
  CHECK(after < before);
}

TEST_CASE("topic model serializes exactly") {
  LdaConfig cfg;
  cfg.num_topics = 3;
  cfg.sweeps = 10;
  Rng rng(9);
  LdaModel m = train_lda(grouped_corpus(), cfg, rng);
  auto j = m.to_json();
  LdaModel loaded = LdaModel::from_json(j);
  loaded.audit();
  CHECK(loaded.to_json().dump() == j.dump());
  CHECK(loaded.training_perplexity() == doctest::Approx(m.training_perplexity()));
}

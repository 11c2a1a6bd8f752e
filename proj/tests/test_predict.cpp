#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "mtlvm/predict.hpp"
#include "mtlvm/synth.hpp"

using namespace mtlvm::predict;
using mtlvm::Rng;

namespace {

ModelView toy_view() {
  ModelView view;
  view.vocab = {{"a", 0}, {"b", 1}};
  view.rho.rho = {{0.7, 0.3}, {0.4, 0.6}};
  view.state_token_probs = {{0.1, 0.9}, {0.2, 0.8}};
  view.final_states = {{"e0", 0}};
  view.final_epoch = 4;
  view.oov_floor = 0.001;
  return view;
}

mtlvm::corpus::Corpus toy_test(std::vector<std::string> vocab,
                               std::vector<std::vector<int>> entity_tokens) {
  mtlvm::corpus::Corpus c;
  c.vocabulary = std::move(vocab);
  for (std::size_t e = 0; e < entity_tokens.size(); ++e) {
    std::string id = "e" + std::to_string(e);
    mtlvm::corpus::Document doc{id, 5, std::move(entity_tokens[e])};
    c.chains.push_back({id, {{id, 5, {doc}}}});
  }
  c.epoch_count = 6;
  return c;
}

}  // namespace

TEST_CASE("state choice follows the prior when likelihoods tie") {
  CHECK(argmax_state({-1.0, -1.0}, {0.3, 0.7}) == 1);
  CHECK(argmax_state({-1.0, -1.0}, {0.7, 0.3}) == 0);
}

TEST_CASE("state choice follows the likelihood under a flat prior") {
  CHECK(argmax_state({-2.0, -1.0, -3.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}) == 1);
}

TEST_CASE("state choice ignores constant likelihood shifts") {
  std::vector<double> prior{0.2, 0.5, 0.3};
  CHECK(argmax_state({-2.0, -1.0, -3.0}, prior) ==
        argmax_state({98.0, 99.0, 97.0}, prior));
}

TEST_CASE("exact ties resolve to the lowest index") {
  CHECK(argmax_state({-1.0, -1.0, -1.0}, {0.25, 0.5, 0.5}) == 1);
  CHECK(argmax_state({0.0, 0.0}, {0.5, 0.5}) == 0);
  CHECK_THROWS_AS(argmax_state({0.0}, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(argmax_state({}, {}), std::invalid_argument);
}

TEST_CASE("unit state estimation combines token evidence with the prior") {
  auto view = toy_view();
  // word 0 prefers state 1 (0.2 vs 0.1) but the prior from state 0 leans
  // the other way; three repeats of word 0 overcome it
  CHECK(estimate_state({0, 0, 0}, 0, view) == 1);
  CHECK(estimate_state({1}, 0, view) == 0);
  CHECK_THROWS_AS(estimate_state({}, 0, view), std::invalid_argument);
}

TEST_CASE("token predictive mixes states by the next-state distribution") {
  auto view = toy_view();
  CHECK(predict_token_prob(0, view, {0.7, 0.3}) == doctest::Approx(0.13));
  CHECK(predict_token_prob(1, view, {0.7, 0.3}) == doctest::Approx(0.87));
  // one state: reduces to that state's row
  ModelView single;
  single.state_token_probs = {{0.25, 0.75}};
  CHECK(predict_token_prob(1, single, {1.0}) == doctest::Approx(0.75));
}

TEST_CASE("held-out score of a single token is its log mixture probability") {
  auto report = heldout_log_likelihood(toy_test({"a", "b"}, {{0}}), toy_view());
  REQUIRE(report.entities.size() == 1);
  CHECK(report.entities[0].last_state == 0);
  CHECK(report.entities[0].heldout_ll == doctest::Approx(std::log(0.13)));
  CHECK(report.total_ll == doctest::Approx(std::log(0.13)));
  CHECK(report.tokens == 1);
}

TEST_CASE("held-out total decomposes over entities and tokens exactly") {
  auto view = toy_view();
  view.final_states["e1"] = 1;
  auto report =
      heldout_log_likelihood(toy_test({"a", "b"}, {{0, 1, 0}, {1, 1}}), view);
  REQUIRE(report.entities.size() == 2);
  double sum = 0.0;
  for (const auto& ep : report.entities) sum += ep.heldout_ll;
  CHECK(report.total_ll == doctest::Approx(sum));
  CHECK(report.tokens == 5);
  double e0 = 2 * std::log(0.13) + std::log(0.87);
  CHECK(report.entities[0].heldout_ll == doctest::Approx(e0));
}

TEST_CASE("unknown test tokens hit the smoothed floor and are counted") {
  auto report =
      heldout_log_likelihood(toy_test({"a", "zzz"}, {{0, 1}}), toy_view());
  CHECK(report.oov_tokens == 1);
  CHECK(report.entities[0].heldout_ll ==
        doctest::Approx(std::log(0.13) + std::log(0.001)));
}

TEST_CASE("entities without a final-epoch state are skipped, never scored") {
  auto view = toy_view();
  auto test = toy_test({"a"}, {{0}, {0}});  // e1 unknown to the view
  auto report = heldout_log_likelihood(test, view);
  CHECK(report.skipped_entities == 1);
  CHECK(report.entities.size() == 1);

  view.final_states.clear();
  CHECK_THROWS_AS(heldout_log_likelihood(test, view), std::invalid_argument);
  CHECK_THROWS_AS(heldout_log_likelihood(mtlvm::corpus::Corpus{}, view),
                  std::invalid_argument);
}

TEST_CASE("views from trained models are normalized distributions") {
  mtlvm::synth::SynthConfig cfg;
  cfg.num_states = 2;
  cfg.vocab_size = 10;
  cfg.num_entities = 3;
  cfg.num_epochs = 3;
  Rng gen(1);
  auto corpus = mtlvm::synth::generate(cfg, gen).first;

  mtlvm::sampler::Hyperparams hp;
  hp.num_states = 2;
  hp.sweeps = 5;
  hp.burn_in = 0;
  hp.thin = 1;
  auto view = make_view(mtlvm::sampler::train(corpus, hp), corpus.vocabulary);

  mtlvm::baselines::BmHmmHyperparams bhp;
  bhp.num_states = 2;
  bhp.sweeps = 5;
  Rng rng(2);
  auto bview = make_view(mtlvm::baselines::train_bmhmm(corpus, bhp, rng),
                         corpus.vocabulary);

  for (const auto* v : {&view, &bview}) {
    CHECK(v->oov_floor > 0.0);
    CHECK(v->final_epoch == 2);
    CHECK(v->final_states.size() == 3);
    for (const auto& row : v->state_token_probs) {
      double total = 0.0;
      for (double p : row) total += p;
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
    for (const auto& row : v->rho.rho) {
      double total = 0.0;
      for (double p : row) total += p;
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("view averaging is element-wise and guards compatibility") {
  auto a = toy_view();
  auto b = toy_view();
  b.rho.rho = {{0.5, 0.5}, {0.2, 0.8}};
  b.state_token_probs = {{0.3, 0.7}, {0.4, 0.6}};
  b.oov_floor = 0.003;
  auto avg = average_views({a, b});
  CHECK(avg.rho.rho[0][0] == doctest::Approx(0.6));
  CHECK(avg.state_token_probs[1][0] == doctest::Approx(0.3));
  CHECK(avg.oov_floor == doctest::Approx(0.002));

  b.final_states["other"] = 1;
  CHECK_THROWS_AS(average_views({a, b}), std::invalid_argument);
  CHECK_THROWS_AS(average_views({}), std::invalid_argument);
}

TEST_CASE("prediction and held-out tables use the documented schemas") {
  auto report = heldout_log_likelihood(toy_test({"a", "b"}, {{0}}), toy_view());
  std::ostringstream csv;
  write_report_csv(report, csv);
  CHECK(csv.str().rfind(
            "entity,estimated_state,next_state_prob_0,next_state_prob_1,"
            "heldout_ll\n",
            0) == 0);
  CHECK(csv.str().find("e0,0,0.7,0.3,") != std::string::npos);

  std::ostringstream table;
  write_heldout_table({{"MTLVM", true, -12.5}, {"DTM", false, 0.0}}, table);
  CHECK(table.str() ==
        "model,heldout_log_likelihood\nMTLVM,-12.5\nDTM,n/a\n");
}

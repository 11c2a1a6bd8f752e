#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtlvm/corpus.hpp"
#include "mtlvm/markov.hpp"
#include "mtlvm/rng.hpp"

namespace mtlvm::baselines {

struct BmHmmHyperparams {
  int num_states = 10;
  double alpha = 1.0;
  double emission_prior = 0.5;  // matches the topic base measure
  int sweeps = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

// States emit words directly: P(w | c) = Multi(iota_c). Shares the
// transition ledger machinery with the main model.
class BmHmmModel {
 public:
  BmHmmModel() = default;
  BmHmmModel(const corpus::Corpus& corpus, const BmHmmHyperparams& hp);

  const BmHmmHyperparams& hyperparams() const { return hp_; }
  const markov::StateChain& states() const { return states_; }
  int num_units() const { return static_cast<int>(unit_words_.size()); }
  int unit_state(int unit) const {
    auto [chain, pos] = unit_pos_[unit];
    return states_.state(chain, pos);
  }

  // Currently sampled emission rows.
  const std::vector<std::vector<double>>& iota() const { return iota_; }
  // Posterior-mean rows (count + prior) / (total + prior * V).
  std::vector<std::vector<double>> posterior_mean_iota() const;
  std::int64_t state_total(int state) const { return state_totals_[state]; }

  void resample_iota(Rng& rng);
  void sweep(Rng& rng);
  void audit() const;

  nlohmann::json to_json() const;
  static BmHmmModel from_json(const nlohmann::json& j);

 private:
  void move_unit_counts(int unit, int state, int sign);

  BmHmmHyperparams hp_;
  int V_ = 0;
  markov::StateChain states_;
  std::vector<std::vector<int>> unit_words_;    // flattened unit -> tokens
  std::vector<std::pair<int, int>> unit_pos_;
  std::vector<int> unit_epochs_;
  std::vector<bool> unit_first_of_entity_at_start_;
  std::vector<std::vector<std::int64_t>> word_counts_;  // per state, per word
  std::vector<std::int64_t> state_totals_;
  std::vector<std::vector<double>> iota_;
};

BmHmmModel train_bmhmm(const corpus::Corpus& corpus,
                       const BmHmmHyperparams& hp, Rng& rng);

struct LdaConfig {
  int num_topics = 100;
  double topic_prior = 0.5;       // symmetric Dirichlet over words
  double doc_prior = 0.0;         // 0 = default 50/K
  int sweeps = 200;
  std::uint64_t seed = 0;

  double effective_doc_prior() const {
    return doc_prior > 0 ? doc_prior : 50.0 / num_topics;
  }
  void validate() const;
};

// Plain collapsed Gibbs LDA over postings as flat documents; epochs and
// entities are ignored.
class LdaModel {
 public:
  LdaModel() = default;
  LdaModel(const corpus::Corpus& corpus, const LdaConfig& config);

  const LdaConfig& config() const { return config_; }
  int num_documents() const { return static_cast<int>(docs_.size()); }

  void sweep(Rng& rng);
  void audit() const;

  // Posterior-mean topic rows (count + topic_prior) / (total + prior * V).
  std::vector<std::vector<double>> topic_word_distributions() const;
  std::vector<std::vector<double>> document_topic_distributions() const;
  std::vector<int> top_keywords(int topic, int k) const;

  // exp(-(log predictive of training tokens) / token count)
  double training_perplexity() const;

  nlohmann::json to_json() const;
  static LdaModel from_json(const nlohmann::json& j);

 private:
  LdaConfig config_;
  int V_ = 0;
  std::vector<std::vector<int>> docs_;
  std::vector<std::vector<int>> z_;
  std::vector<std::vector<std::int64_t>> topic_word_;  // K x V
  std::vector<std::int64_t> topic_totals_;
  std::vector<std::vector<std::int64_t>> doc_topic_;   // D x K
};

LdaModel train_lda(const corpus::Corpus& corpus, const LdaConfig& config,
                   Rng& rng);

}  // namespace mtlvm::baselines

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtlvm/corpus.hpp"
#include "mtlvm/crf.hpp"
#include "mtlvm/markov.hpp"
#include "mtlvm/rng.hpp"

namespace mtlvm::synth {

struct SynthConfig {
  int num_states = 3;
  int vocab_size = 30;
  int num_entities = 10;
  int num_epochs = 5;
  int docs_per_unit = 3;
  int tokens_per_doc = 10;
  double alpha = 1.0;
  crf::DpConcentrations gamma;
  double eta0 = 0.5;
  // Sharpens per-state dish distributions: states draw from near-disjoint
  // topics over disjoint vocabulary blocks, making recovery testable.
  bool separation = false;
  // Stick-breaking truncation (by leftover mass) for the DP draws.
  double truncation_mass = 1e-12;
  // Alternative generation path through sequential CRP seating; must be
  // distribution-identical to the stick-breaking path.
  bool use_crp_path = false;

  void validate() const;
};

struct GroundTruth {
  // true_states[entity][epoch]
  std::vector<std::vector<int>> true_states;
  std::vector<std::vector<double>> true_rho;
  std::vector<std::vector<double>> true_theta;
  // topic id per token, aligned with the corpus document order
  std::vector<std::vector<int>> token_topics;
};

std::pair<corpus::Corpus, GroundTruth> generate(const SynthConfig& config,
                                                Rng& rng);

void write_truth_json(const GroundTruth& truth, std::ostream& out);

// ----------------------------------------------------------------------
// Brute-force posterior oracles for tiny instances.
// ----------------------------------------------------------------------

struct OracleLimits {
  int max_tokens = 5;
  int max_states = 2;
  int max_entities = 2;
};

struct OracleConfig {
  int num_states = 1;
  double alpha = 1.0;
  crf::DpConcentrations gamma;
  double eta0 = 0.5;
};

// One fully discrete configuration: states per unit, token->table
// restricted-growth strings per document, table->dish and dish->atom
// restricted-growth strings, with its normalized posterior probability.
struct OracleEntry {
  std::vector<int> unit_states;
  std::vector<std::vector<int>> table_rgs;  // per doc
  std::vector<int> dish_rgs;                // over tables in canonical order
  std::vector<int> atom_rgs;                // over dishes in canonical order
  double log_joint = 0.0;
  double prob = 0.0;
};

class PosteriorTable {
 public:
  const std::vector<OracleEntry>& entries() const { return entries_; }
  double log_total_mass() const { return log_total_mass_; }

  // Marginal over the token partition of one document, keyed by its RGS.
  std::map<std::vector<int>, double> table_partition_marginal(int doc) const;
  // Marginal over joint unit-state assignments.
  std::map<std::vector<int>, double> state_marginal() const;

 private:
  friend PosteriorTable enumerate_posterior(const corpus::Corpus&,
                                            const OracleConfig&,
                                            const OracleLimits&);
  std::vector<OracleEntry> entries_;
  double log_total_mass_ = 0.0;
};

// Enumerates every state assignment x token partition x dish/atom linkage
// of a tiny corpus and scores each by the collapsed joint (transitions
// Dirichlet-multinomial, seating by the three-level partition prior, token
// likelihood by the Dirichlet-multinomial marginal per atom group).
// Refuses instances beyond the limits with a size report.
PosteriorTable enumerate_posterior(const corpus::Corpus& tiny,
                                   const OracleConfig& config,
                                   const OracleLimits& limits = {});

// Exhaustive Bayesian HMM posterior over joint state assignments for the
// given chain layout under a flat likelihood.
std::map<std::vector<int>, double> enumerate_state_posterior(
    const std::vector<int>& chain_lengths, int num_states, double alpha);

// All set partitions of n elements as restricted-growth strings.
std::vector<std::vector<int>> set_partitions(int n);

}  // namespace mtlvm::synth

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mtlvm/baselines.hpp"
#include "mtlvm/corpus.hpp"
#include "mtlvm/markov.hpp"
#include "mtlvm/sampler.hpp"

namespace mtlvm::predict {

// Read-only view of whatever model is being scored: transition rows, the
// per-state new-token predictive, and each entity's state at the final
// training epoch.
struct ModelView {
  std::map<std::string, int> vocab;                   // token -> column
  markov::TransitionMatrix rho;
  std::vector<std::vector<double>> state_token_probs; // C x V, rows sum to 1
  std::map<std::string, int> final_states;
  int final_epoch = 0;
  double oov_floor = 0.0;  // smoothed mass for tokens outside the vocabulary
};

ModelView make_view(const sampler::Model& model,
                    const std::vector<std::string>& vocabulary);
ModelView make_view(const baselines::BmHmmModel& model,
                    const std::vector<std::string>& vocabulary);

// Element-wise average of rho and the token predictives (thinned-checkpoint
// averaging); vocab and final states must agree across views.
ModelView average_views(const std::vector<ModelView>& views);

// argmax_c log_lik[c] + log prior_row[c], ties to the lowest index.
int argmax_state(const std::vector<double>& log_lik,
                 const std::vector<double>& prior_row);

// argmax state for a unit's tokens under the view, prior row rho[prev].
int estimate_state(const std::vector<int>& tokens, int prev_state,
                   const ModelView& view);

// Sum_c next_state_probs[c] * state_token_probs[c][w].
double predict_token_prob(int w, const ModelView& view,
                          const std::vector<double>& next_state_probs);

struct EntityPrediction {
  std::string entity_id;
  int last_state = 0;
  std::vector<double> next_state_probs;
  double heldout_ll = 0.0;
  std::int64_t tokens = 0;
  std::int64_t oov_tokens = 0;
};

struct PredictionReport {
  std::vector<EntityPrediction> entities;
  double total_ll = 0.0;          // equals the sum of per-entity totals
  std::int64_t tokens = 0;
  std::int64_t oov_tokens = 0;
  std::int64_t skipped_entities = 0;  // no state at the final training epoch
};

// Test tokens are matched to the training vocabulary by string; entities
// without a final-epoch training state are skipped and counted.
PredictionReport heldout_log_likelihood(const corpus::Corpus& test,
                                        const ModelView& view);

// CSV: entity,estimated_state,next_state_probs...,heldout_ll
void write_report_csv(const PredictionReport& report, std::ostream& out);

struct HeldoutRow {
  std::string model;
  bool available = true;
  double log_likelihood = 0.0;
};

// Keyed rows: model name and held-out log-likelihood, unavailable rows as
// placeholders for externally computed baselines.
void write_heldout_table(const std::vector<HeldoutRow>& rows,
                         std::ostream& out);

}  // namespace mtlvm::predict

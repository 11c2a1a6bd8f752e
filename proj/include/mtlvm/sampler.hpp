#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtlvm/corpus.hpp"
#include "mtlvm/crf.hpp"
#include "mtlvm/markov.hpp"
#include "mtlvm/rng.hpp"

namespace mtlvm::sampler {

struct Hyperparams {
  int num_states = 10;
  double alpha = 1.0;
  crf::DpConcentrations gamma;
  double eta0 = 0.5;
  int sweeps = 1000;
  int burn_in = 500;
  int thin = 5;
  std::uint64_t seed = 0;

  void validate() const;  // burn_in < sweeps, positive counts/concentrations
  nlohmann::json to_json() const;
  static Hyperparams from_json(const nlohmann::json& j);
};

struct TraceRecord {
  int sweep = 0;
  double logp = 0.0;
  int live_atoms = 0;
  std::vector<std::int64_t> occupancy;  // units per state
};

// CSV: sweep,logp,K,occupancy_0..occupancy_{C-1}
void write_trace_header(int num_states, std::ostream& out);
void write_trace_record(const TraceRecord& record, std::ostream& out);

// The full sampler state: seating, state chains, the flattened unit/doc
// layout, and the generator. Serializes to a single checkpoint document;
// loading then saving reproduces the bytes.
class Model {
 public:
  Model() = default;
  Model(const corpus::Corpus& corpus, const Hyperparams& hp);

  const Hyperparams& hyperparams() const { return hp_; }
  const crf::CrfState& seating() const { return seating_; }
  crf::CrfState& seating_mutable() { return seating_; }
  const markov::StateChain& states() const { return states_; }
  markov::StateChain& states_mutable() { return states_; }
  const std::vector<int>& doc_states() const { return doc_states_; }
  int num_units() const { return static_cast<int>(unit_docs_.size()); }
  const std::vector<int>& unit_documents(int unit) const {
    return unit_docs_[unit];
  }
  std::pair<int, int> unit_position(int unit) const { return unit_pos_[unit]; }
  int unit_epoch(int unit) const { return unit_epochs_[unit]; }
  int sweep() const { return sweep_; }
  Rng& rng() { return rng_; }

  int unit_state(int unit) const {
    auto [chain, pos] = unit_pos_[unit];
    return states_.state(chain, pos);
  }
  void set_unit_state(int unit, int state);

  // log of the collapsed joint: Markov part (Dirichlet-multinomial over
  // transitions, uniform chain starts) plus the seating part conditional
  // on theta.
  double joint_log_prob() const;

  std::vector<std::int64_t> state_occupancy() const;
  TraceRecord trace_record() const;

  // Full recount of every ledger; throws on the first inconsistency.
  void audit() const;

  nlohmann::json to_json() const;
  static Model from_json(const nlohmann::json& j);

 private:
  friend void init_assignments(Model&);
  friend void run_sweeps(Model&, int, const struct TrainOptions&);

  Hyperparams hp_;
  crf::CrfState seating_;
  markov::StateChain states_;
  std::vector<std::vector<int>> unit_docs_;   // flattened unit -> doc ids
  std::vector<std::pair<int, int>> unit_pos_; // flattened unit -> (chain, pos)
  std::vector<int> unit_epochs_;
  std::vector<int> doc_states_;
  int sweep_ = 0;
  Rng rng_;
};

struct TrainOptions {
  std::ostream* trace = nullptr;            // header written only at sweep 0
  int checkpoint_every = 0;                 // 0 = final checkpoint only
  std::function<void(const Model&)> checkpoint_sink;
  bool parallel_likelihood = true;
  int audit_every = 0;                      // full recount every n sweeps
};

// Initializes uniformly random states and a sequential generative seating
// pass, then runs hp.sweeps sweeps. Each sweep: states, then tokens, then
// dishes/atoms, then theta, in corpus order.
Model train(const corpus::Corpus& corpus, const Hyperparams& hp,
            const TrainOptions& opts = {});

// Continues a loaded model for additional_sweeps more sweeps. For a fixed
// seed, train(N) and train(M) + resume(N-M) produce identical models and
// concatenated traces.
void resume(Model& model, int additional_sweeps, const TrainOptions& opts = {});

}  // namespace mtlvm::sampler

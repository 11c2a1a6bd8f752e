#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtlvm/rng.hpp"

namespace mtlvm::markov {

// Row-stochastic C x C matrix. The virtual initial state has a fixed
// uniform row and is not stored.
struct TransitionMatrix {
  std::vector<std::vector<double>> rho;

  int size() const { return static_cast<int>(rho.size()); }
  std::vector<double> initial_row() const {
    return std::vector<double>(rho.size(), 1.0 / static_cast<double>(rho.size()));
  }
};

// Per-chain state assignments plus the incremental transition-count ledger.
// Ledger counts cover within-chain adjacent pairs only; chain starts hang
// off the fixed-uniform virtual initial state and carry no information
// about the transition rows, so they are never entered.
class StateChain {
 public:
  static constexpr int kUnassigned = -1;

  struct Chain {
    std::string entity_id;
    int start_epoch = 0;
    bool first_of_entity = true;  // false -> fallback prior applies at start
    std::vector<int> states;
  };

  StateChain() = default;
  StateChain(int num_states, double alpha) : C_(num_states), alpha_(alpha) {
    q_pair_.assign(C_, std::vector<std::int64_t>(C_, 0));
    q_from_.assign(C_, 0);
  }

  int num_states() const { return C_; }
  double alpha() const { return alpha_; }
  const std::vector<Chain>& chains() const { return chains_; }
  std::vector<Chain>& chains_mutable() { return chains_; }

  std::int64_t pair_count(int from, int to) const { return q_pair_[from][to]; }
  std::int64_t from_count(int from) const { return q_from_[from]; }

  // Chain layout is fixed up front; all positions start unassigned.
  int add_chain(const std::string& entity_id, int start_epoch, int length,
                bool first_of_entity);

  int state(int chain, int pos) const { return chains_[chain].states[pos]; }

  // Removes the position's adjacent transitions from the ledger and marks
  // it unassigned. No-op if already unassigned.
  void remove(int chain, int pos);

  // Assigns a state and enters its adjacent transitions into the ledger.
  void assign(int chain, int pos, int state);

  // Gibbs conditional for one position given everything else. unit_ll maps
  // a candidate state to log P(observations | state); prior_override, when
  // non-empty, replaces the predecessor factor (fallback rule at chain
  // starts of non-first chains). Precondition: the position is removed.
  int sample_state(int chain, int pos,
                   const std::function<double(int)>& unit_ll,
                   const std::vector<double>& prior_override, Rng& rng) const;

  // Log-space unnormalized weights behind sample_state, exposed for tests
  // and for the parallel fan-out in the sweep driver.
  std::vector<double> state_log_weights(
      int chain, int pos, const std::vector<double>& unit_log_lik,
      const std::vector<double>& prior_override) const;

  // Full recount from the assignment arrays; throws on mismatch with the
  // incremental ledger.
  void audit() const;

  // Collapsed log probability of all assignments (Dirichlet-multinomial
  // over transitions, uniform chain starts). Unassigned positions are an
  // error.
  double log_prob() const;

 private:
  int C_ = 0;
  double alpha_ = 1.0;
  std::vector<Chain> chains_;
  std::vector<std::vector<std::int64_t>> q_pair_;
  std::vector<std::int64_t> q_from_;
};

// Uniform over [0, C).
int initial_state(int num_states, Rng& rng);

// Distribution over states at epoch t for an entity with no unit at t-1:
// empirical state frequencies at t-1 pushed through rho. Falls back to
// uniform (and bumps *no_history_count) when nothing is assigned at t-1.
std::vector<double> fallback_state_distribution(
    int epoch, const StateChain& states, const TransitionMatrix& rho,
    std::int64_t* no_history_count = nullptr);

// Posterior-mean rows: (q(c,c') + alpha) / (q(c) + C*alpha).
TransitionMatrix estimate_rho(const StateChain& states);

// CSV export: header "from\to,0,1,...", one row per source state.
void write_transitions_csv(const TransitionMatrix& rho, std::ostream& out);

}  // namespace mtlvm::markov

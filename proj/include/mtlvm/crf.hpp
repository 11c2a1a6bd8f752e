#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtlvm/rng.hpp"

namespace mtlvm::crf {

struct DpConcentrations {
  double gamma0 = 1.0;  // global atom layer
  double gamma1 = 1.0;  // per-state dish layer
  double gamma2 = 1.0;  // per-document table layer
};

// Global atoms: per-topic distributions over the vocabulary, sampled
// explicitly once per sweep. Rows are index-aligned with the atom list
// of the seating state, tombstones included.
struct TopicBank {
  std::vector<std::vector<double>> theta;
  double eta0 = 0.5;
};

// Three-level franchise bookkeeping in the collapsed representation:
// tokens sit at per-document tables (z, counts i), tables link to
// per-state dishes (counts j), dishes link to global atoms (counts o).
// The dish and atom measures are never materialized; only links and
// counts are stored. Empty entries become tombstones and are compacted
// at sweep boundaries.
class CrfState {
 public:
  struct Table {
    int dish = -1;  // -1 = tombstone
    int customers = 0;
    std::map<int, int> words;
  };
  struct Dish {
    int atom = -1;  // -1 = tombstone
    int tables = 0;
    std::map<int, int> words;
  };
  struct Atom {
    std::int64_t dishes = 0;  // 0 = tombstone
    std::map<int, std::int64_t> words;
  };

  CrfState() = default;
  CrfState(int vocab_size, int num_states, DpConcentrations gamma, double eta0);

  // Registers a document's tokens; returns its id. Tokens start unseated.
  int add_document(std::vector<int> tokens);

  int vocab_size() const { return V_; }
  int num_states() const { return C_; }
  int num_documents() const { return static_cast<int>(docs_.size()); }
  const DpConcentrations& gamma() const { return gamma_; }
  const TopicBank& topics() const { return bank_; }
  const std::vector<int>& doc_tokens(int doc) const { return docs_[doc]; }
  const std::vector<Table>& tables(int doc) const { return tables_[doc]; }
  const std::vector<Dish>& dishes(int state) const { return dishes_[state]; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  int table_of(int doc, int n) const { return z_[doc][n]; }

  int live_atom_count() const;

  // --- token layer ------------------------------------------------------

  // Unseats token n of doc (decrements i and the word counts up the link
  // chain; garbage-collects the table, dish, and atom it empties).
  void remove_token(int doc, int n, int state);

  // Seats token n at a table sampled from the collapsed conditional:
  // existing tables in proportion to i * P(w | table's atom), a new table
  // in proportion to gamma2 times the single-token dish-mixture marginal.
  // A new table immediately receives a dish via sample_dish.
  int sample_table(int doc, int n, int state, Rng& rng);

  // Sequential generative seating of a whole document (initialization).
  void seat_document(int doc, int state, Rng& rng);

  // --- table layer ------------------------------------------------------

  // Unlinks a table from its dish without disturbing its customers.
  void detach_table(int doc, int table, int state);

  // Links a customer block to a dish of the given state: existing dishes
  // in proportion to j * P(block | dish's atom), a new dish in proportion
  // to gamma1 times the atom-mixture marginal. A new dish immediately
  // receives an atom via sample_atom_assignment.
  int attach_block(int state, const std::map<int, int>& block, Rng& rng);

  // Re-links a previously detached table.
  void attach_table(int doc, int table, int state, Rng& rng);

  // --- dish / atom layer ------------------------------------------------

  void detach_dish(int state, int dish);

  // Existing atoms in proportion to o * P(block | theta_k); a new atom in
  // proportion to gamma0 times the collapsed base-measure marginal. A new
  // atom's row is drawn from the Dirichlet posterior given the block.
  int sample_atom_assignment(const std::map<int, int>& block, Rng& rng);

  void attach_dish(int state, int dish, Rng& rng);

  // Resamples every table's dish and every dish's atom, in canonical order.
  void resweep_dishes_and_atoms(const std::vector<int>& doc_states, Rng& rng);

  // theta_k ~ Dirichlet(eta0 + atom word counts) for every live atom.
  void sample_theta(Rng& rng);

  // --- unit handling for the state layer --------------------------------

  // Detaches all tables of the given documents from the state layer.
  void detach_unit(const std::vector<int>& doc_ids, int state);

  // Reattaches them under (possibly different) state, resampling dishes.
  void attach_unit(const std::vector<int>& doc_ids, int state, Rng& rng);

  // log P(unit's observations, unit's seating | state, rest of seating,
  // theta) with each table's dish choice marginalized. Precondition: the
  // unit's tables are detached. This is the fast conditional mode used
  // inside state sampling.
  double unit_log_likelihood(const std::vector<int>& doc_ids, int state) const;

  // All C candidates at once; the OpenMP build fans the candidates out
  // across threads, the serial path is kept as the reference.
  std::vector<double> unit_log_likelihood_all(const std::vector<int>& doc_ids,
                                              bool parallel = true) const;

  // Sequential-importance-sampling estimate of log P(unit | state) with the
  // unit's own seating marginalized over R virtual re-seatings. Used for
  // reporting and oracle cross-checks, never inside a sweep.
  double unit_log_marginal(const std::vector<int>& doc_ids, int state,
                           int num_reseatings, Rng& rng) const;

  // --- scoring / prediction ---------------------------------------------

  // Collapsed log probability of the full seating plus the token
  // likelihood under theta (the DP part of the joint).
  double seating_log_prob(const std::vector<int>& doc_states) const;

  // P(w | state) for a fresh token of a fresh document: the dish mixture
  // weighted by j, falling through to the atom mixture and the smoothed
  // base predictive. Sums to one over the vocabulary.
  std::vector<double> state_token_predictive(int state) const;

  // Collapsed per-atom predictive (counts + eta0 ratio), debug cross-check.
  double collapsed_atom_predictive(int atom, int word) const;

  // --- maintenance -------------------------------------------------------

  // Rebuilds all index spaces without tombstones. Called between sweeps;
  // doc->state assignments must be stable across the call.
  void compact(const std::vector<int>& doc_states);

  // Full recount of every ledger from z and the link arrays; throws on the
  // first inconsistency.
  void audit(const std::vector<int>& doc_states) const;

  nlohmann::json to_json() const;
  static CrfState from_json(const nlohmann::json& j);

 private:
  double block_log_lik_theta(int atom, const std::map<int, int>& block) const;
  double block_log_lik_base(const std::map<int, int>& block) const;
  double log_atom_mixture(const std::map<int, int>& block) const;
  double log_dish_mixture(int state, const std::map<int, int>& block) const;
  int create_table(int doc);
  int create_dish(int state);
  int create_atom(std::vector<double> theta_row);

  int V_ = 0;
  int C_ = 0;
  DpConcentrations gamma_;
  TopicBank bank_;
  std::vector<std::vector<int>> docs_;       // token words per doc
  std::vector<std::vector<int>> z_;          // per-token table index, -1 unseated
  std::vector<std::vector<Table>> tables_;   // per doc
  std::vector<std::vector<Dish>> dishes_;    // per state
  std::vector<Atom> atoms_;
  std::vector<std::int64_t> dish_total_;     // J_c = sum of live j per state
  std::int64_t atom_total_ = 0;              // O = sum of live o
};

}  // namespace mtlvm::crf

#include "mtlvm/markov.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace mtlvm::markov {

int StateChain::add_chain(const std::string& entity_id, int start_epoch,
                          int length, bool first_of_entity) {
  Chain c;
  c.entity_id = entity_id;
  c.start_epoch = start_epoch;
  c.first_of_entity = first_of_entity;
  c.states.assign(length, kUnassigned);
  chains_.push_back(std::move(c));
  return static_cast<int>(chains_.size()) - 1;
}

void StateChain::remove(int chain, int pos) {
  auto& states = chains_[chain].states;
  int cur = states[pos];
  if (cur == kUnassigned) return;
  if (pos > 0 && states[pos - 1] != kUnassigned) {
    --q_pair_[states[pos - 1]][cur];
    --q_from_[states[pos - 1]];
  }
  if (pos + 1 < static_cast<int>(states.size()) &&
      states[pos + 1] != kUnassigned) {
    --q_pair_[cur][states[pos + 1]];
    --q_from_[cur];
  }
  states[pos] = kUnassigned;
}

void StateChain::assign(int chain, int pos, int state) {
  auto& states = chains_[chain].states;
  if (states[pos] != kUnassigned)
    throw std::logic_error("StateChain::assign: position already assigned");
  if (state < 0 || state >= C_)
    throw std::out_of_range("StateChain::assign: state out of range");
  states[pos] = state;
  if (pos > 0 && states[pos - 1] != kUnassigned) {
    ++q_pair_[states[pos - 1]][state];
    ++q_from_[states[pos - 1]];
  }
  if (pos + 1 < static_cast<int>(states.size()) &&
      states[pos + 1] != kUnassigned) {
    ++q_pair_[state][states[pos + 1]];
    ++q_from_[state];
  }
}

std::vector<double> StateChain::state_log_weights(
    int chain, int pos, const std::vector<double>& unit_log_lik,
    const std::vector<double>& prior_override) const {
  const auto& states = chains_[chain].states;
  if (states[pos] != kUnassigned)
    throw std::logic_error("state_log_weights: position must be removed first");
  int prev = pos > 0 ? states[pos - 1] : kUnassigned;
  int next = pos + 1 < static_cast<int>(states.size()) ? states[pos + 1]
                                                       : kUnassigned;
  std::vector<double> logw(C_);
  for (int c = 0; c < C_; ++c) {
    double lw = unit_log_lik[c];
    // Predecessor factor: corrected counts, fallback override, or the
    // fixed-uniform virtual initial row (constant, dropped).
    if (!prior_override.empty()) {
      lw += std::log(prior_override[c]);
    } else if (prev != kUnassigned) {
      lw += std::log((q_pair_[prev][c] + alpha_) /
                     (q_from_[prev] + C_ * alpha_));
    }
    // Successor factor with indicator corrections; dropped at chain ends.
    if (next != kUnassigned) {
      double ind_both = (prev == c && next == c) ? 1.0 : 0.0;
      double ind_prev = (prev == c) ? 1.0 : 0.0;
      lw += std::log((q_pair_[c][next] + ind_both + alpha_) /
                     (q_from_[c] + ind_prev + C_ * alpha_));
    }
    logw[c] = lw;
  }
  return logw;
}

int StateChain::sample_state(int chain, int pos,
                             const std::function<double(int)>& unit_ll,
                             const std::vector<double>& prior_override,
                             Rng& rng) const {
  std::vector<double> ll(C_);
  for (int c = 0; c < C_; ++c) ll[c] = unit_ll(c);
  return rng.log_categorical(state_log_weights(chain, pos, ll, prior_override));
}

void StateChain::audit() const {
  std::vector<std::vector<std::int64_t>> pair(C_,
                                              std::vector<std::int64_t>(C_, 0));
  std::vector<std::int64_t> from(C_, 0);
  for (const auto& chain : chains_) {
    for (std::size_t i = 0; i + 1 < chain.states.size(); ++i) {
      int a = chain.states[i], b = chain.states[i + 1];
      if (a == kUnassigned || b == kUnassigned) continue;
      ++pair[a][b];
      ++from[a];
    }
  }
  for (int a = 0; a < C_; ++a) {
    if (from[a] != q_from_[a])
      throw std::runtime_error("StateChain::audit: q_from mismatch");
    std::int64_t row = 0;
    for (int b = 0; b < C_; ++b) {
      if (pair[a][b] != q_pair_[a][b])
        throw std::runtime_error("StateChain::audit: q_pair mismatch");
      row += q_pair_[a][b];
    }
    if (row != q_from_[a])
      throw std::runtime_error("StateChain::audit: row-sum mismatch");
  }
}

double StateChain::log_prob() const {
  double lp = 0.0;
  for (const auto& chain : chains_) {
    for (int s : chain.states)
      if (s == kUnassigned)
        throw std::logic_error("StateChain::log_prob: unassigned position");
    lp += -std::log(static_cast<double>(C_));  // chain start, uniform row
  }
  for (int a = 0; a < C_; ++a) {
    lp += std::lgamma(C_ * alpha_) - std::lgamma(q_from_[a] + C_ * alpha_);
    for (int b = 0; b < C_; ++b)
      lp += std::lgamma(q_pair_[a][b] + alpha_) - std::lgamma(alpha_);
  }
  return lp;
}

int initial_state(int num_states, Rng& rng) {
  if (num_states < 1) throw std::invalid_argument("initial_state: C < 1");
  return rng.uniform_int(num_states);
}

std::vector<double> fallback_state_distribution(int epoch,
                                                const StateChain& states,
                                                const TransitionMatrix& rho,
                                                std::int64_t* no_history_count) {
  int C = states.num_states();
  std::vector<double> freq(C, 0.0);
  double total = 0.0;
  for (const auto& chain : states.chains()) {
    int pos = epoch - 1 - chain.start_epoch;
    if (pos < 0 || pos >= static_cast<int>(chain.states.size())) continue;
    int s = chain.states[pos];
    if (s == StateChain::kUnassigned) continue;
    freq[s] += 1.0;
    total += 1.0;
  }
  if (total == 0.0) {
    if (no_history_count) ++*no_history_count;
    return std::vector<double>(C, 1.0 / C);
  }
  std::vector<double> out(C, 0.0);
  for (int c = 0; c < C; ++c)
    for (int c2 = 0; c2 < C; ++c2) out[c2] += (freq[c] / total) * rho.rho[c][c2];
  return out;
}

TransitionMatrix estimate_rho(const StateChain& states) {
  int C = states.num_states();
  double alpha = states.alpha();
  TransitionMatrix tm;
  tm.rho.assign(C, std::vector<double>(C, 0.0));
  for (int a = 0; a < C; ++a)
    for (int b = 0; b < C; ++b)
      tm.rho[a][b] = (states.pair_count(a, b) + alpha) /
                     (states.from_count(a) + C * alpha);
  return tm;
}

void write_transitions_csv(const TransitionMatrix& rho, std::ostream& out) {
  out << "from\\to";
  for (int c = 0; c < rho.size(); ++c) out << "," << c;
  out << "\n";
  for (int a = 0; a < rho.size(); ++a) {
    out << a;
    for (int b = 0; b < rho.size(); ++b) out << "," << rho.rho[a][b];
    out << "\n";
  }
}

}  // namespace mtlvm::markov

#include "mtlvm/synth.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace mtlvm::synth {

namespace {

// weights of a stick-breaking draw from DP(gamma, .), truncated by leftover mass
std::vector<double> stick_weights(double gamma, double truncation_mass,
                                  Rng& rng) {
  std::vector<double> w;
  double remaining = 1.0;
  while (remaining > truncation_mass) {
    double u = rng.uniform();
    while (u >= 1.0) u = rng.uniform();
    double v = 1.0 - std::pow(1.0 - u, 1.0 / gamma);  // Beta(1, gamma)
    w.push_back(remaining * v);
    remaining *= (1.0 - v);
  }
  if (w.empty()) w.push_back(1.0);
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_states < 1 || vocab_size < 1 || num_entities < 1 || num_epochs < 1 ||
      docs_per_unit < 1 || tokens_per_doc < 1)
    throw std::invalid_argument("SynthConfig: all counts must be >= 1");
  if (alpha <= 0 || gamma.gamma0 <= 0 || gamma.gamma1 <= 0 ||
      gamma.gamma2 <= 0 || eta0 <= 0)
    throw std::invalid_argument("SynthConfig: concentrations must be positive");
}

std::pair<corpus::Corpus, GroundTruth> generate(const SynthConfig& config,
                                                Rng& rng) {
  config.validate();
  const int C = config.num_states;
  const int V = config.vocab_size;

  GroundTruth truth;
  truth.true_rho.reserve(C);
  for (int c = 0; c < C; ++c)
    truth.true_rho.push_back(rng.symmetric_dirichlet(config.alpha, C));

  // Global atoms and per-state measures over them.
  std::vector<std::vector<double>> theta;
  std::vector<std::vector<double>> g_over_atoms(C);  // G_c collapsed to atoms
  if (config.separation) {
    // Near-disjoint sharp topics, one per state, over vocabulary blocks.
    int block = std::max(1, V / C);
    for (int c = 0; c < C; ++c) {
      std::vector<double> row(V, 0.01 / V);
      for (int w = c * block; w < std::min(V, (c + 1) * block); ++w)
        row[w] = 1.0;
      double total = std::accumulate(row.begin(), row.end(), 0.0);
      for (double& x : row) x /= total;
      theta.push_back(std::move(row));
    }
    for (int c = 0; c < C; ++c) {
      std::vector<double> g(C, C > 1 ? 0.05 / (C - 1) : 0.0);
      g[c] = C > 1 ? 0.95 : 1.0;
      g_over_atoms[c] = std::move(g);
    }
  } else {
    std::vector<double> beta =
        stick_weights(config.gamma.gamma0, config.truncation_mass, rng);
    for (std::size_t k = 0; k < beta.size(); ++k)
      theta.push_back(rng.symmetric_dirichlet(config.eta0, V));
    for (int c = 0; c < C; ++c) {
      std::vector<double> pi =
          stick_weights(config.gamma.gamma1, config.truncation_mass, rng);
      std::vector<double> g(beta.size(), 0.0);
      for (double w : pi) g[rng.categorical(beta)] += w;
      g_over_atoms[c] = std::move(g);
    }
  }
  truth.true_theta = theta;

  corpus::Corpus out;
  out.vocabulary.reserve(V);
  for (int w = 0; w < V; ++w) out.vocabulary.push_back("w" + std::to_string(w));
  out.epoch_count = config.num_epochs;

  truth.true_states.assign(config.num_entities, {});
  for (int e = 0; e < config.num_entities; ++e) {
    corpus::DataChain chain;
    chain.entity_id = "e" + std::to_string(e);
    int state = rng.uniform_int(C);
    for (int t = 0; t < config.num_epochs; ++t) {
      if (t > 0) state = rng.categorical(truth.true_rho[state]);
      truth.true_states[e].push_back(state);
      corpus::DataUnit unit;
      unit.entity_id = chain.entity_id;
      unit.epoch = t;
      for (int m = 0; m < config.docs_per_unit; ++m) {
        corpus::Document doc;
        doc.entity_id = chain.entity_id;
        doc.epoch = t;
        std::vector<int> topics;
        if (config.use_crp_path || config.separation) {
          // separation: tokens straight from G_c; CRP path: sequential
          // seating collapsed over D (marginally identical to the sticks)
          std::vector<int> table_atom;
          std::vector<int> table_count;
          for (int n = 0; n < config.tokens_per_doc; ++n) {
            int atom;
            if (config.separation) {
              atom = rng.categorical(g_over_atoms[state]);
            } else {
              std::vector<double> wgt;
              for (int cnt : table_count) wgt.push_back(cnt);
              wgt.push_back(config.gamma.gamma2);
              int pick = rng.categorical(wgt);
              if (pick == static_cast<int>(table_count.size())) {
                table_atom.push_back(rng.categorical(g_over_atoms[state]));
                table_count.push_back(0);
                pick = static_cast<int>(table_count.size()) - 1;
              }
              ++table_count[pick];
              atom = table_atom[pick];
            }
            topics.push_back(atom);
            doc.tokens.push_back(rng.categorical(theta[atom]));
          }
        } else {
          std::vector<double> d =
              stick_weights(config.gamma.gamma2, config.truncation_mass, rng);
          std::vector<int> stick_atom(d.size());
          for (std::size_t i = 0; i < d.size(); ++i)
            stick_atom[i] = rng.categorical(g_over_atoms[state]);
          for (int n = 0; n < config.tokens_per_doc; ++n) {
            int atom = stick_atom[rng.categorical(d)];
            topics.push_back(atom);
            doc.tokens.push_back(rng.categorical(theta[atom]));
          }
        }
        truth.token_topics.push_back(std::move(topics));
        unit.documents.push_back(std::move(doc));
      }
      chain.units.push_back(std::move(unit));
    }
    out.chains.push_back(std::move(chain));
  }
  out.validate();
  return {std::move(out), std::move(truth)};
}

void write_truth_json(const GroundTruth& truth, std::ostream& out) {
  nlohmann::json j;
  j["true_states"] = truth.true_states;
  j["true_rho"] = truth.true_rho;
  j["true_theta"] = truth.true_theta;
  j["token_topics"] = truth.token_topics;
  out << j.dump() << "\n";
}

std::vector<std::vector<int>> set_partitions(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> rgs(n, 0);
  // restricted growth strings: rgs[i] <= 1 + max(rgs[0..i-1])
  auto rec = [&](auto&& self, int i, int mx) -> void {
    if (i == n) {
      out.push_back(rgs);
      return;
    }
    for (int b = 0; b <= mx + 1; ++b) {
      rgs[i] = b;
      self(self, i + 1, std::max(mx, b));
    }
  };
  if (n == 0) {
    out.push_back({});
    return out;
  }
  rgs[0] = 0;
  rec(rec, 1, 0);
  return out;
}

namespace {

double log_eppf(double gamma, const std::vector<int>& block_sizes) {
  int n = std::accumulate(block_sizes.begin(), block_sizes.end(), 0);
  double lp = block_sizes.size() * std::log(gamma);
  for (int b : block_sizes) lp += std::lgamma(static_cast<double>(b));
  lp += std::lgamma(gamma) - std::lgamma(gamma + n);
  return lp;
}

double log_dirmult(const std::map<int, int>& words, double eta0, int V) {
  double lp = 0.0;
  int total = 0;
  for (const auto& [w, c] : words) {
    lp += std::lgamma(eta0 + c) - std::lgamma(eta0);
    total += c;
  }
  lp += std::lgamma(V * eta0) - std::lgamma(V * eta0 + total);
  return lp;
}

}  // namespace

PosteriorTable enumerate_posterior(const corpus::Corpus& tiny,
                                   const OracleConfig& config,
                                   const OracleLimits& limits) {
  int total_tokens = 0;
  int num_entities = static_cast<int>(tiny.chains.size());
  std::vector<const corpus::DataUnit*> units;
  std::vector<int> unit_chain;
  std::vector<int> chain_lengths;
  std::vector<std::vector<int>> docs;  // token words
  std::vector<int> doc_unit;
  for (std::size_t ci = 0; ci < tiny.chains.size(); ++ci) {
    chain_lengths.push_back(static_cast<int>(tiny.chains[ci].units.size()));
    for (const auto& unit : tiny.chains[ci].units) {
      units.push_back(&unit);
      unit_chain.push_back(static_cast<int>(ci));
      for (const auto& doc : unit.documents) {
        docs.push_back(doc.tokens);
        doc_unit.push_back(static_cast<int>(units.size()) - 1);
        total_tokens += static_cast<int>(doc.tokens.size());
      }
    }
  }
  if (total_tokens > limits.max_tokens || config.num_states > limits.max_states ||
      num_entities > limits.max_entities)
    throw std::invalid_argument(
        "enumerate_posterior: instance too large (tokens=" +
        std::to_string(total_tokens) + ", C=" +
        std::to_string(config.num_states) + ", entities=" +
        std::to_string(num_entities) + ")");

  const int C = config.num_states;
  const int V = tiny.vocab_size();
  const int n_units = static_cast<int>(units.size());
  const int n_docs = static_cast<int>(docs.size());

  // precompute per-doc partition lists
  std::vector<std::vector<std::vector<int>>> doc_parts(n_docs);
  for (int d = 0; d < n_docs; ++d)
    doc_parts[d] = set_partitions(static_cast<int>(docs[d].size()));

  // markov scores per state vector via the shared collapsed joint
  auto markov_log_prob = [&](const std::vector<int>& unit_states) {
    markov::StateChain sc(C, config.alpha);
    int u = 0;
    for (std::size_t ci = 0; ci < chain_lengths.size(); ++ci) {
      int id = sc.add_chain(tiny.chains[ci].entity_id,
                            tiny.chains[ci].units.front().epoch,
                            chain_lengths[ci], true);
      for (int pos = 0; pos < chain_lengths[ci]; ++pos)
        sc.assign(id, pos, unit_states[u++]);
    }
    return sc.log_prob();
  };

  PosteriorTable table;
  std::vector<double> log_joints;

  std::vector<int> unit_states(n_units, 0);
  std::vector<int> part_idx(n_docs, 0);

  auto score_config = [&](const std::vector<int>& unit_states_v,
                          const std::vector<std::vector<int>>& table_rgs) {
    // canonical tables: docs in order, block ids in order
    struct TableRef {
      int doc;
      int state;
      std::map<int, int> words;
      int size = 0;
    };
    std::vector<TableRef> all_tables;
    double lp = markov_log_prob(unit_states_v);
    for (int d = 0; d < n_docs; ++d) {
      int state = unit_states_v[doc_unit[d]];
      int n_blocks = table_rgs[d].empty()
                         ? 0
                         : 1 + *std::max_element(table_rgs[d].begin(),
                                                 table_rgs[d].end());
      std::vector<int> sizes(n_blocks, 0);
      std::vector<std::map<int, int>> words(n_blocks);
      for (std::size_t n = 0; n < table_rgs[d].size(); ++n) {
        ++sizes[table_rgs[d][n]];
        ++words[table_rgs[d][n]][docs[d][n]];
      }
      lp += log_eppf(config.gamma.gamma2, sizes);
      for (int b = 0; b < n_blocks; ++b)
        all_tables.push_back({d, state, std::move(words[b]), sizes[b]});
    }

    // dish partitions per state, then atom partition over all dishes
    std::vector<std::vector<int>> state_tables(C);
    for (std::size_t t = 0; t < all_tables.size(); ++t)
      state_tables[all_tables[t].state].push_back(static_cast<int>(t));

    std::vector<std::vector<std::vector<int>>> state_parts(C);
    for (int c = 0; c < C; ++c)
      state_parts[c] = set_partitions(static_cast<int>(state_tables[c].size()));

    std::vector<int> sp_idx(C, 0);
    while (true) {
      double lp_dish = lp;
      std::vector<std::map<int, int>> dish_words;
      std::vector<int> combined_dish_rgs(all_tables.size(), -1);
      for (int c = 0; c < C; ++c) {
        const auto& rgs = state_parts[c][sp_idx[c]];
        int n_blocks =
            rgs.empty() ? 0 : 1 + *std::max_element(rgs.begin(), rgs.end());
        std::vector<int> sizes(n_blocks, 0);
        int base = static_cast<int>(dish_words.size());
        dish_words.resize(base + n_blocks);
        for (std::size_t i = 0; i < rgs.size(); ++i) {
          const TableRef& tr = all_tables[state_tables[c][i]];
          ++sizes[rgs[i]];
          for (const auto& [w, cnt] : tr.words)
            dish_words[base + rgs[i]][w] += cnt;
          combined_dish_rgs[state_tables[c][i]] = base + rgs[i];
        }
        if (n_blocks > 0) lp_dish += log_eppf(config.gamma.gamma1, sizes);
      }

      int n_dishes = static_cast<int>(dish_words.size());
      for (const auto& atom_rgs : set_partitions(n_dishes)) {
        double lp_atom = lp_dish;
        int n_atoms = atom_rgs.empty()
                          ? 0
                          : 1 + *std::max_element(atom_rgs.begin(),
                                                  atom_rgs.end());
        std::vector<int> sizes(n_atoms, 0);
        std::vector<std::map<int, int>> atom_words(n_atoms);
        for (int s = 0; s < n_dishes; ++s) {
          ++sizes[atom_rgs[s]];
          for (const auto& [w, cnt] : dish_words[s])
            atom_words[atom_rgs[s]][w] += cnt;
        }
        if (n_atoms > 0) lp_atom += log_eppf(config.gamma.gamma0, sizes);
        for (int k = 0; k < n_atoms; ++k)
          lp_atom += log_dirmult(atom_words[k], config.eta0, V);

        OracleEntry entry;
        entry.unit_states = unit_states_v;
        entry.table_rgs = table_rgs;
        entry.dish_rgs = combined_dish_rgs;
        entry.atom_rgs = atom_rgs;
        entry.log_joint = lp_atom;
        table.entries_.push_back(std::move(entry));
        log_joints.push_back(lp_atom);
      }

      // odometer over per-state dish partitions
      int c = 0;
      for (; c < C; ++c) {
        if (++sp_idx[c] < static_cast<int>(state_parts[c].size())) break;
        sp_idx[c] = 0;
      }
      if (c == C) break;
    }
  };

  // odometer over state vectors and per-doc partitions
  while (true) {
    std::vector<std::vector<int>> table_rgs(n_docs);
    for (int d = 0; d < n_docs; ++d) table_rgs[d] = doc_parts[d][part_idx[d]];
    score_config(unit_states, table_rgs);

    int d = 0;
    for (; d < n_docs; ++d) {
      if (++part_idx[d] < static_cast<int>(doc_parts[d].size())) break;
      part_idx[d] = 0;
    }
    if (d < n_docs) continue;
    int u = 0;
    for (; u < n_units; ++u) {
      if (++unit_states[u] < C) break;
      unit_states[u] = 0;
    }
    if (u == n_units) break;
  }

  double mx = -std::numeric_limits<double>::infinity();
  for (double lj : log_joints) mx = std::max(mx, lj);
  double total = 0.0;
  for (double lj : log_joints) total += std::exp(lj - mx);
  table.log_total_mass_ = mx + std::log(total);
  for (auto& e : table.entries_) e.prob = std::exp(e.log_joint - table.log_total_mass_);
  return table;
}

std::map<std::vector<int>, double> PosteriorTable::table_partition_marginal(
    int doc) const {
  std::map<std::vector<int>, double> out;
  for (const auto& e : entries_) out[e.table_rgs.at(doc)] += e.prob;
  return out;
}

std::map<std::vector<int>, double> PosteriorTable::state_marginal() const {
  std::map<std::vector<int>, double> out;
  for (const auto& e : entries_) out[e.unit_states] += e.prob;
  return out;
}

std::map<std::vector<int>, double> enumerate_state_posterior(
    const std::vector<int>& chain_lengths, int num_states, double alpha) {
  int n = std::accumulate(chain_lengths.begin(), chain_lengths.end(), 0);
  std::map<std::vector<int>, double> out;
  std::vector<int> states(n, 0);
  std::vector<double> logs;
  std::vector<std::vector<int>> keys;
  while (true) {
    markov::StateChain sc(num_states, alpha);
    int pos = 0;
    for (std::size_t ci = 0; ci < chain_lengths.size(); ++ci) {
      int id = sc.add_chain("e" + std::to_string(ci), 0, chain_lengths[ci], true);
      for (int p = 0; p < chain_lengths[ci]; ++p) sc.assign(id, p, states[pos++]);
    }
    keys.push_back(states);
    logs.push_back(sc.log_prob());

    int i = 0;
    for (; i < n; ++i) {
      if (++states[i] < num_states) break;
      states[i] = 0;
    }
    if (i == n) break;
  }
  double mx = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  for (double l : logs) total += std::exp(l - mx);
  for (std::size_t i = 0; i < keys.size(); ++i)
    out[keys[i]] = std::exp(logs[i] - mx) / total;
  return out;
}

}  // namespace mtlvm::synth

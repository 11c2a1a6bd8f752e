#include "mtlvm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace mtlvm::baselines {

void BmHmmHyperparams::validate() const {
  if (num_states < 1) throw std::invalid_argument("BmHmm: C < 1");
  if (alpha <= 0 || emission_prior <= 0)
    throw std::invalid_argument("BmHmm: priors must be positive");
  if (sweeps < 1) throw std::invalid_argument("BmHmm: sweeps < 1");
}

BmHmmModel::BmHmmModel(const corpus::Corpus& corpus,
                       const BmHmmHyperparams& hp)
    : hp_(hp), V_(corpus.vocab_size()) {
  hp_.validate();
  corpus.validate();
  if (corpus.chains.empty())
    throw std::invalid_argument("BmHmm: corpus has no chains");
  states_ = markov::StateChain(hp_.num_states, hp_.alpha);

  std::map<std::string, int> earliest;
  for (const auto& chain : corpus.chains) {
    auto it = earliest.find(chain.entity_id);
    if (it == earliest.end() || chain.start_epoch() < it->second)
      earliest[chain.entity_id] = chain.start_epoch();
  }
  for (const auto& chain : corpus.chains) {
    bool first = chain.start_epoch() == earliest.at(chain.entity_id);
    int ci = states_.add_chain(chain.entity_id, chain.start_epoch(),
                               static_cast<int>(chain.units.size()), first);
    for (std::size_t pos = 0; pos < chain.units.size(); ++pos) {
      const auto& unit = chain.units[pos];
      std::vector<int> words;
      for (const auto& doc : unit.documents)
        words.insert(words.end(), doc.tokens.begin(), doc.tokens.end());
      unit_words_.push_back(std::move(words));
      unit_pos_.emplace_back(ci, static_cast<int>(pos));
      unit_epochs_.push_back(unit.epoch);
      unit_first_of_entity_at_start_.push_back(pos == 0 && !first);
    }
  }
  word_counts_.assign(hp_.num_states, std::vector<std::int64_t>(V_, 0));
  state_totals_.assign(hp_.num_states, 0);
  iota_.assign(hp_.num_states, std::vector<double>(V_, 1.0 / V_));
}

void BmHmmModel::move_unit_counts(int unit, int state, int sign) {
  for (int w : unit_words_[unit]) {
    word_counts_[state][w] += sign;
    state_totals_[state] += sign;
  }
}

std::vector<std::vector<double>> BmHmmModel::posterior_mean_iota() const {
  std::vector<std::vector<double>> out(hp_.num_states,
                                       std::vector<double>(V_, 0.0));
  for (int c = 0; c < hp_.num_states; ++c) {
    double denom = state_totals_[c] + hp_.emission_prior * V_;
    for (int w = 0; w < V_; ++w)
      out[c][w] = (word_counts_[c][w] + hp_.emission_prior) / denom;
  }
  return out;
}

void BmHmmModel::resample_iota(Rng& rng) {
  for (int c = 0; c < hp_.num_states; ++c) {
    std::vector<double> conc(V_);
    for (int w = 0; w < V_; ++w)
      conc[w] = hp_.emission_prior + word_counts_[c][w];
    iota_[c] = rng.dirichlet(conc);
  }
}

void BmHmmModel::sweep(Rng& rng) {
  for (int u = 0; u < num_units(); ++u) {
    auto [chain, pos] = unit_pos_[u];
    int old_state = states_.state(chain, pos);
    if (old_state != markov::StateChain::kUnassigned) {
      move_unit_counts(u, old_state, -1);
      states_.remove(chain, pos);
    }
    std::vector<double> ll(hp_.num_states, 0.0);
    for (int c = 0; c < hp_.num_states; ++c)
      for (int w : unit_words_[u]) ll[c] += std::log(iota_[c][w]);
    std::vector<double> prior;
    if (unit_first_of_entity_at_start_[u])
      prior = markov::fallback_state_distribution(unit_epochs_[u], states_,
                                                  markov::estimate_rho(states_));
    int state =
        rng.log_categorical(states_.state_log_weights(chain, pos, ll, prior));
    states_.assign(chain, pos, state);
    move_unit_counts(u, state, +1);
  }
  resample_iota(rng);
}

void BmHmmModel::audit() const {
  states_.audit();
  std::vector<std::vector<std::int64_t>> counts(
      hp_.num_states, std::vector<std::int64_t>(V_, 0));
  for (int u = 0; u < num_units(); ++u) {
    int c = unit_state(u);
    if (c == markov::StateChain::kUnassigned) continue;
    for (int w : unit_words_[u]) ++counts[c][w];
  }
  for (int c = 0; c < hp_.num_states; ++c) {
    std::int64_t total = 0;
    for (int w = 0; w < V_; ++w) {
      if (counts[c][w] != word_counts_[c][w])
        throw std::runtime_error("BmHmm::audit: word-count mismatch");
      total += counts[c][w];
    }
    if (total != state_totals_[c])
      throw std::runtime_error("BmHmm::audit: state-total mismatch");
  }
}

nlohmann::json BmHmmModel::to_json() const {
  nlohmann::json j;
  j["hyperparams"] = {{"num_states", hp_.num_states},
                      {"alpha", hp_.alpha},
                      {"emission_prior", hp_.emission_prior},
                      {"sweeps", hp_.sweeps},
                      {"seed", hp_.seed}};
  j["vocab_size"] = V_;
  nlohmann::json chains = nlohmann::json::array();
  for (const auto& chain : states_.chains())
    chains.push_back({{"entity_id", chain.entity_id},
                      {"start_epoch", chain.start_epoch},
                      {"first_of_entity", chain.first_of_entity},
                      {"states", chain.states}});
  j["chains"] = chains;
  j["unit_words"] = unit_words_;
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& [c, p] : unit_pos_) pos.push_back({c, p});
  j["unit_pos"] = pos;
  j["unit_epochs"] = unit_epochs_;
  std::vector<int> ffs(unit_first_of_entity_at_start_.begin(),
                       unit_first_of_entity_at_start_.end());
  j["fallback_at_start"] = ffs;
  j["iota"] = iota_;
  return j;
}

BmHmmModel BmHmmModel::from_json(const nlohmann::json& j) {
  BmHmmModel m;
  const auto& jh = j.at("hyperparams");
  m.hp_.num_states = jh.at("num_states").get<int>();
  m.hp_.alpha = jh.at("alpha").get<double>();
  m.hp_.emission_prior = jh.at("emission_prior").get<double>();
  m.hp_.sweeps = jh.at("sweeps").get<int>();
  m.hp_.seed = jh.at("seed").get<std::uint64_t>();
  m.V_ = j.at("vocab_size").get<int>();
  m.states_ = markov::StateChain(m.hp_.num_states, m.hp_.alpha);
  for (const auto& jc : j.at("chains")) {
    auto states = jc.at("states").get<std::vector<int>>();
    int ci = m.states_.add_chain(jc.at("entity_id").get<std::string>(),
                                 jc.at("start_epoch").get<int>(),
                                 static_cast<int>(states.size()),
                                 jc.at("first_of_entity").get<bool>());
    for (std::size_t p = 0; p < states.size(); ++p)
      if (states[p] != markov::StateChain::kUnassigned)
        m.states_.assign(ci, static_cast<int>(p), states[p]);
  }
  m.unit_words_ = j.at("unit_words").get<std::vector<std::vector<int>>>();
  for (const auto& jp : j.at("unit_pos"))
    m.unit_pos_.emplace_back(jp.at(0).get<int>(), jp.at(1).get<int>());
  m.unit_epochs_ = j.at("unit_epochs").get<std::vector<int>>();
  for (int f : j.at("fallback_at_start").get<std::vector<int>>())
    m.unit_first_of_entity_at_start_.push_back(f != 0);
  m.iota_ = j.at("iota").get<std::vector<std::vector<double>>>();
  m.word_counts_.assign(m.hp_.num_states, std::vector<std::int64_t>(m.V_, 0));
  m.state_totals_.assign(m.hp_.num_states, 0);
  for (int u = 0; u < m.num_units(); ++u) {
    int c = m.unit_state(u);
    if (c != markov::StateChain::kUnassigned) m.move_unit_counts(u, c, +1);
  }
  m.audit();
  return m;
}

BmHmmModel train_bmhmm(const corpus::Corpus& corpus,
                       const BmHmmHyperparams& hp, Rng& rng) {
  BmHmmModel m(corpus, hp);
  for (int s = 0; s < hp.sweeps; ++s) m.sweep(rng);
  return m;
}

void LdaConfig::validate() const {
  if (num_topics < 1) throw std::invalid_argument("Lda: K < 1");
  if (topic_prior <= 0 || doc_prior < 0)
    throw std::invalid_argument("Lda: priors out of range");
  if (sweeps < 1) throw std::invalid_argument("Lda: sweeps < 1");
}

LdaModel::LdaModel(const corpus::Corpus& corpus, const LdaConfig& config)
    : config_(config), V_(corpus.vocab_size()) {
  config_.validate();
  for (const auto& chain : corpus.chains)
    for (const auto& unit : chain.units)
      for (const auto& doc : unit.documents) docs_.push_back(doc.tokens);
  if (docs_.empty()) throw std::invalid_argument("Lda: corpus has no documents");
  int K = config_.num_topics;
  topic_word_.assign(K, std::vector<std::int64_t>(V_, 0));
  topic_totals_.assign(K, 0);
  doc_topic_.assign(docs_.size(), std::vector<std::int64_t>(K, 0));
  z_.resize(docs_.size());
  for (std::size_t d = 0; d < docs_.size(); ++d)
    z_[d].assign(docs_[d].size(), -1);
}

void LdaModel::sweep(Rng& rng) {
  int K = config_.num_topics;
  double beta = config_.topic_prior;
  double alpha = config_.effective_doc_prior();
  std::vector<double> weights(K);
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    for (std::size_t n = 0; n < docs_[d].size(); ++n) {
      int w = docs_[d][n];
      int old_k = z_[d][n];
      if (old_k >= 0) {
        --topic_word_[old_k][w];
        --topic_totals_[old_k];
        --doc_topic_[d][old_k];
      }
      for (int k = 0; k < K; ++k)
        weights[k] = (doc_topic_[d][k] + alpha) *
                     (topic_word_[k][w] + beta) /
                     (topic_totals_[k] + beta * V_);
      int k = rng.categorical(weights);
      z_[d][n] = k;
      ++topic_word_[k][w];
      ++topic_totals_[k];
      ++doc_topic_[d][k];
    }
  }
}

void LdaModel::audit() const {
  int K = config_.num_topics;
  std::vector<std::vector<std::int64_t>> tw(K,
                                            std::vector<std::int64_t>(V_, 0));
  std::vector<std::vector<std::int64_t>> dt(docs_.size(),
                                            std::vector<std::int64_t>(K, 0));
  for (std::size_t d = 0; d < docs_.size(); ++d)
    for (std::size_t n = 0; n < docs_[d].size(); ++n) {
      int k = z_[d][n];
      if (k < 0) continue;
      ++tw[k][docs_[d][n]];
      ++dt[d][k];
    }
  for (int k = 0; k < K; ++k) {
    std::int64_t total = 0;
    for (int w = 0; w < V_; ++w) {
      if (tw[k][w] != topic_word_[k][w])
        throw std::runtime_error("Lda::audit: topic-word mismatch");
      total += tw[k][w];
    }
    if (total != topic_totals_[k])
      throw std::runtime_error("Lda::audit: topic-total mismatch");
  }
  if (dt != doc_topic_) throw std::runtime_error("Lda::audit: doc-topic mismatch");
}

std::vector<std::vector<double>> LdaModel::topic_word_distributions() const {
  int K = config_.num_topics;
  double beta = config_.topic_prior;
  std::vector<std::vector<double>> out(K, std::vector<double>(V_, 0.0));
  for (int k = 0; k < K; ++k) {
    double denom = topic_totals_[k] + beta * V_;
    for (int w = 0; w < V_; ++w) out[k][w] = (topic_word_[k][w] + beta) / denom;
  }
  return out;
}

std::vector<std::vector<double>> LdaModel::document_topic_distributions()
    const {
  int K = config_.num_topics;
  double alpha = config_.effective_doc_prior();
  std::vector<std::vector<double>> out(docs_.size(),
                                       std::vector<double>(K, 0.0));
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    double denom = static_cast<double>(docs_[d].size()) + alpha * K;
    for (int k = 0; k < K; ++k) out[d][k] = (doc_topic_[d][k] + alpha) / denom;
  }
  return out;
}

std::vector<int> LdaModel::top_keywords(int topic, int k) const {
  std::vector<int> idx(V_);
  std::iota(idx.begin(), idx.end(), 0);
  const auto& row = topic_word_[topic];
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return row[a] > row[b]; });
  idx.resize(std::min(k, V_));
  return idx;
}

double LdaModel::training_perplexity() const {
  auto phi = topic_word_distributions();
  auto theta = document_topic_distributions();
  double ll = 0.0;
  std::int64_t n = 0;
  for (std::size_t d = 0; d < docs_.size(); ++d)
    for (int w : docs_[d]) {
      double p = 0.0;
      for (int k = 0; k < config_.num_topics; ++k) p += theta[d][k] * phi[k][w];
      ll += std::log(p);
      ++n;
    }
  return std::exp(-ll / static_cast<double>(n));
}

nlohmann::json LdaModel::to_json() const {
  nlohmann::json j;
  j["config"] = {{"num_topics", config_.num_topics},
                 {"topic_prior", config_.topic_prior},
                 {"doc_prior", config_.doc_prior},
                 {"sweeps", config_.sweeps},
                 {"seed", config_.seed}};
  j["vocab_size"] = V_;
  j["docs"] = docs_;
  j["z"] = z_;
  return j;
}

LdaModel LdaModel::from_json(const nlohmann::json& j) {
  LdaModel m;
  const auto& jc = j.at("config");
  m.config_.num_topics = jc.at("num_topics").get<int>();
  m.config_.topic_prior = jc.at("topic_prior").get<double>();
  m.config_.doc_prior = jc.at("doc_prior").get<double>();
  m.config_.sweeps = jc.at("sweeps").get<int>();
  m.config_.seed = jc.at("seed").get<std::uint64_t>();
  m.V_ = j.at("vocab_size").get<int>();
  m.docs_ = j.at("docs").get<std::vector<std::vector<int>>>();
  m.z_ = j.at("z").get<std::vector<std::vector<int>>>();
  int K = m.config_.num_topics;
  m.topic_word_.assign(K, std::vector<std::int64_t>(m.V_, 0));
  m.topic_totals_.assign(K, 0);
  m.doc_topic_.assign(m.docs_.size(), std::vector<std::int64_t>(K, 0));
  for (std::size_t d = 0; d < m.docs_.size(); ++d)
    for (std::size_t n = 0; n < m.docs_[d].size(); ++n) {
      int k = m.z_[d][n];
      if (k < 0) continue;
      ++m.topic_word_[k][m.docs_[d][n]];
      ++m.topic_totals_[k];
      ++m.doc_topic_[d][k];
    }
  m.audit();
  return m;
}

LdaModel train_lda(const corpus::Corpus& corpus, const LdaConfig& config,
                   Rng& rng) {
  LdaModel m(corpus, config);
  for (int s = 0; s < config.sweeps; ++s) m.sweep(rng);
  return m;
}

}  // namespace mtlvm::baselines

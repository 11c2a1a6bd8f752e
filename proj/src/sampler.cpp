#include "mtlvm/sampler.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <stdexcept>

namespace mtlvm::sampler {

void Hyperparams::validate() const {
  if (num_states < 1) throw std::invalid_argument("Hyperparams: C < 1");
  if (alpha <= 0 || gamma.gamma0 <= 0 || gamma.gamma1 <= 0 ||
      gamma.gamma2 <= 0 || eta0 <= 0)
    throw std::invalid_argument("Hyperparams: concentrations must be positive");
  if (sweeps < 1 || thin < 1 || burn_in < 0)
    throw std::invalid_argument("Hyperparams: sweeps/thin/burn_in out of range");
  if (burn_in >= sweeps)
    throw std::invalid_argument("burn_in < sweeps violated");
}

nlohmann::json Hyperparams::to_json() const {
  return {{"num_states", num_states}, {"alpha", alpha},
          {"gamma0", gamma.gamma0},   {"gamma1", gamma.gamma1},
          {"gamma2", gamma.gamma2},   {"eta0", eta0},
          {"sweeps", sweeps},         {"burn_in", burn_in},
          {"thin", thin},             {"seed", seed}};
}

Hyperparams Hyperparams::from_json(const nlohmann::json& j) {
  Hyperparams hp;
  hp.num_states = j.at("num_states").get<int>();
  hp.alpha = j.at("alpha").get<double>();
  hp.gamma.gamma0 = j.at("gamma0").get<double>();
  hp.gamma.gamma1 = j.at("gamma1").get<double>();
  hp.gamma.gamma2 = j.at("gamma2").get<double>();
  hp.eta0 = j.at("eta0").get<double>();
  hp.sweeps = j.at("sweeps").get<int>();
  hp.burn_in = j.at("burn_in").get<int>();
  hp.thin = j.at("thin").get<int>();
  hp.seed = j.at("seed").get<std::uint64_t>();
  return hp;
}

void write_trace_header(int num_states, std::ostream& out) {
  out << "sweep,logp,K";
  for (int c = 0; c < num_states; ++c) out << ",occupancy_" << c;
  out << "\n";
}

void write_trace_record(const TraceRecord& record, std::ostream& out) {
  out << record.sweep << "," << record.logp << "," << record.live_atoms;
  for (std::int64_t o : record.occupancy) out << "," << o;
  out << "\n";
}

Model::Model(const corpus::Corpus& corpus, const Hyperparams& hp) : hp_(hp) {
  hp_.validate();
  corpus.validate();
  if (corpus.chains.empty())
    throw std::invalid_argument("Model: corpus has no chains");
  seating_ = crf::CrfState(corpus.vocab_size(), hp_.num_states, hp_.gamma,
                           hp_.eta0);
  states_ = markov::StateChain(hp_.num_states, hp_.alpha);
  rng_ = Rng(hp_.seed);

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
      std::vector<int> doc_ids;
      for (const auto& doc : unit.documents) {
        doc_ids.push_back(seating_.add_document(doc.tokens));
        doc_states_.push_back(-1);
      }
      unit_docs_.push_back(std::move(doc_ids));
      unit_pos_.emplace_back(ci, static_cast<int>(pos));
      unit_epochs_.push_back(unit.epoch);
    }
  }
}

void Model::set_unit_state(int unit, int state) {
  for (int d : unit_docs_[unit]) doc_states_[d] = state;
}

double Model::joint_log_prob() const {
  return states_.log_prob() + seating_.seating_log_prob(doc_states_);
}

std::vector<std::int64_t> Model::state_occupancy() const {
  std::vector<std::int64_t> occ(hp_.num_states, 0);
  for (int u = 0; u < num_units(); ++u) ++occ[unit_state(u)];
  return occ;
}

TraceRecord Model::trace_record() const {
  TraceRecord r;
  r.sweep = sweep_;
  r.logp = joint_log_prob();
  r.live_atoms = seating_.live_atom_count();
  r.occupancy = state_occupancy();
  return r;
}

void Model::audit() const {
  states_.audit();
  seating_.audit(doc_states_);
  for (int u = 0; u < num_units(); ++u)
    for (int d : unit_docs_[u])
      if (doc_states_[d] != unit_state(u))
        throw std::runtime_error("Model::audit: doc/unit state mismatch");
}

nlohmann::json Model::to_json() const {
  nlohmann::json j;
  j["hyperparams"] = hp_.to_json();
  j["seating"] = seating_.to_json();
  nlohmann::json chains = nlohmann::json::array();
  for (const auto& chain : states_.chains())
    chains.push_back({{"entity_id", chain.entity_id},
                      {"start_epoch", chain.start_epoch},
                      {"first_of_entity", chain.first_of_entity},
                      {"states", chain.states}});
  j["chains"] = chains;
  j["unit_docs"] = unit_docs_;
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& [c, p] : unit_pos_) pos.push_back({c, p});
  j["unit_pos"] = pos;
  j["unit_epochs"] = unit_epochs_;
  j["doc_states"] = doc_states_;
  j["sweep"] = sweep_;
  j["rng"] = rng_.serialize();
  return j;
}

Model Model::from_json(const nlohmann::json& j) {
  Model m;
  m.hp_ = Hyperparams::from_json(j.at("hyperparams"));
  m.hp_.validate();
  m.seating_ = crf::CrfState::from_json(j.at("seating"));
  m.states_ = markov::StateChain(m.hp_.num_states, m.hp_.alpha);
  for (const auto& jc : j.at("chains")) {
    auto states = jc.at("states").get<std::vector<int>>();
    int ci = m.states_.add_chain(jc.at("entity_id").get<std::string>(),
                                 jc.at("start_epoch").get<int>(),
                                 static_cast<int>(states.size()),
                                 jc.at("first_of_entity").get<bool>());
    for (std::size_t p = 0; p < states.size(); ++p)
      m.states_.assign(ci, static_cast<int>(p), states[p]);
  }
  m.unit_docs_ = j.at("unit_docs").get<std::vector<std::vector<int>>>();
  for (const auto& jp : j.at("unit_pos"))
    m.unit_pos_.emplace_back(jp.at(0).get<int>(), jp.at(1).get<int>());
  m.unit_epochs_ = j.at("unit_epochs").get<std::vector<int>>();
  m.doc_states_ = j.at("doc_states").get<std::vector<int>>();
  m.sweep_ = j.at("sweep").get<int>();
  m.rng_.deserialize(j.at("rng").get<std::string>());
  m.audit();
  return m;
}

void init_assignments(Model& m) {
  for (int u = 0; u < m.num_units(); ++u) {
    int state = markov::initial_state(m.hp_.num_states, m.rng_);
    auto [chain, pos] = m.unit_pos_[u];
    m.states_.assign(chain, pos, state);
    m.set_unit_state(u, state);
    for (int d : m.unit_docs_[u]) m.seating_.seat_document(d, state, m.rng_);
  }
  m.seating_.sample_theta(m.rng_);
  m.seating_.compact(m.doc_states_);
}

void run_sweeps(Model& m, int target_sweep, const TrainOptions& opts) {
  // a resumed run's checkpoint must match the equivalent single run's
  m.hp_.sweeps = std::max(m.hp_.sweeps, target_sweep);
  while (m.sweep_ < target_sweep) {
    // (a) state layer
    for (int u = 0; u < m.num_units(); ++u) {
      int old_state = m.unit_state(u);
      auto [chain, pos] = m.unit_pos_[u];
      m.seating_.detach_unit(m.unit_docs_[u], old_state);
      m.states_.remove(chain, pos);
      std::vector<double> ll = m.seating_.unit_log_likelihood_all(
          m.unit_docs_[u], opts.parallel_likelihood);
      std::vector<double> prior;
      if (pos == 0 && !m.states_.chains()[chain].first_of_entity)
        prior = markov::fallback_state_distribution(
            m.unit_epochs_[u], m.states_, markov::estimate_rho(m.states_));
      int state = m.rng_.log_categorical(
          m.states_.state_log_weights(chain, pos, ll, prior));
      m.states_.assign(chain, pos, state);
      m.set_unit_state(u, state);
      m.seating_.attach_unit(m.unit_docs_[u], state, m.rng_);
    }
    // (b) token layer
    for (int d = 0; d < m.seating_.num_documents(); ++d) {
      int n_tokens = static_cast<int>(m.seating_.doc_tokens(d).size());
      for (int n = 0; n < n_tokens; ++n) {
        m.seating_.remove_token(d, n, m.doc_states_[d]);
        m.seating_.sample_table(d, n, m.doc_states_[d], m.rng_);
      }
    }
    // (c) dish and atom layers, (d) explicit topics
    m.seating_.resweep_dishes_and_atoms(m.doc_states_, m.rng_);
    m.seating_.sample_theta(m.rng_);
    m.seating_.compact(m.doc_states_);
    ++m.sweep_;

    if (opts.audit_every > 0 && m.sweep_ % opts.audit_every == 0) m.audit();
    if (opts.trace) write_trace_record(m.trace_record(), *opts.trace);
    if (opts.checkpoint_sink && opts.checkpoint_every > 0 &&
        m.sweep_ % opts.checkpoint_every == 0)
      opts.checkpoint_sink(m);
  }
  if (opts.checkpoint_sink &&
      (opts.checkpoint_every <= 0 || m.sweep_ % opts.checkpoint_every != 0))
    opts.checkpoint_sink(m);
}

Model train(const corpus::Corpus& corpus, const Hyperparams& hp,
            const TrainOptions& opts) {
  Model m(corpus, hp);
  if (opts.trace) write_trace_header(hp.num_states, *opts.trace);
  init_assignments(m);
  run_sweeps(m, hp.sweeps, opts);
  return m;
}

void resume(Model& model, int additional_sweeps, const TrainOptions& opts) {
  if (additional_sweeps < 1)
    throw std::invalid_argument("resume: additional_sweeps < 1");
  run_sweeps(model, model.sweep() + additional_sweeps, opts);
}

}  // namespace mtlvm::sampler

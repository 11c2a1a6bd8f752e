#include "mtlvm/predict.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace mtlvm::predict {

namespace {

void fill_final_states(const markov::StateChain& states, ModelView& view) {
  int final_epoch = 0;
  for (const auto& chain : states.chains())
    final_epoch = std::max(
        final_epoch,
        chain.start_epoch + static_cast<int>(chain.states.size()) - 1);
  view.final_epoch = final_epoch;
  for (const auto& chain : states.chains()) {
    int end = chain.start_epoch + static_cast<int>(chain.states.size()) - 1;
    if (end == final_epoch && !chain.states.empty())
      view.final_states[chain.entity_id] = chain.states.back();
  }
}

std::map<std::string, int> vocab_map(const std::vector<std::string>& vocab) {
  std::map<std::string, int> m;
  for (std::size_t i = 0; i < vocab.size(); ++i)
    m[vocab[i]] = static_cast<int>(i);
  return m;
}

}  // namespace

ModelView make_view(const sampler::Model& model,
                    const std::vector<std::string>& vocabulary) {
  ModelView view;
  view.vocab = vocab_map(vocabulary);
  view.rho = markov::estimate_rho(model.states());
  const auto& seating = model.seating();
  int C = seating.num_states();
  int V = seating.vocab_size();
  const auto& gamma = seating.gamma();
  // same mixture as the live predictive, but with each atom's sampled row
  // replaced by its collapsed posterior mean: scoring stays deterministic
  // given the seating and avoids single-draw noise
  std::int64_t atom_total = 0;
  for (const auto& atom : seating.atoms()) atom_total += atom.dishes;
  std::vector<std::vector<double>> atom_rows;
  for (std::size_t k = 0; k < seating.atoms().size(); ++k) {
    std::vector<double> row(V);
    for (int w = 0; w < V; ++w)
      row[w] = seating.collapsed_atom_predictive(static_cast<int>(k), w);
    atom_rows.push_back(std::move(row));
  }
  for (int c = 0; c < C; ++c) {
    std::int64_t j_total = 0;
    for (const auto& dish : seating.dishes(c)) j_total += dish.tables;
    double denom_dish = static_cast<double>(j_total) + gamma.gamma1;
    double p_new_dish = gamma.gamma1 / denom_dish;
    double denom_atom = static_cast<double>(atom_total) + gamma.gamma0;
    std::vector<double> out(V, p_new_dish * gamma.gamma0 / denom_atom / V);
    for (const auto& dish : seating.dishes(c)) {
      if (dish.tables == 0) continue;
      double wgt = dish.tables / denom_dish;
      for (int w = 0; w < V; ++w) out[w] += wgt * atom_rows[dish.atom][w];
    }
    for (std::size_t k = 0; k < seating.atoms().size(); ++k) {
      if (seating.atoms()[k].dishes == 0) continue;
      double wgt = p_new_dish * seating.atoms()[k].dishes / denom_atom;
      for (int w = 0; w < V; ++w) out[w] += wgt * atom_rows[k][w];
    }
    view.state_token_probs.push_back(std::move(out));
  }
  fill_final_states(model.states(), view);

  // fresh-table, fresh-dish, fresh-atom mass times the base predictive for
  // a never-seen column
  double fresh = 1.0;
  for (int c = 0; c < C; ++c) {
    std::int64_t j_total = 0;
    for (const auto& dish : seating.dishes(c)) j_total += dish.tables;
    fresh = std::min(fresh, gamma.gamma1 / (j_total + gamma.gamma1));
  }
  fresh *= gamma.gamma0 / (atom_total + gamma.gamma0);
  view.oov_floor = fresh * seating.topics().eta0 /
                   (seating.topics().eta0 * (V + 1));
  return view;
}

ModelView make_view(const baselines::BmHmmModel& model,
                    const std::vector<std::string>& vocabulary) {
  ModelView view;
  view.vocab = vocab_map(vocabulary);
  view.rho = markov::estimate_rho(model.states());
  view.state_token_probs = model.posterior_mean_iota();
  fill_final_states(model.states(), view);
  double prior = model.hyperparams().emission_prior;
  int V = static_cast<int>(vocabulary.size());
  double floor = 1.0;
  for (int c = 0; c < model.hyperparams().num_states; ++c)
    floor = std::min(floor, prior / (model.state_total(c) + prior * (V + 1)));
  view.oov_floor = floor;
  return view;
}

ModelView average_views(const std::vector<ModelView>& views) {
  if (views.empty()) throw std::invalid_argument("average_views: empty");
  ModelView out = views.front();
  for (std::size_t i = 1; i < views.size(); ++i) {
    const ModelView& v = views[i];
    if (v.vocab != out.vocab || v.final_states != out.final_states)
      throw std::invalid_argument("average_views: incompatible views");
    for (std::size_t a = 0; a < out.rho.rho.size(); ++a)
      for (std::size_t b = 0; b < out.rho.rho[a].size(); ++b)
        out.rho.rho[a][b] += v.rho.rho[a][b];
    for (std::size_t c = 0; c < out.state_token_probs.size(); ++c)
      for (std::size_t w = 0; w < out.state_token_probs[c].size(); ++w)
        out.state_token_probs[c][w] += v.state_token_probs[c][w];
    out.oov_floor += v.oov_floor;
  }
  double n = static_cast<double>(views.size());
  for (auto& row : out.rho.rho)
    for (double& x : row) x /= n;
  for (auto& row : out.state_token_probs)
    for (double& x : row) x /= n;
  out.oov_floor /= n;
  return out;
}

int argmax_state(const std::vector<double>& log_lik,
                 const std::vector<double>& prior_row) {
  if (log_lik.empty() || log_lik.size() != prior_row.size())
    throw std::invalid_argument("argmax_state: size mismatch");
  int best = 0;
  double best_score = log_lik[0] + std::log(prior_row[0]);
  for (std::size_t c = 1; c < log_lik.size(); ++c) {
    double score = log_lik[c] + std::log(prior_row[c]);
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(c);
    }
  }
  return best;
}

int estimate_state(const std::vector<int>& tokens, int prev_state,
                   const ModelView& view) {
  if (tokens.empty())
    throw std::invalid_argument("estimate_state: unit has no tokens");
  int C = static_cast<int>(view.state_token_probs.size());
  std::vector<double> ll(C, 0.0);
  for (int c = 0; c < C; ++c)
    for (int w : tokens) ll[c] += std::log(view.state_token_probs[c][w]);
  return argmax_state(ll, view.rho.rho[prev_state]);
}

double predict_token_prob(int w, const ModelView& view,
                          const std::vector<double>& next_state_probs) {
  double p = 0.0;
  for (std::size_t c = 0; c < next_state_probs.size(); ++c)
    p += next_state_probs[c] * view.state_token_probs[c][w];
  return p;
}

PredictionReport heldout_log_likelihood(const corpus::Corpus& test,
                                        const ModelView& view) {
  if (test.chains.empty())
    throw std::invalid_argument("heldout_log_likelihood: empty test set");
  PredictionReport report;
  // tokens pooled per entity, matched to the training vocabulary by string
  std::map<std::string, std::vector<int>> entity_tokens;
  std::map<std::string, std::int64_t> entity_oov;
  std::vector<std::string> order;
  for (const auto& chain : test.chains) {
    if (!entity_tokens.count(chain.entity_id)) order.push_back(chain.entity_id);
    auto& toks = entity_tokens[chain.entity_id];
    auto& oov = entity_oov[chain.entity_id];
    for (const auto& unit : chain.units)
      for (const auto& doc : unit.documents)
        for (int t : doc.tokens) {
          auto it = view.vocab.find(test.vocabulary[t]);
          if (it == view.vocab.end())
            ++oov;
          else
            toks.push_back(it->second);
        }
  }
  for (const auto& entity : order) {
    auto it = view.final_states.find(entity);
    if (it == view.final_states.end()) {
      ++report.skipped_entities;
      continue;
    }
    EntityPrediction ep;
    ep.entity_id = entity;
    ep.last_state = it->second;
    ep.next_state_probs = view.rho.rho[ep.last_state];
    ep.oov_tokens = entity_oov[entity];
    for (int w : entity_tokens[entity])
      ep.heldout_ll += std::log(predict_token_prob(w, view, ep.next_state_probs));
    ep.heldout_ll += ep.oov_tokens * std::log(view.oov_floor);
    ep.tokens = static_cast<std::int64_t>(entity_tokens[entity].size()) +
                ep.oov_tokens;
    report.total_ll += ep.heldout_ll;
    report.tokens += ep.tokens;
    report.oov_tokens += ep.oov_tokens;
    report.entities.push_back(std::move(ep));
  }
  if (report.entities.empty())
    throw std::invalid_argument(
        "heldout_log_likelihood: no test entity has a final-epoch state");
  return report;
}

void write_report_csv(const PredictionReport& report, std::ostream& out) {
  int C = report.entities.empty()
              ? 0
              : static_cast<int>(report.entities.front().next_state_probs.size());
  out << "entity,estimated_state";
  for (int c = 0; c < C; ++c) out << ",next_state_prob_" << c;
  out << ",heldout_ll\n";
  for (const auto& ep : report.entities) {
    out << ep.entity_id << "," << ep.last_state;
    for (double p : ep.next_state_probs) out << "," << p;
    out << "," << ep.heldout_ll << "\n";
  }
}

void write_heldout_table(const std::vector<HeldoutRow>& rows,
                         std::ostream& out) {
  out << "model,heldout_log_likelihood\n";
  for (const auto& row : rows) {
    out << row.model << ",";
    if (row.available)
      out << row.log_likelihood;
    else
      out << "n/a";
    out << "\n";
  }
}

}  // namespace mtlvm::predict

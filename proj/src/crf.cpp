#include "mtlvm/crf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mtlvm::crf {

namespace {

double log_sum_exp(const std::vector<double>& logs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logs) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : logs) s += std::exp(v - mx);
  return mx + std::log(s);
}

void add_block(std::map<int, int>& target, const std::map<int, int>& block) {
  for (const auto& [w, c] : block) target[w] += c;
}

void sub_block(std::map<int, int>& target, const std::map<int, int>& block) {
  for (const auto& [w, c] : block) {
    auto it = target.find(w);
    it->second -= c;
    if (it->second == 0) target.erase(it);
  }
}

void add_block64(std::map<int, std::int64_t>& target,
                 const std::map<int, int>& block) {
  for (const auto& [w, c] : block) target[w] += c;
}

void sub_block64(std::map<int, std::int64_t>& target,
                 const std::map<int, int>& block) {
  for (const auto& [w, c] : block) {
    auto it = target.find(w);
    it->second -= c;
    if (it->second == 0) target.erase(it);
  }
}

}  // namespace

CrfState::CrfState(int vocab_size, int num_states, DpConcentrations gamma,
                   double eta0)
    : V_(vocab_size), C_(num_states), gamma_(gamma) {
  if (V_ < 1 || C_ < 1) throw std::invalid_argument("CrfState: V, C >= 1");
  if (gamma_.gamma0 <= 0 || gamma_.gamma1 <= 0 || gamma_.gamma2 <= 0)
    throw std::invalid_argument("CrfState: concentrations must be positive");
  if (eta0 <= 0) throw std::invalid_argument("CrfState: eta0 must be positive");
  bank_.eta0 = eta0;
  dishes_.resize(C_);
  dish_total_.assign(C_, 0);
}

int CrfState::add_document(std::vector<int> tokens) {
  for (int w : tokens)
    if (w < 0 || w >= V_) throw std::out_of_range("add_document: bad token");
  docs_.push_back(std::move(tokens));
  z_.emplace_back(docs_.back().size(), -1);
  tables_.emplace_back();
  return static_cast<int>(docs_.size()) - 1;
}

int CrfState::live_atom_count() const {
  int k = 0;
  for (const auto& a : atoms_)
    if (a.dishes > 0) ++k;
  return k;
}

double CrfState::block_log_lik_theta(int atom,
                                     const std::map<int, int>& block) const {
  const auto& row = bank_.theta[atom];
  double ll = 0.0;
  for (const auto& [w, c] : block)
    ll += c * (row[w] > 0.0 ? std::log(row[w])
                            : -std::numeric_limits<double>::infinity());
  return ll;
}

double CrfState::block_log_lik_base(const std::map<int, int>& block) const {
  // Dirichlet-multinomial marginal under the symmetric base measure.
  double ll = 0.0;
  int total = 0;
  for (const auto& [w, c] : block) {
    ll += std::lgamma(bank_.eta0 + c) - std::lgamma(bank_.eta0);
    total += c;
  }
  ll += std::lgamma(V_ * bank_.eta0) - std::lgamma(V_ * bank_.eta0 + total);
  return ll;
}

double CrfState::log_atom_mixture(const std::map<int, int>& block) const {
  std::vector<double> terms;
  terms.reserve(atoms_.size() + 1);
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (atoms_[k].dishes == 0) continue;
    terms.push_back(std::log(static_cast<double>(atoms_[k].dishes)) +
                    block_log_lik_theta(static_cast<int>(k), block));
  }
  terms.push_back(std::log(gamma_.gamma0) + block_log_lik_base(block));
  return log_sum_exp(terms) - std::log(atom_total_ + gamma_.gamma0);
}

double CrfState::log_dish_mixture(int state,
                                  const std::map<int, int>& block) const {
  std::vector<double> terms;
  const auto& dishes = dishes_[state];
  terms.reserve(dishes.size() + 1);
  for (std::size_t s = 0; s < dishes.size(); ++s) {
    if (dishes[s].tables == 0) continue;
    terms.push_back(std::log(static_cast<double>(dishes[s].tables)) +
                    block_log_lik_theta(dishes[s].atom, block));
  }
  terms.push_back(std::log(gamma_.gamma1) + log_atom_mixture(block));
  return log_sum_exp(terms) - std::log(dish_total_[state] + gamma_.gamma1);
}

int CrfState::create_table(int doc) {
  auto& tables = tables_[doc];
  for (std::size_t t = 0; t < tables.size(); ++t)
    if (tables[t].customers == 0) return static_cast<int>(t);
  tables.emplace_back();
  return static_cast<int>(tables.size()) - 1;
}

int CrfState::create_dish(int state) {
  auto& dishes = dishes_[state];
  for (std::size_t s = 0; s < dishes.size(); ++s)
    if (dishes[s].tables == 0 && dishes[s].atom == -1)
      return static_cast<int>(s);
  dishes.emplace_back();
  return static_cast<int>(dishes.size()) - 1;
}

int CrfState::create_atom(std::vector<double> theta_row) {
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (atoms_[k].dishes == 0) {
      bank_.theta[k] = std::move(theta_row);
      return static_cast<int>(k);
    }
  }
  atoms_.emplace_back();
  bank_.theta.push_back(std::move(theta_row));
  return static_cast<int>(atoms_.size()) - 1;
}

void CrfState::remove_token(int doc, int n, int state) {
  int t = z_[doc][n];
  if (t < 0) return;
  int w = docs_[doc][n];
  Table& table = tables_[doc][t];
  Dish& dish = dishes_[state][table.dish];
  Atom& atom = atoms_[dish.atom];

  --table.customers;
  sub_block(table.words, {{w, 1}});
  sub_block(dish.words, {{w, 1}});
  sub_block64(atom.words, {{w, 1}});
  z_[doc][n] = -1;

  if (table.customers == 0) {
    --dish.tables;
    --dish_total_[state];
    table.dish = -1;
    if (dish.tables == 0) {
      --atom.dishes;
      --atom_total_;
      dish.atom = -1;
      if (atom.dishes == 0) atom.words.clear();
    }
  }
}

int CrfState::sample_table(int doc, int n, int state, Rng& rng) {
  if (z_[doc][n] != -1)
    throw std::logic_error("sample_table: token still seated");
  int w = docs_[doc][n];
  const auto& tables = tables_[doc];

  std::vector<double> logw;
  std::vector<int> choice;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    if (tables[t].customers == 0) continue;
    int atom = dishes_[state][tables[t].dish].atom;
    logw.push_back(std::log(static_cast<double>(tables[t].customers)) +
                   block_log_lik_theta(atom, {{w, 1}}));
    choice.push_back(static_cast<int>(t));
  }
  logw.push_back(std::log(gamma_.gamma2) + log_dish_mixture(state, {{w, 1}}));
  choice.push_back(-1);

  int picked = choice[rng.log_categorical(logw)];
  if (picked == -1) {
    picked = create_table(doc);
    Table& table = tables_[doc][picked];
    table.customers = 1;
    table.words = {{w, 1}};
    table.dish = attach_block(state, table.words, rng);
  } else {
    Table& table = tables_[doc][picked];
    ++table.customers;
    add_block(table.words, {{w, 1}});
    Dish& dish = dishes_[state][table.dish];
    add_block(dish.words, {{w, 1}});
    add_block64(atoms_[dish.atom].words, {{w, 1}});
  }
  z_[doc][n] = picked;
  return picked;
}

void CrfState::seat_document(int doc, int state, Rng& rng) {
  for (std::size_t n = 0; n < docs_[doc].size(); ++n)
    sample_table(doc, static_cast<int>(n), state, rng);
}

void CrfState::detach_table(int doc, int table, int state) {
  Table& t = tables_[doc][table];
  if (t.dish == -1) return;
  Dish& dish = dishes_[state][t.dish];
  Atom& atom = atoms_[dish.atom];
  sub_block(dish.words, t.words);
  sub_block64(atom.words, t.words);
  --dish.tables;
  --dish_total_[state];
  t.dish = -1;
  if (dish.tables == 0) {
    --atom.dishes;
    --atom_total_;
    dish.atom = -1;
    if (atom.dishes == 0) atom.words.clear();
  }
}

int CrfState::attach_block(int state, const std::map<int, int>& block,
                           Rng& rng) {
  const auto& dishes = dishes_[state];
  std::vector<double> logw;
  std::vector<int> choice;
  for (std::size_t s = 0; s < dishes.size(); ++s) {
    if (dishes[s].tables == 0) continue;
    logw.push_back(std::log(static_cast<double>(dishes[s].tables)) +
                   block_log_lik_theta(dishes[s].atom, block));
    choice.push_back(static_cast<int>(s));
  }
  logw.push_back(std::log(gamma_.gamma1) + log_atom_mixture(block));
  choice.push_back(-1);

  int picked = choice[rng.log_categorical(logw)];
  if (picked == -1) {
    picked = create_dish(state);
    Dish& dish = dishes_[state][picked];
    dish.atom = sample_atom_assignment(block, rng);
    ++atoms_[dish.atom].dishes;
    ++atom_total_;
  }
  Dish& dish = dishes_[state][picked];
  ++dish.tables;
  ++dish_total_[state];
  add_block(dish.words, block);
  add_block64(atoms_[dish.atom].words, block);
  return picked;
}

void CrfState::attach_table(int doc, int table, int state, Rng& rng) {
  Table& t = tables_[doc][table];
  if (t.dish != -1) throw std::logic_error("attach_table: table not detached");
  t.dish = attach_block(state, t.words, rng);
}

void CrfState::detach_dish(int state, int dish) {
  Dish& d = dishes_[state][dish];
  if (d.atom == -1) return;
  Atom& atom = atoms_[d.atom];
  sub_block64(atom.words, d.words);
  --atom.dishes;
  --atom_total_;
  d.atom = -1;
  if (atom.dishes == 0) atom.words.clear();
}

int CrfState::sample_atom_assignment(const std::map<int, int>& block,
                                     Rng& rng) {
  std::vector<double> logw;
  std::vector<int> choice;
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (atoms_[k].dishes == 0) continue;
    logw.push_back(std::log(static_cast<double>(atoms_[k].dishes)) +
                   block_log_lik_theta(static_cast<int>(k), block));
    choice.push_back(static_cast<int>(k));
  }
  logw.push_back(std::log(gamma_.gamma0) + block_log_lik_base(block));
  choice.push_back(-1);

  int picked = choice[rng.log_categorical(logw)];
  if (picked == -1) {
    std::vector<double> alpha(V_, bank_.eta0);
    for (const auto& [w, c] : block) alpha[w] += c;
    picked = create_atom(rng.dirichlet(alpha));
  }
  return picked;
}

void CrfState::attach_dish(int state, int dish, Rng& rng) {
  Dish& d = dishes_[state][dish];
  if (d.atom != -1) throw std::logic_error("attach_dish: dish not detached");
  d.atom = sample_atom_assignment(d.words, rng);
  ++atoms_[d.atom].dishes;
  ++atom_total_;
  add_block64(atoms_[d.atom].words, d.words);
}

void CrfState::resweep_dishes_and_atoms(const std::vector<int>& doc_states,
                                        Rng& rng) {
  for (int doc = 0; doc < num_documents(); ++doc) {
    int state = doc_states[doc];
    for (std::size_t t = 0; t < tables_[doc].size(); ++t) {
      if (tables_[doc][t].customers == 0) continue;
      detach_table(doc, static_cast<int>(t), state);
      attach_table(doc, static_cast<int>(t), state, rng);
    }
  }
  for (int c = 0; c < C_; ++c) {
    for (std::size_t s = 0; s < dishes_[c].size(); ++s) {
      if (dishes_[c][s].tables == 0) continue;
      detach_dish(c, static_cast<int>(s));
      attach_dish(c, static_cast<int>(s), rng);
    }
  }
}

void CrfState::sample_theta(Rng& rng) {
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (atoms_[k].dishes == 0) continue;
    std::vector<double> alpha(V_, bank_.eta0);
    for (const auto& [w, c] : atoms_[k].words) alpha[w] += c;
    bank_.theta[k] = rng.dirichlet(alpha);
  }
}

void CrfState::detach_unit(const std::vector<int>& doc_ids, int state) {
  for (int doc : doc_ids)
    for (std::size_t t = 0; t < tables_[doc].size(); ++t)
      if (tables_[doc][t].customers > 0)
        detach_table(doc, static_cast<int>(t), state);
}

void CrfState::attach_unit(const std::vector<int>& doc_ids, int state,
                           Rng& rng) {
  for (int doc : doc_ids)
    for (std::size_t t = 0; t < tables_[doc].size(); ++t)
      if (tables_[doc][t].customers > 0)
        attach_table(doc, static_cast<int>(t), state, rng);
}

double CrfState::unit_log_likelihood(const std::vector<int>& doc_ids,
                                     int state) const {
  if (state < 0 || state >= C_)
    throw std::out_of_range("unit_log_likelihood: state out of range");
  double ll = 0.0;
  for (int doc : doc_ids) {
    int seated = 0;
    for (const auto& table : tables_[doc]) {
      if (table.customers == 0) continue;
      if (table.dish != -1)
        throw std::logic_error("unit_log_likelihood: unit must be detached");
      // Table-partition factor of the document-level CRP (state-free).
      ll += std::log(gamma_.gamma2) + std::lgamma(table.customers);
      seated += table.customers;
      // Dish choice marginalized against the detached counts. Tables are
      // scored independently; within-unit coupling is not tracked here.
      ll += log_dish_mixture(state, table.words);
    }
    ll += std::lgamma(gamma_.gamma2) - std::lgamma(gamma_.gamma2 + seated);
  }
  return ll;
}

std::vector<double> CrfState::unit_log_likelihood_all(
    const std::vector<int>& doc_ids, bool parallel) const {
  std::vector<double> out(C_);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C_; ++c) out[c] = unit_log_likelihood(doc_ids, c);
  } else {
    for (int c = 0; c < C_; ++c) out[c] = unit_log_likelihood(doc_ids, c);
  }
  return out;
}

double CrfState::unit_log_marginal(const std::vector<int>& doc_ids, int state,
                                   int num_reseatings, Rng& rng) const {
  // Virtual franchise layered on top of the frozen real counts. Fresh
  // atoms use the collapsed base predictive with their accumulated counts.
  struct VirtualAtom {
    std::map<int, int> words;
    int total = 0;
  };
  struct VirtualDish {
    int atom = 0;   // >= 0 real, < 0 -> fresh index ~(atom)
    int tables = 0;
    bool real = false;
  };
  struct VirtualTable {
    int dish = 0;  // index into vdishes
    int customers = 0;
  };

  std::vector<double> replicate_logs(num_reseatings);
  for (int r = 0; r < num_reseatings; ++r) {
    std::vector<VirtualAtom> fresh;
    std::vector<std::int64_t> o_fresh;              // dish counts per fresh atom
    std::vector<std::int64_t> o_real(atoms_.size()); // virtual extra per real atom
    for (std::size_t k = 0; k < atoms_.size(); ++k) o_real[k] = atoms_[k].dishes;
    std::vector<VirtualDish> vdishes;
    for (std::size_t s = 0; s < dishes_[state].size(); ++s) {
      if (dishes_[state][s].tables == 0) continue;
      vdishes.push_back({dishes_[state][s].atom, dishes_[state][s].tables, true});
    }
    std::int64_t J = dish_total_[state];
    std::int64_t O = atom_total_;
    double logw = 0.0;

    auto atom_tok_lik = [&](int atom_code, int w) {
      if (atom_code >= 0) return bank_.theta[atom_code][w];
      const VirtualAtom& va = fresh[~atom_code];
      auto it = va.words.find(w);
      int cnt = it == va.words.end() ? 0 : it->second;
      return (bank_.eta0 + cnt) / (V_ * bank_.eta0 + va.total);
    };

    for (int doc : doc_ids) {
      std::vector<VirtualTable> vtables;
      int seated = 0;
      for (int w : docs_[doc]) {
        double denom_tbl = seated + gamma_.gamma2;
        // One flat option list: existing tables, then (new table x dish
        // choice), with dish choice split into existing dishes, (new dish
        // x atom choice) over real atoms, fresh virtual atoms, and a brand
        // new draw from the base measure. Option masses are true
        // probabilities times likelihoods, so their sum is the incremental
        // importance weight.
        std::vector<double> mass;
        std::vector<std::array<int, 3>> opt;  // {table, dish, atom_code}
        for (std::size_t t = 0; t < vtables.size(); ++t) {
          mass.push_back(vtables[t].customers / denom_tbl *
                         atom_tok_lik(vdishes[vtables[t].dish].atom, w));
          opt.push_back({static_cast<int>(t), -1, 0});
        }
        double p_new_table = gamma_.gamma2 / denom_tbl;
        double denom_dish = J + gamma_.gamma1;
        for (std::size_t s = 0; s < vdishes.size(); ++s) {
          mass.push_back(p_new_table * vdishes[s].tables / denom_dish *
                         atom_tok_lik(vdishes[s].atom, w));
          opt.push_back({-1, static_cast<int>(s), 0});
        }
        double p_new_dish = p_new_table * gamma_.gamma1 / denom_dish;
        double denom_atom = O + gamma_.gamma0;
        for (std::size_t k = 0; k < atoms_.size(); ++k) {
          if (o_real[k] == 0) continue;
          mass.push_back(p_new_dish * o_real[k] / denom_atom *
                         bank_.theta[k][w]);
          opt.push_back({-1, -1, static_cast<int>(k)});
        }
        for (std::size_t f = 0; f < fresh.size(); ++f) {
          mass.push_back(p_new_dish * o_fresh[f] / denom_atom *
                         atom_tok_lik(~static_cast<int>(f), w));
          opt.push_back({-1, -1, ~static_cast<int>(f)});
        }
        mass.push_back(p_new_dish * gamma_.gamma0 / denom_atom / V_);
        opt.push_back({-1, -1, std::numeric_limits<int>::min()});

        double total = 0.0;
        for (double m : mass) total += m;
        logw += std::log(total);
        auto pick = opt[rng.categorical(mass)];

        int dish_idx;
        if (pick[0] >= 0) {
          ++vtables[pick[0]].customers;
          dish_idx = vtables[pick[0]].dish;
        } else {
          if (pick[1] >= 0) {
            dish_idx = pick[1];
          } else {
            int atom_code = pick[2];
            if (atom_code == std::numeric_limits<int>::min()) {
              fresh.push_back({});
              o_fresh.push_back(0);
              atom_code = ~static_cast<int>(fresh.size() - 1);
            }
            if (atom_code >= 0)
              ++o_real[atom_code];
            else
              ++o_fresh[~atom_code];
            ++O;
            vdishes.push_back({atom_code, 0, false});
            dish_idx = static_cast<int>(vdishes.size()) - 1;
          }
          ++vdishes[dish_idx].tables;
          ++J;
          vtables.push_back({dish_idx, 1});
        }
        int atom_code = vdishes[dish_idx].atom;
        if (atom_code < 0) {
          ++fresh[~atom_code].words[w];
          ++fresh[~atom_code].total;
        }
        ++seated;
      }
    }
    replicate_logs[r] = logw;
  }
  return log_sum_exp(replicate_logs) - std::log(num_reseatings);
}

double CrfState::seating_log_prob(const std::vector<int>& doc_states) const {
  double lp = 0.0;
  // document level: table partitions + token likelihood under theta
  for (int doc = 0; doc < num_documents(); ++doc) {
    int seated = 0;
    for (const auto& table : tables_[doc]) {
      if (table.customers == 0) continue;
      lp += std::log(gamma_.gamma2) + std::lgamma(table.customers);
      seated += table.customers;
      int atom = dishes_[doc_states[doc]][table.dish].atom;
      lp += block_log_lik_theta(atom, table.words);
    }
    lp += std::lgamma(gamma_.gamma2) - std::lgamma(gamma_.gamma2 + seated);
  }
  // state level: dish partitions
  for (int c = 0; c < C_; ++c) {
    for (const auto& dish : dishes_[c]) {
      if (dish.tables == 0) continue;
      lp += std::log(gamma_.gamma1) + std::lgamma(dish.tables);
    }
    lp += std::lgamma(gamma_.gamma1) -
          std::lgamma(gamma_.gamma1 + dish_total_[c]);
  }
  // global level: atom partition
  for (const auto& atom : atoms_) {
    if (atom.dishes == 0) continue;
    lp += std::log(gamma_.gamma0) + std::lgamma(static_cast<double>(atom.dishes));
  }
  lp += std::lgamma(gamma_.gamma0) -
        std::lgamma(gamma_.gamma0 + static_cast<double>(atom_total_));
  return lp;
}

std::vector<double> CrfState::state_token_predictive(int state) const {
  std::vector<double> out(V_, 0.0);
  double denom_dish = dish_total_[state] + gamma_.gamma1;
  double p_new_dish = gamma_.gamma1 / denom_dish;
  for (const auto& dish : dishes_[state]) {
    if (dish.tables == 0) continue;
    const auto& row = bank_.theta[dish.atom];
    double wgt = dish.tables / denom_dish;
    for (int w = 0; w < V_; ++w) out[w] += wgt * row[w];
  }
  double denom_atom = atom_total_ + gamma_.gamma0;
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (atoms_[k].dishes == 0) continue;
    double wgt = p_new_dish * atoms_[k].dishes / denom_atom;
    for (int w = 0; w < V_; ++w) out[w] += wgt * bank_.theta[k][w];
  }
  double base = p_new_dish * gamma_.gamma0 / denom_atom / V_;
  for (int w = 0; w < V_; ++w) out[w] += base;
  return out;
}

double CrfState::collapsed_atom_predictive(int atom, int word) const {
  const Atom& a = atoms_[atom];
  std::int64_t total = 0;
  for (const auto& [w, c] : a.words) total += c;
  auto it = a.words.find(word);
  std::int64_t cnt = it == a.words.end() ? 0 : it->second;
  return (bank_.eta0 + cnt) / (V_ * bank_.eta0 + total);
}

void CrfState::compact(const std::vector<int>& doc_states) {
  std::vector<int> atom_map(atoms_.size(), -1);
  std::vector<Atom> new_atoms;
  std::vector<std::vector<double>> new_theta;
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (atoms_[k].dishes == 0) continue;
    atom_map[k] = static_cast<int>(new_atoms.size());
    new_atoms.push_back(std::move(atoms_[k]));
    new_theta.push_back(std::move(bank_.theta[k]));
  }
  atoms_ = std::move(new_atoms);
  bank_.theta = std::move(new_theta);

  std::vector<std::vector<int>> dish_maps(C_);
  for (int c = 0; c < C_; ++c) {
    dish_maps[c].assign(dishes_[c].size(), -1);
    std::vector<Dish> new_dishes;
    for (std::size_t s = 0; s < dishes_[c].size(); ++s) {
      if (dishes_[c][s].tables == 0) continue;
      dish_maps[c][s] = static_cast<int>(new_dishes.size());
      Dish d = std::move(dishes_[c][s]);
      d.atom = atom_map[d.atom];
      new_dishes.push_back(std::move(d));
    }
    dishes_[c] = std::move(new_dishes);
  }

  for (int doc = 0; doc < num_documents(); ++doc) {
    std::vector<int> table_map(tables_[doc].size(), -1);
    std::vector<Table> new_tables;
    for (std::size_t t = 0; t < tables_[doc].size(); ++t) {
      if (tables_[doc][t].customers == 0) continue;
      table_map[t] = static_cast<int>(new_tables.size());
      Table table = std::move(tables_[doc][t]);
      table.dish = dish_maps[doc_states[doc]][table.dish];
      new_tables.push_back(std::move(table));
    }
    tables_[doc] = std::move(new_tables);
    for (auto& zi : z_[doc])
      if (zi != -1) zi = table_map[zi];
  }
}

void CrfState::audit(const std::vector<int>& doc_states) const {
  std::vector<std::vector<std::map<int, int>>> dish_words(C_);
  std::vector<std::vector<int>> dish_tables(C_);
  for (int c = 0; c < C_; ++c) {
    dish_words[c].resize(dishes_[c].size());
    dish_tables[c].assign(dishes_[c].size(), 0);
  }
  std::vector<std::map<int, std::int64_t>> atom_words(atoms_.size());
  std::vector<std::int64_t> atom_dishes(atoms_.size(), 0);

  for (int doc = 0; doc < num_documents(); ++doc) {
    int state = doc_states[doc];
    std::vector<int> customers(tables_[doc].size(), 0);
    std::vector<std::map<int, int>> words(tables_[doc].size());
    int seated = 0;
    for (std::size_t n = 0; n < docs_[doc].size(); ++n) {
      int t = z_[doc][n];
      if (t == -1) throw std::runtime_error("audit: unseated token");
      ++customers[t];
      ++words[t][docs_[doc][n]];
      ++seated;
    }
    if (seated != static_cast<int>(docs_[doc].size()))
      throw std::runtime_error("audit: seated-count mismatch");
    for (std::size_t t = 0; t < tables_[doc].size(); ++t) {
      const Table& table = tables_[doc][t];
      if (table.customers != customers[t])
        throw std::runtime_error("audit: table customer mismatch");
      if (table.customers == 0) continue;
      if (table.words != words[t])
        throw std::runtime_error("audit: table word-count mismatch");
      if (table.dish < 0 || table.dish >= static_cast<int>(dishes_[state].size()) ||
          dishes_[state][table.dish].tables == 0)
        throw std::runtime_error("audit: dangling table->dish link");
      ++dish_tables[state][table.dish];
      add_block(dish_words[state][table.dish], table.words);
    }
  }

  std::vector<std::int64_t> dish_sum(C_, 0);
  for (int c = 0; c < C_; ++c) {
    for (std::size_t s = 0; s < dishes_[c].size(); ++s) {
      const Dish& dish = dishes_[c][s];
      if (dish.tables != dish_tables[c][s])
        throw std::runtime_error("audit: dish table-count mismatch");
      if (dish.tables == 0) continue;
      if (dish.words != dish_words[c][s])
        throw std::runtime_error("audit: dish word-count mismatch");
      if (dish.atom < 0 || dish.atom >= static_cast<int>(atoms_.size()) ||
          atoms_[dish.atom].dishes == 0)
        throw std::runtime_error("audit: dangling dish->atom link");
      ++atom_dishes[dish.atom];
      add_block64(atom_words[dish.atom], dish.words);
      dish_sum[c] += dish.tables;
    }
    if (dish_sum[c] != dish_total_[c])
      throw std::runtime_error("audit: dish_total mismatch");
  }

  std::int64_t atom_sum = 0;
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (atoms_[k].dishes != atom_dishes[k])
      throw std::runtime_error("audit: atom dish-count mismatch");
    if (atoms_[k].dishes == 0) continue;
    if (atoms_[k].words != atom_words[k])
      throw std::runtime_error("audit: atom word-count mismatch");
    atom_sum += atoms_[k].dishes;
  }
  if (atom_sum != atom_total_)
    throw std::runtime_error("audit: atom_total mismatch");
}

namespace {

nlohmann::json words_to_json(const std::map<int, int>& words) {
  auto arr = nlohmann::json::array();
  for (const auto& [w, c] : words) arr.push_back({w, c});
  return arr;
}

nlohmann::json words64_to_json(const std::map<int, std::int64_t>& words) {
  auto arr = nlohmann::json::array();
  for (const auto& [w, c] : words) arr.push_back({w, c});
  return arr;
}

std::map<int, int> words_from_json(const nlohmann::json& arr) {
  std::map<int, int> out;
  for (const auto& pair : arr) out[pair.at(0).get<int>()] = pair.at(1).get<int>();
  return out;
}

std::map<int, std::int64_t> words64_from_json(const nlohmann::json& arr) {
  std::map<int, std::int64_t> out;
  for (const auto& pair : arr)
    out[pair.at(0).get<int>()] = pair.at(1).get<std::int64_t>();
  return out;
}

}  // namespace

nlohmann::json CrfState::to_json() const {
  nlohmann::json j;
  j["vocab_size"] = V_;
  j["num_states"] = C_;
  j["gamma0"] = gamma_.gamma0;
  j["gamma1"] = gamma_.gamma1;
  j["gamma2"] = gamma_.gamma2;
  j["eta0"] = bank_.eta0;
  j["docs"] = docs_;
  j["z"] = z_;
  auto tables = nlohmann::json::array();
  for (const auto& doc_tables : tables_) {
    auto per_doc = nlohmann::json::array();
    for (const auto& t : doc_tables)
      per_doc.push_back({{"dish", t.dish},
                         {"customers", t.customers},
                         {"words", words_to_json(t.words)}});
    tables.push_back(std::move(per_doc));
  }
  j["tables"] = std::move(tables);
  auto dishes = nlohmann::json::array();
  for (const auto& state_dishes : dishes_) {
    auto per_state = nlohmann::json::array();
    for (const auto& d : state_dishes)
      per_state.push_back({{"atom", d.atom},
                           {"tables", d.tables},
                           {"words", words_to_json(d.words)}});
    dishes.push_back(std::move(per_state));
  }
  j["dishes"] = std::move(dishes);
  auto atoms = nlohmann::json::array();
  for (const auto& a : atoms_)
    atoms.push_back({{"dishes", a.dishes}, {"words", words64_to_json(a.words)}});
  j["atoms"] = std::move(atoms);
  j["theta"] = bank_.theta;
  return j;
}

CrfState CrfState::from_json(const nlohmann::json& j) {
  CrfState s(j.at("vocab_size").get<int>(), j.at("num_states").get<int>(),
             DpConcentrations{j.at("gamma0").get<double>(),
                              j.at("gamma1").get<double>(),
                              j.at("gamma2").get<double>()},
             j.at("eta0").get<double>());
  s.docs_ = j.at("docs").get<std::vector<std::vector<int>>>();
  s.z_ = j.at("z").get<std::vector<std::vector<int>>>();
  for (const auto& per_doc : j.at("tables")) {
    std::vector<Table> tables;
    for (const auto& t : per_doc)
      tables.push_back({t.at("dish").get<int>(), t.at("customers").get<int>(),
                        words_from_json(t.at("words"))});
    s.tables_.push_back(std::move(tables));
  }
  s.dishes_.clear();
  for (const auto& per_state : j.at("dishes")) {
    std::vector<Dish> dishes;
    for (const auto& d : per_state)
      dishes.push_back({d.at("atom").get<int>(), d.at("tables").get<int>(),
                        words_from_json(d.at("words"))});
    s.dishes_.push_back(std::move(dishes));
  }
  for (const auto& a : j.at("atoms"))
    s.atoms_.push_back(
        {a.at("dishes").get<std::int64_t>(), words64_from_json(a.at("words"))});
  s.bank_.theta = j.at("theta").get<std::vector<std::vector<double>>>();

  s.dish_total_.assign(s.C_, 0);
  for (int c = 0; c < s.C_; ++c)
    for (const auto& d : s.dishes_[c]) s.dish_total_[c] += d.tables;
  s.atom_total_ = 0;
  for (const auto& a : s.atoms_) s.atom_total_ += a.dishes;
  return s;
}

}  // namespace mtlvm::crf

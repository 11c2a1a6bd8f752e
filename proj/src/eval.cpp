#include "mtlvm/eval.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mtlvm::eval {

TopicLabels read_labels_csv(std::istream& in, int top_k) {
  TopicLabels labels;
  labels.top_k = top_k;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("rater,", 0) == 0) continue;  // header
    std::istringstream ls(line);
    std::string rater, topic, valid, relevant;
    if (!std::getline(ls, rater, ',') || !std::getline(ls, topic, ',') ||
        !std::getline(ls, valid, ','))
      throw std::runtime_error("labels: malformed row at line " +
                               std::to_string(lineno));
    std::getline(ls, relevant, ',');
    TopicLabels::Entry e;
    e.rater = rater;
    try {
      e.topic_id = std::stoi(topic);
    } catch (const std::exception&) {
      throw std::runtime_error("labels: bad topic id at line " +
                               std::to_string(lineno));
    }
    if (valid == "1" || valid == "true")
      e.valid = true;
    else if (valid == "0" || valid == "false")
      e.valid = false;
    else
      throw std::runtime_error("labels: bad valid flag at line " +
                               std::to_string(lineno));
    if (e.valid) {
      if (relevant.empty())
        throw std::runtime_error("labels: valid topic without relevant count "
                                 "at line " + std::to_string(lineno));
      e.relevant = std::stoi(relevant);
      if (e.relevant < 0 || e.relevant > top_k)
        throw std::runtime_error("labels: relevant count out of [0," +
                                 std::to_string(top_k) + "] at line " +
                                 std::to_string(lineno));
    } else if (!relevant.empty()) {
      throw std::runtime_error("labels: relevant count on invalid topic at "
                               "line " + std::to_string(lineno));
    }
    labels.entries.push_back(std::move(e));
  }
  return labels;
}

double VmCm::vm() const {
  return total_topics == 0
             ? 0.0
             : static_cast<double>(valid_topics) / total_topics;
}

double VmCm::cm() const {
  if (!cm_defined()) throw std::logic_error("CM undefined: no valid topics");
  return static_cast<double>(relevant_words) / valid_topics;
}

double VmCm::cm_word_fraction(int top_k) const {
  if (!cm_defined()) throw std::logic_error("CM undefined: no valid topics");
  return static_cast<double>(relevant_words) /
         (static_cast<double>(valid_topics) * top_k);
}

VmCmReport compute_vm_cm(const TopicLabels& labels) {
  if (labels.entries.empty())
    throw std::invalid_argument("compute_vm_cm: no labeled topics");
  VmCmReport report;
  report.top_k = labels.top_k;
  std::map<std::string, std::size_t> index;
  for (const auto& e : labels.entries) {
    auto it = index.find(e.rater);
    if (it == index.end()) {
      index[e.rater] = report.per_rater.size();
      report.per_rater.emplace_back(e.rater, VmCm{});
    }
    VmCm& t = report.per_rater[index[e.rater]].second;
    ++t.total_topics;
    if (e.valid) {
      ++t.valid_topics;
      t.relevant_words += e.relevant;
    }
  }
  // per-rater ratios are exact up to the final divisions
  double cm_sum = 0.0, cmw_sum = 0.0;
  int cm_raters = 0;
  for (const auto& [rater, t] : report.per_rater) {
    report.vm_avg += t.vm();
    if (t.cm_defined()) {
      cm_sum += t.cm();
      cmw_sum += t.cm_word_fraction(labels.top_k);
      ++cm_raters;
    }
  }
  report.vm_avg /= static_cast<double>(report.per_rater.size());
  report.cm_defined = cm_raters > 0;
  if (report.cm_defined) {
    report.cm_avg = cm_sum / cm_raters;
    report.cm_word_fraction_avg = cmw_sum / cm_raters;
  }
  return report;
}

void write_score_table(const std::vector<ScoreRow>& rows, std::ostream& out) {
  out << "model,K,VM,CM\n";
  for (const auto& row : rows) {
    out << row.model << "," << row.num_topics << "," << row.scores.vm_avg
        << ",";
    if (row.scores.cm_defined) out << row.scores.cm_avg;
    out << "\n";
  }
}

TopicExport export_topics(const std::vector<std::vector<double>>& topic_rows,
                          int k) {
  TopicExport exp;
  for (const auto& row : topic_rows) {
    int kk = std::min<int>(k, static_cast<int>(row.size()));
    std::vector<int> idx(row.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return row[a] > row[b]; });
    std::vector<std::pair<int, double>> top;
    for (int i = 0; i < kk; ++i) top.emplace_back(idx[i], row[idx[i]]);
    exp.topics.push_back(std::move(top));
  }
  return exp;
}

TopicExport export_topics(const sampler::Model& model, int k) {
  const auto& seating = model.seating();
  std::vector<std::vector<double>> rows;
  std::vector<int> atom_to_topic(seating.atoms().size(), -1);
  for (std::size_t a = 0; a < seating.atoms().size(); ++a) {
    if (seating.atoms()[a].dishes == 0) continue;  // tombstone
    atom_to_topic[a] = static_cast<int>(rows.size());
    rows.push_back(seating.topics().theta[a]);
  }
  TopicExport exp = export_topics(rows, k);

  for (int c = 0; c < seating.num_states(); ++c) {
    std::map<int, std::int64_t> shares;  // topic -> dish-count mass
    std::int64_t total = 0;
    for (const auto& dish : seating.dishes(c)) {
      if (dish.atom < 0) continue;
      shares[atom_to_topic[dish.atom]] += dish.tables;
      total += dish.tables;
    }
    std::vector<std::pair<int, double>> ranked;
    for (const auto& [topic, mass] : shares)
      ranked.emplace_back(topic, static_cast<double>(mass) / total);
    std::stable_sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) {
      return a.second > b.second;
    });
    exp.state_topics.push_back(std::move(ranked));
  }
  return exp;
}

void write_topics_csv(const TopicExport& exp,
                      const std::vector<std::string>& vocabulary,
                      std::ostream& out) {
  out << "topic,rank,token,probability\n";
  for (std::size_t t = 0; t < exp.topics.size(); ++t)
    for (std::size_t r = 0; r < exp.topics[t].size(); ++r)
      out << t << "," << r + 1 << "," << vocabulary[exp.topics[t][r].first]
          << "," << exp.topics[t][r].second << "\n";
}

void write_state_topics_csv(const TopicExport& exp, std::ostream& out) {
  out << "state,rank,topic,probability\n";
  for (std::size_t c = 0; c < exp.state_topics.size(); ++c)
    for (std::size_t r = 0; r < exp.state_topics[c].size(); ++r)
      out << c << "," << r + 1 << "," << exp.state_topics[c][r].first << ","
          << exp.state_topics[c][r].second << "\n";
}

void write_topics_keyed(const TopicExport& exp,
                        const std::vector<std::string>& vocabulary,
                        std::ostream& out) {
  for (std::size_t t = 0; t < exp.topics.size(); ++t) {
    out << "topic " << t << "\n";
    for (const auto& [w, p] : exp.topics[t])
      out << "  " << vocabulary[w] << " " << p << "\n";
  }
}

StateTrends export_state_trends(const sampler::Model& model) {
  StateTrends trends;
  int C = model.hyperparams().num_states;
  std::map<int, std::vector<std::int64_t>> counts;
  for (int u = 0; u < model.num_units(); ++u) {
    int epoch = model.unit_epoch(u);
    int state = model.unit_state(u);
    auto& row = counts[epoch];
    if (row.empty()) row.assign(C, 0);
    ++row[state];
    auto [chain, pos] = model.unit_position(u);
    trends.trajectories.push_back(
        {model.states().chains()[chain].entity_id, epoch, state});
  }
  for (const auto& [epoch, row] : counts) {
    double total = static_cast<double>(
        std::accumulate(row.begin(), row.end(), std::int64_t{0}));
    std::vector<double> frac(C);
    for (int c = 0; c < C; ++c) frac[c] = row[c] / total;
    trends.occupancy[epoch] = std::move(frac);
  }
  return trends;
}

void write_occupancy_csv(const StateTrends& trends, int num_states,
                         std::ostream& out) {
  out << "epoch";
  for (int c = 0; c < num_states; ++c) out << ",occupancy_" << c;
  out << "\n";
  for (const auto& [epoch, frac] : trends.occupancy) {
    out << epoch;
    for (double f : frac) out << "," << f;
    out << "\n";
  }
}

void write_trajectories_csv(const StateTrends& trends, std::ostream& out) {
  out << "entity,epoch,state\n";
  for (const auto& t : trends.trajectories)
    out << t.entity_id << "," << t.epoch << "," << t.state << "\n";
}

}  // namespace mtlvm::eval

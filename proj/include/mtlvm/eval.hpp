#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mtlvm/sampler.hpp"

namespace mtlvm::eval {

// Expert judgments: one row per (rater, topic). Relevant counts exist only
// for valid topics and lie in [0, top_k].
struct TopicLabels {
  struct Entry {
    std::string rater;
    int topic_id = 0;
    bool valid = false;
    int relevant = 0;
  };
  std::vector<Entry> entries;
  int top_k = 10;
};

// CSV `rater,topic_id,valid,relevant_count`; malformed rows throw with the
// line number.
TopicLabels read_labels_csv(std::istream& in, int top_k = 10);

struct VmCm {
  // exact integer tallies, kept so averaging happens on exact rationals
  std::int64_t total_topics = 0;
  std::int64_t valid_topics = 0;
  std::int64_t relevant_words = 0;

  double vm() const;
  bool cm_defined() const { return valid_topics > 0; }
  // primary: average relevant words per valid topic
  double cm() const;
  // literal per-word reading: relevant / (valid * top_k), bounded by 1
  double cm_word_fraction(int top_k) const;
};

struct VmCmReport {
  std::vector<std::pair<std::string, VmCm>> per_rater;  // rater order of file
  double vm_avg = 0.0;
  bool cm_defined = false;
  double cm_avg = 0.0;              // over raters with at least one valid topic
  double cm_word_fraction_avg = 0.0;
  int top_k = 10;
};

VmCmReport compute_vm_cm(const TopicLabels& labels);

// One table row per model: `model,K,VM,CM` (CM blank when undefined).
struct ScoreRow {
  std::string model;
  int num_topics = 0;
  VmCmReport scores;
};
void write_score_table(const std::vector<ScoreRow>& rows, std::ostream& out);

struct TopicExport {
  // per topic: top-k (token, probability), probabilities descending
  std::vector<std::vector<std::pair<int, double>>> topics;
  // per state: ranked (topic, generative probability), descending
  std::vector<std::vector<std::pair<int, double>>> state_topics;
};

// Topics straight from probability rows (LDA path); k clipped to V.
TopicExport export_topics(const std::vector<std::vector<double>>& topic_rows,
                          int k);
// Live atoms of a trained model plus per-state topic probabilities as
// dish-count shares aggregated by atom.
TopicExport export_topics(const sampler::Model& model, int k);

void write_topics_csv(const TopicExport& exp,
                      const std::vector<std::string>& vocabulary,
                      std::ostream& out);           // topic,rank,token,probability
void write_state_topics_csv(const TopicExport& exp, std::ostream& out);
// keyed document for downstream word-cloud tooling
void write_topics_keyed(const TopicExport& exp,
                        const std::vector<std::string>& vocabulary,
                        std::ostream& out);

struct StateTrends {
  // epoch -> per-state fraction of assigned units (sums to 1 per epoch)
  std::map<int, std::vector<double>> occupancy;
  struct Trajectory {
    std::string entity_id;
    int epoch = 0;
    int state = 0;
  };
  std::vector<Trajectory> trajectories;
};

StateTrends export_state_trends(const sampler::Model& model);

void write_occupancy_csv(const StateTrends& trends, int num_states,
                         std::ostream& out);  // epoch,occupancy_0..
void write_trajectories_csv(const StateTrends& trends, std::ostream& out);

}  // namespace mtlvm::eval

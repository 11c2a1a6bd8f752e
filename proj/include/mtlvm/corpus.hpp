#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mtlvm::corpus {

// One job posting: a bag of vocabulary indices for (entity, epoch).
struct Document {
  std::string entity_id;
  int epoch = 0;
  std::vector<int> tokens;
};

// All documents of one entity in one epoch.
struct DataUnit {
  std::string entity_id;
  int epoch = 0;
  std::vector<Document> documents;
};

// Maximal run of one entity's units at consecutive epochs.
struct DataChain {
  std::string entity_id;
  std::vector<DataUnit> units;

  int start_epoch() const { return units.empty() ? 0 : units.front().epoch; }
};

struct Corpus {
  std::vector<std::string> vocabulary;
  std::vector<DataChain> chains;
  int epoch_count = 0;

  int vocab_size() const { return static_cast<int>(vocabulary.size()); }
  void validate() const;  // throws on any structural invariant violation
};

struct CorpusStats {
  std::int64_t n_documents = 0;
  std::int64_t n_entities = 0;
  std::int64_t n_units = 0;
  std::int64_t n_chains = 0;

  // bucket -> count histograms backing the dataset-shape figures
  std::map<int, std::int64_t> units_per_epoch;
  std::map<std::int64_t, std::int64_t> docs_per_entity;
  std::map<std::int64_t, std::int64_t> docs_per_unit;
  std::map<std::int64_t, std::int64_t> chain_lengths;
};

struct IngestOptions {
  // Month width used when records carry a date instead of an epoch index.
  int months_per_epoch = 1;
  // Optional stop-list; tokens in it are dropped before vocabulary building.
  std::vector<std::string> stop_words;
};

struct IngestReport {
  std::int64_t records = 0;
  std::int64_t skipped_empty = 0;  // records with no tokens after stop-listing
};

// Reads line-delimited JSON records:
//   {"entity": str, "epoch": int | "date": "YYYY-MM-DD", "tokens": [str,...]}
// Malformed records abort with the offending line number; empty token lists
// are skipped and counted. Deterministic: vocabulary order follows first
// appearance in the stream.
Corpus ingest(std::istream& in, const IngestOptions& opts = {},
              IngestReport* report = nullptr);

// Drops every entity whose total document count is <= threshold (strictly
// "more than threshold" survives). Vocabulary is compacted to surviving
// tokens unless compact_vocabulary is false.
Corpus filter_min_postings(const Corpus& corpus, std::int64_t threshold,
                           bool compact_vocabulary = true);

CorpusStats stats(const Corpus& corpus);

void write_stats_csv(const CorpusStats& s, std::ostream& out);
void write_histograms_csv(const CorpusStats& s, std::ostream& out);

// JSONL round trip used by the CLI and the synthetic generator.
void write_jsonl(const Corpus& corpus, std::ostream& out);

}  // namespace mtlvm::corpus

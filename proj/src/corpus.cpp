#include "mtlvm/corpus.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace mtlvm::corpus {

namespace {

// Months since January 2014 (arbitrary fixed origin), divided by bin width.
int date_to_epoch(const std::string& date, int months_per_epoch) {
  if (date.size() != 10 || date[4] != '-' || date[7] != '-')
    throw std::runtime_error("bad date: " + date);
  int year = std::stoi(date.substr(0, 4));
  int month = std::stoi(date.substr(5, 2));
  if (month < 1 || month > 12) throw std::runtime_error("bad date: " + date);
  int months = (year - 2014) * 12 + (month - 1);
  if (months < 0) throw std::runtime_error("date before epoch origin: " + date);
  return months / months_per_epoch;
}

}  // namespace

void Corpus::validate() const {
  std::set<std::string> seen_vocab(vocabulary.begin(), vocabulary.end());
  if (seen_vocab.size() != vocabulary.size())
    throw std::runtime_error("corpus: duplicate vocabulary entries");
  for (const auto& chain : chains) {
    if (chain.units.empty()) throw std::runtime_error("corpus: empty chain");
    for (std::size_t i = 0; i < chain.units.size(); ++i) {
      const auto& u = chain.units[i];
      if (u.entity_id != chain.entity_id)
        throw std::runtime_error("corpus: unit entity mismatch");
      if (i > 0 && u.epoch != chain.units[i - 1].epoch + 1)
        throw std::runtime_error("corpus: non-consecutive epochs in chain");
      if (u.epoch < 0 || u.epoch >= epoch_count)
        throw std::runtime_error("corpus: epoch out of range");
      if (u.documents.empty()) throw std::runtime_error("corpus: empty unit");
      for (const auto& d : u.documents) {
        if (d.entity_id != u.entity_id || d.epoch != u.epoch)
          throw std::runtime_error("corpus: document grouping mismatch");
        if (d.tokens.empty()) throw std::runtime_error("corpus: empty document");
        for (int w : d.tokens)
          if (w < 0 || w >= vocab_size())
            throw std::runtime_error("corpus: token index out of range");
      }
    }
  }
}

Corpus ingest(std::istream& in, const IngestOptions& opts, IngestReport* report) {
  std::unordered_set<std::string> stop(opts.stop_words.begin(),
                                       opts.stop_words.end());
  std::unordered_map<std::string, int> vocab_index;
  Corpus corpus;

  // entity -> epoch -> documents, in first-appearance entity order
  std::vector<std::string> entity_order;
  std::unordered_map<std::string, std::map<int, std::vector<Document>>> grouped;

  std::string line;
  std::int64_t line_no = 0;
  IngestReport rep;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ++rep.records;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("ingest: malformed record at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("entity") || !rec.contains("tokens"))
      throw std::runtime_error("ingest: missing fields at line " +
                               std::to_string(line_no));
    Document doc;
    doc.entity_id = rec.at("entity").get<std::string>();
    if (rec.contains("epoch"))
      doc.epoch = rec.at("epoch").get<int>();
    else if (rec.contains("date"))
      doc.epoch = date_to_epoch(rec.at("date").get<std::string>(),
                                opts.months_per_epoch);
    else
      throw std::runtime_error("ingest: record needs epoch or date at line " +
                               std::to_string(line_no));
    if (doc.epoch < 0)
      throw std::runtime_error("ingest: negative epoch at line " +
                               std::to_string(line_no));
    for (const auto& t : rec.at("tokens")) {
      std::string tok = t.get<std::string>();
      if (stop.count(tok)) continue;
      auto [it, fresh] = vocab_index.emplace(tok, corpus.vocab_size());
      if (fresh) corpus.vocabulary.push_back(tok);
      doc.tokens.push_back(it->second);
    }
    if (doc.tokens.empty()) {
      ++rep.skipped_empty;
      continue;
    }
    if (!grouped.count(doc.entity_id)) entity_order.push_back(doc.entity_id);
    grouped[doc.entity_id][doc.epoch].push_back(std::move(doc));
  }

  for (const auto& entity : entity_order) {
    const auto& by_epoch = grouped.at(entity);
    DataChain chain;
    chain.entity_id = entity;
    int prev_epoch = -2;
    for (const auto& [epoch, docs] : by_epoch) {
      if (epoch != prev_epoch + 1 && !chain.units.empty()) {
        corpus.chains.push_back(std::move(chain));
        chain = DataChain{entity, {}};
      }
      DataUnit unit;
      unit.entity_id = entity;
      unit.epoch = epoch;
      unit.documents = docs;
      chain.units.push_back(std::move(unit));
      prev_epoch = epoch;
      corpus.epoch_count = std::max(corpus.epoch_count, epoch + 1);
    }
    if (!chain.units.empty()) corpus.chains.push_back(std::move(chain));
  }

  if (report) *report = rep;
  corpus.validate();
  return corpus;
}

Corpus filter_min_postings(const Corpus& corpus, std::int64_t threshold,
                           bool compact_vocabulary) {
  std::unordered_map<std::string, std::int64_t> doc_counts;
  for (const auto& chain : corpus.chains)
    for (const auto& unit : chain.units)
      doc_counts[chain.entity_id] +=
          static_cast<std::int64_t>(unit.documents.size());

  Corpus out;
  out.epoch_count = 0;
  for (const auto& chain : corpus.chains) {
    if (doc_counts.at(chain.entity_id) <= threshold) continue;
    out.chains.push_back(chain);
    for (const auto& unit : chain.units)
      out.epoch_count = std::max(out.epoch_count, unit.epoch + 1);
  }

  if (!compact_vocabulary) {
    out.vocabulary = corpus.vocabulary;
    return out;
  }

  std::vector<int> remap(corpus.vocabulary.size(), -1);
  for (const auto& chain : out.chains)
    for (const auto& unit : chain.units)
      for (const auto& doc : unit.documents)
        for (int w : doc.tokens) remap[w] = 0;
  for (std::size_t w = 0; w < remap.size(); ++w) {
    if (remap[w] == 0) {
      remap[w] = out.vocab_size();
      out.vocabulary.push_back(corpus.vocabulary[w]);
    }
  }
  for (auto& chain : out.chains)
    for (auto& unit : chain.units)
      for (auto& doc : unit.documents)
        for (int& w : doc.tokens) w = remap[w];
  return out;
}

CorpusStats stats(const Corpus& corpus) {
  CorpusStats s;
  std::map<std::string, std::int64_t> per_entity;
  for (const auto& chain : corpus.chains) {
    ++s.n_chains;
    s.chain_lengths[static_cast<std::int64_t>(chain.units.size())]++;
    for (const auto& unit : chain.units) {
      ++s.n_units;
      s.units_per_epoch[unit.epoch]++;
      s.docs_per_unit[static_cast<std::int64_t>(unit.documents.size())]++;
      s.n_documents += static_cast<std::int64_t>(unit.documents.size());
      per_entity[chain.entity_id] +=
          static_cast<std::int64_t>(unit.documents.size());
    }
  }
  s.n_entities = static_cast<std::int64_t>(per_entity.size());
  for (const auto& [entity, count] : per_entity) s.docs_per_entity[count]++;
  return s;
}

void write_stats_csv(const CorpusStats& s, std::ostream& out) {
  out << "metric,value\n";
  out << "n_documents," << s.n_documents << "\n";
  out << "n_entities," << s.n_entities << "\n";
  out << "n_units," << s.n_units << "\n";
  out << "n_chains," << s.n_chains << "\n";
}

void write_histograms_csv(const CorpusStats& s, std::ostream& out) {
  auto dump = [&out](const std::string& name, const auto& hist) {
    out << "histogram," << name << "\n";
    out << "bucket,count\n";
    for (const auto& [bucket, count] : hist)
      out << bucket << "," << count << "\n";
  };
  dump("units_per_epoch", s.units_per_epoch);
  dump("docs_per_entity", s.docs_per_entity);
  dump("docs_per_unit", s.docs_per_unit);
  dump("chain_lengths", s.chain_lengths);
}

void write_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& chain : corpus.chains) {
    for (const auto& unit : chain.units) {
      for (const auto& doc : unit.documents) {
        nlohmann::json rec;
        rec["entity"] = doc.entity_id;
        rec["epoch"] = doc.epoch;
        auto tokens = nlohmann::json::array();
        for (int w : doc.tokens) tokens.push_back(corpus.vocabulary.at(w));
        rec["tokens"] = std::move(tokens);
        out << rec.dump() << "\n";
      }
    }
  }
}

}  // namespace mtlvm::corpus

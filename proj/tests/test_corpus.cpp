#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <sstream>
#include <string>

#include "mtlvm/corpus.hpp"

using namespace mtlvm::corpus;

namespace {

Corpus ingest_str(const std::string& text, const IngestOptions& opts = {},
                  IngestReport* report = nullptr) {
  std::istringstream in(text);
  return ingest(in, opts, report);
}

const char* kSixRecords =
    R"({"entity":"A","epoch":0,"tokens":["x"]}
{"entity":"A","epoch":0,"tokens":["y"]}
{"entity":"A","epoch":1,"tokens":["x","y"]}
{"entity":"B","epoch":0,"tokens":["z"]}
{"entity":"B","epoch":1,"tokens":["z"]}
{"entity":"B","epoch":1,"tokens":["x","z"]}
)";

}  // namespace

TEST_CASE("minimal single record") {
  auto c = ingest_str(R"({"entity":"A","epoch":0,"tokens":["x","y"]})");
  CHECK(c.chains.size() == 1);
  CHECK(c.chains[0].units.size() == 1);
  CHECK(c.vocab_size() == 2);
  CHECK(c.vocabulary[0] == "x");
  CHECK(c.vocabulary[1] == "y");
}

TEST_CASE("epoch gap splits chains") {
  auto c = ingest_str(
      R"({"entity":"A","epoch":0,"tokens":["x"]}
{"entity":"A","epoch":1,"tokens":["x"]}
{"entity":"A","epoch":3,"tokens":["x"]}
)");
  REQUIRE(c.chains.size() == 2);
  CHECK(c.chains[0].units.size() == 2);
  CHECK(c.chains[1].units.size() == 1);
  CHECK(c.chains[1].start_epoch() == 3);
}

TEST_CASE("six-record fixture groups into (6,2,4,2)") {
  auto c = ingest_str(kSixRecords);
  auto s = stats(c);
  CHECK(s.n_documents == 6);
  CHECK(s.n_entities == 2);
  CHECK(s.n_units == 4);
  CHECK(s.n_chains == 2);
}

TEST_CASE("malformed record reports the line number") {
  CHECK_THROWS_WITH_AS(
      ingest_str("{\"entity\":\"A\",\"epoch\":0,\"tokens\":[\"x\"]}\nnot json\n"),
      doctest::Contains("line 2"), std::runtime_error);
  CHECK_THROWS_AS(ingest_str(R"({"entity":"A","tokens":["x"]})"),
                  std::runtime_error);
}

TEST_CASE("empty token lists are skipped and counted") {
  IngestReport report;
  auto c = ingest_str(
      R"({"entity":"A","epoch":0,"tokens":[]}
{"entity":"A","epoch":0,"tokens":["x"]}
)",
      {}, &report);
  CHECK(report.records == 2);
  CHECK(report.skipped_empty == 1);
  CHECK(stats(c).n_documents == 1);
}

TEST_CASE("stop words drop before vocabulary building") {
  IngestOptions opts;
  opts.stop_words = {"the"};
  IngestReport report;
  auto c = ingest_str(
      R"({"entity":"A","epoch":0,"tokens":["the","x"]}
{"entity":"A","epoch":0,"tokens":["the"]}
)",
      opts, &report);
  CHECK(c.vocab_size() == 1);
  CHECK(report.skipped_empty == 1);  // all-stop-word document
}

TEST_CASE("dates bin into monthly epochs from the 2014-01 origin") {
  auto c = ingest_str(
      R"({"entity":"A","date":"2014-01-15","tokens":["x"]}
{"entity":"A","date":"2014-02-01","tokens":["x"]}
{"entity":"A","date":"2015-01-31","tokens":["x"]}
)");
  CHECK(c.chains[0].units[0].epoch == 0);
  CHECK(c.chains[0].units[1].epoch == 1);
  CHECK(c.chains[1].units[0].epoch == 12);

  IngestOptions opts;
  opts.months_per_epoch = 3;  // quarterly bins
  auto q = ingest_str(R"({"entity":"A","date":"2014-04-01","tokens":["x"]})",
                      opts);
  CHECK(q.chains[0].units[0].epoch == 1);
}

TEST_CASE("filter threshold zero keeps everything") {
  auto c = ingest_str(kSixRecords);
  auto f = filter_min_postings(c, 0);
  CHECK(stats(f).n_documents == 6);
  CHECK(stats(f).n_entities == 2);
}

TEST_CASE("filter keeps strictly more than the threshold") {
  // A: 101 documents, B: 100 documents
  std::ostringstream in;
  for (int i = 0; i < 101; ++i)
    in << R"({"entity":"A","epoch":0,"tokens":["a"]})" << "\n";
  for (int i = 0; i < 100; ++i)
    in << R"({"entity":"B","epoch":0,"tokens":["b"]})" << "\n";
  auto c = ingest_str(in.str());
  auto f = filter_min_postings(c, 100);
  auto s = stats(f);
  CHECK(s.n_entities == 1);
  CHECK(s.n_documents == 101);
  CHECK(f.chains[0].entity_id == "A");
  // vocabulary compacts to surviving tokens by default
  CHECK(f.vocab_size() == 1);
  CHECK(f.vocabulary[0] == "a");
  auto kept = filter_min_postings(c, 100, false);
  CHECK(kept.vocab_size() == 2);
}

TEST_CASE("filter is idempotent and never adds documents") {
  auto c = ingest_str(kSixRecords);
  for (std::int64_t t : {0, 1, 2, 3, 10}) {
    auto once = filter_min_postings(c, t);
    auto twice = filter_min_postings(once, t);
    CHECK(stats(once).n_documents == stats(twice).n_documents);
    CHECK(stats(once).n_documents <= stats(c).n_documents);
    CHECK(once.vocabulary == twice.vocabulary);
  }
}

TEST_CASE("stats counts directly") {
  CHECK(stats(Corpus{}).n_documents == 0);
  CHECK(stats(Corpus{}).n_chains == 0);

  std::ostringstream in;
  for (int t = 0; t < 3; ++t)
    for (int d = 0; d < 2; ++d)
      in << R"({"entity":"A","epoch":)" << t << R"(,"tokens":["x"]})" << "\n";
  auto s = stats(ingest_str(in.str()));
  CHECK(s.n_documents == 6);
  CHECK(s.n_entities == 1);
  CHECK(s.n_units == 3);
  CHECK(s.n_chains == 1);
  CHECK(s.chain_lengths.at(3) == 1);
  CHECK(s.docs_per_unit.at(2) == 3);
}

TEST_CASE("stats CSV headers") {
  auto s = stats(ingest_str(kSixRecords));
  std::ostringstream o1, o2;
  write_stats_csv(s, o1);
  CHECK(o1.str().rfind("metric,value\n", 0) == 0);
  CHECK(o1.str().find("n_documents,6") != std::string::npos);
  write_histograms_csv(s, o2);
  CHECK(o2.str().find("bucket,count") != std::string::npos);
}

TEST_CASE("ingest is deterministic and round-trips through jsonl") {
  auto a = ingest_str(kSixRecords);
  auto b = ingest_str(kSixRecords);
  CHECK(a.vocabulary == b.vocabulary);

  std::ostringstream out;
  write_jsonl(a, out);
  auto c = ingest_str(out.str());
  std::ostringstream out2;
  write_jsonl(c, out2);
  CHECK(out.str() == out2.str());
  CHECK(c.vocab_size() == a.vocab_size());
  CHECK(stats(c).n_documents == stats(a).n_documents);
}

TEST_CASE("every unit belongs to exactly one chain") {
  auto c = ingest_str(kSixRecords);
  std::map<std::string, std::set<int>> epochs;
  for (const auto& chain : c.chains)
    for (const auto& unit : chain.units) {
      // a repeated (entity, epoch) would mean a unit in two chains
      CHECK(epochs[chain.entity_id].insert(unit.epoch).second);
    }
  CHECK(epochs["A"] == std::set<int>{0, 1});
  CHECK(epochs["B"] == std::set<int>{0, 1});
}

#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>

#include "bibliograph/graphclient.hpp"
#include "bibliograph/mock_api.hpp"
#include "support.hpp"

using namespace bibliograph;
using namespace bibliograph::graphclient;
using mock::MockApiServer;
using mock::work_payload;
using testing_support::record;
using testing_support::TempDir;

namespace {

ClientPolicy fast_policy() {
  ClientPolicy p;
  p.requests_per_second = 1000.0;
  p.backoff_base = std::chrono::milliseconds(1);
  p.timeout = std::chrono::milliseconds(2000);
  return p;
}

std::map<std::string, json> two_works() {
  return {
      {"10.1000/a", work_payload({{"Ada Lovelace", "Univ A"}, {"Alan Turing", "Inst B"}}, {"GB", "US"},
                                 {{"Computer science", 0}, {"Machine learning", 1}})},
      {"10.1000/b", work_payload({{"Grace Hopper", "Navy Lab"}}, {"US"}, {{"Robotics", 1}})},
  };
}

}  // namespace

TEST(Payload, ParsesAuthorshipsAndConcepts) {
  auto p = parse_payload(work_payload({{"A", "U1"}, {"B", "U1"}, {"A", "U2"}}, {"CN", "CN", "US"},
                                      {{"Machine learning", 1}, {"machine learning", 2}, {"Ethics", 2}}));
  EXPECT_EQ(p.authors, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(p.affiliations, (std::vector<std::string>{"U1", "U2"}));
  EXPECT_EQ(p.countries, (std::vector<std::string>{"CN", "US"}));
  ASSERT_EQ(p.fos_tags.size(), 2u);
  EXPECT_EQ(p.fos_tags[0].tag, "Machine learning");
  EXPECT_EQ(p.fos_tags[0].level, 1);
  EXPECT_EQ(p.fos_tags[1].level, 2);
  EXPECT_EQ(parse_payload(json::object()), EntityPayload{});
}

TEST(Payload, MalformedIsFormatError) {
  EXPECT_THROW(parse_payload(json::array()), FormatError);
  EXPECT_THROW(parse_payload(json{{"authorships", 3}}), FormatError);
  EXPECT_THROW(parse_payload(json{{"concepts", json::array({json{{"level", 1}}})}}), FormatError);
  EXPECT_THROW(parse_payload(json{{"concepts", json::array({json{{"display_name", "x"}}})}}), FormatError);
}

TEST(Policy, Validation) {
  ClientPolicy p;
  p.max_in_flight = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_THROW(policy_from_json(json{{"requests_per_second", 0}}), ConfigError);
  auto q = policy_from_json(policy_to_json(fast_policy()));
  EXPECT_EQ(q.backoff_base.count(), 1);
  ClientPolicy d;
  EXPECT_EQ(d.max_in_flight, 4u);
  EXPECT_EQ(d.requests_per_second, 10.0);
  EXPECT_EQ(d.max_retries, 3u);
}

TEST(ApiBase, ConfigThenEnvironment) {
  EXPECT_EQ(resolve_api_base(std::string("http://x:1")), "http://x:1");
  ::setenv("BIBLIOGRAPH_API_BASE", "http://env:2", 1);
  EXPECT_EQ(resolve_api_base(std::nullopt), "http://env:2");
  ::unsetenv("BIBLIOGRAPH_API_BASE");
  EXPECT_THROW(resolve_api_base(std::nullopt), ConfigError);
  EXPECT_THROW(http_fetcher("localhost:80"), ConfigError);
}

TEST(Lookup, ThreeDoisServerKnowsTwo) {
  MockApiServer server(two_works());
  auto out = lookup_by_doi_batch({"10.1000/a", "10.1000/b", "10.1000/zzz"}, fast_policy(), http_fetcher(server.base_url()));
  ASSERT_EQ(out.results.size(), 3u);
  EXPECT_EQ(out.results.at("10.1000/a").status, LookupStatus::found);
  EXPECT_EQ(out.results.at("10.1000/a").payload->authors, (std::vector<std::string>{"Ada Lovelace", "Alan Turing"}));
  EXPECT_EQ(out.results.at("10.1000/b").status, LookupStatus::found);
  EXPECT_EQ(out.results.at("10.1000/zzz").status, LookupStatus::not_found);
  EXPECT_EQ(out.retries, 0u);
}

TEST(Lookup, EmptyBatch) {
  int calls = 0;
  Fetcher f = [&](const std::string&) {
    ++calls;
    return HttpResponse{200, "{}", ""};
  };
  EXPECT_TRUE(lookup_by_doi_batch({}, fast_policy(), f).results.empty());
  EXPECT_EQ(calls, 0);
}

TEST(Lookup, TooManyRequestsTwiceThenOk) {
  MockApiServer server(two_works());
  server.script("10.1000/a", {429, 429});
  auto out = lookup_by_doi_batch({"10.1000/a"}, fast_policy(), http_fetcher(server.base_url()));
  const auto& r = out.results.at("10.1000/a");
  EXPECT_EQ(r.status, LookupStatus::found);
  EXPECT_EQ(r.retries, 2u);
  EXPECT_EQ(out.retries, 2u);
  EXPECT_EQ(server.requests_for("10.1000/a"), 3u);
}

TEST(Lookup, RetriesExhaustedIsApiError) {
  MockApiServer server(two_works());
  server.script("10.1000/a", {503, 503, 503, 503, 503});
  auto policy = fast_policy();
  policy.max_retries = 2;
  auto out = lookup_by_doi_batch({"10.1000/a", "10.1000/b"}, policy, http_fetcher(server.base_url()));
  EXPECT_EQ(out.results.at("10.1000/a").status, LookupStatus::api_error);
  EXPECT_EQ(server.requests_for("10.1000/a"), 3u);
  EXPECT_EQ(out.results.at("10.1000/b").status, LookupStatus::found);  // batch unaffected
}

TEST(Lookup, MalformedPayloadIsApiErrorWithDetail) {
  MockApiServer server(two_works());
  server.raw_body("10.1000/a", "{not json");
  server.raw_body("10.1000/b", R"({"authorships": 5})");
  auto out = lookup_by_doi_batch({"10.1000/a", "10.1000/b"}, fast_policy(), http_fetcher(server.base_url()));
  EXPECT_EQ(out.results.at("10.1000/a").status, LookupStatus::api_error);
  EXPECT_NE(out.results.at("10.1000/a").detail.find("malformed"), std::string::npos);
  EXPECT_EQ(out.results.at("10.1000/b").status, LookupStatus::api_error);
}

TEST(Lookup, UnreachableEndpointIsApiError) {
  int port = 0;
  {
    MockApiServer probe({});  // grab a free port, then release it
    port = probe.port();
  }
  auto policy = fast_policy();
  policy.max_retries = 1;
  policy.timeout = std::chrono::milliseconds(200);
  auto out = lookup_by_doi_batch({"10.1000/a"}, policy, http_fetcher("http://127.0.0.1:" + std::to_string(port)));
  EXPECT_EQ(out.results.at("10.1000/a").status, LookupStatus::api_error);
  EXPECT_EQ(out.retries, 1u);
}

TEST(Lookup, DoiWithReservedCharactersRoundTrips) {
  const std::string doi = "10.1016/s0004-3702(96)00034-3";
  MockApiServer server({{doi, work_payload({{"X", "Y"}}, {"DE"}, {})}});
  auto out = lookup_by_doi_batch({doi}, fast_policy(), http_fetcher(server.base_url()));
  EXPECT_EQ(out.results.at(doi).status, LookupStatus::found);
}

TEST(Lookup, BoundedConcurrencyAndRateLimit) {
  std::atomic<int> in_flight{0}, peak{0};
  Fetcher slow = [&](const std::string&) {
    int now = ++in_flight;
    int p = peak;
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    return HttpResponse{404, "", ""};
  };
  std::vector<std::string> dois;
  for (int i = 0; i < 24; ++i) dois.push_back("10.1/" + std::to_string(i));
  auto policy = fast_policy();
  policy.max_in_flight = 3;
  lookup_by_doi_batch(dois, policy, slow);
  EXPECT_LE(peak.load(), 3);

  policy.requests_per_second = 50.0;
  auto start = std::chrono::steady_clock::now();
  lookup_by_doi_batch(std::vector<std::string>(dois.begin(), dois.begin() + 11), policy,
                      [](const std::string&) { return HttpResponse{404, "", ""}; });
  auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_GE(elapsed, std::chrono::milliseconds(190));  // 11 requests at 50/s span >= 200 ms
}

TEST(Cache, SecondRunIsOffline) {
  TempDir dir("bibliograph-cache");
  ResponseCache cache(dir.path());
  {
    MockApiServer server(two_works());
    auto out = lookup_by_doi_batch({"10.1000/a", "10.1000/zzz"}, fast_policy(), http_fetcher(server.base_url()), &cache);
    EXPECT_FALSE(out.results.at("10.1000/a").from_cache);
  }
  Fetcher offline = [](const std::string&) { return HttpResponse{0, "", "offline"}; };
  auto out = lookup_by_doi_batch({"10.1000/a", "10.1000/zzz"}, fast_policy(), offline, &cache);
  EXPECT_TRUE(out.results.at("10.1000/a").from_cache);
  EXPECT_EQ(out.results.at("10.1000/a").status, LookupStatus::found);
  EXPECT_EQ(out.results.at("10.1000/zzz").status, LookupStatus::not_found);
  EXPECT_EQ(out.requests, 0u);
  EXPECT_EQ(cache.path_for("10.1/a(b)").filename().string(), "10.1%2Fa%28b%29.json");
}

TEST(Enrich, FourRecordsServerKnowsThree) {
  auto works = two_works();
  works["10.1000/c"] = work_payload({{"Tim Berners-Lee", "CERN"}}, {"CH"}, {{"World Wide Web", 1}});
  MockApiServer server(works);
  auto a = record("A", "10.1000/a", 2020);
  a.abstract = "kept";
  a.author_keywords = {"kw"};
  a.authors = {"old author"};
  Corpus c{a, record("B", "10.1000/b", 2021), record("C", "10.1000/c", 2022), record("D", "10.1000/unknown", 2022)};
  auto out = enrich_corpus(c, fast_policy(), http_fetcher(server.base_url()));
  ASSERT_EQ(out.corpus.size(), 4u);
  EXPECT_EQ(out.report.submitted, 4u);
  EXPECT_EQ(out.report.matched, 3u);
  ASSERT_EQ(out.report.missing.size(), 1u);
  EXPECT_EQ(out.report.missing[0], (MissingRecord{c[3].record_id, MissReason::not_found, ""}));

  const auto& ea = out.corpus[0];
  EXPECT_EQ(ea.authors, (std::vector<std::string>{"Ada Lovelace", "Alan Turing"}));
  EXPECT_EQ(ea.countries, (std::vector<std::string>{"GB", "US"}));
  EXPECT_EQ(ea.fos_tags.size(), 2u);
  // Everything outside the four entity lists is untouched.
  auto strip = [](BibRecord r) {
    r.authors.clear();
    r.affiliations.clear();
    r.countries.clear();
    r.fos_tags.clear();
    return r;
  };
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(strip(out.corpus[i]), strip(c[i]));
  EXPECT_EQ(out.corpus[3], c[3]);
}

TEST(Enrich, NoDoiAndDropUnmatched) {
  MockApiServer server(two_works());
  Corpus c{record("A", "10.1000/a", 2020), record("No doi", std::nullopt, 2020), record("Z", "10.1000/zz", 2020)};
  auto kept = enrich_corpus(c, fast_policy(), http_fetcher(server.base_url()));
  EXPECT_EQ(kept.corpus.size(), 3u);
  ASSERT_EQ(kept.report.missing.size(), 2u);
  EXPECT_EQ(kept.report.missing[0].reason, MissReason::no_doi);
  EXPECT_EQ(kept.report.missing[1].reason, MissReason::not_found);
  EXPECT_EQ(kept.report.matched + kept.report.missing.size(), kept.report.submitted);

  auto dropped = enrich_corpus(c, fast_policy(), http_fetcher(server.base_url()), nullptr, true);
  EXPECT_EQ(dropped.corpus.size(), 1u);
  EXPECT_EQ(dropped.report.dropped, 2u);
  EXPECT_EQ(dropped.report.matched + dropped.report.missing.size(), dropped.report.submitted);
}

TEST(Enrich, ByteIdenticalAcrossRuns) {
  auto works = two_works();
  Corpus c;
  for (int i = 0; i < 30; ++i) {
    std::string doi = "10.1000/" + std::string(i % 3 == 0 ? "a" : i % 3 == 1 ? "b" : "x") + std::to_string(i / 3);
    if (i % 3 != 2) works[doi] = works[i % 3 == 0 ? "10.1000/a" : "10.1000/b"];
    c.push_back(record("T" + std::to_string(i), doi, 2020));
  }
  MockApiServer server(works);
  auto a = enrich_corpus(c, fast_policy(), http_fetcher(server.base_url()));
  auto b = enrich_corpus(c, fast_policy(), http_fetcher(server.base_url()));
  EXPECT_EQ(corpus_to_jsonl(a.corpus), corpus_to_jsonl(b.corpus));
  EXPECT_EQ(enrichment_report_to_json(a.report).dump(), enrichment_report_to_json(b.report).dump());
  EXPECT_EQ(a.report.matched, 20u);
}

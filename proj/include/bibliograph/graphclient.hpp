#pragma once

// DOI lookups against an OpenAlex-compatible works endpoint and corpus
// enrichment from the returned authorships and concepts.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "bibliograph/corpus.hpp"
#include "bibliograph/errors.hpp"
#include "bibliograph/text.hpp"

namespace bibliograph::graphclient {

struct ClientPolicy {
  std::size_t max_in_flight = 4;
  double requests_per_second = 10.0;
  std::size_t max_retries = 3;
  std::chrono::milliseconds backoff_base{250};  // wait before retry k is backoff_base * 2^k
  std::chrono::milliseconds timeout{10000};

  void validate() const {
    if (max_in_flight < 1) throw ConfigError("api.policy.max_in_flight must be >= 1");
    if (!(requests_per_second > 0.0)) throw ConfigError("api.policy.requests_per_second must be positive");
    if (backoff_base.count() <= 0) throw ConfigError("api.policy.backoff_ms must be positive");
    if (timeout.count() <= 0) throw ConfigError("api.policy.timeout_ms must be positive");
  }
};

inline json policy_to_json(const ClientPolicy& p) {
  return {{"max_in_flight", p.max_in_flight},
          {"requests_per_second", p.requests_per_second},
          {"max_retries", p.max_retries},
          {"backoff_ms", p.backoff_base.count()},
          {"timeout_ms", p.timeout.count()}};
}

inline ClientPolicy policy_from_json(const json& j) {
  ClientPolicy p;
  p.max_in_flight = j.value("max_in_flight", p.max_in_flight);
  p.requests_per_second = j.value("requests_per_second", p.requests_per_second);
  p.max_retries = j.value("max_retries", p.max_retries);
  p.backoff_base = std::chrono::milliseconds(j.value("backoff_ms", p.backoff_base.count()));
  p.timeout = std::chrono::milliseconds(j.value("timeout_ms", p.timeout.count()));
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Transport

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string transport_error;  // non-empty when no HTTP response arrived
};

// Fetches the work record for one normalized DOI.
using Fetcher = std::function<HttpResponse(const std::string& doi)>;

// Base URL from the explicit setting, else BIBLIOGRAPH_API_BASE.
inline std::string resolve_api_base(const std::optional<std::string>& configured) {
  if (configured && !configured->empty()) return *configured;
  if (const char* env = std::getenv("BIBLIOGRAPH_API_BASE"); env && *env) return env;
  throw ConfigError("no API base URL: set api.base in the config or BIBLIOGRAPH_API_BASE");
}

// GET {base}/works/doi:{doi} over cpp-httplib. One client per calling
// thread; httplib clients are not shared across threads.
inline Fetcher http_fetcher(const std::string& base_url, std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("API base must look like http://host[:port][/path]");
  auto path_start = base_url.find('/', scheme_end + 3);
  std::string origin = path_start == std::string::npos ? base_url : base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return [origin, prefix, timeout](const std::string& doi) {
    httplib::Client client(origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    HttpResponse out;
    auto res = client.Get(prefix + "/works/doi:" + doi);
    if (!res) {
      out.transport_error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  };
}

// Spaces calls at least 1/rps apart across all threads.
class RateLimiter {
 public:
  explicit RateLimiter(double rps)
      : interval_(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / rps))) {}

  void acquire() {
    Clock::time_point slot;
    {
      std::lock_guard lock(mu_);
      auto now = Clock::now();
      slot = std::max(now, next_);
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  using Clock = std::chrono::steady_clock;
  Clock::duration interval_;
  Clock::time_point next_{};
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Payloads

struct EntityPayload {
  std::vector<std::string> authors;
  std::vector<std::string> affiliations;
  std::vector<std::string> countries;
  std::vector<FosTag> fos_tags;

  bool operator==(const EntityPayload&) const = default;
};

namespace detail {

inline void push_unique(std::vector<std::string>& v, std::set<std::string>& seen, const std::string& s) {
  if (!s.empty() && seen.insert(s).second) v.push_back(s);
}

inline std::string string_or_empty(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null()) return {};
  if (!j[key].is_string()) throw FormatError(std::string("field '") + key + "' is not a string");
  return j[key].get<std::string>();
}

}  // namespace detail

// OpenAlex work JSON: authorships[].author.display_name,
// authorships[].institutions[].{display_name,country_code},
// authorships[].countries[], concepts[].{display_name,level}.
inline EntityPayload parse_payload(const json& j) {
  if (!j.is_object()) throw FormatError("payload is not a JSON object");
  EntityPayload p;
  std::set<std::string> authors, affiliations, countries, fos;
  if (j.contains("authorships")) {
    if (!j["authorships"].is_array()) throw FormatError("authorships is not an array");
    for (const auto& a : j["authorships"]) {
      if (!a.is_object()) throw FormatError("authorship is not an object");
      if (a.contains("author")) detail::push_unique(p.authors, authors, detail::string_or_empty(a["author"], "display_name"));
      if (a.contains("institutions")) {
        if (!a["institutions"].is_array()) throw FormatError("institutions is not an array");
        for (const auto& inst : a["institutions"]) {
          detail::push_unique(p.affiliations, affiliations, detail::string_or_empty(inst, "display_name"));
          detail::push_unique(p.countries, countries, detail::string_or_empty(inst, "country_code"));
        }
      }
      if (a.contains("countries")) {
        if (!a["countries"].is_array()) throw FormatError("countries is not an array");
        for (const auto& c : a["countries"]) {
          if (!c.is_string()) throw FormatError("country is not a string");
          detail::push_unique(p.countries, countries, c.get<std::string>());
        }
      }
    }
  }
  if (j.contains("concepts")) {
    if (!j["concepts"].is_array()) throw FormatError("concepts is not an array");
    for (const auto& c : j["concepts"]) {
      auto name = detail::string_or_empty(c, "display_name");
      if (name.empty()) throw FormatError("concept without display_name");
      if (!c.contains("level") || !c["level"].is_number_integer()) throw FormatError("concept without integer level");
      if (fos.insert(text::casefold(name)).second) p.fos_tags.push_back({name, c["level"].get<int>()});
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Disk cache

// One JSON file per DOI: {"status": 200, "payload": {...}} or
// {"status": 404}. Transient failures are never cached.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  std::optional<json> get(const std::string& doi) const {
    auto path = path_for(doi);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
      return json::parse(text::read_file(path));
    } catch (const std::exception&) {
      return std::nullopt;  // unreadable entries are refetched
    }
  }

  void put(const std::string& doi, const json& entry) const {
    auto path = path_for(doi);
    auto tmp = path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    text::write_file(tmp, entry.dump() + "\n");
    std::filesystem::rename(tmp, path);
  }

  std::filesystem::path path_for(const std::string& doi) const {
    std::string name;
    static constexpr char kHex[] = "0123456789ABCDEF";
    for (unsigned char c : doi) {
      if (std::isalnum(c) || c == '.' || c == '-' || c == '_') {
        name.push_back(static_cast<char>(c));
      } else {
        name += '%';
        name += kHex[c >> 4];
        name += kHex[c & 15];
      }
    }
    return dir_ / (name + ".json");
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Batch lookup

enum class LookupStatus { found, not_found, api_error };

struct LookupResult {
  LookupStatus status = LookupStatus::api_error;
  std::optional<EntityPayload> payload;
  std::string detail;
  std::size_t retries = 0;
  bool from_cache = false;
};

struct BatchResult {
  std::map<std::string, LookupResult> results;  // keyed by DOI
  std::size_t retries = 0;
  std::size_t requests = 0;
};

namespace detail {

inline LookupResult from_cache_entry(const json& entry) {
  LookupResult r;
  r.from_cache = true;
  if (entry.value("status", 0) == 404) {
    r.status = LookupStatus::not_found;
  } else {
    r.status = LookupStatus::found;
    r.payload = parse_payload(entry.at("payload"));
  }
  return r;
}

inline bool transient(const HttpResponse& res) {
  return !res.transport_error.empty() || res.status == 429 || res.status >= 500;
}

}  // namespace detail

// Resolves each distinct DOI with at most max_in_flight concurrent requests.
// 429, 5xx and transport failures are retried with exponential backoff;
// exhausting the retries, any other unexpected status, or an unparseable
// payload yields api-error for that DOI only.
inline BatchResult lookup_by_doi_batch(const std::vector<std::string>& dois, const ClientPolicy& policy,
                                       const Fetcher& fetch, const ResponseCache* cache = nullptr) {
  policy.validate();
  std::vector<std::string> unique(dois.begin(), dois.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  std::vector<LookupResult> results(unique.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> requests{0};
  RateLimiter limiter(policy.requests_per_second);

  auto resolve = [&](const std::string& doi) {
    LookupResult r;
    if (cache) {
      if (auto entry = cache->get(doi)) {
        try {
          return detail::from_cache_entry(*entry);
        } catch (const std::exception&) {
          // fall through and refetch
        }
      }
    }
    for (std::size_t attempt = 0;; ++attempt) {
      limiter.acquire();
      ++requests;
      auto res = fetch(doi);
      if (detail::transient(res)) {
        if (attempt < policy.max_retries) {
          ++r.retries;
          std::this_thread::sleep_for(policy.backoff_base * (1LL << std::min<std::size_t>(attempt, 20)));
          continue;
        }
        r.status = LookupStatus::api_error;
        r.detail = res.transport_error.empty() ? "HTTP " + std::to_string(res.status) + " after retries"
                                               : res.transport_error + " after retries";
        return r;
      }
      if (res.status == 404) {
        r.status = LookupStatus::not_found;
        if (cache) cache->put(doi, json{{"status", 404}});
        return r;
      }
      if (res.status != 200) {
        r.status = LookupStatus::api_error;
        r.detail = "unexpected HTTP " + std::to_string(res.status);
        return r;
      }
      try {
        auto body = json::parse(res.body);
        r.payload = parse_payload(body);
        r.status = LookupStatus::found;
        if (cache) cache->put(doi, json{{"status", 200}, {"payload", body}});
      } catch (const std::exception& e) {
        r.status = LookupStatus::api_error;
        r.detail = std::string("malformed payload: ") + e.what();
      }
      return r;
    }
  };

  auto worker = [&] {
    for (std::size_t i = next++; i < unique.size(); i = next++) results[i] = resolve(unique[i]);
  };
  std::size_t workers = std::min(policy.max_in_flight, unique.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  if (workers > 0) worker();
  for (auto& t : pool) t.join();

  BatchResult out;
  out.requests = requests;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    out.retries += results[i].retries;
    out.results.emplace(unique[i], std::move(results[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Enrichment

enum class MissReason { no_doi, not_found, api_error };

inline std::string to_string(MissReason r) {
  switch (r) {
    case MissReason::no_doi: return "no-doi";
    case MissReason::not_found: return "not-found";
    case MissReason::api_error: return "api-error";
  }
  return "api-error";
}

struct MissingRecord {
  std::string record_id;
  MissReason reason = MissReason::api_error;
  std::string detail;

  bool operator==(const MissingRecord&) const = default;
};

struct EnrichmentReport {
  std::size_t submitted = 0;
  std::size_t matched = 0;
  std::vector<MissingRecord> missing;  // corpus order
  std::size_t retries = 0;
  std::size_t requests = 0;
  std::size_t dropped = 0;  // unmatched records removed on request
};

inline json enrichment_report_to_json(const EnrichmentReport& r) {
  json missing = json::array();
  for (const auto& m : r.missing) {
    json e{{"record_id", m.record_id}, {"reason", to_string(m.reason)}};
    if (!m.detail.empty()) e["detail"] = m.detail;
    missing.push_back(std::move(e));
  }
  return {{"submitted", r.submitted}, {"matched", r.matched},   {"missing", std::move(missing)},
          {"retries", r.retries},     {"requests", r.requests}, {"dropped", r.dropped}};
}

struct EnrichmentResult {
  Corpus corpus;
  EnrichmentReport report;
};

// Matched records get their authors, affiliations, countries and FoS tags
// replaced by the payload's; nothing else changes. Unmatched records stay
// unless drop_unmatched is set.
inline EnrichmentResult enrich_corpus(const Corpus& corpus, const ClientPolicy& policy, const Fetcher& fetch,
                                      const ResponseCache* cache = nullptr, bool drop_unmatched = false) {
  std::vector<std::string> dois;
  for (const auto& r : corpus) {
    if (r.doi) dois.push_back(*r.doi);
  }
  auto batch = lookup_by_doi_batch(dois, policy, fetch, cache);

  EnrichmentResult out;
  auto& rep = out.report;
  rep.submitted = corpus.size();
  rep.retries = batch.retries;
  rep.requests = batch.requests;
  for (const auto& r : corpus) {
    std::optional<MissingRecord> miss;
    BibRecord enriched = r;
    if (!r.doi) {
      miss = MissingRecord{r.record_id, MissReason::no_doi, ""};
    } else {
      const auto& res = batch.results.at(*r.doi);
      if (res.status == LookupStatus::found) {
        enriched.authors = res.payload->authors;
        enriched.affiliations = res.payload->affiliations;
        enriched.countries = res.payload->countries;
        enriched.fos_tags = res.payload->fos_tags;
      } else {
        miss = MissingRecord{r.record_id,
                             res.status == LookupStatus::not_found ? MissReason::not_found : MissReason::api_error,
                             res.detail};
      }
    }
    if (miss) {
      rep.missing.push_back(*miss);
      if (drop_unmatched) {
        ++rep.dropped;
        continue;
      }
    } else {
      ++rep.matched;
    }
    out.corpus.push_back(std::move(enriched));
  }
  if (rep.matched + rep.missing.size() != rep.submitted) throw ContractError("enrichment report does not add up");
  return out;
}

}  // namespace bibliograph::graphclient

#pragma once

// In-process stand-in for the works endpoint, used by tests, the acceptance
// runner and the mock server tool.

#include <atomic>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "bibliograph/errors.hpp"

namespace bibliograph::mock {

class MockApiServer {
 public:
  // payloads: normalized DOI -> work JSON.
  explicit MockApiServer(std::map<std::string, nlohmann::json> payloads, const std::string& host = "127.0.0.1",
                         int port = 0)
      : payloads_(std::move(payloads)) {
    server_.Get(R"(/works/doi:(.+))", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req.matches[1].str(), res);
    });
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ <= 0) throw IoError("mock API could not bind " + host);
    host_ = host;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockApiServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  MockApiServer(const MockApiServer&) = delete;
  MockApiServer& operator=(const MockApiServer&) = delete;

  // Statuses served for `doi` before its normal answer, e.g. {429, 429}.
  void script(const std::string& doi, std::deque<int> statuses) {
    std::lock_guard lock(mu_);
    scripts_[doi] = std::move(statuses);
  }

  // Serves this body with status 200 instead of the payload.
  void raw_body(const std::string& doi, std::string body) {
    std::lock_guard lock(mu_);
    raw_[doi] = std::move(body);
  }

  std::string base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }
  int port() const { return port_; }
  std::size_t request_count() const { return requests_; }
  std::size_t requests_for(const std::string& doi) const {
    std::lock_guard lock(mu_);
    auto it = per_doi_.find(doi);
    return it == per_doi_.end() ? 0 : it->second;
  }

  void stop() { server_.stop(); }
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

 private:
  void handle(const std::string& doi, httplib::Response& res) {
    ++requests_;
    std::lock_guard lock(mu_);
    ++per_doi_[doi];
    if (auto it = scripts_.find(doi); it != scripts_.end() && !it->second.empty()) {
      res.status = it->second.front();
      it->second.pop_front();
      res.set_content(R"({"error":"scripted"})", "application/json");
      return;
    }
    if (auto it = raw_.find(doi); it != raw_.end()) {
      res.status = 200;
      res.set_content(it->second, "application/json");
      return;
    }
    auto it = payloads_.find(doi);
    if (it == payloads_.end()) {
      res.status = 404;
      res.set_content(R"({"error":"not found"})", "application/json");
      return;
    }
    res.status = 200;
    res.set_content(it->second.dump(), "application/json");
  }

  std::map<std::string, nlohmann::json> payloads_;
  std::map<std::string, std::deque<int>> scripts_;
  std::map<std::string, std::string> raw_;
  std::map<std::string, std::size_t> per_doi_;
  mutable std::mutex mu_;
  std::atomic<std::size_t> requests_{0};
  httplib::Server server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

// A small OpenAlex-shaped work record.
inline nlohmann::json work_payload(const std::vector<std::pair<std::string, std::string>>& author_institutions,
                                   const std::vector<std::string>& countries,
                                   const std::vector<std::pair<std::string, int>>& concepts) {
  nlohmann::json authorships = nlohmann::json::array();
  for (std::size_t i = 0; i < author_institutions.size(); ++i) {
    nlohmann::json inst{{"display_name", author_institutions[i].second}};
    if (i < countries.size()) inst["country_code"] = countries[i];
    authorships.push_back({{"author", {{"display_name", author_institutions[i].first}}},
                           {"institutions", nlohmann::json::array({inst})}});
  }
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& [name, level] : concepts) cs.push_back({{"display_name", name}, {"level", level}, {"score", 0.5}});
  return {{"authorships", authorships}, {"concepts", cs}};
}

}  // namespace bibliograph::mock

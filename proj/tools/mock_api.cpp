// Serves works payloads from a JSON file ({"<doi>": {...}}) at
// GET /works/doi:<doi>, standing in for the knowledge-graph API.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "bibliograph/mock_api.hpp"
#include "bibliograph/text.hpp"

namespace {
bibliograph::mock::MockApiServer* g_server = nullptr;
}

int main(int argc, char** argv) {
  CLI::App app{"Mock works API"};
  std::string works_path = "data/synthetic/works.json";
  std::string host = "127.0.0.1";
  int port = 8089;
  app.add_option("--works", works_path, "JSON object mapping DOI to work payload");
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Port (0 picks a free one)");
  CLI11_PARSE(app, argc, argv);

  try {
    auto works = nlohmann::json::parse(bibliograph::text::read_file(works_path));
    std::map<std::string, nlohmann::json> payloads;
    for (auto& [doi, payload] : works.items()) payloads[doi] = payload;
    bibliograph::mock::MockApiServer server(std::move(payloads), host, port);
    g_server = &server;
    std::signal(SIGINT, [](int) { g_server->stop(); });
    std::signal(SIGTERM, [](int) { g_server->stop(); });
    std::cout << "serving " << works.size() << " works at " << server.base_url() << std::endl;
    server.wait();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad works file: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

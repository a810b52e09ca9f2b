#pragma once

// The bundled synthetic fixture (data/synthetic) and a mock API serving its
// works payloads.

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "bibliograph/mock_api.hpp"
#include "bibliograph/pipeline.hpp"

namespace bundle {

inline std::filesystem::path dir() { return std::filesystem::path(BIBLIOGRAPH_SOURCE_DIR) / "data" / "synthetic"; }

inline std::map<std::string, nlohmann::json> works() {
  auto j = nlohmann::json::parse(bibliograph::text::read_file(dir() / "works.json"));
  std::map<std::string, nlohmann::json> out;
  for (auto& [doi, payload] : j.items()) out[doi] = payload;
  return out;
}

inline std::unique_ptr<bibliograph::mock::MockApiServer> serve() {
  return std::make_unique<bibliograph::mock::MockApiServer>(works());
}

// Bundled config pointed at `server`, writing to `out`, without a stage cache.
inline bibliograph::pipeline::PipelineConfig config(const bibliograph::mock::MockApiServer& server,
                                                    const std::filesystem::path& out) {
  auto c = bibliograph::pipeline::load_config(dir() / "config.json");
  c.api_base = server.base_url();
  c.out_dir = out;
  c.cache_dir.reset();
  return c;
}

}  // namespace bundle

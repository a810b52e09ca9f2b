#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bibliograph/corpus.hpp"

namespace testing_support {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "bibliograph") {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline bibliograph::BibRecord record(std::string title, std::optional<std::string> doi, std::optional<int> year,
                                     bibliograph::SourceDb source = bibliograph::SourceDb::scopus_like) {
  bibliograph::BibRecord r;
  r.title = std::move(title);
  if (doi) r.doi = bibliograph::normalize_doi(*doi);
  r.year = year;
  r.source_dbs.insert(source);
  r.record_id = bibliograph::make_record_id(r);
  return r;
}

inline bibliograph::BibRecord with_fos(bibliograph::BibRecord r, std::vector<std::string> tags, int level = 1) {
  for (auto& t : tags) r.fos_tags.push_back({std::move(t), level});
  return r;
}

}  // namespace testing_support

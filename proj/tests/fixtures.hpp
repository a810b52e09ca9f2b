#pragma once

// Small hand-built corpora shared by unit tests and the acceptance runner.

#include <string>
#include <vector>

#include "bibliograph/corpus.hpp"

namespace fixtures {

inline bibliograph::BibRecord doc(std::string title, int year, std::vector<std::string> keywords,
                                  std::vector<std::string> level1_fos, std::optional<std::string> abstract = {}) {
  bibliograph::BibRecord r;
  r.title = std::move(title);
  r.year = year;
  r.author_keywords = std::move(keywords);
  for (auto& f : level1_fos) r.fos_tags.push_back({std::move(f), 1});
  r.abstract = std::move(abstract);
  r.source_dbs.insert(bibliograph::SourceDb::scopus_like);
  r.record_id = bibliograph::make_record_id(r);
  return r;
}

// Six documents for the principle x technique matrix. Tagging uses titles
// and keywords only; the last document mentions principles in its abstract
// alone.
inline bibliograph::Corpus interplay_docs() {
  return {
      doc("Fairness in machine learning models", 2019, {}, {"Machine learning"}),
      doc("Privacy-preserving federated learning", 2020, {"Differential privacy"},
          {"Machine learning", "Computer security"}),
      doc("Accessible interfaces for older adults", 2020, {}, {"Human-computer interaction"}),
      doc("Safety of autonomous robots", 2021, {"robot safety", "Reliability"}, {"Robotics", "Machine learning"}),
      doc("Explainable and fair recommender systems", 2021, {}, {"Machine learning", "Human-computer interaction"}),
      doc("Graph algorithms", 2022, {}, {"Robotics"}, "We discuss privacy and bias."),
  };
}

inline std::vector<std::string> interplay_techniques() {
  return {"machine learning", "robotics", "human-computer interaction"};
}

// Tabulated by hand from interplay_docs(), rows in default lexicon order,
// columns as interplay_techniques().
inline std::vector<std::vector<std::size_t>> interplay_expected_counts() {
  return {
      {0, 0, 0},  // accountability
      {1, 0, 1},  // explainability: doc 5
      {0, 0, 0},  // transparency
      {2, 0, 1},  // fairness: docs 1, 5
      {0, 0, 0},  // intelligibility
      {0, 0, 0},  // unbiased
      {0, 0, 0},  // non-discrimination
      {1, 1, 0},  // reliability: doc 4
      {1, 1, 0},  // safety: doc 4
      {1, 0, 0},  // privacy: doc 2
      {0, 0, 0},  // security
      {0, 0, 0},  // inclusiveness
      {0, 0, 1},  // accessibility: doc 3
  };
}

}  // namespace fixtures

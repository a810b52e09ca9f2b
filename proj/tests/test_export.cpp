#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include <boost/property_tree/xml_parser.hpp>

#include "bibliograph/export.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace bibliograph;
using namespace bibliograph::exporter;
using testing_support::TempDir;

namespace {

CoocGraph ten_node_fixture() {
  std::map<std::string, std::size_t> nodes;
  std::map<CoocGraph::LabelPair, double> edges;
  const std::vector<std::string> labels{"alpha", "beta", "gamma & delta", "épsilon", "zeta \"z\"",
                                        "eta<eta>",  "theta, iota", "kappa", "lambda\tmu", "nu"};
  for (std::size_t i = 0; i < labels.size(); ++i) nodes[labels[i]] = i + 1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      if ((i * 7 + j * 3) % 4 == 0) continue;
      auto a = labels[i], b = labels[j];
      if (b < a) std::swap(a, b);
      edges[{a, b}] = 0.1 * static_cast<double>(i + 2 * j) + 1.0 / 3.0;
    }
  }
  return CoocGraph::from_parts(EntityUnit::term, nodes, edges);
}

// Independent reading of the written document: labels, attributes and
// weights straight from the XML tree, keyed by label.
struct Parsed {
  std::map<std::string, std::pair<double, int>> nodes;
  std::map<std::pair<std::string, std::string>, double> edges;
};

Parsed parse_independently(const std::string& doc) {
  namespace pt = boost::property_tree;
  pt::ptree root;
  std::istringstream in(doc);
  pt::read_xml(in, root);
  Parsed p;
  std::map<std::string, std::string> label_of;
  for (const auto& [k, n] : root.get_child("gexf.graph.nodes")) {
    if (k != "node") continue;
    auto label = n.get<std::string>("<xmlattr>.label");
    label_of[n.get<std::string>("<xmlattr>.id")] = label;
    double freq = 0;
    int comm = -2;
    for (const auto& [kk, av] : n.get_child("attvalues")) {
      if (av.get<std::string>("<xmlattr>.for") == "0") freq = av.get<double>("<xmlattr>.value");
      if (av.get<std::string>("<xmlattr>.for") == "1") comm = av.get<int>("<xmlattr>.value");
    }
    EXPECT_EQ(n.get<double>("viz:size.<xmlattr>.value"), freq);
    p.nodes[label] = {freq, comm};
  }
  for (const auto& [k, e] : root.get_child("gexf.graph.edges")) {
    if (k != "edge") continue;
    auto a = label_of.at(e.get<std::string>("<xmlattr>.source"));
    auto b = label_of.at(e.get<std::string>("<xmlattr>.target"));
    if (b < a) std::swap(a, b);
    p.edges[{a, b}] = text::parse_double(e.get<std::string>("<xmlattr>.weight"));
  }
  return p;
}

}  // namespace

TEST(Gexf, EmptyGraphParses) {
  CoocGraph g;
  auto doc = gexf_to_string(view_of(g));
  auto back = gexf_from_string(doc);
  EXPECT_TRUE(back.nodes.empty());
  EXPECT_TRUE(back.edges.empty());
  EXPECT_FALSE(back.directed);
}

TEST(Gexf, TenNodeRoundTripIsIsomorphic) {
  auto g = ten_node_fixture();
  auto part = louvain_partition(g, 3);
  auto view = view_of(g, &part);
  auto doc = gexf_to_string(view);
  EXPECT_EQ(gexf_from_string(doc), view);

  auto parsed = parse_independently(doc);
  ASSERT_EQ(parsed.nodes.size(), g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    auto [freq, comm] = parsed.nodes.at(g.label(i));
    EXPECT_EQ(freq, static_cast<double>(g.frequency(i)));
    EXPECT_EQ(comm, part.community[i]);
  }
  ASSERT_EQ(parsed.edges.size(), g.edge_count());
  for (const auto& e : g.edges()) {
    auto a = g.label(e.a), b = g.label(e.b);
    if (b < a) std::swap(a, b);
    EXPECT_EQ(parsed.edges.at({a, b}), e.weight);  // shortest round-trip doubles are exact
  }
}

TEST(Gexf, SameInputByteIdenticalFiles) {
  TempDir dir("bibliograph-gexf");
  auto g = ten_node_fixture();
  auto part = louvain_partition(g, 1);
  write_gexf(view_of(g, &part), dir / "a.gexf");
  write_gexf(view_of(ten_node_fixture(), &part), dir / "b.gexf");
  EXPECT_EQ(text::read_file(dir / "a.gexf"), text::read_file(dir / "b.gexf"));
  EXPECT_EQ(read_gexf(dir / "a.gexf"), view_of(g, &part));
}

TEST(Gexf, NodesSortedByLabelAndPaletteCycles) {
  auto g = ten_node_fixture();
  Partition p;
  for (std::size_t i = 0; i < g.node_count(); ++i) p.community.push_back(static_cast<int>(i) + 5);
  auto v = view_of(g, &p);
  EXPECT_TRUE(std::is_sorted(v.nodes.begin(), v.nodes.end(),
                             [](const ViewNode& a, const ViewNode& b) { return a.label < b.label; }));
  EXPECT_EQ(community_color(13).r, community_color(1).r);
  EXPECT_EQ(community_color(13).g, community_color(1).g);
  EXPECT_NE(community_color(0).r, community_color(2).r);
  auto doc = gexf_to_string(v);
  EXPECT_NE(doc.find("<viz:color r=\"31\" g=\"120\" b=\"180\"/>"), std::string::npos);  // community 12 -> slot 0
}

TEST(Gexf, RandomGraphsRoundTrip) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto g = oracle::random_graph(rng, 30, 0.2);
    auto part = louvain_partition(g, seed);
    auto v = view_of(g, &part);
    EXPECT_EQ(gexf_from_string(gexf_to_string(v)), v) << "seed " << seed;
  }
}

TEST(Gexf, EvolutionViewIsDirectedWithYears) {
  std::vector<sep::SepViewRow> rows;
  sep::SepViewRow a;
  a.kind = "node";
  a.id = "T000001";
  a.size = 12;
  a.color = 0;
  a.birth_year = 2018;
  a.label = "robot; safety";
  sep::SepViewRow b = a;
  b.id = "T000000";
  b.size = 30;
  b.birth_year = 2016;
  b.color = 1;
  sep::SepViewRow e;
  e.kind = "edge";
  e.source = "T000000";
  e.target = "T000001";
  e.weight = 0.25;
  rows = {a, b, e};
  auto v = view_of(rows);
  EXPECT_TRUE(v.directed);
  EXPECT_EQ(v.nodes.front().id, "T000000");
  auto doc = gexf_to_string(v);
  EXPECT_NE(doc.find("defaultedgetype=\"directed\""), std::string::npos);
  auto back = gexf_from_string(doc);
  EXPECT_EQ(back, v);
  EXPECT_EQ(back.nodes[1].year, 2018);
}

TEST(Gexf, ErrorsAreTyped) {
  EXPECT_THROW(gexf_from_string("<gexf><graph"), FormatError);
  EXPECT_THROW(gexf_from_string("<other/>"), FormatError);
  EXPECT_THROW(gexf_from_string("<gexf><graph><nodes><node label=\"x\"/></nodes></graph></gexf>"), FormatError);
  TempDir dir("bibliograph-gexf");
  text::write_file(dir / "file", "x");
  EXPECT_THROW(write_gexf(GraphView{}, dir / "file" / "sub.gexf"), IoError);
  Partition short_part{{0}, 0.0};
  EXPECT_THROW(view_of(ten_node_fixture(), &short_part), ContractError);
}

TEST(GraphMl, ParsesAndCarriesAttributes) {
  namespace pt = boost::property_tree;
  auto g = ten_node_fixture();
  auto part = louvain_partition(g, 0);
  auto doc = graphml_to_string(view_of(g, &part));
  pt::ptree root;
  std::istringstream in(doc);
  pt::read_xml(in, root);
  std::size_t nodes = 0, edges = 0;
  std::set<std::string> labels;
  for (const auto& [k, n] : root.get_child("graphml.graph")) {
    if (k == "node") {
      ++nodes;
      for (const auto& [kk, d] : n) {
        if (kk == "data" && d.get<std::string>("<xmlattr>.key") == "label") labels.insert(d.data());
      }
    }
    if (k == "edge") ++edges;
  }
  EXPECT_EQ(nodes, g.node_count());
  EXPECT_EQ(edges, g.edge_count());
  EXPECT_EQ(labels, std::set<std::string>(g.labels().begin(), g.labels().end()));
  EXPECT_EQ(graphml_to_string(view_of(g, &part)), doc);
}

TEST(Csv, NodeAndEdgeListsQuote) {
  auto v = view_of(ten_node_fixture());
  auto rows = text::parse_csv(nodes_to_csv(v));
  ASSERT_EQ(rows.size(), v.nodes.size() + 1);
  bool saw_comma = false;
  for (const auto& r : rows) saw_comma |= r.fields[1] == "theta, iota";
  EXPECT_TRUE(saw_comma);
  EXPECT_EQ(text::parse_csv(edges_to_csv(v)).size(), v.edges.size() + 1);
}

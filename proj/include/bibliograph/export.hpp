#pragma once

// Graph file writers (GEXF 1.2draft for Gephi, GraphML) and a GEXF reader.
// Writers work on GraphView, a flat label-keyed form shared by co-occurrence
// graphs and the evolution view.

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "bibliograph/errors.hpp"
#include "bibliograph/network.hpp"
#include "bibliograph/sep.hpp"
#include "bibliograph/text.hpp"

namespace bibliograph::exporter {

struct ViewNode {
  std::string id;
  std::string label;
  double size = 0.0;  // frequency for co-occurrence graphs, member count for topics
  int community = -1;
  std::optional<int> year;
  bool operator==(const ViewNode&) const = default;
};

struct ViewEdge {
  std::string source;
  std::string target;
  double weight = 0.0;
  bool operator==(const ViewEdge&) const = default;
};

struct GraphView {
  bool directed = false;
  std::vector<ViewNode> nodes;
  std::vector<ViewEdge> edges;
  bool operator==(const GraphView&) const = default;
};

struct Rgb {
  int r, g, b;
};

// Twelve fixed colors, cycled by community id; negative ids are grey.
inline constexpr std::array<Rgb, 12> kPalette{{
    {31, 120, 180},  {51, 160, 44},   {227, 26, 28},   {255, 127, 0},   {106, 61, 154}, {177, 89, 40},
    {166, 206, 227}, {178, 223, 138}, {251, 154, 153}, {253, 191, 111}, {202, 178, 214}, {255, 255, 153},
}};

inline Rgb community_color(int community) {
  if (community < 0) return {153, 153, 153};
  return kPalette[static_cast<std::size_t>(community) % kPalette.size()];
}

namespace detail {

inline void sort_view(GraphView& v) {
  std::sort(v.nodes.begin(), v.nodes.end(), [](const ViewNode& a, const ViewNode& b) {
    return a.id < b.id;
  });
  std::sort(v.edges.begin(), v.edges.end(), [](const ViewEdge& a, const ViewEdge& b) {
    return a.source != b.source ? a.source < b.source : a.target < b.target;
  });
}

}  // namespace detail

// Node ids are the labels, so ordering by id is ordering by label.
inline GraphView view_of(const CoocGraph& g, const Partition* partition = nullptr) {
  if (partition && partition->community.size() != g.node_count()) {
    throw ContractError("partition does not cover the graph");
  }
  GraphView v;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    v.nodes.push_back({g.label(i), g.label(i), static_cast<double>(g.frequency(i)),
                       partition ? partition->community[i] : -1, std::nullopt});
  }
  for (const auto& e : g.edges()) {
    auto a = g.label(e.a), b = g.label(e.b);
    if (b < a) std::swap(a, b);
    v.edges.push_back({a, b, e.weight});
  }
  detail::sort_view(v);
  return v;
}

// Evolution view: directed predecessor -> descendant edges, nodes keyed by
// topic id (labels repeat across topics).
inline GraphView view_of(const std::vector<sep::SepViewRow>& rows) {
  GraphView v;
  v.directed = true;
  for (const auto& r : rows) {
    if (r.kind == "node") {
      v.nodes.push_back({r.id, r.label, r.size, r.color, r.birth_year});
    } else {
      v.edges.push_back({r.source, r.target, r.weight});
    }
  }
  detail::sort_view(v);
  return v;
}

inline json view_to_json(const GraphView& v) {
  json nodes = json::array(), edges = json::array();
  for (const auto& n : v.nodes) {
    nodes.push_back({{"id", n.id}, {"label", n.label}, {"size", n.size}, {"community", n.community},
                     {"year", n.year ? json(*n.year) : json(nullptr)}});
  }
  for (const auto& e : v.edges) edges.push_back({{"source", e.source}, {"target", e.target}, {"weight", e.weight}});
  return {{"directed", v.directed}, {"nodes", nodes}, {"edges", edges}};
}

inline GraphView view_from_json(const json& j) {
  try {
    GraphView v;
    v.directed = j.at("directed").get<bool>();
    for (const auto& n : j.at("nodes")) {
      ViewNode node{n.at("id").get<std::string>(), n.at("label").get<std::string>(), n.at("size").get<double>(),
                    n.at("community").get<int>(), std::nullopt};
      if (!n.at("year").is_null()) node.year = n.at("year").get<int>();
      v.nodes.push_back(std::move(node));
    }
    for (const auto& e : j.at("edges")) {
      v.edges.push_back({e.at("source").get<std::string>(), e.at("target").get<std::string>(),
                         e.at("weight").get<double>()});
    }
    return v;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed graph view JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// XML helpers

namespace detail {

// Escapes for attribute values. Control characters that XML 1.0 cannot carry
// become spaces; tab/newline/CR are written as references so parsers do not
// normalize them away.
inline std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      case '\t': out += "&#9;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      default:
        out += static_cast<unsigned char>(c) < 0x20 ? ' ' : c;
    }
  }
  return out;
}

inline std::string attr(std::string_view name, std::string_view value) {
  return " " + std::string(name) + "=\"" + xml_escape(value) + "\"";
}

inline bool any_year(const GraphView& v) {
  return std::any_of(v.nodes.begin(), v.nodes.end(), [](const ViewNode& n) { return n.year.has_value(); });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// GEXF

inline std::string gexf_to_string(const GraphView& v) {
  using detail::attr;
  const bool years = detail::any_year(v);
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<gexf xmlns=\"http://www.gexf.net/1.2draft\" xmlns:viz=\"http://www.gexf.net/1.2draft/viz\" "
         "version=\"1.2\">\n";
  out += "  <graph mode=\"static\" defaultedgetype=\"";
  out += v.directed ? "directed" : "undirected";
  out += "\">\n";
  out += "    <attributes class=\"node\">\n";
  out += "      <attribute id=\"0\" title=\"frequency\" type=\"double\"/>\n";
  out += "      <attribute id=\"1\" title=\"community\" type=\"integer\"/>\n";
  if (years) out += "      <attribute id=\"2\" title=\"birth_year\" type=\"integer\"/>\n";
  out += "    </attributes>\n";
  out += "    <nodes>\n";
  for (const auto& n : v.nodes) {
    auto c = community_color(n.community);
    out += "      <node" + attr("id", n.id) + attr("label", n.label) + ">\n";
    out += "        <attvalues>\n";
    out += "          <attvalue for=\"0\"" + attr("value", text::format_double(n.size)) + "/>\n";
    out += "          <attvalue for=\"1\"" + attr("value", std::to_string(n.community)) + "/>\n";
    if (n.year) out += "          <attvalue for=\"2\"" + attr("value", std::to_string(*n.year)) + "/>\n";
    out += "        </attvalues>\n";
    out += "        <viz:size" + attr("value", text::format_double(n.size)) + "/>\n";
    out += "        <viz:color" + attr("r", std::to_string(c.r)) + attr("g", std::to_string(c.g)) +
           attr("b", std::to_string(c.b)) + "/>\n";
    out += "      </node>\n";
  }
  out += "    </nodes>\n";
  out += "    <edges>\n";
  for (std::size_t i = 0; i < v.edges.size(); ++i) {
    const auto& e = v.edges[i];
    out += "      <edge" + attr("id", std::to_string(i)) + attr("source", e.source) + attr("target", e.target) +
           attr("weight", text::format_double(e.weight)) + "/>\n";
  }
  out += "    </edges>\n";
  out += "  </graph>\n";
  out += "</gexf>\n";
  return out;
}

inline void write_gexf(const GraphView& v, const std::filesystem::path& path) {
  text::write_file(path, gexf_to_string(v));
}

namespace detail {

namespace pt = boost::property_tree;

inline const pt::ptree* child(const pt::ptree& t, const std::string& key) {
  auto it = t.find(key);
  return it == t.not_found() ? nullptr : &it->second;
}

inline std::string xml_attr(const pt::ptree& t, const std::string& name) {
  auto v = t.get_optional<std::string>("<xmlattr>." + name);
  if (!v) throw FormatError("missing attribute '" + name + "'");
  return *v;
}

inline int parse_int(const std::string& s) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw FormatError("not an integer: '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw FormatError("not an integer: '" + s + "'");
  }
}

}  // namespace detail

// Reads the subset of GEXF this module writes: node attributes by title
// (frequency, community, birth_year), native edge weights, edge direction.
inline GraphView gexf_from_string(const std::string& doc) {
  namespace pt = boost::property_tree;
  pt::ptree root;
  try {
    std::istringstream in(doc);
    pt::read_xml(in, root);
  } catch (const pt::xml_parser_error& e) {
    throw FormatError(std::string("malformed GEXF: ") + e.what());
  }
  const auto* gexf = detail::child(root, "gexf");
  const auto* graph = gexf ? detail::child(*gexf, "graph") : nullptr;
  if (!graph) throw FormatError("GEXF document has no graph element");

  GraphView v;
  v.directed = graph->get("<xmlattr>.defaultedgetype", std::string("undirected")) == "directed";

  std::map<std::string, std::string> title_of;  // attribute id -> title
  for (const auto& [key, block] : *graph) {
    if (key != "attributes" || block.get("<xmlattr>.class", std::string()) != "node") continue;
    for (const auto& [k, a] : block) {
      if (k == "attribute") title_of[detail::xml_attr(a, "id")] = detail::xml_attr(a, "title");
    }
  }

  if (const auto* nodes = detail::child(*graph, "nodes")) {
    for (const auto& [key, n] : *nodes) {
      if (key != "node") continue;
      ViewNode node;
      node.id = detail::xml_attr(n, "id");
      node.label = n.get("<xmlattr>.label", node.id);
      if (const auto* values = detail::child(n, "attvalues")) {
        for (const auto& [k, av] : *values) {
          if (k != "attvalue") continue;
          auto title = title_of.find(detail::xml_attr(av, "for"));
          if (title == title_of.end()) throw FormatError("attvalue refers to an undeclared attribute");
          auto value = detail::xml_attr(av, "value");
          if (title->second == "frequency") {
            node.size = text::parse_double(value);
          } else if (title->second == "community") {
            node.community = detail::parse_int(value);
          } else if (title->second == "birth_year") {
            node.year = detail::parse_int(value);
          }
        }
      }
      v.nodes.push_back(std::move(node));
    }
  }
  if (const auto* edges = detail::child(*graph, "edges")) {
    for (const auto& [key, e] : *edges) {
      if (key != "edge") continue;
      v.edges.push_back({detail::xml_attr(e, "source"), detail::xml_attr(e, "target"),
                         text::parse_double(e.get("<xmlattr>.weight", std::string("1")))});
    }
  }
  return v;
}

inline GraphView read_gexf(const std::filesystem::path& path) { return gexf_from_string(text::read_file(path)); }

// ---------------------------------------------------------------------------
// GraphML

inline std::string graphml_to_string(const GraphView& v) {
  using detail::attr;
  const bool years = detail::any_year(v);
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n";
  out += "  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n";
  out += "  <key id=\"frequency\" for=\"node\" attr.name=\"frequency\" attr.type=\"double\"/>\n";
  out += "  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n";
  if (years) out += "  <key id=\"birth_year\" for=\"node\" attr.name=\"birth_year\" attr.type=\"int\"/>\n";
  out += "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n";
  out += "  <graph id=\"G\" edgedefault=\"";
  out += v.directed ? "directed" : "undirected";
  out += "\">\n";
  for (const auto& n : v.nodes) {
    out += "    <node" + attr("id", n.id) + ">\n";
    out += "      <data key=\"label\">" + detail::xml_escape(n.label) + "</data>\n";
    out += "      <data key=\"frequency\">" + text::format_double(n.size) + "</data>\n";
    out += "      <data key=\"community\">" + std::to_string(n.community) + "</data>\n";
    if (n.year) out += "      <data key=\"birth_year\">" + std::to_string(*n.year) + "</data>\n";
    out += "    </node>\n";
  }
  for (const auto& e : v.edges) {
    out += "    <edge" + attr("source", e.source) + attr("target", e.target) + ">\n";
    out += "      <data key=\"weight\">" + text::format_double(e.weight) + "</data>\n";
    out += "    </edge>\n";
  }
  out += "  </graph>\n";
  out += "</graphml>\n";
  return out;
}

inline void write_graphml(const GraphView& v, const std::filesystem::path& path) {
  text::write_file(path, graphml_to_string(v));
}

// ---------------------------------------------------------------------------
// CSV node and edge lists

inline std::string nodes_to_csv(const GraphView& v) {
  std::string out = text::csv_line({"id", "label", "size", "community", "year"});
  for (const auto& n : v.nodes) {
    out += text::csv_line({n.id, n.label, text::format_double(n.size), std::to_string(n.community),
                           n.year ? std::to_string(*n.year) : ""});
  }
  return out;
}

inline std::string edges_to_csv(const GraphView& v) {
  std::string out = text::csv_line({"source", "target", "weight"});
  for (const auto& e : v.edges) out += text::csv_line({e.source, e.target, text::format_double(e.weight)});
  return out;
}

}  // namespace bibliograph::exporter

#include "gflowx/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace gflowx {

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, p);
}

struct LineReader {
  explicit LineReader(const std::string& text) : in(text) {}
  std::istringstream in;
  std::string line;
  int line_no = 0;

  bool next() {
    ++line_no;
    return static_cast<bool>(std::getline(in, line));
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("dataset parse error at line " +
                             std::to_string(line_no) + ": " + what);
  }
  // next line must be "<key>" or "<key> <payload>"; returns the payload
  std::string field(const std::string& key) {
    if (!next()) {
      ++line_no;
      fail("unexpected end of file, expected field '" + key + "'");
    }
    if (line == key) return "";
    if (line.size() > key.size() && line.compare(0, key.size(), key) == 0 &&
        line[key.size()] == ' ') {
      return line.substr(key.size() + 1);
    }
    fail("expected field '" + key + "', got '" + line + "'");
  }
};

class TokenParser {
 public:
  // owns the payload: call sites pass the temporary from LineReader::field
  TokenParser(std::string s, const LineReader& reader)
      : s_(std::move(s)), reader_(reader) {}

  long long integer(const std::string& what) {
    skip_space();
    long long v = 0;
    auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc()) reader_.fail("bad integer for " + what);
    pos_ = static_cast<std::size_t>(p - s_.data());
    return v;
  }
  std::uint64_t unsigned_integer(const std::string& what) {
    skip_space();
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc()) reader_.fail("bad integer for " + what);
    pos_ = static_cast<std::size_t>(p - s_.data());
    return v;
  }
  double real(const std::string& what) {
    skip_space();
    double v = 0;
    auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc()) reader_.fail("bad real for " + what);
    pos_ = static_cast<std::size_t>(p - s_.data());
    return v;
  }
  bool at_end() {
    skip_space();
    return pos_ >= s_.size();
  }

 private:
  void skip_space() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }
  const std::string s_;
  const LineReader& reader_;
  std::size_t pos_ = 0;
};

std::vector<int> parse_int_row(const std::string& payload, int count,
                               const LineReader& reader, const std::string& what) {
  TokenParser tp(payload, reader);
  std::vector<int> out(count);
  for (int i = 0; i < count; ++i) out[i] = static_cast<int>(tp.integer(what));
  if (!tp.at_end()) reader.fail("trailing tokens after " + what);
  return out;
}

}  // namespace

std::string serialize_dataset(const Dataset& ds) {
  std::string out;
  out += "gflowx-dataset v1\n";
  out += "task ";
  out += ds.task == Task::kNode ? "node" : "graph";
  out += "\nclasses " + std::to_string(ds.num_classes);
  const int d = ds.graphs.empty() ? 0 : ds.graphs.front().feature_dim();
  out += "\nfeature_dim " + std::to_string(d);
  out += "\nsplit_seed " + std::to_string(ds.split_seed);
  out += "\ninstances " + std::to_string(ds.instances.size());
  out += "\ni";
  for (int id : ds.instances) out += " " + std::to_string(id);
  out += "\ngraphs " + std::to_string(ds.graphs.size()) + "\n";
  for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
    const Graph& g = ds.graphs[gi];
    out += "graph " + std::to_string(gi);
    out += "\nnodes " + std::to_string(g.num_nodes());
    out += "\nedges " + std::to_string(g.num_edges());
    out += "\ngraph_label ";
    out += g.graph_label() < 0 ? "none" : std::to_string(g.graph_label());
    out += "\n";
    for (const auto& [u, v] : g.edges()) {
      out += "e " + std::to_string(u) + " " + std::to_string(v) + "\n";
    }
    out += "features\n";
    for (int i = 0; i < g.num_nodes(); ++i) {
      for (int j = 0; j < g.feature_dim(); ++j) {
        if (j) out += ' ';
        append_double(out, g.features()(i, j));
      }
      out += '\n';
    }
    out += g.has_node_labels() ? "node_labels yes\nl" : "node_labels no";
    if (g.has_node_labels()) {
      for (int l : g.node_labels()) out += " " + std::to_string(l);
    }
    out += "\nmotif_nodes ";
    out += g.motif_nodes.empty() ? "no" : "yes\nm";
    if (!g.motif_nodes.empty()) {
      for (char c : g.motif_nodes) out += c ? " 1" : " 0";
    }
    out += "\nmotif_edges ";
    out += g.motif_edges.empty() ? "no" : "yes\nm";
    if (!g.motif_edges.empty()) {
      for (char c : g.motif_edges) out += c ? " 1" : " 0";
    }
    out += "\nend_graph\n";
  }
  out += "end_dataset\n";
  return out;
}

Dataset parse_dataset(const std::string& text) {
  LineReader reader(text);
  if (!reader.next() || reader.line != "gflowx-dataset v1") {
    reader.fail("missing header 'gflowx-dataset v1'");
  }
  Dataset ds;
  {
    const std::string t = reader.field("task");
    if (t == "node") {
      ds.task = Task::kNode;
    } else if (t == "graph") {
      ds.task = Task::kGraph;
    } else {
      reader.fail("task must be 'node' or 'graph', got '" + t + "'");
    }
  }
  {
    TokenParser tp(reader.field("classes"), reader);
    ds.num_classes = static_cast<int>(tp.integer("classes"));
    if (ds.num_classes < 1) reader.fail("classes must be >= 1");
  }
  int feature_dim = 0;
  {
    TokenParser tp(reader.field("feature_dim"), reader);
    feature_dim = static_cast<int>(tp.integer("feature_dim"));
    if (feature_dim < 1) reader.fail("feature_dim must be >= 1");
  }
  {
    TokenParser tp(reader.field("split_seed"), reader);
    ds.split_seed = tp.unsigned_integer("split_seed");
  }
  int num_instances = 0;
  {
    TokenParser tp(reader.field("instances"), reader);
    num_instances = static_cast<int>(tp.integer("instances"));
  }
  ds.instances = parse_int_row(reader.field("i"), num_instances, reader, "instance ids");
  int num_graphs = 0;
  {
    TokenParser tp(reader.field("graphs"), reader);
    num_graphs = static_cast<int>(tp.integer("graphs"));
    if (num_graphs < 1) reader.fail("graphs must be >= 1");
  }
  if (ds.task == Task::kNode && num_graphs != 1) {
    reader.fail("node task requires exactly one graph");
  }

  for (int gi = 0; gi < num_graphs; ++gi) {
    {
      TokenParser tp(reader.field("graph"), reader);
      if (tp.integer("graph index") != gi) reader.fail("graph records out of order");
    }
    int n = 0, m = 0, graph_label = -1;
    {
      TokenParser tp(reader.field("nodes"), reader);
      n = static_cast<int>(tp.integer("nodes"));
    }
    {
      TokenParser tp(reader.field("edges"), reader);
      m = static_cast<int>(tp.integer("edges"));
    }
    {
      const std::string gl = reader.field("graph_label");
      if (gl != "none") {
        TokenParser tp(gl, reader);
        graph_label = static_cast<int>(tp.integer("graph_label"));
        if (graph_label < 0 || graph_label >= ds.num_classes) {
          reader.fail("graph label outside declared class count");
        }
      }
    }
    std::vector<std::pair<int, int>> edges(m);
    for (int ei = 0; ei < m; ++ei) {
      TokenParser tp(reader.field("e"), reader);
      edges[ei].first = static_cast<int>(tp.integer("edge endpoint"));
      edges[ei].second = static_cast<int>(tp.integer("edge endpoint"));
      if (!tp.at_end()) reader.fail("trailing tokens after edge");
    }
    reader.field("features");
    Eigen::MatrixXd feats(n, feature_dim);
    for (int i = 0; i < n; ++i) {
      if (!reader.next()) reader.fail("unexpected end of file in features");
      TokenParser tp(reader.line, reader);
      for (int j = 0; j < feature_dim; ++j) feats(i, j) = tp.real("feature");
      if (!tp.at_end()) reader.fail("feature row has too many values");
    }
    std::vector<int> labels;
    if (reader.field("node_labels") == "yes") {
      labels = parse_int_row(reader.field("l"), n, reader, "node labels");
      for (int l : labels) {
        if (l < 0 || l >= ds.num_classes) {
          reader.fail("node label outside declared class count");
        }
      }
    }

    Graph g(n, std::move(edges), std::move(feats), std::move(labels), graph_label);
    if (g.num_edges() != m) {
      reader.fail("duplicate or mirrored edges in graph record");
    }
    if (reader.field("motif_nodes") == "yes") {
      const auto row = parse_int_row(reader.field("m"), n, reader, "motif node mask");
      g.motif_nodes.assign(row.begin(), row.end());
    }
    if (reader.field("motif_edges") == "yes") {
      const auto row = parse_int_row(reader.field("m"), m, reader, "motif edge mask");
      g.motif_edges.assign(row.begin(), row.end());
    }
    reader.field("end_graph");
    ds.graphs.push_back(std::move(g));
  }
  reader.field("end_dataset");

  const int limit = ds.task == Task::kNode ? ds.graphs.front().num_nodes()
                                           : static_cast<int>(ds.graphs.size());
  for (int id : ds.instances) {
    if (id < 0 || id >= limit) reader.fail("instance id out of range");
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const std::string text = serialize_dataset(ds);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str());
}

}  // namespace gflowx

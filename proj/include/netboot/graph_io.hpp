#pragma once

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "netboot/diagnostics.hpp"
#include "netboot/error.hpp"
#include "netboot/graph.hpp"

namespace netboot::io {

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(std::move(tok));
  return out;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

inline std::optional<double> parse_double(std::string_view s) {
  // from_chars for double is unavailable on older libstdc++; strtod on a copy instead.
  std::string copy(s);
  char* end = nullptr;
  const double v = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size()) return std::nullopt;
  return v;
}

inline std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

inline bool numeric_less(const std::string& a, const std::string& b) {
  const auto ia = parse_int(a), ib = parse_int(b);
  if (ia && ib) return *ia < *ib;
  if (ia != ib && (ia || ib)) return ia.has_value();
  return a < b;
}

}  // namespace detail

/// Reads `u v` lines. If every token is a non-negative integer they are taken as 0-based
/// indices (n = max index + 1, or the `# n=<count>` header if present); otherwise tokens
/// are node labels numbered in order of first appearance. Lines starting with '#' or '%'
/// are comments. Edges are symmetrized, duplicates collapse and self-loops are dropped.
inline AdjacencyMatrix read_edge_list(std::istream& in, const std::string& source = "<edge list>") {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::optional<std::size_t> declared_n;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#' || line[0] == '%') {
      const auto pos = line.find("n=");
      if (pos != std::string::npos) {
        const auto v = detail::parse_int(detail::split_ws(line.substr(pos + 2)).at(0));
        if (v && *v >= 0) declared_n = static_cast<std::size_t>(*v);
      }
      continue;
    }
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 2)
      throw InvalidArgument(detail::where(source, line_no) + "expected two node identifiers");
    pairs.emplace_back(tok[0], tok[1]);
  }

  bool numeric = true;
  std::int64_t max_index = -1;
  for (const auto& [a, b] : pairs) {
    for (const auto* s : {&a, &b}) {
      const auto v = detail::parse_int(*s);
      if (!v || *v < 0) {
        numeric = false;
        break;
      }
      max_index = std::max(max_index, *v);
    }
    if (!numeric) break;
  }

  std::vector<Edge> edges;
  std::size_t self_loops = 0;
  if (numeric) {
    std::size_t n = static_cast<std::size_t>(max_index + 1);
    if (declared_n) {
      if (*declared_n < n) throw InvalidArgument(source + ": node index exceeds declared n");
      n = *declared_n;
    }
    for (const auto& [a, b] : pairs) {
      const auto u = static_cast<NodeIndex>(*detail::parse_int(a));
      const auto v = static_cast<NodeIndex>(*detail::parse_int(b));
      if (u == v) {
        ++self_loops;
        continue;
      }
      edges.push_back({u, v});
    }
    if (self_loops > 0) warn(source + ": dropped " + std::to_string(self_loops) + " self-loop(s)");
    return AdjacencyMatrix::from_edges(n, edges);
  }

  std::unordered_map<std::string, NodeIndex> index;
  std::vector<std::string> labels;
  auto id = [&](const std::string& s) {
    auto [it, inserted] = index.emplace(s, static_cast<NodeIndex>(labels.size()));
    if (inserted) labels.push_back(s);
    return it->second;
  };
  for (const auto& [a, b] : pairs) {
    const NodeIndex u = id(a), v = id(b);
    if (u == v) {
      ++self_loops;
      continue;
    }
    edges.push_back({u, v});
  }
  if (self_loops > 0) warn(source + ": dropped " + std::to_string(self_loops) + " self-loop(s)");
  return AdjacencyMatrix::from_edges(labels.size(), edges).with_labels(std::move(labels));
}

/// Writes a `# n=<count>` header and one `u<TAB>v` line per edge (u < v, 0-based).
inline void write_edge_list(std::ostream& out, const AdjacencyMatrix& A) {
  out << "# n=" << A.n() << '\n';
  for (const auto& e : A.edges()) out << e.u << '\t' << e.v << '\n';
}

/// Matrix Market coordinate reader. Accepts pattern/integer/real fields and
/// general/symmetric storage; any nonzero off-diagonal entry becomes an undirected edge.
inline AdjacencyMatrix read_matrix_market(std::istream& in,
                                          const std::string& source = "<matrix market>") {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw InvalidArgument(source + ": empty file");
  ++line_no;
  std::string lower = line;
  std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
  if (lower.rfind("%%matrixmarket", 0) != 0)
    throw InvalidArgument(detail::where(source, line_no) + "missing %%MatrixMarket banner");
  const auto banner = detail::split_ws(lower);
  if (banner.size() < 5 || banner[1] != "matrix" || banner[2] != "coordinate")
    throw InvalidArgument(detail::where(source, line_no) + "only coordinate matrices are supported");
  const bool pattern = banner[3] == "pattern";
  if (!pattern && banner[3] != "integer" && banner[3] != "real")
    throw InvalidArgument(detail::where(source, line_no) + "unsupported field '" + banner[3] + "'");
  if (banner[4] != "general" && banner[4] != "symmetric")
    throw InvalidArgument(detail::where(source, line_no) + "unsupported symmetry '" + banner[4] + "'");

  std::size_t rows = 0, cols = 0, nnz = 0;
  bool have_size = false;
  std::vector<Edge> edges;
  std::size_t read = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (!have_size) {
      if (tok.size() != 3) throw InvalidArgument(detail::where(source, line_no) + "bad size line");
      const auto r = detail::parse_int(tok[0]), c = detail::parse_int(tok[1]), z = detail::parse_int(tok[2]);
      if (!r || !c || !z || *r < 0 || *c < 0 || *z < 0)
        throw InvalidArgument(detail::where(source, line_no) + "bad size line");
      rows = static_cast<std::size_t>(*r);
      cols = static_cast<std::size_t>(*c);
      nnz = static_cast<std::size_t>(*z);
      if (rows != cols) throw InvalidArgument(source + ": adjacency matrix must be square");
      have_size = true;
      continue;
    }
    if (tok.size() < (pattern ? 2u : 3u))
      throw InvalidArgument(detail::where(source, line_no) + "bad entry");
    const auto i = detail::parse_int(tok[0]), j = detail::parse_int(tok[1]);
    if (!i || !j || *i < 1 || *j < 1 || static_cast<std::size_t>(*i) > rows ||
        static_cast<std::size_t>(*j) > cols)
      throw InvalidArgument(detail::where(source, line_no) + "entry index out of range");
    ++read;
    if (!pattern) {
      const auto v = detail::parse_double(tok[2]);
      if (!v) throw InvalidArgument(detail::where(source, line_no) + "bad entry value");
      if (*v == 0.0) continue;
    }
    if (*i == *j) continue;
    edges.push_back({static_cast<NodeIndex>(*i - 1), static_cast<NodeIndex>(*j - 1)});
  }
  if (!have_size) throw InvalidArgument(source + ": missing size line");
  if (read != nnz)
    throw InvalidArgument(source + ": expected " + std::to_string(nnz) + " entries, found " +
                          std::to_string(read));
  return AdjacencyMatrix::from_edges(rows, edges);
}

/// Writes `coordinate pattern symmetric` with the lower triangle, 1-based.
inline void write_matrix_market(std::ostream& out, const AdjacencyMatrix& A) {
  out << "%%MatrixMarket matrix coordinate pattern symmetric\n";
  out << A.n() << ' ' << A.n() << ' ' << A.edge_count() << '\n';
  for (const auto& e : A.edges()) out << (e.v + 1) << ' ' << (e.u + 1) << '\n';
}

/// Picks the reader from the file extension (.mtx -> Matrix Market, otherwise edge list).
inline AdjacencyMatrix load_adjacency(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".mtx") return read_matrix_market(in, path);
  return read_edge_list(in, path);
}

struct ContactWindow {
  AdjacencyMatrix graph;            ///< node labels are the participant ids
  std::vector<std::string> classes; ///< per node; empty string when unknown
  std::size_t contacts_in_window = 0;
};

/// Reads a roster of `id class [...]` lines (SocioPatterns metadata layout).
inline std::vector<std::pair<std::string, std::string>> read_roster(std::istream& in,
                                                                    const std::string& source) {
  std::vector<std::pair<std::string, std::string>> roster;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (!ids.insert(tok[0]).second) throw InvalidArgument(detail::where(source, line_no) + "duplicate id " + tok[0]);
    roster.emplace_back(tok[0], tok.size() > 1 ? tok[1] : std::string());
  }
  return roster;
}

/// Builds one graph from a contact list of `t i j [class_i class_j]` lines: an edge
/// joins i and j iff they have at least one contact with window_start <= t < window_end.
/// The node set is the roster when given, otherwise every id in the whole file, so an
/// empty window still yields the full node set.
inline ContactWindow ingest_contacts(
    std::istream& contacts, std::int64_t window_start, std::int64_t window_end,
    const std::optional<std::vector<std::pair<std::string, std::string>>>& roster = std::nullopt,
    const std::string& source = "<contacts>") {
  netboot::detail::require(window_start < window_end, "contact window must satisfy start < end");
  struct Contact {
    std::int64_t t;
    std::string i, j;
  };
  std::vector<Contact> rows;
  std::map<std::string, std::string> class_of;
  std::size_t line_no = 0;
  for (std::string line; std::getline(contacts, line);) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 3 && tok.size() != 5)
      throw InvalidArgument(detail::where(source, line_no) +
                            "expected `t i j` or `t i j class_i class_j`");
    const auto t = detail::parse_int(tok[0]);
    if (!t) throw InvalidArgument(detail::where(source, line_no) + "timestamp is not an integer");
    if (tok[1] == tok[2]) throw InvalidArgument(detail::where(source, line_no) + "contact with self");
    rows.push_back({*t, tok[1], tok[2]});
    if (tok.size() == 5) {
      class_of.emplace(tok[1], tok[3]);
      class_of.emplace(tok[2], tok[4]);
    }
  }

  std::vector<std::string> ids;
  if (roster) {
    for (const auto& [id, cls] : *roster) {
      ids.push_back(id);
      if (!cls.empty()) class_of[id] = cls;
    }
  } else {
    std::vector<std::string> seen;
    for (const auto& c : rows) {
      seen.push_back(c.i);
      seen.push_back(c.j);
    }
    std::sort(seen.begin(), seen.end(), detail::numeric_less);
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    ids = std::move(seen);
  }
  std::unordered_map<std::string, NodeIndex> index;
  for (std::size_t k = 0; k < ids.size(); ++k) index.emplace(ids[k], static_cast<NodeIndex>(k));

  std::vector<Edge> edges;
  std::size_t in_window = 0;
  for (const auto& c : rows) {
    if (c.t < window_start || c.t >= window_end) continue;
    const auto a = index.find(c.i), b = index.find(c.j);
    if (a == index.end() || b == index.end())
      throw InvalidArgument(source + ": participant " + (a == index.end() ? c.i : c.j) +
                            " is missing from the roster");
    edges.push_back({a->second, b->second});
    ++in_window;
  }
  ContactWindow out;
  out.graph = AdjacencyMatrix::from_edges(ids.size(), edges).with_labels(ids);
  out.classes.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = class_of.find(id);
    out.classes.push_back(it == class_of.end() ? std::string() : it->second);
  }
  out.contacts_in_window = in_window;
  return out;
}

}  // namespace netboot::io

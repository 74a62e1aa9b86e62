#pragma once

// Implementations of the netboot subcommands. Each command reads plain parameter structs
// and writes its artifacts into the output directory; argument parsing lives in main.cpp.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "netboot/netboot.hpp"

namespace netboot::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  fs::path out = "netboot-out";
};

/// Synthetic model selection shared by `generate` and `validate`.
struct ModelOptions {
  std::string preset = "mmsbm3";
  std::optional<std::size_t> n;
  std::string block_matrix;  ///< "a,b;c,d" rows separated by ';'
  double alpha = 1.0;
};

using SyntheticModel = std::variant<SbmSpec, MmsbmSpec>;

inline Eigen::MatrixXd parse_block_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream all(text);
  for (std::string row; std::getline(all, row, ';');) {
    std::vector<double> values;
    std::stringstream cells(row);
    for (std::string cell; std::getline(cells, cell, ',');) {
      const auto v = io::detail::parse_double(cell);
      if (!v) throw InvalidArgument("block matrix: '" + cell + "' is not a number");
      values.push_back(*v);
    }
    rows.push_back(std::move(values));
  }
  const auto c = static_cast<Eigen::Index>(rows.size());
  detail::require(c > 0, "block matrix is empty");
  Eigen::MatrixXd B(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    detail::require(static_cast<Eigen::Index>(rows[i].size()) == c, "block matrix must be square");
    for (Eigen::Index j = 0; j < c; ++j) B(i, j) = rows[i][j];
  }
  return B;
}

inline Eigen::MatrixXd two_block_example_matrix() {
  Eigen::MatrixXd B(2, 2);
  B << 0.5, 0.2,
       0.2, 0.5;
  return B;
}

/// Presets: mmsbm3 (n=300, three communities, alpha=1), sbm4 (n=1000, four communities)
/// and sbm2 (n=200, two communities). SBM nodes are assigned to communities uniformly at
/// random from the seed.
inline SyntheticModel build_model(const ModelOptions& o, std::uint64_t seed) {
  if (o.preset == "mmsbm3") {
    MmsbmSpec spec;
    spec.block_matrix = o.block_matrix.empty() ? mmsbm_example_block_matrix() : parse_block_matrix(o.block_matrix);
    spec.n = o.n.value_or(300);
    spec.alpha = Eigen::VectorXd::Constant(spec.block_matrix.rows(), o.alpha);
    spec.validate();
    return spec;
  }
  if (o.preset == "sbm4" || o.preset == "sbm2") {
    const bool four = o.preset == "sbm4";
    Eigen::MatrixXd B = !o.block_matrix.empty() ? parse_block_matrix(o.block_matrix)
                        : four                  ? sbm4_example_block_matrix()
                                                : two_block_example_matrix();
    auto spec = SbmSpec::with_random_assignment(std::move(B), o.n.value_or(four ? 1000 : 200), seed);
    spec.validate();
    return spec;
  }
  throw InvalidArgument("unknown preset '" + o.preset + "' (expected mmsbm3, sbm4 or sbm2)");
}

inline int model_rank(const SyntheticModel& m) {
  return std::visit([](const auto& s) { return static_cast<int>(s.block_matrix.rows()); }, m);
}

inline std::size_t model_n(const SyntheticModel& m) {
  if (const auto* s = std::get_if<SbmSpec>(&m)) return s->n();
  return std::get<MmsbmSpec>(m).n;
}

inline ValidationModel to_validation_model(const SyntheticModel& m) {
  if (const auto* s = std::get_if<SbmSpec>(&m)) return *s;
  return std::get<MmsbmSpec>(m);
}

/// Accumulates the files written by a command, relative to the output directory.
struct Outputs {
  fs::path dir;
  std::vector<std::string> files;

  void text(const std::string& name, const std::string& content) {
    io::write_file_atomic(dir / name, content);
    files.push_back(name);
  }
  void stream(const std::string& name, const std::function<void(std::ostream&)>& writer) {
    io::write_atomic(dir / name, writer);
    files.push_back(name);
  }
  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
};

inline void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& M) {
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << M(i, j);
    out << '\n';
  }
}

inline void write_graph(Outputs& out, const AdjacencyMatrix& A) {
  out.stream("adjacency.mtx", [&](std::ostream& s) { io::write_matrix_market(s, A); });
  out.stream("adjacency.tsv", [&](std::ostream& s) { io::write_edge_list(s, A); });
}

// --- generate ---------------------------------------------------------------------

struct GenerateParams {
  ModelOptions model;
};

inline std::vector<std::string> run_generate(const GlobalOptions& g, const GenerateParams& p) {
  Outputs out{g.out, {}};
  const auto model = build_model(p.model, g.seed);
  const auto graph_seed = derive_seed(g.seed, 0, Stream::Graph);
  if (const auto* sbm = std::get_if<SbmSpec>(&model)) {
    const auto P = sbm_probability_matrix(*sbm);
    const auto A = sample_birg(P, graph_seed);
    write_graph(out, A);
    out.stream("probabilities.csv", [&](std::ostream& s) { write_phat_csv(s, P); });
    out.stream("communities.tsv", [&](std::ostream& s) {
      s << "node\tcommunity\n";
      for (std::size_t i = 0; i < sbm->n(); ++i) s << i << '\t' << sbm->communities[i] << '\n';
    });
    std::cout << "generated SBM: n=" << A.n() << " edges=" << A.edge_count() << '\n';
  } else {
    const auto draw = sample_mmsbm(std::get<MmsbmSpec>(model), graph_seed);
    write_graph(out, draw.adjacency);
    out.stream("probabilities.csv", [&](std::ostream& s) { write_phat_csv(s, draw.probabilities); });
    out.stream("memberships.csv", [&](std::ostream& s) { write_matrix_csv(s, draw.memberships); });
    std::cout << "generated MMSBM: n=" << draw.adjacency.n() << " edges=" << draw.adjacency.edge_count() << '\n';
  }
  return out.files;
}

// --- ingest -----------------------------------------------------------------------

struct IngestParams {
  std::string contacts;
  std::string roster;  ///< optional
  std::int64_t start = 0;
  std::int64_t end = 0;
};

inline std::vector<std::string> run_ingest(const GlobalOptions& g, const IngestParams& p) {
  Outputs out{g.out, {}};
  std::ifstream contacts(p.contacts);
  if (!contacts) throw InvalidArgument("cannot open " + p.contacts);
  std::optional<std::vector<std::pair<std::string, std::string>>> roster;
  if (!p.roster.empty()) {
    std::ifstream r(p.roster);
    if (!r) throw InvalidArgument("cannot open " + p.roster);
    roster = io::read_roster(r, p.roster);
  }
  const auto window = io::ingest_contacts(contacts, p.start, p.end, roster, p.contacts);
  write_graph(out, window.graph);
  out.stream("nodes.tsv", [&](std::ostream& s) {
    s << "node\tid\tclass\n";
    for (std::size_t i = 0; i < window.graph.n(); ++i)
      s << i << '\t' << (*window.graph.node_labels())[i] << '\t' << window.classes[i] << '\n';
  });
  std::cout << "ingested window [" << p.start << ", " << p.end << "): n=" << window.graph.n()
            << " edges=" << window.graph.edge_count() << " contacts=" << window.contacts_in_window << '\n';
  return out.files;
}

/// Class column of a `node id class` table written by `ingest`.
inline std::vector<std::string> read_node_classes(const std::string& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::vector<std::string> classes(n);
  std::vector<bool> seen(n, false);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line_no == 1 && line.rfind("node", 0) == 0) continue;
    std::stringstream cells(line);
    std::string node, id, cls;
    std::getline(cells, node, '\t');
    std::getline(cells, id, '\t');
    std::getline(cells, cls, '\t');
    const auto i = io::detail::parse_int(node);
    if (!i || *i < 0 || static_cast<std::size_t>(*i) >= n)
      throw InvalidArgument(path + ":" + std::to_string(line_no) + ": bad node index");
    classes[static_cast<std::size_t>(*i)] = cls;
    seen[static_cast<std::size_t>(*i)] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw InvalidArgument(path + ": not every node has a row");
  return classes;
}

// --- embed ------------------------------------------------------------------------

struct EmbedParams {
  std::vector<std::string> inputs;
  std::string method = "ase";  ///< ase, ase-full, uase, dilated
  std::optional<int> d;
  int scree = 50;
};

inline std::vector<std::string> run_embed(const GlobalOptions& g, const EmbedParams& p) {
  detail::require(!p.inputs.empty(), "embed needs at least one --input");
  Outputs out{g.out, {}};
  std::vector<AdjacencyMatrix> graphs;
  for (const auto& path : p.inputs) graphs.push_back(io::load_adjacency(path));
  const bool multi = p.method == "uase" || p.method == "dilated";
  if (!multi) {
    detail::require(p.method == "ase" || p.method == "ase-full",
                    "unknown embedding method '" + p.method + "' (expected ase, ase-full, uase or dilated)");
    detail::require(graphs.size() == 1, p.method + " embeds exactly one --input");
  }
  const std::size_t n = graphs.front().n();
  SpectrumInfo spectrum;
  int d = 0;
  if (p.d) {
    d = *p.d;
  } else {
    const int count = std::min<int>(p.scree, static_cast<int>(n));
    spectrum = multi ? uase(graphs, count).spectrum : adjacency_spectrum(graphs.front(), count);
    d = select_dimension_elbow(spectrum);
    std::cout << "elbow selected d=" << d << '\n';
  }
  Embedding e;
  if (p.method == "ase") {
    auto r = ase(graphs.front(), d);
    e = std::move(r.embedding);
    if (p.d) spectrum = r.spectrum;
  } else if (p.method == "ase-full") {
    auto r = ase_alternative_scaling(graphs.front(), d);
    e = std::move(r.embedding);
    if (p.d) spectrum = r.spectrum;
  } else if (p.method == "uase") {
    auto r = uase(graphs, d);
    e = std::move(r.embedding);
    if (p.d) spectrum = r.spectrum;
  } else {
    e = dilated_unfolded_embed(graphs, d);
  }
  spectrum.d_selected = d;
  out.stream("embedding.csv", [&](std::ostream& s) { write_embedding_csv(s, e); });
  out.json_file("spectrum.json", to_json(spectrum));
  return out.files;
}

// --- bootstrap --------------------------------------------------------------------

struct BootstrapParams {
  std::string input;
  std::string method = "ase-knn";
  std::optional<int> k;
  std::optional<int> d;
  std::string embedding;  ///< external embedding CSV for external-knn
  std::size_t B = 100;
  std::string phat_format = "csv";
};

inline BootstrapConfig make_bootstrap_config(const std::string& method, std::optional<int> k, std::optional<int> d,
                                             const std::string& embedding_path, std::size_t n) {
  BootstrapConfig c;
  c.method = parse_bootstrap_method(method);
  detail::require(c.method != BootstrapMethod::TrueResample && c.method != BootstrapMethod::Identity,
                  "method '" + method + "' is only available in the validation harness");
  c.k = k.value_or(5);
  c.d = d;
  if (c.method == BootstrapMethod::Eswr || c.method == BootstrapMethod::EswrPlus) {
    if (k || d) warn("method " + method + " ignores --k and --d");
    c.d.reset();
  }
  if (c.method == BootstrapMethod::ExternalKnn) {
    detail::require(!embedding_path.empty(), "external-knn needs --embedding");
    c.external_embedding = std::make_shared<Embedding>(load_external_embedding(embedding_path, n));
  }
  return c;
}

inline std::vector<std::string> run_bootstrap(const GlobalOptions& g, const BootstrapParams& p) {
  detail::require(p.phat_format == "csv" || p.phat_format == "mtx", "--phat-format must be csv or mtx");
  Outputs out{g.out, {}};
  const auto A = io::load_adjacency(p.input);
  const auto config = make_bootstrap_config(p.method, p.k, p.d, p.embedding, A.n());
  const Resampler resampler(A, config);
  const auto batch = resampler.batch(p.B, g.seed, g.workers);
  const bool knn = config.method == BootstrapMethod::AseKnn || config.method == BootstrapMethod::ExternalKnn;
  write_batch(g.out / "replicates", batch, knn ? std::optional<int>(config.k) : std::nullopt, config.d);
  for (std::size_t b = 0; b < p.B; ++b) out.files.push_back("replicates/replicate_" + std::to_string(b) + ".tsv");
  out.files.push_back("replicates/manifest.json");
  if (batch.phat) {
    if (p.phat_format == "csv")
      out.stream("phat.csv", [&](std::ostream& s) { write_phat_csv(s, *batch.phat); });
    else
      out.stream("phat.mtx", [&](std::ostream& s) { write_phat_matrix_market(s, *batch.phat); });
  }
  std::cout << "wrote " << p.B << " " << to_string(config.method) << " replicates\n";
  return out.files;
}

// --- validate / kscan -------------------------------------------------------------

struct ValidateParams {
  ModelOptions model;
  std::string input;  ///< real-data mode when set
  std::string method = "ase-knn";
  std::optional<int> k;
  std::optional<int> d;
  std::optional<int> test_d;
  std::string embedding;
  std::size_t M = 100;
  int R = 500;
  double threshold = 0.1;
  bool kscan = false;
  std::vector<int> ks;
  int k_step = 1;
};

struct PreparedValidation {
  ValidationModel model;
  HarnessConfig config;
  std::size_t n = 0;
  json params;
};

inline PreparedValidation prepare_validation(const GlobalOptions& g, const ValidateParams& p) {
  PreparedValidation v;
  detail::require(p.M >= 1, "-M must be at least 1");
  detail::require(p.R >= 1, "-R must be at least 1");
  HarnessConfig& c = v.config;
  c.M = p.M;
  c.R = p.R;
  c.seed = g.seed;
  c.workers = g.workers;
  c.valid_threshold = p.threshold;
  c.test_d = p.test_d;
  const auto method = parse_bootstrap_method(p.method);
  if (!p.input.empty()) {
    auto A = io::load_adjacency(p.input);
    v.n = A.n();
    detail::require(method != BootstrapMethod::TrueResample, "true-resample needs a synthetic model");
    if (method == BootstrapMethod::Identity) {
      c.bootstrap.method = method;
      c.bootstrap.d = p.d;
    } else {
      c.bootstrap = make_bootstrap_config(p.method, p.k, p.d, p.embedding, v.n);
    }
    v.model = std::move(A);
    v.params["input"] = p.input;
  } else {
    const auto model = build_model(p.model, g.seed);
    v.n = model_n(model);
    c.bootstrap.method = method;
    c.bootstrap.k = p.k.value_or(5);
    c.bootstrap.d = p.d;
    if (method == BootstrapMethod::ExternalKnn) {
      detail::require(!p.embedding.empty(), "external-knn needs --embedding");
      c.bootstrap.external_embedding = std::make_shared<Embedding>(load_external_embedding(p.embedding, v.n));
    }
    if (!c.test_d && !c.bootstrap.d) c.test_d = model_rank(model);
    if (method == BootstrapMethod::Xxt && !c.bootstrap.d) c.bootstrap.d = model_rank(model);
    v.model = to_validation_model(model);
    v.params["preset"] = p.model.preset;
    v.params["n"] = v.n;
  }
  v.params["k"] = c.bootstrap.k;
  v.params["bootstrap_d"] = c.bootstrap.d ? json(*c.bootstrap.d) : json(nullptr);
  return v;
}

inline std::vector<int> kscan_grid(const ValidateParams& p, std::size_t n) {
  if (!p.ks.empty()) return p.ks;
  detail::require(p.k_step >= 1, "--k-step must be positive");
  std::vector<int> ks;
  for (int k = 2; k <= static_cast<int>(n / 2); k += p.k_step) ks.push_back(k);
  detail::require(!ks.empty(), "k scan needs n >= 4");
  return ks;
}

inline std::vector<std::string> write_kscan(Outputs& out, const PreparedValidation& v,
                                            const std::vector<std::pair<int, ValidityReport>>& scan) {
  json reports = json::array();
  std::vector<std::pair<double, double>> curve;
  for (const auto& [k, r] : scan) {
    HarnessConfig c = v.config;
    c.bootstrap.k = k;
    json params = v.params;
    params["k"] = k;
    reports.push_back(report_json(r, c, params));
    curve.emplace_back(k, r.score);
  }
  out.stream("kscan.csv", [&](std::ostream& s) {
    s << "k,score,classification\n" << std::setprecision(17);
    for (const auto& [k, r] : scan) s << k << ',' << r.score << ',' << to_string(r.classification) << '\n';
  });
  out.json_file("kscan.json", reports);
  out.text("kscan.svg", svg::line_plot(curve, "Bootstrap validity score against k", "k", "score"));
  return out.files;
}

inline std::vector<std::string> run_validate(const GlobalOptions& g, const ValidateParams& p) {
  Outputs out{g.out, {}};
  const auto v = prepare_validation(g, p);
  if (p.kscan) {
    const auto scan = k_scan(v.model, v.config, kscan_grid(p, v.n));
    for (const auto& [k, r] : scan) std::cout << "k=" << k << " S=" << r.score << '\n';
    return write_kscan(out, v, scan);
  }
  const auto result = run_validation_harness(v.model, v.config);
  const auto& r = result.report;
  out.json_file("report.json", report_json(r, v.config, v.params));
  out.stream("qq.csv", [&](std::ostream& s) { write_qq_csv(s, r); });
  out.text("qq.svg", svg::qq_plot(r, std::string(to_string(v.config.bootstrap.method)) + " bootstrap"));
  std::cout << "score=" << r.score << " classification=" << to_string(r.classification) << '\n';
  return out.files;
}

// --- fuzziness --------------------------------------------------------------------

struct FuzzinessParams {
  std::string input;
  std::string classes;  ///< optional nodes.tsv from ingest
  std::string method = "ase-knn";
  std::optional<int> k;
  std::optional<int> d;        ///< bootstrap embedding dimension
  std::optional<int> embed_d;  ///< joint embedding dimension (defaults to d)
  std::size_t B = 100;
  double sd_threshold = 3.0;
  double perplexity = 30.0;
  std::vector<double> scan;
  std::string layout;  ///< external layout CSV
  int iterations = 1000;
};

inline std::vector<std::string> run_fuzziness(const GlobalOptions& g, const FuzzinessParams& p) {
  Outputs out{g.out, {}};
  const auto A = io::load_adjacency(p.input);
  const int joint_d = p.embed_d ? *p.embed_d : p.d ? *p.d : 0;
  detail::require(joint_d >= 1, "fuzziness needs --embed-d or --d");
  const auto config = make_bootstrap_config(p.method, p.k, p.d, "", A.n());
  const auto batch = Resampler(A, config).batch(p.B, g.seed, g.workers);
  const auto [joint, unc] = node_uncertainty(A, batch, joint_d);
  const auto F = fuzziness_matrix(unc, p.sd_threshold, g.workers);
  out.json_file("uncertainty.json", to_json(unc));
  out.stream("fuzziness_edges.tsv", [&](std::ostream& s) { write_fuzziness_edges(s, F); });
  const bool has_pairs = !F.pairs().empty();
  if (!has_pairs) warn("no overlapping node pairs at sd threshold " + std::to_string(p.sd_threshold) +
                       "; fuzziness score omitted");

  TsneOptions tsne_options;
  tsne_options.seed = g.seed;
  tsne_options.iterations = p.iterations;
  tsne_options.perplexity = p.perplexity;
  json score;
  if (!p.scan.empty()) {
    detail::require(p.layout.empty(), "--scan and --layout are mutually exclusive");
    detail::require(has_pairs, "perplexity scan needs overlapping node pairs");
    const auto scan = perplexity_scan(A, F, p.scan, tsne_options);
    std::vector<std::pair<double, double>> curve;
    json rows = json::array();
    for (const auto& s : scan) {
      curve.emplace_back(s.perplexity, s.score);
      rows.push_back({{"perplexity", s.perplexity}, {"score", s.score}, {"argmin", s.argmin}});
      if (s.argmin) tsne_options.perplexity = s.perplexity;
    }
    out.stream("perplexity_scan.csv", [&](std::ostream& s) {
      s << "perplexity,score,argmin\n" << std::setprecision(17);
      for (const auto& r : scan) s << r.perplexity << ',' << r.score << ',' << (r.argmin ? 1 : 0) << '\n';
    });
    out.text("perplexity_scan.svg",
             svg::line_plot(curve, "Fuzziness score against perplexity", "perplexity", "score"));
    score["scan"] = rows;
    std::cout << "perplexity argmin=" << tsne_options.perplexity << '\n';
  }
  Layout2D layout;
  if (!p.layout.empty()) {
    std::ifstream in(p.layout);
    if (!in) throw InvalidArgument("cannot open " + p.layout);
    layout = read_layout_csv(in, A.n(), p.layout);
    score["layout"] = "external";
  } else {
    layout = tsne_layout(A, tsne_options);
    score["layout"] = "tsne";
    score["perplexity"] = tsne_options.perplexity;
  }
  score["sd_threshold"] = p.sd_threshold;
  score["pairs"] = F.pairs().size();
  score["score"] = has_pairs ? json(fuzziness_score(layout, F)) : json(nullptr);
  out.stream("layout.csv", [&](std::ostream& s) { write_layout_csv(s, layout); });
  std::vector<std::string> classes;
  if (!p.classes.empty()) classes = read_node_classes(p.classes, A.n());
  out.text("overlay.svg", svg::fuzziness_overlay(layout, F, p.classes.empty() ? nullptr : &classes,
                                                 "Layout with overlapping pairs"));
  out.json_file("score.json", score);
  if (has_pairs) std::cout << "fuzziness score=" << score["score"].get<double>() << '\n';
  return out.files;
}

}  // namespace netboot::cli

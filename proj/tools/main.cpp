#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

using namespace netboot;
using namespace netboot::cli;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Parsed {
  GlobalOptions global;
  GenerateParams generate;
  IngestParams ingest;
  EmbedParams embed;
  BootstrapParams bootstrap;
  ValidateParams validate;
  FuzzinessParams fuzziness;
  std::string replay_manifest;
};

void add_model_options(CLI::App* sub, ModelOptions& m) {
  sub->add_option("--preset", m.preset, "Synthetic model: mmsbm3, sbm4 or sbm2")->capture_default_str();
  sub->add_option("--n", m.n, "Override the preset node count");
  sub->add_option("--block-matrix", m.block_matrix, "Block matrix as 'a,b;c,d'");
  sub->add_option("--alpha", m.alpha, "Dirichlet concentration (mmsbm3)")->capture_default_str();
}

void add_validate_options(CLI::App* sub, ValidateParams& v) {
  add_model_options(sub, v.model);
  sub->add_option("--input", v.input, "Observed graph (real-data mode); omit for a synthetic model");
  sub->add_option("--method", v.method,
                  "ase-knn, external-knn, xxt, eswr, eswr-plus, true-resample or identity")
      ->capture_default_str();
  sub->add_option("--k", v.k, "Neighbour count, self included (default 5)");
  sub->add_option("--d", v.d, "Bootstrap embedding dimension (default: elbow)");
  sub->add_option("--test-d", v.test_d, "Test embedding dimension (default: --d or the model rank)");
  sub->add_option("--embedding", v.embedding, "External embedding CSV for external-knn");
  sub->add_option("-M,--trials", v.M, "Number of tested pairs")->capture_default_str();
  sub->add_option("-R,--permutations", v.R, "Permutations per test")->capture_default_str();
  sub->add_option("--threshold", v.threshold, "Score threshold for a valid classification")->capture_default_str();
  sub->add_option("--ks", v.ks, "k values for the k scan (default 2..n/2)");
  sub->add_option("--k-step", v.k_step, "Step of the default k grid")->capture_default_str();
}

std::unique_ptr<CLI::App> build_app(Parsed& p) {
  auto app = std::make_unique<CLI::App>("Validated network bootstraps and embedding uncertainty", "netboot");
  app->require_subcommand(1);
  app->set_config("--config", "", "TOML/INI config file; sections are named after subcommands");
  app->add_option("--seed", p.global.seed, "Master seed")->capture_default_str();
  app->add_option("--workers", p.global.workers, "Worker threads (0 = all cores)")
      ->envname("NETBOOT_WORKERS")
      ->capture_default_str();
  app->add_option("--out", p.global.out, "Output directory")->envname("NETBOOT_OUT")->capture_default_str();

  auto* gen = app->add_subcommand("generate", "Sample a synthetic network");
  add_model_options(gen, p.generate.model);

  auto* ing = app->add_subcommand("ingest", "Build one time-window graph from a contact list");
  ing->add_option("--contacts", p.ingest.contacts, "Contact list: t i j [class_i class_j]")->required();
  ing->add_option("--roster", p.ingest.roster, "Participant list: id class");
  ing->add_option("--start", p.ingest.start, "Window start (inclusive, seconds)")->required();
  ing->add_option("--end", p.ingest.end, "Window end (exclusive, seconds)")->required();

  auto* emb = app->add_subcommand("embed", "Spectral embedding of one or more graphs");
  emb->add_option("--input", p.embed.inputs, "Graph file (.mtx or edge list); repeat for multi-network")
      ->required();
  emb->add_option("--method", p.embed.method, "ase, ase-full, uase or dilated")->capture_default_str();
  emb->add_option("--d", p.embed.d, "Embedding dimension (default: elbow)");
  emb->add_option("--scree", p.embed.scree, "Values used for elbow selection")->capture_default_str();

  auto* boot = app->add_subcommand("bootstrap", "Draw bootstrap replicates of a graph");
  boot->add_option("--input", p.bootstrap.input, "Observed graph")->required();
  boot->add_option("--method", p.bootstrap.method, "ase-knn, external-knn, xxt, eswr or eswr-plus")
      ->capture_default_str();
  boot->add_option("--k", p.bootstrap.k, "Neighbour count, self included (default 5)");
  boot->add_option("--d", p.bootstrap.d, "Embedding dimension (default: elbow)");
  boot->add_option("--embedding", p.bootstrap.embedding, "External embedding CSV for external-knn");
  boot->add_option("-B,--replicates", p.bootstrap.B, "Number of replicates")->capture_default_str();
  boot->add_option("--phat-format", p.bootstrap.phat_format, "csv or mtx")->capture_default_str();

  auto* val = app->add_subcommand("validate", "Bootstrap validity over M tested pairs");
  add_validate_options(val, p.validate);
  val->add_flag("--kscan", p.validate.kscan, "Sweep k and report the score curve");

  auto* ksc = app->add_subcommand("kscan", "Validity score as a function of k");
  add_validate_options(ksc, p.validate);

  auto* fz = app->add_subcommand("fuzziness", "Node uncertainty, fuzziness matrix and layout score");
  fz->add_option("--input", p.fuzziness.input, "Observed graph")->required();
  fz->add_option("--classes", p.fuzziness.classes, "nodes.tsv from ingest, for colouring");
  fz->add_option("--method", p.fuzziness.method, "Bootstrap method")->capture_default_str();
  fz->add_option("--k", p.fuzziness.k, "Neighbour count (default 5)");
  fz->add_option("--d", p.fuzziness.d, "Bootstrap embedding dimension (default: elbow)");
  fz->add_option("--embed-d", p.fuzziness.embed_d, "Joint embedding dimension (default: --d)");
  fz->add_option("-B,--replicates", p.fuzziness.B, "Number of replicates")->capture_default_str();
  fz->add_option("--sd-threshold", p.fuzziness.sd_threshold, "Mahalanobis overlap threshold")
      ->capture_default_str();
  fz->add_option("--perplexity", p.fuzziness.perplexity, "t-SNE perplexity")->capture_default_str();
  fz->add_option("--scan", p.fuzziness.scan, "Perplexities to scan; the best one is used for the layout");
  fz->add_option("--layout", p.fuzziness.layout, "External node,x,y layout instead of t-SNE");
  fz->add_option("--iterations", p.fuzziness.iterations, "t-SNE iterations")->capture_default_str();

  auto* rep = app->add_subcommand("replay", "Re-run the command recorded in a manifest.json");
  rep->add_option("--manifest", p.replay_manifest, "Manifest written by a previous run")->required();
  return app;
}

/// Every option of the subcommand that received a value, by long name.
nlohmann::json collect_params(const CLI::App* sub) {
  nlohmann::json params = nlohmann::json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->count() == 0 || opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->get_expected_max() == 0) {
      params[name] = true;
      continue;
    }
    const auto& values = opt->results();
    if (opt->get_items_expected_max() > 1 || values.size() > 1)
      params[name] = values;
    else
      params[name] = values.front();
  }
  return params;
}

std::vector<std::string> replay_argv(const nlohmann::json& manifest, const GlobalOptions& g) {
  const std::string command = manifest.at("command").get<std::string>();
  if (command == "replay") throw InvalidArgument("a replay manifest cannot be replayed");
  std::vector<std::string> args{"netboot", "--seed", std::to_string(manifest.at("seed").get<std::uint64_t>()),
                                "--workers", std::to_string(g.workers), "--out", g.out.string()};
  args.push_back(command);
  for (const auto& [name, value] : manifest.at("params").items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + name);
    } else if (value.is_array()) {
      for (const auto& v : value) {
        args.push_back("--" + name);
        args.push_back(v.get<std::string>());
      }
    } else {
      args.push_back("--" + name);
      args.push_back(value.get<std::string>());
    }
  }
  return args;
}

int dispatch(Parsed& p, CLI::App& app, int depth);

int run(std::vector<std::string> args, int depth) {
  Parsed p;
  auto app = build_app(p);
  try {
    std::reverse(args.begin() + 1, args.end());  // CLI11 consumes a reversed vector
    std::vector<std::string> tail(args.begin() + 1, args.end());
    app->parse(tail);
  } catch (const CLI::ParseError& e) {
    const int code = app->exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  return dispatch(p, *app, depth);
}

int dispatch(Parsed& p, CLI::App& app, int depth) {
  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "replay") {
      if (depth > 0) throw InvalidArgument("nested replay");
      std::ifstream in(p.replay_manifest);
      if (!in) throw InvalidArgument("cannot open " + p.replay_manifest);
      const auto manifest = nlohmann::json::parse(in);
      const bool out_given = app.get_option("--out")->count() > 0 || std::getenv("NETBOOT_OUT") != nullptr;
      GlobalOptions g = p.global;
      if (!out_given) g.out = std::filesystem::path(p.replay_manifest).parent_path();
      return run(replay_argv(manifest, g), depth + 1);
    }
    std::vector<std::string> files;
    if (name == "generate") files = run_generate(p.global, p.generate);
    else if (name == "ingest") files = run_ingest(p.global, p.ingest);
    else if (name == "embed") files = run_embed(p.global, p.embed);
    else if (name == "bootstrap") files = run_bootstrap(p.global, p.bootstrap);
    else if (name == "validate") files = run_validate(p.global, p.validate);
    else if (name == "kscan") {
      p.validate.kscan = true;
      files = run_validate(p.global, p.validate);
    } else if (name == "fuzziness") files = run_fuzziness(p.global, p.fuzziness);

    nlohmann::json manifest;
    manifest["command"] = name;
    manifest["seed"] = p.global.seed;
    manifest["params"] = collect_params(sub);
    manifest["outputs"] = files;
    io::write_file_atomic(p.global.out / "manifest.json", manifest.dump(2) + "\n");
    return 0;
  } catch (const NumericalError& e) {
    std::cerr << "netboot: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InvalidArgument& e) {
    std::cerr << "netboot: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "netboot: bad manifest: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "netboot: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "netboot: error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc), 0);
}

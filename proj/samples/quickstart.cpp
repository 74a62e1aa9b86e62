// Draw an MMSBM network, bootstrap it with ASE-kNN, and check the bootstrap with the
// exchangeability test over a short validation run.

#include <iostream>

#include "netboot/netboot.hpp"

int main() {
  using namespace netboot;

  MmsbmSpec model;
  model.n = 300;
  model.alpha = Eigen::VectorXd::Ones(3);
  model.block_matrix = mmsbm_example_block_matrix();

  const auto draw = sample_mmsbm(model, 7);
  std::cout << "observed: n=" << draw.adjacency.n() << " edges=" << draw.adjacency.edge_count() << '\n';

  BootstrapConfig boot;
  boot.method = BootstrapMethod::AseKnn;
  boot.k = 5;
  boot.d = 3;
  const Resampler resampler(draw.adjacency, boot);
  const auto batch = resampler.batch(10, 11);
  const auto single = exchangeability_test(draw.adjacency, batch.replicates.front(), 3, 200, 13);
  std::cout << "one replicate: t_obs=" << single.t_obs << " p=" << single.p_value << '\n';

  HarnessConfig harness;
  harness.bootstrap = boot;
  harness.M = 40;
  harness.R = 200;
  harness.seed = 17;
  const auto result = run_validation_harness(model, harness);
  std::cout << "validity score over " << harness.M << " pairs: " << result.report.score << " ("
            << to_string(result.report.classification) << ")\n";
}

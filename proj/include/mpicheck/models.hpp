#pragma once

#include <optional>

#include "mpicheck/json_io.hpp"
#include "mpicheck/monitor.hpp"
#include "mpicheck/topology.hpp"

namespace mpicheck {

/// A calculus program bundled with its topology spec.
struct CalculusModel {
  std::string name;
  CommandPtr program;
  TopologySpec spec;
  // Present when the spec is expressible in the JSON expression form.
  std::optional<ExprTopology> expr_spec;
  // Mutant metadata.
  bool expect_deadlock = false;
  std::optional<Axiom> target_axiom;
};

/// Two processes; rank 0 sends tag 0 (payload 5) to rank 1, both wait.
CalculusModel fig5_model();

/// Seven axiom-violating variants of small two-process programs. Each
/// produces at least one violation under the monitor; those flagged
/// expect_deadlock also reach a deadlock with the monitor off.
std::vector<CalculusModel> mutant_models();

/// Ring-forward exchange: per step, rank r sends one value to rank r+1
/// (tags n*(N-1)+r), with a barrier per step and a final gather. The
/// communication skeleton of the linear-convection solver.
CalculusModel convection_model(int nt);

/// Stripe halo exchange: per step, each rank exchanges one message with
/// each neighbor (2(N-1) tags per step), one collective per step, final
/// gather. Poisson decorates the per-step collectives as sum-allreduces;
/// heat uses plain barriers.
CalculusModel poisson_model(int iters);
CalculusModel heat_model(int steps);

}  // namespace mpicheck

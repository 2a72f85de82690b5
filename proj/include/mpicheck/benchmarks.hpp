#pragma once

#include <memory>

#include "mpicheck/runtime.hpp"

namespace mpicheck::pde {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ConvectionConfig {
  int nx = 40;
  int nt = 25;
  double dx = 0.05;
  double dt = 0.025;
  double c = 1.0;
  // Square-wave initial condition: u = u_high on [square_lo, square_hi].
  double square_lo = 0.5;
  double square_hi = 1.0;
  double u_high = 2.0;
  double u_low = 1.0;

  void validate(int n_ranks) const;  // nx divisible by N, CFL at most 1
  double initial(int i) const;
};

struct PoissonConfig {
  int nx = 64;
  int ny = 64;
  int iters = 100;

  double dx() const { return 1.0 / (nx - 1); }
  double dy() const { return 1.0 / (ny - 1); }
  void validate(int n_ranks) const;  // ny divisible by N
  double f_at(int i, int j) const;   // sin(2*pi*x) * sin(2*pi*y)
  std::vector<double> f_grid() const;
};

enum class HeatBoundary { Dirichlet, Periodic };

struct HeatConfig {
  int nx = 32;
  int ny = 32;
  int nt = 10;
  double alpha = 1.0;
  HeatBoundary boundary = HeatBoundary::Dirichlet;  // Periodic is a test variant

  double dx() const { return 1.0 / (nx - 1); }
  double dy() const { return 1.0 / (nx - 1); }
  double dt() const { return 0.2 * dx() * dx() / alpha; }
  void validate(int n_ranks) const;  // ny divisible by N, stripes at least 4 rows
  double initial(int i, int j) const;  // centered hot square
};

// --- kernels -------------------------------------------------------------

double upwind_step(double u, double u_left, const ConvectionConfig& cfg);

void jacobi_row(const double* up, const double* mid, const double* down, const double* f,
                double* out, int nx, double dx2, double dy2);
double residual_row(const double* up, const double* mid, const double* down, const double* f,
                    int nx, double dx2, double dy2);

/// One Jacobi sweep over the interior; boundaries untouched.
LockedArray2D jacobi_step(const LockedArray2D& u, const LockedArray2D& f,
                          const PoissonConfig& cfg);

/// Classical RK4 on du/dt = alpha * laplacian(u) with the 5-point stencil;
/// one step widens the dependence of a cell to Manhattan distance 4.
LockedArray2D rk4_heat_step(const LockedArray2D& u, const HeatConfig& cfg);

/// RK4 step on a raw row-major grid. Stage derivatives are zeroed outside
/// rows [1, rows-1) x cols [1, cols-1) (Dirichlet) or wrap around
/// (Periodic).
std::vector<double> rk4_step_raw(const std::vector<double>& u, int rows, int cols,
                                 const HeatConfig& cfg);

// --- sequential reference solvers (with per-step snapshots) ---------------

struct ConvectionSolution {
  std::vector<std::vector<double>> states;  // nt+1 entries
};
ConvectionSolution convection_sequential(const ConvectionConfig& cfg);

struct PoissonSolution {
  std::vector<std::vector<double>> states;  // iters+1 grids, row-major ny*nx
  std::vector<double> residual_sq;          // per-iteration sum over the interior
  double final_residual() const;
};
PoissonSolution poisson_sequential(const PoissonConfig& cfg);

struct HeatSolution {
  std::vector<std::vector<double>> states;  // nt+1 grids
};
HeatSolution heat_sequential(const HeatConfig& cfg);

// --- runtime topology specs (message payloads from the sequential oracle) -

rt::WorldSpec convection_world_spec(const ConvectionConfig& cfg,
                                    std::shared_ptr<const ConvectionSolution> seq);
rt::WorldSpec poisson_world_spec(const PoissonConfig& cfg,
                                 std::shared_ptr<const PoissonSolution> seq);
rt::WorldSpec heat_world_spec(const HeatConfig& cfg, std::shared_ptr<const HeatSolution> seq);

// --- parallel solvers ------------------------------------------------------

struct PoissonRankResult {
  std::vector<double> grid;  // root only
  double residual = 0.0;     // every rank observes the same global residual
};

void convection_body(rt::World& w, const ConvectionConfig& cfg, std::vector<double>* root_out);
void poisson_body(rt::World& w, const PoissonConfig& cfg, PoissonRankResult* result);
void heat_body(rt::World& w, const HeatConfig& cfg, std::vector<double>* root_out);

// --- equivalence ------------------------------------------------------------

enum class EquivalenceMode { Exact, RelTol };

struct EquivalenceReport {
  bool pass = false;
  double max_rel_dev = 0.0;
  std::ptrdiff_t first_mismatch = -1;  // -1 when none
};

/// Exact: bitwise equality per element. RelTol: max relative deviation at
/// most eps. Throws LockError(ShapeMismatch) on length mismatch.
EquivalenceReport equivalence_check(std::span<const double> parallel,
                                    std::span<const double> sequential, EquivalenceMode mode,
                                    double eps = 0.0);

// --- one-call runners --------------------------------------------------------

enum class ExecMode { Sim, Workers };

struct BenchResult {
  std::vector<double> sequential;  // final sequential output, flat
  std::vector<double> parallel;    // root output, flat (empty if the run failed)
  std::size_t rows = 1, cols = 0;  // output shape
  double seq_residual = 0.0;       // poisson only
  double par_residual = 0.0;       // poisson only
  rt::RunResult run;
};

BenchResult run_convection(const ConvectionConfig& cfg, int n, ExecMode mode,
                           std::uint64_t seed, std::size_t eager_bytes = 4096);
BenchResult run_poisson(const PoissonConfig& cfg, int n, ExecMode mode, std::uint64_t seed,
                        std::size_t eager_bytes = 4096);
BenchResult run_heat(const HeatConfig& cfg, int n, ExecMode mode, std::uint64_t seed,
                     std::size_t eager_bytes = 4096);

}  // namespace mpicheck::pde

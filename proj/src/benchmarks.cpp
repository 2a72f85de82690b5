#include "mpicheck/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mpicheck::pde {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void ConvectionConfig::validate(int n_ranks) const {
  require(n_ranks >= 1, "process count must be positive");
  require(nx >= 2, "nx must be at least 2");
  require(nt >= 0, "nt must be non-negative");
  require(dx > 0 && dt > 0, "dx and dt must be positive");
  require(nx % n_ranks == 0, "nx = " + std::to_string(nx) + " is not divisible by " +
                                 std::to_string(n_ranks) + " processes");
  require(c * dt / dx <= 1.0, "CFL number c*dt/dx exceeds 1");
}

double ConvectionConfig::initial(int i) const {
  double x = i * dx;
  return (x >= square_lo && x <= square_hi) ? u_high : u_low;
}

void PoissonConfig::validate(int n_ranks) const {
  require(n_ranks >= 1, "process count must be positive");
  require(nx >= 3 && ny >= 3, "grid must be at least 3x3");
  require(iters >= 0, "iteration count must be non-negative");
  require(ny % n_ranks == 0, "ny = " + std::to_string(ny) + " is not divisible by " +
                                 std::to_string(n_ranks) + " processes");
}

double PoissonConfig::f_at(int i, int j) const {
  const double two_pi = 2.0 * std::numbers::pi;
  return std::sin(two_pi * (j * dx())) * std::sin(two_pi * (i * dy()));
}

std::vector<double> PoissonConfig::f_grid() const {
  std::vector<double> f(static_cast<std::size_t>(nx) * ny);
  for (int i = 0; i < ny; ++i) {
    for (int j = 0; j < nx; ++j) f[static_cast<std::size_t>(i) * nx + j] = f_at(i, j);
  }
  return f;
}

void HeatConfig::validate(int n_ranks) const {
  require(n_ranks >= 1, "process count must be positive");
  require(nx >= 3 && ny >= 3, "grid must be at least 3x3");
  require(nt >= 0, "nt must be non-negative");
  require(alpha > 0, "alpha must be positive");
  require(ny % n_ranks == 0, "ny = " + std::to_string(ny) + " is not divisible by " +
                                 std::to_string(n_ranks) + " processes");
  require(n_ranks == 1 || ny / n_ranks >= 4,
          "stripes need at least 4 rows (halo depth), got " + std::to_string(ny / n_ranks));
  double dx2 = dx() * dx(), dy2 = dy() * dy();
  require(dt() <= dx2 * dy2 / (2.0 * alpha * (dx2 + dy2)), "time step violates the stability bound");
}

double HeatConfig::initial(int i, int j) const {
  bool in_rows = i >= 3 * ny / 8 && i < 5 * ny / 8;
  bool in_cols = j >= 3 * nx / 8 && j < 5 * nx / 8;
  return (in_rows && in_cols) ? 100.0 : 0.0;
}

// --- kernels -----------------------------------------------------------------

double upwind_step(double u, double u_left, const ConvectionConfig& cfg) {
  return u - cfg.c * cfg.dt / cfg.dx * (u - u_left);
}

void jacobi_row(const double* up, const double* mid, const double* down, const double* f,
                double* out, int nx, double dx2, double dy2) {
  for (int j = 1; j < nx - 1; ++j) {
    out[j] = ((down[j] + up[j]) * dy2 + (mid[j + 1] + mid[j - 1]) * dx2 -
              f[j] * dx2 * dy2) /
             (2.0 * (dx2 + dy2));
  }
}

double residual_row(const double* up, const double* mid, const double* down, const double* f,
                    int nx, double dx2, double dy2) {
  double acc = 0.0;
  for (int j = 1; j < nx - 1; ++j) {
    double r = (down[j] + up[j]) * dy2 + (mid[j + 1] + mid[j - 1]) * dx2 -
               f[j] * dx2 * dy2 - 2.0 * (dx2 + dy2) * mid[j];
    acc += r * r;
  }
  return acc;
}

namespace {

std::vector<double> grid_of(const LockedArray2D& a) {
  std::vector<double> out(a.rows() * a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out[i * a.cols() + j] = a.get(i, j);
  }
  return out;
}

LockedArray2D grid_to_array(const std::vector<double>& g, std::size_t rows, std::size_t cols) {
  LockedArray2D a(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) a.set(i, j, g[i * cols + j]);
  }
  return a;
}

// k = alpha * laplacian(v); zero outside the interior (Dirichlet) or with
// wrap-around neighbors everywhere (Periodic).
void heat_stage(const std::vector<double>& v, std::vector<double>& k, int rows, int cols,
                const HeatConfig& cfg) {
  const double inv_dx2 = 1.0 / (cfg.dx() * cfg.dx());
  const double inv_dy2 = 1.0 / (cfg.dy() * cfg.dy());
  std::fill(k.begin(), k.end(), 0.0);
  auto at = [&](int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; };
  if (cfg.boundary == HeatBoundary::Dirichlet) {
    for (int i = 1; i < rows - 1; ++i) {
      for (int j = 1; j < cols - 1; ++j) {
        k[static_cast<std::size_t>(i) * cols + j] =
            cfg.alpha * ((at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j)) * inv_dy2 +
                         (at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)) * inv_dx2);
      }
    }
  } else {
    for (int i = 0; i < rows; ++i) {
      int ip = (i + 1) % rows, im = (i + rows - 1) % rows;
      for (int j = 0; j < cols; ++j) {
        int jp = (j + 1) % cols, jm = (j + cols - 1) % cols;
        k[static_cast<std::size_t>(i) * cols + j] =
            cfg.alpha * ((at(ip, j) - 2.0 * at(i, j) + at(im, j)) * inv_dy2 +
                         (at(i, jp) - 2.0 * at(i, j) + at(i, jm)) * inv_dx2);
      }
    }
  }
}

}  // namespace

std::vector<double> rk4_step_raw(const std::vector<double>& u, int rows, int cols,
                                 const HeatConfig& cfg) {
  const double dt = cfg.dt();
  const std::size_t n = u.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);

  heat_stage(u, k1, rows, cols, cfg);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + dt / 2.0 * k1[i];
  heat_stage(tmp, k2, rows, cols, cfg);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + dt / 2.0 * k2[i];
  heat_stage(tmp, k3, rows, cols, cfg);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + dt * k3[i];
  heat_stage(tmp, k4, rows, cols, cfg);

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

LockedArray2D jacobi_step(const LockedArray2D& u, const LockedArray2D& f,
                          const PoissonConfig& cfg) {
  if (u.rows() != f.rows() || u.cols() != f.cols()) {
    throw LockError(LockError::Kind::ShapeMismatch, "jacobi_step grid/f shape mismatch");
  }
  const int ny = static_cast<int>(u.rows()), nx = static_cast<int>(u.cols());
  const double dx2 = cfg.dx() * cfg.dx(), dy2 = cfg.dy() * cfg.dy();
  std::vector<double> g = grid_of(u), fg = grid_of(f), next = g;
  for (int i = 1; i < ny - 1; ++i) {
    jacobi_row(&g[(i - 1) * nx], &g[i * nx], &g[(i + 1) * nx], &fg[i * nx], &next[i * nx], nx,
               dx2, dy2);
  }
  return grid_to_array(next, u.rows(), u.cols());
}

LockedArray2D rk4_heat_step(const LockedArray2D& u, const HeatConfig& cfg) {
  std::vector<double> next =
      rk4_step_raw(grid_of(u), static_cast<int>(u.rows()), static_cast<int>(u.cols()), cfg);
  return grid_to_array(next, u.rows(), u.cols());
}

// --- sequential solvers --------------------------------------------------------

ConvectionSolution convection_sequential(const ConvectionConfig& cfg) {
  cfg.validate(1);
  ConvectionSolution out;
  std::vector<double> u(cfg.nx);
  for (int i = 0; i < cfg.nx; ++i) u[i] = cfg.initial(i);
  out.states.push_back(u);
  for (int n = 0; n < cfg.nt; ++n) {
    std::vector<double> un = u;
    for (int i = 1; i < cfg.nx; ++i) u[i] = upwind_step(un[i], un[i - 1], cfg);
    out.states.push_back(u);
  }
  return out;
}

namespace {

double stripe_residual_sq(const std::vector<double>& grid, const std::vector<double>& f,
                          int ny, int nx, double dx2, double dy2, int row_lo, int row_hi) {
  double acc = 0.0;
  for (int i = std::max(row_lo, 1); i < std::min(row_hi, ny - 1); ++i) {
    acc += residual_row(&grid[static_cast<std::size_t>(i - 1) * nx],
                        &grid[static_cast<std::size_t>(i) * nx],
                        &grid[static_cast<std::size_t>(i + 1) * nx],
                        &f[static_cast<std::size_t>(i) * nx], nx, dx2, dy2);
  }
  return acc;
}

}  // namespace

PoissonSolution poisson_sequential(const PoissonConfig& cfg) {
  cfg.validate(1);
  PoissonSolution out;
  const int ny = cfg.ny, nx = cfg.nx;
  const double dx2 = cfg.dx() * cfg.dx(), dy2 = cfg.dy() * cfg.dy();
  std::vector<double> f = cfg.f_grid();
  std::vector<double> u(static_cast<std::size_t>(ny) * nx, 0.0);
  out.states.push_back(u);
  for (int it = 0; it < cfg.iters; ++it) {
    out.residual_sq.push_back(stripe_residual_sq(u, f, ny, nx, dx2, dy2, 0, ny));
    std::vector<double> next = u;
    for (int i = 1; i < ny - 1; ++i) {
      jacobi_row(&u[static_cast<std::size_t>(i - 1) * nx], &u[static_cast<std::size_t>(i) * nx],
                 &u[static_cast<std::size_t>(i + 1) * nx], &f[static_cast<std::size_t>(i) * nx],
                 &next[static_cast<std::size_t>(i) * nx], nx, dx2, dy2);
    }
    u = std::move(next);
    out.states.push_back(u);
  }
  return out;
}

double PoissonSolution::final_residual() const {
  return residual_sq.empty() ? 0.0 : std::sqrt(residual_sq.back());
}

HeatSolution heat_sequential(const HeatConfig& cfg) {
  cfg.validate(1);
  HeatSolution out;
  std::vector<double> u(static_cast<std::size_t>(cfg.ny) * cfg.nx);
  for (int i = 0; i < cfg.ny; ++i) {
    for (int j = 0; j < cfg.nx; ++j) u[static_cast<std::size_t>(i) * cfg.nx + j] = cfg.initial(i, j);
  }
  out.states.push_back(u);
  for (int n = 0; n < cfg.nt; ++n) {
    u = rk4_step_raw(u, cfg.ny, cfg.nx, cfg);
    out.states.push_back(u);
  }
  return out;
}

// --- runtime specs -------------------------------------------------------------

rt::WorldSpec convection_world_spec(const ConvectionConfig& cfg,
                                    std::shared_ptr<const ConvectionSolution> seq) {
  rt::WorldSpec s;
  s.sender = [](Tag v, int n) { return static_cast<int>(v % (n - 1)); };
  s.receiver = [](Tag v, int n) { return static_cast<int>(v % (n - 1)) + 1; };
  s.message = [cfg, seq](Tag v, int n) {
    const int L = cfg.nx / n;
    const auto step = static_cast<std::size_t>(v / (n - 1));
    const auto r = static_cast<std::size_t>(v % (n - 1));
    return std::vector<double>{seq->states.at(step).at((r + 1) * L - 1)};
  };
  s.barrier_tag = [cfg](std::int64_t id, int n) {
    return std::min<std::int64_t>(id, cfg.nt) * (n - 1);
  };
  s.barrier_count = [cfg](int) { return static_cast<std::int64_t>(cfg.nt) + 1; };
  s.collective = [cfg, seq](std::int64_t index, int) -> rt::Collective {
    if (index < cfg.nt) return rt::BarrierSpec{};
    rt::GatherSpec g;
    g.root = 0;
    g.segment_len = [cfg](int, int n) { return static_cast<std::int64_t>(cfg.nx / n); };
    g.expected_segment = [cfg, seq](int rank, int n) {
      const int L = cfg.nx / n;
      const auto& fin = seq->states.back();
      return std::vector<double>(fin.begin() + static_cast<std::ptrdiff_t>(rank) * L,
                                 fin.begin() + static_cast<std::ptrdiff_t>(rank + 1) * L);
    };
    return g;
  };
  return s;
}

namespace {

int stripe_slot_sender(Tag v, int n) {
  std::int64_t u = v % (2 * (n - 1));
  return static_cast<int>(u < n - 1 ? u : u - n + 2);
}

int stripe_slot_receiver(Tag v, int n) {
  std::int64_t u = v % (2 * (n - 1));
  return static_cast<int>(u < n - 1 ? u + 1 : u - n + 1);
}

}  // namespace

rt::WorldSpec poisson_world_spec(const PoissonConfig& cfg,
                                 std::shared_ptr<const PoissonSolution> seq) {
  rt::WorldSpec s;
  s.sender = stripe_slot_sender;
  s.receiver = stripe_slot_receiver;
  s.message = [cfg, seq](Tag v, int n) {
    const int H = cfg.ny / n;
    const std::int64_t M = 2 * (n - 1);
    const auto step = static_cast<std::size_t>(v / M);
    const std::int64_t u = v % M;
    // Down edges carry the sender's bottom row; up edges the sender's top.
    std::size_t row = u < n - 1 ? static_cast<std::size_t>((u + 1) * H - 1)
                                : static_cast<std::size_t>((u - n + 2) * H);
    const auto& grid = seq->states.at(step);
    return std::vector<double>(grid.begin() + static_cast<std::ptrdiff_t>(row) * cfg.nx,
                               grid.begin() + static_cast<std::ptrdiff_t>(row + 1) * cfg.nx);
  };
  s.barrier_tag = [cfg](std::int64_t id, int n) {
    return std::min<std::int64_t>(id, cfg.iters) * 2 * (n - 1);
  };
  s.barrier_count = [cfg](int) { return static_cast<std::int64_t>(cfg.iters) + 1; };
  auto fg = std::make_shared<const std::vector<double>>(cfg.f_grid());
  s.collective = [cfg, seq, fg](std::int64_t index, int) -> rt::Collective {
    if (index < cfg.iters) {
      rt::AllReduceSpec a;
      a.op = ReduceOp::Sum;
      a.expected_contribution = [cfg, seq, fg, index](int rank, int n) {
        const int H = cfg.ny / n;
        return stripe_residual_sq(seq->states.at(static_cast<std::size_t>(index)), *fg, cfg.ny,
                                  cfg.nx, cfg.dx() * cfg.dx(), cfg.dy() * cfg.dy(), rank * H,
                                  (rank + 1) * H);
      };
      return a;
    }
    rt::GatherSpec g;
    g.root = 0;
    g.segment_len = [cfg](int, int n) {
      return static_cast<std::int64_t>(cfg.ny / n) * cfg.nx;
    };
    g.expected_segment = [cfg, seq](int rank, int n) {
      const int H = cfg.ny / n;
      const auto& fin = seq->states.back();
      return std::vector<double>(
          fin.begin() + static_cast<std::ptrdiff_t>(rank) * H * cfg.nx,
          fin.begin() + static_cast<std::ptrdiff_t>(rank + 1) * H * cfg.nx);
    };
    return g;
  };
  return s;
}

rt::WorldSpec heat_world_spec(const HeatConfig& cfg, std::shared_ptr<const HeatSolution> seq) {
  rt::WorldSpec s;
  s.sender = stripe_slot_sender;
  s.receiver = stripe_slot_receiver;
  s.message = [cfg, seq](Tag v, int n) {
    const int H = cfg.ny / n;
    const std::int64_t M = 2 * (n - 1);
    const auto step = static_cast<std::size_t>(v / M);
    const std::int64_t u = v % M;
    // Down edges carry the sender's bottom 4 rows; up edges its top 4.
    std::size_t row0 = u < n - 1 ? static_cast<std::size_t>((u + 1) * H - 4)
                                 : static_cast<std::size_t>((u - n + 2) * H);
    const auto& grid = seq->states.at(step);
    return std::vector<double>(grid.begin() + static_cast<std::ptrdiff_t>(row0) * cfg.nx,
                               grid.begin() + static_cast<std::ptrdiff_t>(row0 + 4) * cfg.nx);
  };
  s.barrier_tag = [cfg](std::int64_t id, int n) {
    return std::min<std::int64_t>(id, cfg.nt) * 2 * (n - 1);
  };
  s.barrier_count = [cfg](int) { return static_cast<std::int64_t>(cfg.nt) + 1; };
  s.collective = [cfg, seq](std::int64_t index, int) -> rt::Collective {
    if (index < cfg.nt) return rt::BarrierSpec{};
    rt::GatherSpec g;
    g.root = 0;
    g.segment_len = [cfg](int, int n) {
      return static_cast<std::int64_t>(cfg.ny / n) * cfg.nx;
    };
    g.expected_segment = [cfg, seq](int rank, int n) {
      const int H = cfg.ny / n;
      const auto& fin = seq->states.back();
      return std::vector<double>(
          fin.begin() + static_cast<std::ptrdiff_t>(rank) * H * cfg.nx,
          fin.begin() + static_cast<std::ptrdiff_t>(rank + 1) * H * cfg.nx);
    };
    return g;
  };
  return s;
}

// --- parallel bodies -------------------------------------------------------------

void convection_body(rt::World& w, const ConvectionConfig& cfg, std::vector<double>* root_out) {
  const int n = w.size(), rank = w.rank();
  const int L = cfg.nx / n;
  LockedArray1D u(L);
  for (int i = 0; i < L; ++i) u.set(i, cfg.initial(rank * L + i));

  for (int step = 0; step < cfg.nt; ++step) {
    LockedArray1D un = u.slice(Range1D{0, static_cast<std::size_t>(L)});
    for (int i = 1; i < L; ++i) u.set(i, upwind_step(un.get(i), un.get(i - 1), cfg));
    const Tag bt = static_cast<Tag>(step) * (n - 1);
    if (rank == 0) {
      w.send(un, Range1D{static_cast<std::size_t>(L - 1), 1}, bt);
    } else if (rank == n - 1) {
      w.recv(u, Range1D{0, 1}, bt + rank - 1);
      u.set(0, upwind_step(un.get(0), u.get(0), cfg));
    } else {
      rt::Request r = w.isend(un, Range1D{static_cast<std::size_t>(L - 1), 1}, bt + rank);
      w.recv(u, Range1D{0, 1}, bt + rank - 1);
      u.set(0, upwind_step(un.get(0), u.get(0), cfg));
      w.wait(r);
    }
    w.barrier();
  }

  if (rank == 0) {
    LockedArray1D out(cfg.nx);
    w.gather(u, Range1D{0, static_cast<std::size_t>(L)}, &out, 0);
    *root_out = out.raw();
  } else {
    w.gather(u, Range1D{0, static_cast<std::size_t>(L)}, nullptr, 0);
  }
}

void poisson_body(rt::World& w, const PoissonConfig& cfg, PoissonRankResult* result) {
  const int n = w.size(), rank = w.rank();
  const int H = cfg.ny / n, nx = cfg.nx;
  const double dx2 = cfg.dx() * cfg.dx(), dy2 = cfg.dy() * cfg.dy();
  const bool has_up = rank > 0, has_down = rank < n - 1;

  LockedArray2D u(H, nx, 0.0);
  LockedArray1D halo_top(nx), halo_bottom(nx);
  std::vector<double> fstripe(static_cast<std::size_t>(H) * nx);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < nx; ++j) fstripe[static_cast<std::size_t>(i) * nx + j] =
        cfg.f_at(rank * H + i, j);
  }

  // Extended stripe with one halo row on each side; ext row e is global row
  // rank*H + e - 1.
  std::vector<double> ext(static_cast<std::size_t>(H + 2) * nx, 0.0);
  std::vector<double> newrow(nx);

  for (int it = 0; it < cfg.iters; ++it) {
    const Tag bt = static_cast<Tag>(it) * 2 * (n - 1);
    std::vector<std::pair<Tag, rt::Request>> reqs;
    if (has_up) {
      reqs.emplace_back(bt + rank - 1, w.irecv(halo_top, Range1D{0, static_cast<std::size_t>(nx)},
                                               bt + rank - 1));
      reqs.emplace_back(bt + (n - 2) + rank,
                        w.isend(u, RowSegment{0, 0, static_cast<std::size_t>(nx)},
                                bt + (n - 2) + rank));
    }
    if (has_down) {
      reqs.emplace_back(bt + rank,
                        w.isend(u, RowSegment{static_cast<std::size_t>(H - 1), 0,
                                              static_cast<std::size_t>(nx)},
                                bt + rank));
      reqs.emplace_back(bt + (n - 1) + rank,
                        w.irecv(halo_bottom, Range1D{0, static_cast<std::size_t>(nx)},
                                bt + (n - 1) + rank));
    }
    std::sort(reqs.begin(), reqs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [tag, req] : reqs) w.wait(req);

    for (int i = 0; i < H; ++i) {
      for (int j = 0; j < nx; ++j) {
        ext[static_cast<std::size_t>(i + 1) * nx + j] = u.get(i, j);
      }
    }
    for (int j = 0; j < nx; ++j) {
      ext[j] = has_up ? halo_top.get(j) : 0.0;
      ext[static_cast<std::size_t>(H + 1) * nx + j] = has_down ? halo_bottom.get(j) : 0.0;
    }

    // Global interior rows owned by this stripe.
    const int lo = std::max(rank * H, 1), hi = std::min((rank + 1) * H, cfg.ny - 1);
    double acc = 0.0;
    for (int gi = lo; gi < hi; ++gi) {
      const int e = gi - rank * H + 1;
      acc += residual_row(&ext[static_cast<std::size_t>(e - 1) * nx],
                          &ext[static_cast<std::size_t>(e) * nx],
                          &ext[static_cast<std::size_t>(e + 1) * nx],
                          &fstripe[static_cast<std::size_t>(gi - rank * H) * nx], nx, dx2, dy2);
    }
    double global_residual_sq = w.allreduce(acc, ReduceOp::Sum);
    if (result) result->residual = std::sqrt(global_residual_sq);

    for (int gi = lo; gi < hi; ++gi) {
      const int e = gi - rank * H + 1;
      const double* mid = &ext[static_cast<std::size_t>(e) * nx];
      newrow.assign(mid, mid + nx);
      jacobi_row(&ext[static_cast<std::size_t>(e - 1) * nx], mid,
                 &ext[static_cast<std::size_t>(e + 1) * nx],
                 &fstripe[static_cast<std::size_t>(gi - rank * H) * nx], newrow.data(), nx, dx2,
                 dy2);
      u.store_region(RowSegment{static_cast<std::size_t>(gi - rank * H), 0,
                                static_cast<std::size_t>(nx)},
                     newrow);
    }
  }

  if (rank == 0) {
    LockedArray2D out(cfg.ny, nx);
    w.gather(u, RowBlock{0, static_cast<std::size_t>(H)}, &out, 0);
    if (result) result->grid = out.raw();
  } else {
    w.gather(u, RowBlock{0, static_cast<std::size_t>(H)}, nullptr, 0);
  }
}

void heat_body(rt::World& w, const HeatConfig& cfg, std::vector<double>* root_out) {
  const int n = w.size(), rank = w.rank();
  const int H = cfg.ny / n, nx = cfg.nx;
  const bool has_up = rank > 0, has_down = rank < n - 1;
  const int before = has_up ? 4 : 0, after = has_down ? 4 : 0;
  const int ext_rows = before + H + after;

  LockedArray2D u(H, nx);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < nx; ++j) u.set(i, j, cfg.initial(rank * H + i, j));
  }
  LockedArray2D halo_top(4, nx), halo_bottom(4, nx);
  std::vector<double> ext(static_cast<std::size_t>(ext_rows) * nx);

  for (int step = 0; step < cfg.nt; ++step) {
    const Tag bt = static_cast<Tag>(step) * 2 * (n - 1);
    std::vector<std::pair<Tag, rt::Request>> reqs;
    if (has_up) {
      reqs.emplace_back(bt + rank - 1, w.irecv(halo_top, RowBlock{0, 4}, bt + rank - 1));
      reqs.emplace_back(bt + (n - 2) + rank, w.isend(u, RowBlock{0, 4}, bt + (n - 2) + rank));
    }
    if (has_down) {
      reqs.emplace_back(bt + rank,
                        w.isend(u, RowBlock{static_cast<std::size_t>(H - 4), 4}, bt + rank));
      reqs.emplace_back(bt + (n - 1) + rank,
                        w.irecv(halo_bottom, RowBlock{0, 4}, bt + (n - 1) + rank));
    }
    std::sort(reqs.begin(), reqs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [tag, req] : reqs) w.wait(req);

    for (int i = 0; i < before; ++i) {
      for (int j = 0; j < nx; ++j) {
        ext[static_cast<std::size_t>(i) * nx + j] = halo_top.get(i, j);
      }
    }
    for (int i = 0; i < H; ++i) {
      for (int j = 0; j < nx; ++j) {
        ext[static_cast<std::size_t>(before + i) * nx + j] = u.get(i, j);
      }
    }
    for (int i = 0; i < after; ++i) {
      for (int j = 0; j < nx; ++j) {
        ext[static_cast<std::size_t>(before + H + i) * nx + j] = halo_bottom.get(i, j);
      }
    }

    std::vector<double> next = rk4_step_raw(ext, ext_rows, nx, cfg);
    for (int i = 0; i < H; ++i) {
      u.store_region(RowSegment{static_cast<std::size_t>(i), 0, static_cast<std::size_t>(nx)},
                     std::span<const double>(&next[static_cast<std::size_t>(before + i) * nx],
                                             static_cast<std::size_t>(nx)));
    }
    w.barrier();
  }

  if (rank == 0) {
    LockedArray2D out(cfg.ny, nx);
    w.gather(u, RowBlock{0, static_cast<std::size_t>(H)}, &out, 0);
    *root_out = out.raw();
  } else {
    w.gather(u, RowBlock{0, static_cast<std::size_t>(H)}, nullptr, 0);
  }
}

// --- equivalence -------------------------------------------------------------------

EquivalenceReport equivalence_check(std::span<const double> parallel,
                                    std::span<const double> sequential, EquivalenceMode mode,
                                    double eps) {
  if (parallel.size() != sequential.size()) {
    throw LockError(LockError::Kind::ShapeMismatch,
                    "shape mismatch: " + std::to_string(parallel.size()) + " vs " +
                        std::to_string(sequential.size()) + " elements");
  }
  EquivalenceReport rep;
  rep.pass = true;
  for (std::size_t i = 0; i < parallel.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(parallel[i]) == std::bit_cast<std::uint64_t>(sequential[i]))
      continue;
    if (rep.first_mismatch < 0) rep.first_mismatch = static_cast<std::ptrdiff_t>(i);
    double denom = std::abs(sequential[i]) > 0.0 ? std::abs(sequential[i]) : 1.0;
    double rel = std::abs(parallel[i] - sequential[i]) / denom;
    rep.max_rel_dev = std::max(rep.max_rel_dev, rel);
    if (mode == EquivalenceMode::Exact || rel > eps) rep.pass = false;
  }
  return rep;
}

// --- runners ------------------------------------------------------------------------

namespace {

rt::RunResult run_body(const rt::WorldSpec& spec, int n, ExecMode mode, std::uint64_t seed,
                       std::size_t eager_bytes, const std::function<void(rt::World&)>& body) {
  if (mode == ExecMode::Sim) {
    rt::SimExecutor::Options options;
    options.seed = seed;
    rt::SimExecutor ex(spec, n, std::move(options));
    return ex.run(body);
  }
  rt::ThreadExecutor::Options options;
  options.eager_bytes = eager_bytes;
  rt::ThreadExecutor ex(spec, n, options);
  return ex.run(body);
}

}  // namespace

BenchResult run_convection(const ConvectionConfig& cfg, int n, ExecMode mode,
                           std::uint64_t seed, std::size_t eager_bytes) {
  cfg.validate(n);
  auto seq = std::make_shared<const ConvectionSolution>(convection_sequential(cfg));
  BenchResult out;
  out.sequential = seq->states.back();
  out.rows = 1;
  out.cols = static_cast<std::size_t>(cfg.nx);
  if (n == 1) {  // degenerates to the sequential path
    out.parallel = out.sequential;
    out.run.status = rt::RunResult::Status::Completed;
    out.run.all_done = true;
    return out;
  }
  rt::WorldSpec spec = convection_world_spec(cfg, seq);
  std::vector<double> root;
  out.run = run_body(spec, n, mode, seed, eager_bytes, [&](rt::World& w) {
    convection_body(w, cfg, w.rank() == 0 ? &root : nullptr);
  });
  out.parallel = std::move(root);
  return out;
}

BenchResult run_poisson(const PoissonConfig& cfg, int n, ExecMode mode, std::uint64_t seed,
                        std::size_t eager_bytes) {
  cfg.validate(n);
  auto seq = std::make_shared<const PoissonSolution>(poisson_sequential(cfg));
  BenchResult out;
  out.sequential = seq->states.back();
  out.rows = static_cast<std::size_t>(cfg.ny);
  out.cols = static_cast<std::size_t>(cfg.nx);
  out.seq_residual = seq->final_residual();
  if (n == 1) {
    out.parallel = out.sequential;
    out.par_residual = out.seq_residual;
    out.run.status = rt::RunResult::Status::Completed;
    out.run.all_done = true;
    return out;
  }
  rt::WorldSpec spec = poisson_world_spec(cfg, seq);
  std::vector<PoissonRankResult> results(static_cast<std::size_t>(n));
  out.run = run_body(spec, n, mode, seed, eager_bytes,
                     [&](rt::World& w) { poisson_body(w, cfg, &results[w.rank()]); });
  out.parallel = std::move(results[0].grid);
  out.par_residual = results[0].residual;
  return out;
}

BenchResult run_heat(const HeatConfig& cfg, int n, ExecMode mode, std::uint64_t seed,
                     std::size_t eager_bytes) {
  cfg.validate(n);
  auto seq = std::make_shared<const HeatSolution>(heat_sequential(cfg));
  BenchResult out;
  out.sequential = seq->states.back();
  out.rows = static_cast<std::size_t>(cfg.ny);
  out.cols = static_cast<std::size_t>(cfg.nx);
  if (n == 1) {
    out.parallel = out.sequential;
    out.run.status = rt::RunResult::Status::Completed;
    out.run.all_done = true;
    return out;
  }
  rt::WorldSpec spec = heat_world_spec(cfg, seq);
  std::vector<double> root;
  out.run = run_body(spec, n, mode, seed, eager_bytes,
                     [&](rt::World& w) { heat_body(w, cfg, w.rank() == 0 ? &root : nullptr); });
  out.parallel = std::move(root);
  return out;
}

}  // namespace mpicheck::pde

#include "fracpq/continuation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "fracpq/errors.hpp"

namespace fracpq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_increasing(const std::vector<double>& grid, const char* what) {
  if (grid.empty()) throw ValidationError(std::string(what) + " grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ValidationError(std::string(what) + " grid must be strictly increasing");
}

Potential sample(const MeshPtr& mesh, const Profile& f) {
  Vector v(static_cast<Eigen::Index>(mesh->size()));
  for (std::size_t i = 0; i < mesh->size(); ++i) v[static_cast<Eigen::Index>(i)] = f(mesh->nodes()[i]);
  return Potential(mesh, std::move(v));
}

Vector sample_vector(const Mesh& mesh, const Profile& f) {
  Vector v(static_cast<Eigen::Index>(mesh.size()));
  for (std::size_t i = 0; i < mesh.size(); ++i) v[static_cast<Eigen::Index>(i)] = f(mesh.nodes()[i]);
  return v;
}

// Values of the zero-extended interpolant on a uniform grid spanning the domain hull.
std::vector<double> resample(const NodalFunction& u, int points) {
  const auto& ivs = u.mesh->domain().intervals();
  const double lo = ivs.front().lo;
  const double hi = ivs.back().hi;
  std::vector<double> out(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k)
    out[static_cast<std::size_t>(k)] = evaluate(u, lo + (hi - lo) * k / (points - 1));
  return out;
}

double grid_lp_distance(const std::vector<double>& a, const std::vector<double>& b, double width, double p) {
  std::vector<double> terms(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) terms[k] = abs_pow(a[k] - b[k], p);
  const double dx = width / static_cast<double>(a.size() - 1);
  return std::pow(dx * pairwise_sum(terms), 1.0 / p);
}

}  // namespace

std::vector<double> SweepResult::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("no column " + name);
  const auto k = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[k]);
  return out;
}

int MeshCoupling::resolve(double s) const {
  if (!coupled) return n_per_unit;
  if (!(s > 0.0 && s < 1.0)) throw ValidationError("s must lie in (0, 1)");
  const double h = scale * std::pow(1.0 - s, power);
  const int n = static_cast<int>(std::ceil(1.0 / h - 1e-9));
  return std::clamp(n, min_n, max_n);
}

int worker_count(int requested) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("FRACPQ_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  if (requested > 0) n = std::min(n, requested);
  return std::max(n, 1);
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, count); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("slope fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw ValidationError("slope fit needs positive data");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

SweepResult mu_quotient_decay(const EnergyBundle& b, const EigenReport& ground,
                              const std::vector<double>& t_values) {
  if (!b.has_q()) throw ValidationError("quotient decay needs mu > 0");
  require_increasing(t_values, "t");
  if (t_values.front() < 1.0) throw ValidationError("t values must be at least 1");
  const Vector& u1 = ground.eigenfunction.values;
  const double lambda1 = ground.lambda_est;
  const double p = b.params.p;
  const double q = b.params.q;
  const double mu = b.params.mu;

  SweepResult out;
  out.parameter = "t";
  out.columns = {"t", "quotient", "gap", "predicted_gap", "above_lambda1", "residual"};
  std::vector<double> ts, gaps;
  bool decreasing = true;
  double previous = std::numeric_limits<double>::infinity();
  for (double t : t_values) {
    const Vector tu = t * u1;
    const double Jt = detail::J(b, tu);
    const double quotient = (detail::I(b, tu) + mu / q * detail::B(b, tu)) / Jt;
    const double gap = quotient - lambda1;
    const double predicted = mu / q * detail::B(b, u1) / detail::J(b, u1) / std::pow(t, p - q);
    const bool above = quotient > lambda1;
    out.rows.push_back({t, quotient, gap, predicted, above ? 1.0 : 0.0, ground.residual});
    out.flagged.push_back(!above);
    decreasing = decreasing && quotient < previous;
    previous = quotient;
    if (gap > 0.0) {
      ts.push_back(t);
      gaps.push_back(gap);
    }
  }
  if (ts.size() >= 2) out.fitted_exponent = loglog_slope(ts, gaps);
  out.notes.push_back(std::string("quotient strictly decreasing: ") + (decreasing ? "yes" : "no"));
  return out;
}

SweepResult mu_sweep(const EnergyBundle& b, double lambda, const std::vector<double>& mu_grid,
                     const SweepOptions& opt) {
  if (mu_grid.empty()) throw ValidationError("mu grid is empty");
  for (std::size_t i = 0; i < mu_grid.size(); ++i) {
    if (!(mu_grid[i] > 0.0)) throw ValidationError("mu grid must be positive");
    if (i > 0 && !(mu_grid[i] < mu_grid[i - 1])) throw ValidationError("mu grid must be strictly decreasing");
  }
  const EigenReport ground = lambda1(with_mu(b, 0.0), std::min(opt.tol, 1e-10), 1000, opt.seed);
  if (!(lambda > ground.lambda_est))
    throw ValidationError("lambda must exceed the discrete first eigenvalue " + std::to_string(ground.lambda_est));

  SweepResult out;
  out.parameter = "mu";
  out.columns = {"mu", "m_lambda", "seminorm_p", "lp_norm", "weighted_norm", "q_energy",
                 "nehari_residual", "eigen_residual", "converged"};
  out.rows.assign(mu_grid.size(), {});
  out.flagged.assign(mu_grid.size(), false);
  std::vector<std::string> errors(mu_grid.size());
  const double p = b.params.p;

  parallel_for(mu_grid.size(), worker_count(opt.workers), [&](std::size_t k) {
    const double mu = mu_grid[k];
    try {
      const EnergyBundle bk = with_mu(b, mu);
      const NehariReport r = solve_m_lambda(bk, lambda, opt.tol, opt.seed, &ground, opt.max_iter);
      const Vector& u = r.minimizer.values;
      out.rows[k] = {mu,
                     r.m_lambda,
                     std::pow(bk.op_p->value(u), 1.0 / p),
                     std::pow(lp_norm_p(u, bk.h(), p), 1.0 / p),
                     std::pow(detail::J(bk, u), 1.0 / p),
                     detail::B(bk, u),
                     r.nehari_residual,
                     r.eigen_residual,
                     r.converged ? 1.0 : 0.0};
      out.flagged[k] = !r.converged || r.eigen_residual > opt.tol;
    } catch (const std::exception& e) {
      out.rows[k] = {mu, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, 0.0};
      out.flagged[k] = true;
      errors[k] = e.what();
    }
  });
  for (std::size_t k = 0; k < errors.size(); ++k)
    if (!errors[k].empty()) out.notes.push_back("mu=" + std::to_string(mu_grid[k]) + ": " + errors[k]);

  bool increasing_in_mu = true;
  for (std::size_t k = 1; k < out.rows.size(); ++k)
    increasing_in_mu = increasing_in_mu && out.rows[k][1] < out.rows[k - 1][1];
  out.notes.push_back(std::string("m_lambda increasing in mu: ") + (increasing_in_mu ? "yes" : "no"));
  out.notes.push_back("lambda_1 = " + std::to_string(ground.lambda_est));
  return out;
}

SweepResult bbm_check(const Domain1D& domain, const Profile& u, double p,
                      const std::vector<double>& s_grid, const MeshCoupling& coupling, int workers) {
  require_increasing(s_grid, "s");
  SweepResult out;
  out.parameter = "s";
  out.columns = {"s", "n_per_unit", "h", "seminorm_pow", "local_energy", "rel_error"};
  out.rows.assign(s_grid.size(), {});
  out.flagged.assign(s_grid.size(), false);

  parallel_for(s_grid.size(), worker_count(workers), [&](std::size_t k) {
    const double s = s_grid[k];
    const int n = coupling.resolve(s);
    const MeshPtr mesh = build_mesh(domain, n);
    const Vector v = sample_vector(*mesh, u);
    const double frac = assemble(mesh, s, p).value(v);
    const double local = LocalGradientOperator(mesh, p).value(v);
    out.rows[k] = {s, static_cast<double>(n), mesh->h(), frac, local, std::abs(frac - local) / local};
  });

  bool decreasing = true;
  for (std::size_t k = 1; k < out.rows.size(); ++k) {
    const bool step = out.rows[k][5] < out.rows[k - 1][5];
    out.flagged[k] = !step;
    decreasing = decreasing && step;
  }
  out.notes.push_back(std::string("relative error strictly decreasing: ") + (decreasing ? "yes" : "no"));
  return out;
}

SweepResult s_stability_sweep(const Domain1D& domain, const ProblemParams& base, const Profile& V,
                              const std::vector<double>& s_grid, const MeshCoupling& coupling,
                              const StabilityOptions& opt) {
  require_increasing(s_grid, "s");
  const double p = base.p;
  const bool with_nehari = opt.nehari_lambda_factor.has_value() && base.mu > 0.0;

  SweepResult out;
  out.parameter = "s";
  out.columns = {"s", "n_per_unit", "lambda1", "local_lambda1", "rel_to_local", "oracle_lambda1",
                 "rel_to_oracle", "eig_distance", "residual", "seminorm_p", "lp_norm", "nehari_level",
                 "nehari_residual"};
  const std::size_t m = s_grid.size();
  out.rows.assign(m, {});
  out.flagged.assign(m, false);
  std::vector<NodalFunction> eigenfunctions(m);
  std::vector<std::string> errors(m);

  parallel_for(m, worker_count(opt.workers), [&](std::size_t k) {
    const double s = s_grid[k];
    const int n = coupling.resolve(s);
    ProblemParams params = base;
    params.s = s;
    params.mu = 0.0;
    try {
      params.validate();
      const MeshPtr mesh = build_mesh(domain, n);
      const Potential Vk = sample(mesh, V);
      const EnergyBundle b = make_bundle(mesh, params, Vk);
      const EigenReport r = lambda1(b, opt.tol, opt.max_iter, opt.seed);
      const EigenReport local = local_reference_lambda1(mesh, p, Vk, opt.tol, opt.max_iter, opt.seed);
      double oracle = kNaN;
      if (p == 2.0) oracle = linear_oracle(mesh, s, Vk).front().lambda;
      double level = kNaN, level_res = kNaN;
      if (with_nehari) {
        const EnergyBundle bq = with_mu(b, base.mu);
        const NehariReport nr =
            solve_m_lambda(bq, *opt.nehari_lambda_factor * r.lambda_est, opt.tol, opt.seed, &r, opt.max_iter);
        level = nr.m_lambda;
        level_res = nr.eigen_residual;
      }
      const Vector& u = r.eigenfunction.values;
      out.rows[k] = {s,
                     static_cast<double>(n),
                     r.lambda_est,
                     local.lambda_est,
                     std::abs(r.lambda_est - local.lambda_est) / local.lambda_est,
                     oracle,
                     std::abs(r.lambda_est - oracle) / oracle,
                     kNaN,
                     r.residual,
                     std::pow(b.op_p->value(u), 1.0 / p),
                     std::pow(lp_norm_p(u, b.h(), p), 1.0 / p),
                     level,
                     level_res};
      out.flagged[k] = !r.converged || !local.converged;
      eigenfunctions[k] = r.eigenfunction;
    } catch (const std::exception& e) {
      out.rows[k] = std::vector<double>(out.columns.size(), kNaN);
      out.rows[k][0] = s;
      out.rows[k][1] = static_cast<double>(n);
      out.flagged[k] = true;
      errors[k] = e.what();
    }
  });

  const double width = domain.intervals().back().hi - domain.intervals().front().lo;
  std::vector<double> previous;
  for (std::size_t k = 0; k < m; ++k) {
    if (!errors[k].empty()) {
      out.notes.push_back("s=" + std::to_string(s_grid[k]) + ": " + errors[k]);
      previous.clear();
      continue;
    }
    std::vector<double> current = resample(eigenfunctions[k], opt.compare_points);
    if (!previous.empty()) out.rows[k][7] = grid_lp_distance(current, previous, width, p);
    previous = std::move(current);
  }

  double max_jump = 0.0;
  for (std::size_t k = 1; k < m; ++k)
    max_jump = std::max(max_jump, std::abs(out.rows[k][2] - out.rows[k - 1][2]) / out.rows[k][3]);
  out.notes.push_back("max relative jump of lambda1 between neighbours: " + std::to_string(max_jump));
  return out;
}

}  // namespace fracpq

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mannystrom/bundle.hpp"
#include "mannystrom/config.hpp"
#include "mannystrom/csv.hpp"
#include "mannystrom/errors.hpp"
#include "mannystrom/manifold.hpp"
#include "mannystrom/nystrom.hpp"
#include "mannystrom/objectives.hpp"
#include "mannystrom/optimizer.hpp"
#include "mannystrom/pga.hpp"
#include "mannystrom/rng.hpp"
#include "mannystrom/sketching.hpp"

namespace mannystrom {
namespace experiments {

inline constexpr const char* kVersion = "0.1.0";

using nlohmann::json;

/* ---------------------------------------------------------------------- */
/* Worker pool                                                             */
/* ---------------------------------------------------------------------- */

inline Index worker_count(Index tasks) {
  Index hw = static_cast<Index>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  Index threads = hw;
  if (const char* env = std::getenv("MANNYSTROM_THREADS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0)
      threads = std::min<Index>(threads, static_cast<Index>(cap));
  }
  return std::max<Index>(1, std::min(threads, tasks));
}

/// Run fn(0..count-1) across the pool.  Each task owns its output slot, so
/// results merge deterministically regardless of scheduling.
template <class Fn>
void run_indexed(Index count, Fn&& fn) {
  if (count <= 0) return;
  Index threads = worker_count(count);
  if (threads == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::mutex mu;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (Index t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (true) {
        Index i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/* ---------------------------------------------------------------------- */
/* Config plumbing                                                         */
/* ---------------------------------------------------------------------- */

inline sketching::SketchKind parse_kind(const std::string& name) {
  if (name == "gaussian") return sketching::SketchKind::gaussian;
  if (name == "haar" || name == "haar_isometric")
    return sketching::SketchKind::haar_isometric;
  if (name == "haar_radial") return sketching::SketchKind::haar_radial;
  if (name == "projection") return sketching::SketchKind::projection;
  throw ConfigError("sketch_kind: expected gaussian, haar, haar_radial or "
                    "projection, got '" + name + "'");
}

inline bool parse_timing(const io::Config& cfg) {
  std::string t = cfg.get_string("timing", "wall");
  if (t == "wall") return true;
  if (t == "none") return false;
  throw ConfigError("timing: expected wall or none, got '" + t + "'");
}

inline std::vector<std::uint64_t> parse_seeds(
    const io::Config& cfg, std::vector<Index> fallback) {
  std::vector<Index> raw = cfg.get_index_list("seeds", std::move(fallback));
  std::vector<std::uint64_t> out;
  for (Index s : raw) {
    if (s < 0) throw ConfigError("seeds: entries must be nonnegative");
    out.push_back(static_cast<std::uint64_t>(s));
  }
  if (out.empty()) throw ConfigError("seeds: list must not be empty");
  return out;
}

inline void require_positive(Index v, const std::string& what) {
  if (v <= 0)
    throw ConfigError(what + " must be positive, got " + std::to_string(v));
}

inline void require_sketch_sizes(const std::vector<Index>& ls, Index dim,
                                 const std::string& command) {
  if (ls.empty()) throw ConfigError(command + ": sketch_sizes must not be empty");
  for (Index l : ls) {
    if (l < 1 || l > dim)
      throw ConfigError(command + ": sketch size " + std::to_string(l) +
                        " outside [1, " + std::to_string(dim) +
                        "] (tangent dimension)");
  }
}

inline optimizer::RunConfig optimizer_config(const io::Config& cfg,
                                             Index max_iter_default,
                                             double grad_tol_default) {
  optimizer::RunConfig rc;
  rc.sigma0 = cfg.get_double("sigma0", 1.0);
  rc.arc.eta1 = cfg.get_double("eta1", 0.1);
  rc.arc.eta2 = cfg.get_double("eta2", 0.9);
  rc.arc.gamma = cfg.get_double("gamma", 2.0);
  rc.arc.sigma_min = cfg.get_double("sigma_min", 1e-8);
  rc.arc.sigma_max = cfg.get_double("sigma_max", 1e8);
  rc.max_iter = cfg.get_index("max_iter", max_iter_default);
  rc.grad_tol = cfg.get_double("grad_tol", grad_tol_default);
  rc.kind = parse_kind(cfg.get_string("sketch_kind", "gaussian"));
  rc.timing = parse_timing(cfg);
  if (!(rc.arc.eta1 > 0.0 && rc.arc.eta1 < rc.arc.eta2))
    throw ConfigError("arc: need 0 < eta1 < eta2, got eta1=" +
                      io::format_double(rc.arc.eta1) + ", eta2=" +
                      io::format_double(rc.arc.eta2));
  if (!(rc.arc.gamma > 1.0))
    throw ConfigError("arc: gamma must exceed 1, got " +
                      io::format_double(rc.arc.gamma));
  if (!(rc.arc.sigma_min > 0.0 && rc.arc.sigma_min <= rc.arc.sigma_max))
    throw ConfigError("arc: need 0 < sigma_min <= sigma_max");
  if (rc.sigma0 < rc.arc.sigma_min || rc.sigma0 > rc.arc.sigma_max)
    throw ConfigError("arc: sigma0 outside [sigma_min, sigma_max]");
  if (rc.max_iter < 0)
    throw ConfigError("max_iter must be nonnegative, got " +
                      std::to_string(rc.max_iter));
  if (rc.grad_tol < 0.0) throw ConfigError("grad_tol must be nonnegative");
  return rc;
}

/* ---------------------------------------------------------------------- */
/* Instance builders                                                       */
/* ---------------------------------------------------------------------- */

inline Matrix random_orthogonal(Index n, Rng& rng) {
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// SPD matrix with eigenvalues uniform in [lo, hi] and a Haar-ish
/// orthogonal eigenbasis from the QR of a Gaussian matrix.
inline Matrix random_spd_matrix(Index n, double lo, double hi, Rng& rng) {
  Matrix u = random_orthogonal(n, rng);
  Vector lam(n);
  for (Index i = 0; i < n; ++i) lam(i) = rng.uniform(lo, hi);
  return matfun::symmetrize(u * lam.asDiagonal() * u.transpose());
}

inline Matrix random_symmetric(Index n, double scale, Rng& rng) {
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  return scale * 0.5 * (g + g.transpose());
}

/// Labeled SPD classes: per-class symmetric center, samples are the matrix
/// exponential of center plus symmetric noise.
inline pga::PgaDataset synthetic_spd_classes(Index n, Index per_class,
                                             Index classes, double spread,
                                             double noise, Rng& rng) {
  pga::PgaDataset data;
  for (Index g = 0; g < classes; ++g) {
    Matrix center = random_symmetric(n, spread, rng);
    for (Index i = 0; i < per_class; ++i) {
      Matrix s = center + random_symmetric(n, noise, rng);
      data.samples.emplace_back(matfun::mat_fun(s, matfun::FunTag::Exp));
      data.labels.push_back(static_cast<int>(g));
    }
  }
  return data;
}

/* ---------------------------------------------------------------------- */
/* Output plumbing                                                         */
/* ---------------------------------------------------------------------- */

inline void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec)
    throw InvalidInput("cannot create output directory '" + path +
                       "': " + ec.message());
}

inline json config_echo(const io::Config& cfg) {
  json j = json::object();
  for (const std::string& key : cfg.keys())
    j[key] = cfg.get_string(key, "");
  return j;
}

inline void write_metadata(const std::string& out_dir,
                           const std::string& command, const io::Config& cfg,
                           std::uint64_t seed, const json& results) {
  json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config_echo(cfg);
  j["versions"] = {{"mannystrom", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  j["results"] = results;
  std::ofstream out(out_dir + "/metadata.json", std::ios::binary);
  if (!out)
    throw InvalidInput("cannot write metadata in '" + out_dir + "'");
  out << j.dump(2) << '\n';
}

inline void write_trace_csv(const std::string& path,
                            const std::vector<optimizer::TraceRow>& rows,
                            double f_ref) {
  io::CsvWriter csv(path);
  csv.header({"iter", "f", "gap", "grad_norm", "sigma", "accepted",
              "hvp_count", "wall_ms"});
  for (const auto& r : rows)
    csv.row(r.iter, r.f, r.f - f_ref, r.grad_norm, r.sigma,
            static_cast<int>(r.accepted), r.hvp_count, r.wall_ms);
}

/* ---------------------------------------------------------------------- */
/* Approximation error benchmark                                           */
/* ---------------------------------------------------------------------- */

inline Vector spectrum_family(const std::string& name, Index d) {
  Vector lam(d);
  if (name == "geometric") {
    for (Index j = 0; j < d; ++j) lam(j) = std::pow(2.0, -double(j + 1));
  } else if (name == "quadratic") {
    for (Index j = 0; j < d; ++j) lam(j) = 1.0 / (double(j + 1) * double(j + 1));
  } else if (name == "uniform") {
    lam.setOnes();
  } else {
    throw ConfigError("spectra: expected geometric, quadratic or uniform, "
                      "got '" + name + "'");
  }
  return lam;
}

inline Index side_for_sym_dim(Index d, const std::string& command) {
  for (Index n = 1; geometry::sym_dim(n) <= d; ++n)
    if (geometry::sym_dim(n) == d) return n;
  throw ConfigError(command + ": d must equal n(n+1)/2 for an integer n "
                    "(for example 21 or 45), got " + std::to_string(d));
}

inline void run_bound_bench(const io::Config& cfg, const std::string& out_dir,
                            bool paper_scale) {
  Index d = cfg.get_index("d", paper_scale ? 820 : 45);
  require_positive(d, "bound-bench: d");
  Index n = side_for_sym_dim(d, "bound-bench");
  std::vector<Index> ls = cfg.get_index_list("sketch_sizes", {12});
  require_sketch_sizes(ls, d, "bound-bench");
  for (Index l : ls)
    if (l < 4)
      throw ConfigError("bound-bench: sketch size must be at least 4 for "
                        "the bound formulas, got " + std::to_string(l));
  Index trials = cfg.get_index("trials", 500);
  require_positive(trials, "bound-bench: trials");
  std::vector<std::string> spectra = cfg.get_string_list(
      "spectra", {"geometric", "quadratic", "uniform"});
  std::vector<std::string> kinds =
      cfg.get_string_list("kinds", {"gaussian", "haar"});
  std::uint64_t seed = cfg.get_seed("seed", 0);

  ensure_dir(out_dir);
  io::CsvWriter csv(out_dir + "/bound_bench.csv");
  csv.header({"spectrum_family", "kind", "d", "l", "trials",
              "mean_empirical_error", "stderr_empirical_error",
              "gaussian_bound", "haar_bound", "ratio"});

  geometry::SpdChart space(geometry::SpdPoint(Matrix::Identity(n, n)));
  Index rows = 0;
  for (std::size_t fi = 0; fi < spectra.size(); ++fi) {
    Vector lam = spectrum_family(spectra[fi], d);
    auto h_action = [&lam](const Vector& v) {
      return Vector(lam.asDiagonal() * v);
    };
    for (std::size_t li = 0; li < ls.size(); ++li) {
      Index l = ls[li];
      double gb = nystrom::gaussian_bound(lam, l);
      double hb = nystrom::haar_bound(lam, l, nystrom::BoundParams{});
      for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
        sketching::SketchKind kind = parse_kind(kinds[ki]);
        std::vector<double> errs(static_cast<std::size_t>(trials));
        run_indexed(trials, [&](Index t) {
          std::uint64_t stream = ((fi * 64 + ki) * 64 + li) * 1000000ULL +
                                 static_cast<std::uint64_t>(t);
          Rng rng(derive_seed(seed, stream));
          Matrix frame = geometry::frame_sample(space, l, rng);
          sketching::Sketch sk = sketching::sample_sketch(
              space, frame, kind, sketching::RadialSpec{}, rng);
          nystrom::NystromOp op = nystrom::build(sk, h_action);
          errs[static_cast<std::size_t>(t)] =
              nystrom::empirical_error(space, h_action, op);
        });
        double mean = 0.0;
        for (double e : errs) mean += e;
        mean /= double(trials);
        double var = 0.0;
        for (double e : errs) var += (e - mean) * (e - mean);
        double se = trials > 1
                        ? std::sqrt(var / double(trials - 1) / double(trials))
                        : 0.0;
        double bound = kind == sketching::SketchKind::gaussian ? gb : hb;
        csv.row(spectra[fi], kinds[ki], d, l, trials, mean, se, gb, hb,
                mean / bound);
        ++rows;
      }
    }
  }
  write_metadata(out_dir, "bound-bench", cfg, seed, json{{"rows", rows}});
}

/* ---------------------------------------------------------------------- */
/* SPD optimization runs                                                   */
/* ---------------------------------------------------------------------- */

/// Reference optimum cache: a long dense cubic Newton run keyed by the
/// instance parameters, reused across reruns so gap columns stay stable.
inline double spd_reference_value(const std::string& out_dir,
                                  const std::string& key,
                                  const geometry::SpdObjective& obj,
                                  const geometry::SpdPoint& x0,
                                  const optimizer::RunConfig& base,
                                  bool* converged) {
  std::string path = out_dir + "/spd_reference.txt";
  {
    std::ifstream in(path, std::ios::binary);
    std::string cached_key, value_text;
    if (in && std::getline(in, cached_key) && std::getline(in, value_text) &&
        cached_key == key) {
      char* end = nullptr;
      double v = std::strtod(value_text.c_str(), &end);
      if (end != value_text.c_str() && *end == '\0') {
        if (converged) *converged = true;
        return v;
      }
    }
  }
  optimizer::RunConfig ref = base;
  ref.l = 0;
  ref.grad_tol = 1e-12;
  ref.max_iter = 10 * std::max<Index>(base.max_iter, 100);
  ref.timing = false;
  auto run = optimizer::full_cubic_newton_run(obj, x0, ref,
                                              std::max<Index>(500, 2048));
  if (converged) *converged = run.converged;
  double v = std::strtod(io::format_double(run.final_f).c_str(), nullptr);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw InvalidInput("cannot write reference cache in '" + out_dir + "'");
  out << key << '\n' << io::format_double(v) << '\n';
  return v;
}

inline void run_optimize_spd(const io::Config& cfg, const std::string& out_dir,
                             bool paper_scale) {
  Index n = cfg.get_index("n", paper_scale ? 40 : 10);
  require_positive(n, "optimize-spd: n");
  Index d = geometry::sym_dim(n);
  std::vector<Index> ls = cfg.get_index_list(
      "sketch_sizes", paper_scale ? std::vector<Index>{20, 80, 320}
                                  : std::vector<Index>{7, 27, 55});
  require_sketch_sizes(ls, d, "optimize-spd");
  std::vector<std::uint64_t> seeds = parse_seeds(cfg, {0, 1, 2, 3, 4});
  double w = cfg.get_double("w", 1.0);
  double lambda = cfg.get_double("lambda", 1.0);
  double rho = cfg.get_double("rho", 1.0);
  optimizer::RunConfig base = optimizer_config(cfg, 1000, 1e-6);
  base.refresh_period = cfg.get_index("refresh_period", 1);
  if (base.refresh_period < 1)
    throw ConfigError("refresh_period must be >= 1");
  std::uint64_t seed = cfg.get_seed("seed", 0);

  ensure_dir(out_dir);
  Rng rng_a(derive_seed(seed, 11));
  Rng rng_b(derive_seed(seed, 12));
  Matrix a = random_spd_matrix(n, 0.2, 2.0, rng_a);
  Matrix b = random_spd_matrix(n, 0.2, 2.0, rng_b);
  geometry::SpdObjective obj(a, b, w, lambda, rho);
  geometry::SpdPoint x0(Matrix::Identity(n, n));

  std::string ref_key = "n=" + std::to_string(n) + " seed=" +
                        std::to_string(seed) + " w=" + io::format_double(w) +
                        " lambda=" + io::format_double(lambda) + " rho=" +
                        io::format_double(rho) + " tol=1e-12";
  bool ref_converged = false;
  double f_ref =
      spd_reference_value(out_dir, ref_key, obj, x0, base, &ref_converged);

  struct Job {
    Index l;
    std::uint64_t seed_entry;
  };
  std::vector<Job> jobs;
  for (Index l : ls)
    for (std::uint64_t s : seeds) jobs.push_back({l, s});
  std::vector<std::optional<optimizer::RunResult<geometry::SpdObjective>>>
      results(jobs.size());
  run_indexed(static_cast<Index>(jobs.size()), [&](Index i) {
    const Job& job = jobs[static_cast<std::size_t>(i)];
    optimizer::RunConfig rc = base;
    rc.l = job.l;
    rc.seed = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(job.l)),
                          job.seed_entry);
    results[static_cast<std::size_t>(i)].emplace(
        optimizer::rrncn_run(obj, x0, rc));
  });

  io::CsvWriter summary(out_dir + "/spd_summary.csv");
  summary.header({"l", "seed", "iterations", "converged", "final_f",
                  "final_gap", "final_grad_norm", "total_hvps",
                  "wall_ms_total"});
  Index nonconverged = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& run = *results[i];
    const Job& job = jobs[i];
    write_trace_csv(out_dir + "/spd_trace_l" + std::to_string(job.l) +
                        "_seed" + std::to_string(job.seed_entry) + ".csv",
                    run.trace, f_ref);
    double wall = 0.0;
    for (const auto& r : run.trace) wall += r.wall_ms;
    summary.row(job.l, job.seed_entry, run.iterations(),
                static_cast<int>(run.converged), run.final_f,
                run.final_f - f_ref, run.final_grad_norm, run.total_hvps,
                wall);
    if (!run.converged) ++nonconverged;
  }
  write_metadata(out_dir, "optimize-spd", cfg, seed,
                 json{{"f_ref", f_ref},
                      {"reference_converged", ref_converged},
                      {"init", "identity"},
                      {"n", n},
                      {"d", d},
                      {"nonconverged_runs", nonconverged}});
}

/* ---------------------------------------------------------------------- */
/* Grassmann optimization runs                                             */
/* ---------------------------------------------------------------------- */

inline void run_optimize_grassmann(const io::Config& cfg,
                                   const std::string& out_dir,
                                   bool paper_scale) {
  Index n = cfg.get_index("n", paper_scale ? 20000 : 500);
  Index p = cfg.get_index("p", paper_scale ? 20 : 5);
  require_positive(n, "optimize-grassmann: n");
  require_positive(p, "optimize-grassmann: p");
  if (p > n)
    throw ConfigError("optimize-grassmann: p must not exceed n");
  Index dim = p * (n - p);
  Index l = cfg.get_index("l", paper_scale ? 20 : 10);
  if (dim > 0 && (l < 1 || l > dim))
    throw ConfigError("optimize-grassmann: sketch size " + std::to_string(l) +
                      " outside [1, " + std::to_string(dim) +
                      "] (tangent dimension)");
  std::vector<Index> refreshes =
      cfg.get_index_list("refresh_periods", {1, 2, 3});
  for (Index t : refreshes)
    if (t < 1) throw ConfigError("refresh_periods: entries must be >= 1");
  std::vector<std::uint64_t> seeds = parse_seeds(cfg, {0, 1, 2, 3, 4});
  optimizer::RunConfig base = optimizer_config(cfg, 3000, 1e-6);
  std::uint64_t seed = cfg.get_seed("seed", 0);

  ensure_dir(out_dir);
  Rng rng_a(derive_seed(seed, 21));
  Vector diag(n);
  for (Index i = 0; i < n; ++i) diag(i) = rng_a.uniform(1.0, 20.0);
  Vector sorted = diag;
  std::sort(sorted.data(), sorted.data() + n, std::greater<double>());
  double f_star = -sorted.head(p).sum();
  geometry::GrassmannTraceObjective obj(diag);

  struct Job {
    Index refresh;
    std::uint64_t seed_entry;
  };
  std::vector<Job> jobs;
  for (Index t : refreshes)
    for (std::uint64_t s : seeds) jobs.push_back({t, s});

  auto start_point = [&](std::uint64_t entry) {
    Rng rng(derive_seed(derive_seed(seed, 22), entry));
    Matrix g(n, p);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j) g(i, j) = rng.normal();
    return geometry::GrassmannPoint(matfun::orthonormalize(g));
  };

  io::CsvWriter summary(out_dir + "/grassmann_summary.csv");
  summary.header({"refresh", "seed", "iterations", "converged", "final_f",
                  "final_gap", "final_grad_norm", "total_hvps",
                  "wall_ms_total"});

  if (dim == 0) {
    // the manifold is a single point; nothing to optimize
    geometry::GrassmannPoint x0(Matrix::Identity(n, p));
    double f0 = obj.value(x0);
    for (const Job& job : jobs) {
      write_trace_csv(out_dir + "/grassmann_trace_T" +
                          std::to_string(job.refresh) + "_seed" +
                          std::to_string(job.seed_entry) + ".csv",
                      {}, f_star);
      summary.row(job.refresh, job.seed_entry, Index{0}, 1, f0, f0 - f_star,
                  0.0, Index{0}, 0.0);
    }
    write_metadata(out_dir, "optimize-grassmann", cfg, seed,
                   json{{"f_star", f_star},
                        {"degenerate", true},
                        {"nonconverged_runs", 0}});
    return;
  }

  std::vector<
      std::optional<optimizer::RunResult<geometry::GrassmannTraceObjective>>>
      results(jobs.size());
  run_indexed(static_cast<Index>(jobs.size()), [&](Index i) {
    const Job& job = jobs[static_cast<std::size_t>(i)];
    optimizer::RunConfig rc = base;
    rc.l = l;
    rc.refresh_period = job.refresh;
    rc.seed = derive_seed(
        derive_seed(seed, static_cast<std::uint64_t>(job.refresh)),
        job.seed_entry);
    results[static_cast<std::size_t>(i)].emplace(
        optimizer::rrncn_run(obj, start_point(job.seed_entry), rc));
  });

  Index nonconverged = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& run = *results[i];
    const Job& job = jobs[i];
    write_trace_csv(out_dir + "/grassmann_trace_T" +
                        std::to_string(job.refresh) + "_seed" +
                        std::to_string(job.seed_entry) + ".csv",
                    run.trace, f_star);
    double wall = 0.0;
    for (const auto& r : run.trace) wall += r.wall_ms;
    summary.row(job.refresh, job.seed_entry, run.iterations(),
                static_cast<int>(run.converged), run.final_f,
                run.final_f - f_star, run.final_grad_norm, run.total_hvps,
                wall);
    if (!run.converged) ++nonconverged;
  }
  write_metadata(out_dir, "optimize-grassmann", cfg, seed,
                 json{{"f_star", f_star},
                      {"init", "random orthonormal"},
                      {"n", n},
                      {"p", p},
                      {"l", l},
                      {"nonconverged_runs", nonconverged}});
}

/* ---------------------------------------------------------------------- */
/* Principal geodesic analysis runs                                        */
/* ---------------------------------------------------------------------- */

inline void write_scores_csv(const std::string& path,
                             const pga::PgaModel& model,
                             const std::vector<int>& labels) {
  io::CsvWriter csv(path);
  std::vector<std::string> names{"sample", "label"};
  for (Index j = 0; j < model.score_mat.cols(); ++j)
    names.push_back("score_" + std::to_string(j));
  csv.header(names);
  for (Index i = 0; i < model.score_mat.rows(); ++i) {
    std::string line = std::to_string(i);
    int label =
        labels.empty() ? -1 : labels[static_cast<std::size_t>(i)];
    line += "," + std::to_string(label);
    for (Index j = 0; j < model.score_mat.cols(); ++j)
      line += "," + io::format_double(model.score_mat(i, j));
    csv.row(line);
  }
}

inline void run_pga(const io::Config& cfg, const std::string& out_dir,
                    bool paper_scale) {
  Index k = cfg.get_index("k", paper_scale ? 20 : 5);
  require_positive(k, "pga: k");
  std::uint64_t seed = cfg.get_seed("seed", 0);

  pga::PgaDataset data;
  if (cfg.has("dataset")) {
    data = io::parse_matrix_bundle(cfg.require_string("dataset"));
  } else {
    Index n = cfg.get_index("n", paper_scale ? 93 : 8);
    Index classes = cfg.get_index("classes", paper_scale ? 5 : 3);
    Index per_class = cfg.get_index("per_class", paper_scale ? 40 : 20);
    require_positive(n, "pga: n");
    require_positive(classes, "pga: classes");
    require_positive(per_class, "pga: per_class");
    double spread = cfg.get_double("class_spread", 0.8);
    double noise = cfg.get_double("class_noise", 0.15);
    Rng rng(derive_seed(seed, 31));
    data = synthetic_spd_classes(n, per_class, classes, spread, noise, rng);
  }
  if (cfg.get_bool("floor", true)) {
    for (auto& s : data.samples) s = pga::floor_spd(s.mat());
  }
  pga::validate_dataset(data);
  Index d = geometry::sym_dim(data.n());
  std::vector<Index> ls = cfg.get_index_list(
      "sketch_sizes", paper_scale ? std::vector<Index>{20, 80, 320}
                                  : std::vector<Index>{5, 10, d});
  require_sketch_sizes(ls, d, "pga");
  if (k > d)
    throw ConfigError("pga: k exceeds the tangent dimension " +
                      std::to_string(d));

  ensure_dir(out_dir);

  Index eligible = 0;
  {
    std::map<int, Index> counts;
    for (int lab : data.labels) ++counts[lab];
    for (const auto& [lab, c] : counts) {
      (void)lab;
      if (c >= 2) ++eligible;
    }
  }
  bool can_t2 = eligible >= 2;

  io::CsvWriter eig_csv(out_dir + "/eigenvalues.csv");
  eig_csv.header({"method", "l", "index", "value"});
  json methods = json::array();

  auto record = [&](const pga::PgaModel& model, Index l_used) {
    std::string tag = model.method == "exact"
                          ? "exact"
                          : "nystrom_l" + std::to_string(l_used);
    write_scores_csv(out_dir + "/scores_" + tag + ".csv", model, data.labels);
    for (Index j = 0; j < model.eig.values.size(); ++j)
      eig_csv.row(model.method, l_used, j, model.eig.values(j));
    pga::MemoryProxy mem = pga::memory_proxy(d, data.size(),
                                             l_used > 0 ? l_used : d);
    json entry;
    entry["method"] = model.method;
    entry["l"] = l_used;
    entry["components_kept"] = model.eig.values.size();
    entry["truncated"] = model.eig.truncated;
    entry["memory_bytes"] = model.method == "exact" ? mem.exact_bytes
                                                    : mem.nystrom_bytes;
    if (can_t2) {
      pga::PairwiseT2 t2 = pga::pairwise_t2_median(model.score_mat,
                                                   data.labels);
      entry["median_t2"] = t2.median;
      entry["t2_regularized"] = t2.regularized;
      entry["skipped_classes"] = t2.skipped;
    } else {
      entry["median_t2"] = nullptr;
    }
    methods.push_back(entry);
  };

  record(pga::fit_exact(data, k), 0);
  for (std::size_t li = 0; li < ls.size(); ++li)
    record(pga::fit_nystrom(data, k, ls[li], derive_seed(seed, 40 + li)),
           ls[li]);

  json results;
  results["methods"] = methods;
  results["n"] = data.n();
  results["d"] = d;
  results["count"] = data.size();
  results["labeled"] = !data.labels.empty();
  write_metadata(out_dir, "pga", cfg, seed, results);
}

}  // namespace experiments
}  // namespace mannystrom

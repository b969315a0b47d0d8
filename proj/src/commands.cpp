#include "fagh/commands.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>

#include "fagh/errors.hpp"
#include "fagh/metrics.hpp"

namespace fagh {

int cmd_run(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  std::optional<Federation> fed;
  try {
    fed = build_federation(config);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    const auto result = run_experiment(*fed);
    std::size_t skipped = 0;
    std::size_t uplink = 0;
    std::size_t fallbacks = 0;
    for (const auto& r : result.records) {
      skipped += r.skipped_clients;
      uplink += r.uplink_scalars;
      fallbacks += r.fallback ? 1 : 0;
    }
    if (skipped > 0) {
      err << "warning: " << skipped
          << " sampled client slots had no local data and were skipped\n";
    }
    write_csv(result.records, config.output);

    char line[256];
    if (result.records.empty()) {
      std::snprintf(line, sizeof line, "%s: 0 rounds, total_uplink_scalars=0",
                    to_string(config.algorithm).c_str());
    } else {
      const auto& last = result.records.back();
      std::snprintf(line, sizeof line,
                    "%s: rounds=%zu train_loss=%.6g test_loss=%.6g test_accuracy=%.4f "
                    "total_uplink_scalars=%zu fallbacks=%zu",
                    to_string(config.algorithm).c_str(), last.round, last.train_loss,
                    last.test_loss, last.test_accuracy, uplink, fallbacks);
    }
    out << line << " -> " << config.output.string() << '\n';
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_run(const std::optional<std::filesystem::path>& config_file,
            const ConfigOverrides& overrides, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  try {
    config = parse_config(config_file, overrides);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return cmd_run(config, out, err);
}

int cmd_table(const std::vector<std::filesystem::path>& csv_paths,
              const std::vector<double>& targets, std::ostream& out, std::ostream& err) {
  std::vector<std::vector<RoundRecord>> runs;
  try {
    for (const auto& p : csv_paths) runs.push_back(read_csv(p));
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  char cell[64];
  out << "Method      ";
  for (double t : targets) {
    char label[32];
    std::snprintf(label, sizeof label, "%.10g%%", t * 100.0);
    std::snprintf(cell, sizeof cell, "%8s", label);
    out << cell;
  }
  out << '\n';
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::snprintf(cell, sizeof cell, "%-12s", csv_paths[i].stem().string().c_str());
    out << cell;
    for (const auto& r : rounds_to_target(runs[i], targets)) {
      std::snprintf(cell, sizeof cell, "%8s", format_rounds(r).c_str());
      out << cell;
    }
    out << '\n';
  }
  return kExitOk;
}

int cmd_partition_stats(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const auto data = load_experiment_data(config);
    const auto table = partition_stats(data.partition, data.train);
    out << "client,samples";
    for (std::size_t c = 0; c < data.train.num_classes; ++c) out << ",class_" << c;
    out << '\n';
    for (std::size_t k = 0; k < table.size(); ++k) {
      out << k << ',' << data.partition.assignments[k].size();
      for (auto n : table[k]) out << ',' << n;
      out << '\n';
    }
    out << "# assigned=" << data.partition.assigned() << " dropped=" << data.partition.dropped
        << '\n';
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

namespace {

struct SuiteResult {
  std::size_t passed = 0;
  std::size_t total = 0;
  void check(bool ok) {
    ++total;
    if (ok) ++passed;
  }
};

double rel_err(const ParamVector& x, const ParamVector& ref) {
  return std::sqrt(norm_sq(x - ref)) / std::max(std::sqrt(norm_sq(ref)), 1e-300);
}

ParamVector random_vector(std::size_t d, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ParamVector v(d);
  for (auto& x : v) x = u(rng);
  return v;
}

Batch random_batch(std::size_t n, std::size_t dim, std::size_t classes, std::mt19937_64& rng) {
  Batch b;
  b.input_dim = dim;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
  for (std::size_t i = 0; i < n * dim; ++i) b.features.push_back(normal(rng));
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(label(rng));
  return b;
}

SuiteResult dense_solve_suite(const Rank1Solver& solver) {
  SuiteResult r;
  {
    const auto x = solver({1, 0, 0}, {2, 4, 6}, 1.0, kPivotEps).direction;
    r.check(max_abs(x - ParamVector{1, 4, 6}) <= 1e-12);
  }
  {
    const auto x = solver({1, 2}, {1, 2}, 1.0, kPivotEps).direction;
    r.check(max_abs(x - ParamVector{1.0 / 6.0, 1.0 / 3.0}) <= 1e-12);
  }
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> pivot(0.5, 1.5);
  for (std::size_t d : {3, 10, 100}) {
    for (double rho : {1e-3, 1e-1, 1.0}) {
      for (int i = 0; i < 10; ++i) {
        ParamVector v = random_vector(d, rng);
        v[0] = pivot(rng);
        const ParamVector g = random_vector(d, rng);
        const auto x = solver(v, g, rho, kPivotEps);
        r.check(!x.fallback && rel_err(x.direction, dense_solve_oracle(v, g, rho)) <= 1e-10);
      }
    }
  }
  return r;
}

SuiteResult finite_diff_suite() {
  SuiteResult r;
  std::mt19937_64 rng(7);
  const ModelSpec specs[] = {ModelSpec::mlr(4, 3, true), ModelSpec::mlr(3, 2, false),
                             ModelSpec::mlp(3, {4}, 3, true), ModelSpec::mlp(2, {3, 2}, 2, true)};
  for (const auto& spec : specs) {
    for (int i = 0; i < 3; ++i) {
      const ParamVector w = 0.5 * random_vector(spec.param_count(), rng);
      const Batch b = random_batch(6, spec.input_dim, spec.num_classes, rng);
      const auto fd = finite_diff_oracles(spec, w, b);
      r.check(max_abs(gradient(spec, w, b) - fd.gradient) <= 1e-6);
      r.check(max_abs(hessian_first_row(spec, w, b) - fd.hessian_row) <= 1e-4);
    }
  }
  return r;
}

SuiteResult rank1_suite() {
  SuiteResult r;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 10);
  for (int i = 0; i < 20; ++i) {
    const ModelSpec spec = ModelSpec::mlr(dim(rng), 2, i % 2 == 0);
    const std::size_t d = spec.param_count();
    const ParamVector w = random_vector(d, rng);
    const Batch b = random_batch(1, spec.input_dim, 2, rng);
    const ParamVector v = hessian_first_row(spec, w, b);
    if (std::abs(v[0]) <= 1e-8) continue;
    double worst = 0.0;
    for (std::size_t col = 0; col < d; ++col) {
      const ParamVector h = hvp(spec, w, b, ParamVector::basis(d, col));
      for (std::size_t row = 0; row < d; ++row) {
        worst = std::max(worst, std::abs(v[row] * v[col] / v[0] - h[row]));
      }
    }
    r.check(worst <= 1e-8);
  }
  return r;
}

SuiteResult moment_suite() {
  SuiteResult r;
  const ParamVector g{0.3, -1.7, 2.5};
  const ParamVector v{1.1, 0.2, -0.4};
  for (double beta : {0.0, 0.5, 0.9, 0.99}) {
    auto state = MomentState::zeros(3, beta, beta);
    bool ok = true;
    for (int t = 1; t <= 50; ++t) {
      state = ema_update(state, g, v);
      const auto c = bias_correct(state);
      ok = ok && max_abs(c.gradient - g) <= 1e-12 && max_abs(c.hessian_row - v) <= 1e-12;
    }
    r.check(ok);
  }
  return r;
}

SuiteResult partition_suite() {
  SuiteResult r;
  const Dataset ds = synth_classification(3, 1000, 2, 10, 1.0);
  const auto counts = ds.class_counts();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = dirichlet_partition(ds, 20, 0.2, seed);
    const auto hist = partition_stats(p, ds);
    bool conserved = p.assigned() == ds.size() && p.dropped == 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      std::size_t col = 0;
      for (const auto& row : hist) col += row[c];
      conserved = conserved && col == counts[c];
    }
    r.check(conserved);
    r.check(p == dirichlet_partition(ds, 20, 0.2, seed));

    const auto s = shard_partition(ds, 30, 2, seed);
    r.check(s.num_clients() == 15 && s.assigned() + s.dropped == ds.size() && s.dropped == 10);
    r.check(s == shard_partition(ds, 30, 2, seed));
  }
  return r;
}

}  // namespace

int cmd_selftest(std::ostream& out, const SelftestOptions& options) {
  struct Entry {
    const char* name;
    std::function<SuiteResult()> run;
  };
  const Entry suites[] = {
      {"dense_solve", [&] { return dense_solve_suite(options.solver); }},
      {"finite_differences", finite_diff_suite},
      {"rank1_exactness", rank1_suite},
      {"moment_identities", moment_suite},
      {"partition_conservation", partition_suite},
  };

  std::size_t suites_passed = 0;
  for (const auto& s : suites) {
    SuiteResult res;
    try {
      res = s.run();
    } catch (const std::exception& e) {
      out << s.name << ": exception: " << e.what() << '\n';
      res.total = std::max<std::size_t>(res.total, 1);
    }
    const bool ok = res.total > 0 && res.passed == res.total;
    if (ok) ++suites_passed;
    out << s.name << ": " << res.passed << "/" << res.total << " passed"
        << (ok ? "" : "  FAILED") << '\n';
  }
  const std::size_t n = std::size(suites);
  out << "selftest: " << suites_passed << "/" << n << " suites passed\n";
  return suites_passed == n ? kExitOk : kExitSelftest;
}

}  // namespace fagh

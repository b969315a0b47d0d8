#include "fagh/fedcore.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "fagh/errors.hpp"
#include "fagh/rng.hpp"

namespace fagh {

Algorithm parse_algorithm(std::string_view name) {
  if (name == "fagh") return Algorithm::kFagh;
  if (name == "fedavg") return Algorithm::kFedAvg;
  if (name == "scaffold") return Algorithm::kScaffold;
  if (name == "fedexp") return Algorithm::kFedExp;
  throw InvalidArgument("unknown algorithm '" + std::string(name) +
                        "' (expected fagh, fedavg, scaffold or fedexp)");
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kFagh: return "fagh";
    case Algorithm::kFedAvg: return "fedavg";
    case Algorithm::kScaffold: return "scaffold";
    case Algorithm::kFedExp: return "fedexp";
  }
  return "?";
}

ParamVector ScaffoldState::control_of(std::size_t client) const {
  auto it = c_local.find(client);
  return it == c_local.end() ? ParamVector(w.size()) : it->second;
}

const ParamVector& global_model(const AlgorithmState& state) {
  return std::visit([](const auto& s) -> const ParamVector& { return s.w; }, state);
}

std::vector<std::size_t> sample_participants(std::size_t num_clients, double fraction,
                                             std::uint64_t seed, std::size_t round) {
  if (num_clients == 0) throw InvalidArgument("sample_participants: no clients");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("sample_participants: fraction must lie in (0, 1], got " +
                          std::to_string(fraction));
  }
  const auto wanted = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(num_clients)));
  const std::size_t count = std::clamp<std::size_t>(wanted, 1, num_clients);

  std::vector<std::size_t> ids(num_clients);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  auto rng = make_stream(seed, StreamTag::kParticipants, round);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, num_clients - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ClientReport client_fagh_step(const ModelSpec& spec, const ParamVector& w, const Batch& local,
                              const RoundPlan& plan, std::size_t client) {
  if (local.empty()) {
    throw InvalidArgument("client " + std::to_string(client) + " has no local data");
  }
  if (plan.policy.minibatch && *plan.policy.minibatch < local.size()) {
    const std::size_t size = *plan.policy.minibatch;
    if (size == 0) throw InvalidArgument("client_fagh_step: minibatch size must be positive");
    std::vector<std::size_t> idx(local.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto rng = make_stream(plan.seed, StreamTag::kMinibatch, plan.round, client);
    for (std::size_t i = 0; i < size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
    const Batch mb = local.gather(idx);
    return {gradient(spec, w, mb), hessian_first_row(spec, w, mb), mb.size()};
  }
  return {gradient(spec, w, local), hessian_first_row(spec, w, local), local.size()};
}

GlobalEstimate aggregate_reports(std::span<const ClientReport> reports) {
  if (reports.empty()) throw InvalidArgument("aggregate_reports: no reports");
  double total = 0.0;
  for (const auto& r : reports) total += static_cast<double>(r.n_samples);
  if (!(total > 0.0)) throw InvalidArgument("aggregate_reports: reports carry no samples");

  std::vector<double> weights;
  std::vector<ParamVector> gs;
  std::vector<ParamVector> vs;
  for (const auto& r : reports) {
    require_same_dim(r.g, r.v, "aggregate_reports");
    weights.push_back(static_cast<double>(r.n_samples) / total);
    gs.push_back(r.g);
    vs.push_back(r.v);
  }
  return {weighted_average(gs, weights), weighted_average(vs, weights)};
}

FaghServerState server_fagh_update(const FaghServerState& state, const ParamVector& g_global,
                                   const ParamVector& v_global) {
  require_same_dim(state.w, g_global, "server_fagh_update(g)");
  require_same_dim(state.w, v_global, "server_fagh_update(v)");
  if (state.moments.dim() != state.w.size()) {
    throw DimensionError("server_fagh_update: moment dimension differs from the model");
  }

  FaghServerState next = state;
  next.moments = ema_update(state.moments, g_global, v_global);
  const auto corrected = bias_correct(next.moments);
  const auto solve =
      rank1_regularized_solve(corrected.hessian_row, corrected.gradient, state.rho, state.pivot_eps);
  axpy(-state.eta, solve.direction, next.w);
  if (solve.fallback) ++next.fallback_count;
  return next;
}

ModelDelta client_local_sgd(const ModelSpec& spec, const ParamVector& w, const Batch& local,
                            const LocalSgdOptions& options, std::uint64_t shuffle_seed,
                            const ScaffoldControl* control) {
  if (options.epochs == 0) throw InvalidArgument("client_local_sgd: epochs must be >= 1");
  if (!(options.lr > 0.0)) throw InvalidArgument("client_local_sgd: lr must be positive");
  if (options.batch.minibatch && *options.batch.minibatch == 0) {
    throw InvalidArgument("client_local_sgd: batch size must be >= 1");
  }

  ParamVector correction(w.size());
  if (control != nullptr) {
    require_same_dim(w, control->c_global, "client_local_sgd(c_global)");
    require_same_dim(w, control->c_local, "client_local_sgd(c_local)");
    correction = control->c_global - control->c_local;
  }

  ModelDelta out{ParamVector(w.size()), local.size(), std::nullopt};
  if (local.empty()) {
    if (control != nullptr) out.control_update = ParamVector(w.size());
    return out;
  }

  const std::size_t n = local.size();
  const std::size_t bs = options.batch.minibatch ? std::min(*options.batch.minibatch, n) : n;
  ParamVector x = w;
  std::size_t steps = 0;
  auto step_on = [&](const Batch& batch) {
    const ParamVector g = gradient(spec, x, batch);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] -= options.lr * (g[k] + correction[k]);
    ++steps;
  };

  std::mt19937_64 rng(shuffle_seed);
  std::vector<std::size_t> order(n);
  for (std::size_t e = 0; e < options.epochs; ++e) {
    if (bs == n) {
      step_on(local);
      continue;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      step_on(local.gather(std::span<const std::size_t>(order).subspan(start, len)));
    }
  }

  out.delta = x - w;
  if (control != nullptr) {
    const double scale = 1.0 / (static_cast<double>(steps) * options.lr);
    ParamVector dc(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
      dc[k] = -control->c_global[k] + (w[k] - x[k]) * scale;
    }
    out.control_update = std::move(dc);
  }
  return out;
}

namespace {

std::vector<ParamVector> collect_deltas(std::span<const ModelDelta> deltas) {
  std::vector<ParamVector> out;
  out.reserve(deltas.size());
  for (const auto& d : deltas) out.push_back(d.delta);
  return out;
}

ParamVector equal_mean(const std::vector<ParamVector>& vs) {
  const std::vector<double> weights(vs.size(), 1.0 / static_cast<double>(vs.size()));
  return weighted_average(vs, weights);
}

}  // namespace

ParamVector server_fedavg_update(const ParamVector& w, std::span<const ModelDelta> deltas) {
  if (deltas.empty()) throw InvalidArgument("server_fedavg_update: no deltas");
  double total = 0.0;
  for (const auto& d : deltas) total += static_cast<double>(d.n_samples);
  if (!(total > 0.0)) throw InvalidArgument("server_fedavg_update: deltas carry no samples");
  std::vector<double> weights;
  for (const auto& d : deltas) weights.push_back(static_cast<double>(d.n_samples) / total);
  const ParamVector avg = weighted_average(collect_deltas(deltas), weights);
  require_same_dim(w, avg, "server_fedavg_update");
  return w + avg;
}

ScaffoldState server_scaffold_update(const ScaffoldState& state,
                                     std::span<const ModelDelta> deltas,
                                     std::span<const std::size_t> participants) {
  if (deltas.empty()) throw InvalidArgument("server_scaffold_update: no participants");
  if (deltas.size() != participants.size()) {
    throw DimensionError("server_scaffold_update: deltas and participant ids differ in length");
  }
  std::vector<ParamVector> dcs;
  for (const auto& d : deltas) {
    if (!d.control_update) {
      throw InvalidArgument("server_scaffold_update: delta without control_update");
    }
    dcs.push_back(*d.control_update);
  }

  ScaffoldState next = state;
  const ParamVector mean_delta = equal_mean(collect_deltas(deltas));
  require_same_dim(state.w, mean_delta, "server_scaffold_update");
  for (std::size_t k = 0; k < next.w.size(); ++k) next.w[k] += state.global_lr * mean_delta[k];

  const ParamVector mean_dc = equal_mean(dcs);
  const double share =
      static_cast<double>(participants.size()) / static_cast<double>(state.num_clients);
  axpy(share, mean_dc, next.c_global);
  for (std::size_t i = 0; i < participants.size(); ++i) {
    next.c_local[participants[i]] = state.control_of(participants[i]) + dcs[i];
  }
  return next;
}

FedExpStep server_fedexp_update(const ParamVector& w, std::span<const ModelDelta> deltas,
                                double epsilon) {
  if (deltas.empty()) throw InvalidArgument("server_fedexp_update: no deltas");
  if (!(epsilon >= 0.0)) throw InvalidArgument("server_fedexp_update: epsilon must be >= 0");
  const auto ds = collect_deltas(deltas);
  const ParamVector mean = equal_mean(ds);
  require_same_dim(w, mean, "server_fedexp_update");

  double sum_sq = 0.0;
  for (const auto& d : ds) sum_sq += norm_sq(d);
  const double denom = 2.0 * static_cast<double>(ds.size()) * (norm_sq(mean) + epsilon);
  double lr = 1.0;
  if (denom > 0.0) lr = std::max(1.0, sum_sq / denom);

  FedExpStep out{w, lr};
  axpy(lr, mean, out.w);
  return out;
}

Federation make_federation(ModelSpec spec, FederationConfig config, Dataset train, Dataset test,
                           const DataPartition& partition) {
  spec.validate();
  if (config.num_clients == 0) throw InvalidArgument("federation: need at least one client");
  if (partition.num_clients() != config.num_clients) {
    throw InvalidArgument("federation: partition has " + std::to_string(partition.num_clients()) +
                          " clients, configuration expects " +
                          std::to_string(config.num_clients));
  }
  for (const Dataset* ds : {&train, &test}) {
    if (ds->input_dim() != spec.input_dim) {
      throw DimensionError("federation: dataset input_dim " + std::to_string(ds->input_dim()) +
                           " differs from model input_dim " + std::to_string(spec.input_dim));
    }
    if (ds->num_classes > spec.num_classes) {
      throw InvalidArgument("federation: dataset has more classes than the model");
    }
  }
  Federation fed{std::move(spec), config, std::move(train), std::move(test), {}};
  fed.client_data.reserve(partition.num_clients());
  for (const auto& idx : partition.assignments) fed.client_data.push_back(fed.train.subset(idx));
  return fed;
}

AlgorithmState initial_state(const Federation& fed) {
  const auto& c = fed.config;
  ParamVector w0 = initial_parameters(fed.spec, c.seed);
  const std::size_t d = w0.size();
  switch (c.algorithm) {
    case Algorithm::kFagh:
      return FaghServerState{w0, MomentState::zeros(d, c.beta1, c.beta2), c.eta, c.rho,
                             c.pivot_eps, 0};
    case Algorithm::kFedAvg:
      return FedAvgState{w0};
    case Algorithm::kScaffold:
      return ScaffoldState{w0, ParamVector(d), {}, c.local_lr, c.global_lr, c.num_clients};
    case Algorithm::kFedExp:
      return FedExpState{w0, c.epsilon};
  }
  throw InvalidArgument("initial_state: unknown algorithm");
}

std::size_t uplink_per_client(Algorithm algorithm, std::size_t dim) {
  switch (algorithm) {
    case Algorithm::kFagh:
    case Algorithm::kScaffold: return 2 * dim + 1;
    case Algorithm::kFedAvg:
    case Algorithm::kFedExp: return dim + 1;
  }
  return 0;
}

std::size_t downlink_per_client(Algorithm algorithm, std::size_t dim) {
  return algorithm == Algorithm::kScaffold ? 2 * dim : dim;
}

RoundOutcome run_round(const Federation& fed, AlgorithmState state, std::size_t round) {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = fed.config;
  const ModelSpec& spec = fed.spec;

  RoundPlan plan{round, sample_participants(cfg.num_clients, cfg.participation, cfg.seed, round),
                 cfg.batch, cfg.seed};
  std::vector<std::size_t> active;
  for (auto id : plan.participants) {
    if (!fed.client_data.at(id).empty()) active.push_back(id);
  }

  RoundRecord rec;
  rec.round = round;
  rec.skipped_clients = plan.participants.size() - active.size();

  if (!active.empty()) {
    const std::size_t d = global_model(state).size();
    rec.uplink_scalars = active.size() * uplink_per_client(cfg.algorithm, d);
    rec.downlink_scalars = active.size() * downlink_per_client(cfg.algorithm, d);
    const LocalSgdOptions sgd{cfg.local_epochs, cfg.local_lr, cfg.batch};
    auto shuffle_seed = [&](std::size_t id) {
      return stream_seed(cfg.seed, StreamTag::kLocalShuffle, round, id);
    };

    if (auto* s = std::get_if<FaghServerState>(&state)) {
      std::vector<ClientReport> reports;
      for (auto id : active) {
        reports.push_back(client_fagh_step(spec, s->w, fed.client_data[id], plan, id));
      }
      const auto global = aggregate_reports(reports);
      const std::size_t before = s->fallback_count;
      *s = server_fagh_update(*s, global.g, global.v);
      rec.fallback = s->fallback_count > before;
    } else if (auto* s = std::get_if<FedAvgState>(&state)) {
      std::vector<ModelDelta> deltas;
      for (auto id : active) {
        deltas.push_back(client_local_sgd(spec, s->w, fed.client_data[id], sgd, shuffle_seed(id)));
      }
      s->w = server_fedavg_update(s->w, deltas);
    } else if (auto* s = std::get_if<ScaffoldState>(&state)) {
      std::vector<ModelDelta> deltas;
      for (auto id : active) {
        const ScaffoldControl control{s->c_global, s->control_of(id)};
        deltas.push_back(
            client_local_sgd(spec, s->w, fed.client_data[id], sgd, shuffle_seed(id), &control));
      }
      *s = server_scaffold_update(*s, deltas, active);
    } else if (auto* s = std::get_if<FedExpState>(&state)) {
      std::vector<ModelDelta> deltas;
      for (auto id : active) {
        deltas.push_back(client_local_sgd(spec, s->w, fed.client_data[id], sgd, shuffle_seed(id)));
      }
      const auto step = server_fedexp_update(s->w, deltas, s->epsilon);
      s->w = step.w;
      rec.server_lr = step.server_lr;
    }
  }

  const ParamVector& w = global_model(state);
  require_finite(w, "global model after round " + std::to_string(round));
  const auto eval = evaluate_global(spec, w, fed.train, fed.test);
  rec.train_loss = eval.train_loss;
  rec.test_loss = eval.test_loss;
  rec.test_accuracy = eval.test_accuracy;
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(state), rec};
}

ExperimentResult run_experiment(const Federation& fed) {
  ExperimentResult result{{}, initial_state(fed)};
  result.records.reserve(fed.config.rounds);
  for (std::size_t t = 1; t <= fed.config.rounds; ++t) {
    auto outcome = run_round(fed, std::move(result.final_state), t);
    result.final_state = std::move(outcome.state);
    result.records.push_back(outcome.record);
  }
  return result;
}

}  // namespace fagh

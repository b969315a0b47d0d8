#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fagh/data.hpp"
#include "fagh/metrics.hpp"
#include "fagh/models.hpp"
#include "fagh/numkit.hpp"

namespace fagh {

enum class Algorithm { kFagh, kFedAvg, kScaffold, kFedExp };

/// Accepts "fagh", "fedavg", "scaffold", "fedexp". Throws InvalidArgument otherwise.
Algorithm parse_algorithm(std::string_view name);
std::string to_string(Algorithm algorithm);

/// Local batch selection. An empty minibatch size means the full local dataset.
struct BatchPolicy {
  std::optional<std::size_t> minibatch;

  static BatchPolicy full() { return {}; }
  static BatchPolicy sized(std::size_t n) { return {n}; }
  friend bool operator==(const BatchPolicy&, const BatchPolicy&) = default;
};

/// FAGH uplink payload: local gradient, local Hessian first row, sample count.
struct ClientReport {
  ParamVector g;
  ParamVector v;
  std::size_t n_samples = 0;
};

/// First-order uplink payload: local model change and, for SCAFFOLD, the
/// change in the client's control variate.
struct ModelDelta {
  ParamVector delta;
  std::size_t n_samples = 0;
  std::optional<ParamVector> control_update;
};

struct FaghServerState {
  ParamVector w;
  MomentState moments;
  double eta = 0.1;
  double rho = 0.1;
  double pivot_eps = kPivotEps;
  std::size_t fallback_count = 0;
};

struct FedAvgState {
  ParamVector w;
};

struct ScaffoldState {
  ParamVector w;
  ParamVector c_global;
  std::map<std::size_t, ParamVector> c_local;  // absent entries are zero
  double local_lr = 0.1;
  double global_lr = 1.0;
  std::size_t num_clients = 1;

  /// Control variate of `client`, zero if it has never reported.
  ParamVector control_of(std::size_t client) const;
};

struct FedExpState {
  ParamVector w;
  double epsilon = 1e-3;
};

using AlgorithmState = std::variant<FaghServerState, FedAvgState, ScaffoldState, FedExpState>;

const ParamVector& global_model(const AlgorithmState& state);

/// Participants of one round.
struct RoundPlan {
  std::size_t round = 0;
  std::vector<std::size_t> participants;  // sorted
  BatchPolicy policy;
  std::uint64_t seed = 0;
};

/// max(1, round(fraction * K)) distinct client ids drawn uniformly from the
/// (seed, round) stream, sorted ascending.
std::vector<std::size_t> sample_participants(std::size_t num_clients, double fraction,
                                             std::uint64_t seed, std::size_t round);

/// One gradient and one Hessian-first-row evaluation on the client's batch.
/// Throws InvalidArgument on empty local data; callers skip such clients.
ClientReport client_fagh_step(const ModelSpec& spec, const ParamVector& w, const Batch& local,
                              const RoundPlan& plan, std::size_t client);

struct GlobalEstimate {
  ParamVector g;
  ParamVector v;
};

/// Sample-weighted average over the reporting clients, p_i = n_i / sum_j n_j.
GlobalEstimate aggregate_reports(std::span<const ClientReport> reports);

/// Moment update, bias correction, rank-1 regularised solve and model step.
FaghServerState server_fagh_update(const FaghServerState& state, const ParamVector& g_global,
                                   const ParamVector& v_global);

struct LocalSgdOptions {
  std::size_t epochs = 1;
  double lr = 0.1;
  BatchPolicy batch;
};

/// Control variates handed to a SCAFFOLD client.
struct ScaffoldControl {
  ParamVector c_global;
  ParamVector c_local;
};

/// Minibatch SGD from w over shuffled local data. With `control`, each step
/// follows gradient + (c_global - c_local) and the result carries
///   c_local_new - c_local = -c_global + (w - w_local) / (steps * lr).
/// Empty local data returns a zero delta with n_samples = 0.
ModelDelta client_local_sgd(const ModelSpec& spec, const ParamVector& w, const Batch& local,
                            const LocalSgdOptions& options, std::uint64_t shuffle_seed,
                            const ScaffoldControl* control = nullptr);

/// w + sum_i (n_i / sum_j n_j) delta_i
ParamVector server_fedavg_update(const ParamVector& w, std::span<const ModelDelta> deltas);

/// w += global_lr * mean(delta); c_global += (|S| / K) * mean(control_update);
/// each participant's c_local += its control_update.
ScaffoldState server_scaffold_update(const ScaffoldState& state,
                                     std::span<const ModelDelta> deltas,
                                     std::span<const std::size_t> participants);

struct FedExpStep {
  ParamVector w;
  double server_lr = 1.0;
};

/// Extrapolated averaging:
///   server_lr = max(1, sum_i |delta_i|^2 / (2 |S| (|mean delta|^2 + epsilon)))
///   w + server_lr * mean(delta)
FedExpStep server_fedexp_update(const ParamVector& w, std::span<const ModelDelta> deltas,
                                double epsilon);

struct FederationConfig {
  Algorithm algorithm = Algorithm::kFagh;
  std::size_t num_clients = 1;
  double participation = 0.4;
  std::size_t rounds = 100;
  std::uint64_t seed = 0;
  BatchPolicy batch;
  // FAGH
  double eta = 0.1;
  double rho = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double pivot_eps = kPivotEps;
  // first-order baselines
  double local_lr = 0.1;
  std::size_t local_epochs = 1;
  double global_lr = 1.0;  // SCAFFOLD
  double epsilon = 1e-3;   // FedExP
};

/// Everything a simulation needs: model, datasets and the client shards,
/// materialised once.
struct Federation {
  ModelSpec spec;
  FederationConfig config;
  Dataset train;
  Dataset test;
  std::vector<Batch> client_data;
};

/// Validates dimensions and copies each client's samples out of `train`.
/// The partition must have exactly config.num_clients clients.
Federation make_federation(ModelSpec spec, FederationConfig config, Dataset train, Dataset test,
                           const DataPartition& partition);

/// Initial algorithm state at w_0 = initial_parameters(spec, seed).
AlgorithmState initial_state(const Federation& federation);

/// Uplink scalar count of one participant.
std::size_t uplink_per_client(Algorithm algorithm, std::size_t dim);
/// Downlink scalar count of one participant.
std::size_t downlink_per_client(Algorithm algorithm, std::size_t dim);

struct RoundOutcome {
  AlgorithmState state;
  RoundRecord record;
};

/// One synchronous round: sample participants, run the clients (skipping
/// those without data), apply the server update, evaluate.
RoundOutcome run_round(const Federation& federation, AlgorithmState state, std::size_t round);

struct ExperimentResult {
  std::vector<RoundRecord> records;
  AlgorithmState final_state;
};

/// Rounds 1..T from initial_state().
ExperimentResult run_experiment(const Federation& federation);

}  // namespace fagh

#include "fagh/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "fagh/errors.hpp"

namespace fagh {

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "algorithm",    "model",        "hidden_sizes",  "include_bias",     "dataset",
      "samples",      "test_samples", "input_dim",     "num_classes",      "separation",
      "train_images", "train_labels", "test_images",   "test_labels",      "partitioner",
      "alpha",        "num_shards",   "shards_per_client", "clients",      "participation",
      "rounds",       "seed",         "eta",           "rho",              "beta1",
      "beta2",        "local_lr",     "local_epochs",  "batch_size",       "global_lr",
      "epsilon",      "output",
  };
  return keys;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& why) {
  throw ConfigError("config key '" + key + "': " + why + " (got '" + value + "')");
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), last, out);
  if (value.empty() || ec != std::errc() || ptr != last || !std::isfinite(out)) {
    bad_value(key, value, "expected a finite number");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), last, out);
  if (value.empty() || ec != std::errc() || ptr != last) {
    bad_value(key, value, "expected a non-negative integer");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "expected true or false");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  if (value.empty()) return out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto v = parse_uint(key, trim(item));
    if (v == 0) bad_value(key, value, "layer sizes must be positive");
    out.push_back(v);
  }
  return out;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void require_range(bool ok, const std::string& key, const std::string& value,
                   const std::string& range) {
  if (!ok) bad_value(key, value, "must be " + range);
}

ExperimentConfig from_map(const std::map<std::string, std::string>& raw) {
  for (const char* required : {"algorithm", "model", "dataset"}) {
    if (!raw.contains(required)) {
      throw ConfigError("missing required config key '" + std::string(required) + "'");
    }
  }

  ExperimentConfig c;
  bool clients_given = false;
  for (const auto& [key, value] : raw) {
    if (key == "algorithm") {
      try {
        c.algorithm = parse_algorithm(value);
      } catch (const InvalidArgument&) {
        bad_value(key, value, "expected fagh, fedavg, scaffold or fedexp");
      }
    } else if (key == "model") {
      if (value == "mlr") c.model = ModelKind::kMlr;
      else if (value == "mlp") c.model = ModelKind::kMlp;
      else bad_value(key, value, "expected mlr or mlp");
    } else if (key == "hidden_sizes") {
      c.hidden_sizes = parse_sizes(key, value);
    } else if (key == "include_bias") {
      c.include_bias = parse_bool(key, value);
    } else if (key == "dataset") {
      if (value == "synthetic") c.dataset = DatasetSource::kSynthetic;
      else if (value == "idx") c.dataset = DatasetSource::kIdx;
      else bad_value(key, value, "expected synthetic or idx");
    } else if (key == "samples") {
      c.samples = parse_uint(key, value);
    } else if (key == "test_samples") {
      c.test_samples = parse_uint(key, value);
    } else if (key == "input_dim") {
      c.input_dim = parse_uint(key, value);
    } else if (key == "num_classes") {
      c.num_classes = parse_uint(key, value);
    } else if (key == "separation") {
      c.separation = parse_double(key, value);
      require_range(c.separation >= 0.0, key, value, ">= 0");
    } else if (key == "train_images") {
      c.train_images = value;
    } else if (key == "train_labels") {
      c.train_labels = value;
    } else if (key == "test_images") {
      c.test_images = value;
    } else if (key == "test_labels") {
      c.test_labels = value;
    } else if (key == "partitioner") {
      if (value == "dirichlet") c.partitioner = Partitioner::kDirichlet;
      else if (value == "shards") c.partitioner = Partitioner::kShards;
      else bad_value(key, value, "expected dirichlet or shards");
    } else if (key == "alpha") {
      c.alpha = parse_double(key, value);
      require_range(c.alpha > 0.0, key, value, "> 0");
    } else if (key == "num_shards") {
      c.num_shards = parse_uint(key, value);
    } else if (key == "shards_per_client") {
      c.shards_per_client = parse_uint(key, value);
    } else if (key == "clients") {
      c.clients = parse_uint(key, value);
      clients_given = true;
    } else if (key == "participation") {
      c.participation = parse_double(key, value);
      require_range(c.participation > 0.0 && c.participation <= 1.0, key, value, "in (0, 1]");
    } else if (key == "rounds") {
      c.rounds = parse_uint(key, value);
    } else if (key == "seed") {
      c.seed = parse_uint(key, value);
    } else if (key == "eta") {
      c.eta = parse_double(key, value);
      require_range(c.eta >= 0.0, key, value, ">= 0");
    } else if (key == "rho") {
      c.rho = parse_double(key, value);
      require_range(c.rho > 0.0, key, value, "> 0");
    } else if (key == "beta1" || key == "beta2") {
      const double b = parse_double(key, value);
      require_range(b >= 0.0 && b < 1.0, key, value, "in [0, 1)");
      (key == "beta1" ? c.beta1 : c.beta2) = b;
    } else if (key == "local_lr") {
      c.local_lr = parse_double(key, value);
      require_range(c.local_lr > 0.0, key, value, "> 0");
    } else if (key == "local_epochs") {
      c.local_epochs = parse_uint(key, value);
      require_range(c.local_epochs >= 1, key, value, ">= 1");
    } else if (key == "batch_size") {
      if (value == "full") {
        c.batch = BatchPolicy::full();
      } else {
        const auto n = parse_uint(key, value);
        require_range(n >= 1, key, value, "'full' or a positive integer");
        c.batch = BatchPolicy::sized(n);
      }
    } else if (key == "global_lr") {
      c.global_lr = parse_double(key, value);
      require_range(c.global_lr > 0.0, key, value, "> 0");
    } else if (key == "epsilon") {
      c.epsilon = parse_double(key, value);
      require_range(c.epsilon >= 0.0, key, value, ">= 0");
    } else if (key == "output") {
      c.output = value;
    }
  }

  if (c.model == ModelKind::kMlr && !c.hidden_sizes.empty()) {
    throw ConfigError("config key 'hidden_sizes': must be empty for model = mlr");
  }
  if (c.model == ModelKind::kMlp && c.hidden_sizes.empty()) {
    throw ConfigError("config key 'hidden_sizes': model = mlp needs at least one hidden layer");
  }
  if (c.dataset == DatasetSource::kSynthetic) {
    require_range(c.num_classes >= 2, "num_classes", std::to_string(c.num_classes), ">= 2");
    require_range(c.input_dim >= 1, "input_dim", std::to_string(c.input_dim), ">= 1");
    require_range(c.samples >= c.num_classes, "samples", std::to_string(c.samples),
                  ">= num_classes");
    require_range(c.test_samples >= c.num_classes, "test_samples",
                  std::to_string(c.test_samples), ">= num_classes");
  } else {
    const std::pair<const char*, const std::filesystem::path*> paths[] = {
        {"train_images", &c.train_images},
        {"train_labels", &c.train_labels},
        {"test_images", &c.test_images},
        {"test_labels", &c.test_labels}};
    for (const auto& [name, p] : paths) {
      if (p->empty()) {
        throw ConfigError("missing required config key '" + std::string(name) +
                          "' for dataset = idx");
      }
    }
  }
  if (c.partitioner == Partitioner::kShards) {
    require_range(c.num_shards >= 1, "num_shards", std::to_string(c.num_shards), ">= 1");
    require_range(c.shards_per_client >= 1 && c.num_shards % c.shards_per_client == 0,
                  "shards_per_client", std::to_string(c.shards_per_client),
                  "a positive divisor of num_shards");
    const std::size_t implied = c.num_shards / c.shards_per_client;
    if (clients_given && c.clients != implied) {
      throw ConfigError("config key 'clients': " + std::to_string(c.clients) +
                        " conflicts with num_shards / shards_per_client = " +
                        std::to_string(implied));
    }
    c.clients = implied;
  }
  require_range(c.clients >= 1, "clients", std::to_string(c.clients), ">= 1");

  if (c.output.empty()) {
    const char* dir = std::getenv(kOutputDirEnv);
    std::filesystem::path base = (dir != nullptr && *dir != '\0') ? dir : ".";
    c.output = base / (to_string(c.algorithm) + "_seed" + std::to_string(c.seed) + ".csv");
  }
  return c;
}

void read_lines(const std::string& text, std::map<std::string, std::string>& raw) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    raw[trim(std::string_view(body).substr(0, eq))] = trim(std::string_view(body).substr(eq + 1));
  }
}

void check_known(const std::map<std::string, std::string>& raw) {
  const auto& keys = config_keys();
  for (const auto& [key, value] : raw) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides) {
  std::map<std::string, std::string> raw;
  read_lines(text, raw);
  for (const auto& [key, value] : overrides) raw[key] = trim(value);
  check_known(raw);
  return from_map(raw);
}

ExperimentConfig parse_config(const std::optional<std::filesystem::path>& file,
                              const ConfigOverrides& overrides) {
  std::string text;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file '" + file->string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  return parse_config_text(text, overrides);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto kv = [&](const char* key, const std::string& value) {
    out << key << " = " << value << '\n';
  };
  std::string hidden;
  for (std::size_t i = 0; i < c.hidden_sizes.size(); ++i) {
    if (i > 0) hidden += ',';
    hidden += std::to_string(c.hidden_sizes[i]);
  }
  kv("algorithm", to_string(c.algorithm));
  kv("model", to_string(c.model));
  kv("hidden_sizes", hidden);
  kv("include_bias", c.include_bias ? "true" : "false");
  kv("dataset", c.dataset == DatasetSource::kSynthetic ? "synthetic" : "idx");
  kv("samples", std::to_string(c.samples));
  kv("test_samples", std::to_string(c.test_samples));
  kv("input_dim", std::to_string(c.input_dim));
  kv("num_classes", std::to_string(c.num_classes));
  kv("separation", fmt_double(c.separation));
  kv("train_images", c.train_images.string());
  kv("train_labels", c.train_labels.string());
  kv("test_images", c.test_images.string());
  kv("test_labels", c.test_labels.string());
  kv("partitioner", c.partitioner == Partitioner::kDirichlet ? "dirichlet" : "shards");
  kv("alpha", fmt_double(c.alpha));
  kv("num_shards", std::to_string(c.num_shards));
  kv("shards_per_client", std::to_string(c.shards_per_client));
  kv("clients", std::to_string(c.clients));
  kv("participation", fmt_double(c.participation));
  kv("rounds", std::to_string(c.rounds));
  kv("seed", std::to_string(c.seed));
  kv("eta", fmt_double(c.eta));
  kv("rho", fmt_double(c.rho));
  kv("beta1", fmt_double(c.beta1));
  kv("beta2", fmt_double(c.beta2));
  kv("local_lr", fmt_double(c.local_lr));
  kv("local_epochs", std::to_string(c.local_epochs));
  kv("batch_size", c.batch.minibatch ? std::to_string(*c.batch.minibatch) : "full");
  kv("global_lr", fmt_double(c.global_lr));
  kv("epsilon", fmt_double(c.epsilon));
  kv("output", c.output.string());
  return out.str();
}

ExperimentData load_experiment_data(const ExperimentConfig& c) {
  ExperimentData data;
  if (c.dataset == DatasetSource::kSynthetic) {
    data.train = synth_classification(c.seed, c.samples, c.input_dim, c.num_classes, c.separation,
                                      Split::kTrain);
    data.test = synth_classification(c.seed, c.test_samples, c.input_dim, c.num_classes,
                                     c.separation, Split::kTest);
  } else {
    data.train = load_idx(c.train_images, c.train_labels, Split::kTrain);
    data.test = load_idx(c.test_images, c.test_labels, Split::kTest);
    if (data.train.input_dim() != data.test.input_dim()) {
      throw FormatError("train and test IDX images differ in size");
    }
    const std::size_t classes = std::max(data.train.num_classes, data.test.num_classes);
    data.train.num_classes = data.test.num_classes = classes;
  }
  data.partition = c.partitioner == Partitioner::kDirichlet
                       ? dirichlet_partition(data.train, c.clients, c.alpha, c.seed)
                       : shard_partition(data.train, c.num_shards, c.shards_per_client, c.seed);
  return data;
}

ModelSpec model_spec(const ExperimentConfig& c, std::size_t input_dim, std::size_t num_classes) {
  ModelSpec spec{c.model, input_dim, num_classes, c.hidden_sizes, c.include_bias};
  spec.validate();
  return spec;
}

FederationConfig federation_config(const ExperimentConfig& c) {
  FederationConfig f;
  f.algorithm = c.algorithm;
  f.num_clients = c.clients;
  f.participation = c.participation;
  f.rounds = c.rounds;
  f.seed = c.seed;
  f.batch = c.batch;
  f.eta = c.eta;
  f.rho = c.rho;
  f.beta1 = c.beta1;
  f.beta2 = c.beta2;
  f.local_lr = c.local_lr;
  f.local_epochs = c.local_epochs;
  f.global_lr = c.global_lr;
  f.epsilon = c.epsilon;
  return f;
}

Federation build_federation(const ExperimentConfig& c) {
  auto data = load_experiment_data(c);
  ModelSpec spec = model_spec(c, data.train.input_dim(), data.train.num_classes);
  return make_federation(std::move(spec), federation_config(c), std::move(data.train),
                         std::move(data.test), data.partition);
}

}  // namespace fagh

#include "scalesgd/config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string_view>

#include "scalesgd/errors.hpp"

namespace scalesgd {

using nlohmann::json;

namespace {

/// Strict view over one JSON object: unknown keys and wrong types are config errors.
class Section {
 public:
  Section(const json& j, std::string path, std::initializer_list<std::string_view> allowed) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_ + " must be an object");
    const std::set<std::string_view> keys(allowed);
    for (const auto& [key, _] : j.items())
      if (!keys.count(key)) throw ConfigError("unknown key '" + path_ + "." + key + "'");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string where(const char* key) const { return path_ + "." + key; }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(where(key) + " must be finite");
    return d;
  }

  std::uint64_t unsigned_int(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(where(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const char* key, std::string fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
    return v.get<std::string>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + " must be a boolean");
    return v.get<bool>();
  }

  std::vector<std::size_t> index_list(const char* key) const {
    if (!has(key)) return {};
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + " must be an array");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      if (!e.is_number_unsigned() && !(e.is_number_integer() && e.get<std::int64_t>() >= 0))
        throw ConfigError(where(key) + " entries must be non-negative integers");
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

ValueRange parse_value_range(const Section& s, const char* key) {
  ValueRange r;
  if (!s.has(key)) return r;
  const auto& v = s.at(key);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    r = {v[0].get<double>(), v[1].get<double>()};
  } else if (v.is_object()) {
    Section obj(v, s.where(key), {"low", "high"});
    r = {obj.number("low", r.low), obj.number("high", r.high)};
  } else {
    throw ConfigError(s.where(key) + " must be [low, high] or {low, high}");
  }
  if (!(r.low < r.high)) throw ConfigError(s.where(key) + " needs low < high");
  return r;
}

void check_density(double d, const std::string& where) {
  if (!(d > 0.0 && d <= 1.0)) throw ConfigError(where + " must lie in (0, 1]");
}

StreamSpec parse_stream_spec(const Section& s) {
  StreamSpec spec;
  spec.dim = static_cast<std::uint32_t>(s.unsigned_int("dim", spec.dim));
  spec.value_range = parse_value_range(s, "value_range");
  spec.density = s.number("density", spec.density);
  spec.mutation_fraction = s.number("mutation_fraction", spec.mutation_fraction);
  spec.seed = s.unsigned_int("seed", spec.seed);
  if (spec.dim == 0) throw ConfigError(s.where("dim") + " must be positive");
  check_density(spec.density, s.where("density"));
  if (!(spec.mutation_fraction >= 0.0 && spec.mutation_fraction <= 1.0))
    throw ConfigError(s.where("mutation_fraction") + " must lie in [0, 1]");
  return spec;
}

GeneratorSpec parse_generator(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw ConfigError(path + ".kind must name a generator");
  const auto kind = j.at("kind").get<std::string>();

  if (kind == "uniform") {
    Section s(j, path, {"kind", "dim", "n", "value_range", "density", "seed"});
    UniformGenerator g;
    g.dim = static_cast<std::uint32_t>(s.unsigned_int("dim", g.dim));
    g.n = s.unsigned_int("n", g.n);
    g.value_range = parse_value_range(s, "value_range");
    g.density = s.number("density", g.density);
    g.seed = s.unsigned_int("seed", g.seed);
    if (g.n == 0) throw ConfigError(s.where("n") + " must be at least 1");
    check_density(g.density, s.where("density"));
    if (std::round(g.density * g.dim) < 1.0) throw ConfigError(path + ": density * dim < 1 yields empty samples");
    return g;
  }
  if (kind == "ls_stream") {
    Section s(j, path,
              {"kind", "dim", "value_range", "density", "mutation_fraction", "seed", "draws", "test_fraction", "origin"});
    StreamGenerator g;
    g.spec = parse_stream_spec(s);
    g.draws = s.unsigned_int("draws", g.draws);
    g.test_fraction = s.number("test_fraction", g.test_fraction);
    if (g.draws == 0) throw ConfigError(s.where("draws") + " must be at least 1");
    if (!(g.test_fraction >= 0.0 && g.test_fraction < 1.0)) throw ConfigError(s.where("test_fraction") + " must lie in [0, 1)");
    if (std::round(g.spec.density * g.spec.dim) < 1.0) throw ConfigError(path + ": density * dim < 1 yields empty samples");
    if (s.has("origin")) g.origin = std::make_shared<DatasetSection>(parse_dataset_section(s.at("origin")));
    return g;
  }
  if (kind == "diversity") {
    Section s(j, path, {"kind", "source", "parts", "pattern"});
    DiversityGenerator g;
    if (!s.has("source")) throw ConfigError(s.where("source") + " is required");
    g.source = std::make_shared<DatasetSection>(parse_dataset_section(s.at("source")));
    if (g.source->is_stream()) throw ConfigError(s.where("source") + " must be a finite dataset");
    g.parts = s.unsigned_int("parts", g.parts);
    g.pattern = s.index_list("pattern");
    if (g.parts == 0) throw ConfigError(s.where("parts") + " must be at least 1");
    if (g.pattern.empty()) throw ConfigError(s.where("pattern") + " must not be empty");
    for (auto p : g.pattern)
      if (p >= g.parts) throw ConfigError(s.where("pattern") + " entries must lie in [0, parts)");
    return g;
  }
  if (kind == "sparse_corpus") {
    Section s(j, path, {"kind", "n", "dim", "mean_nnz", "zipf_exponent", "label_noise", "seed"});
    CorpusGenerator g;
    g.spec.n = s.unsigned_int("n", g.spec.n);
    g.spec.dim = static_cast<std::uint32_t>(s.unsigned_int("dim", g.spec.dim));
    g.spec.mean_nnz = s.number("mean_nnz", g.spec.mean_nnz);
    g.spec.zipf_exponent = s.number("zipf_exponent", g.spec.zipf_exponent);
    g.spec.label_noise = s.number("label_noise", g.spec.label_noise);
    g.spec.seed = s.unsigned_int("seed", g.spec.seed);
    if (g.spec.n == 0 || g.spec.dim == 0) throw ConfigError(path + ": n and dim must be positive");
    if (!(g.spec.mean_nnz >= 1.0 && g.spec.mean_nnz <= g.spec.dim)) throw ConfigError(s.where("mean_nnz") + " must lie in [1, dim]");
    if (!(g.spec.label_noise >= 0.0 && g.spec.label_noise <= 0.5)) throw ConfigError(s.where("label_noise") + " must lie in [0, 0.5]");
    return g;
  }
  throw ConfigError(path + ".kind: unknown generator '" + kind + "'");
}

template <typename Parse>
auto parse_enum(const Section& s, const char* key, decltype(std::declval<Parse>()("")) fallback, Parse parse) {
  if (!s.has(key)) return fallback;
  return parse(s.string(key, ""));
}

}  // namespace

bool DatasetSection::is_stream() const {
  const auto* gen = std::get_if<GeneratorSpec>(&origin);
  return gen != nullptr && std::holds_alternative<StreamGenerator>(*gen);
}

DatasetSection parse_dataset_section(const json& j) {
  Section s(j, "dataset", {"path", "format", "label_column", "dim", "generator", "order", "order_seed"});
  DatasetSection out;
  out.raw = j;
  const bool has_path = s.has("path");
  const bool has_gen = s.has("generator");
  if (has_path == has_gen) throw ConfigError("dataset needs exactly one of 'path' or 'generator'");
  if (has_path) {
    FileDataset f;
    f.path = s.string("path", "");
    f.format = s.string("format", f.format);
    f.label_column = s.unsigned_int("label_column", 0);
    f.dim_hint = static_cast<std::uint32_t>(s.unsigned_int("dim", 0));
    if (f.path.empty()) throw ConfigError("dataset.path must not be empty");
    if (f.format != "svmlight" && f.format != "csv") throw ConfigError("dataset.format must be 'svmlight' or 'csv'");
    out.origin = f;
  } else {
    for (const char* key : {"format", "label_column", "dim"})
      if (s.has(key)) throw ConfigError(s.where(key) + " only applies to file datasets");
    out.origin = parse_generator(s.at("generator"), "dataset.generator");
  }
  const auto order = s.string("order", "as_stored");
  if (order == "as_stored") out.order = OrderPolicy::as_stored;
  else if (order == "shuffled") out.order = OrderPolicy::shuffled;
  else throw ConfigError("dataset.order must be 'as_stored' or 'shuffled'");
  out.order_seed = s.unsigned_int("order_seed", 0);
  if (out.is_stream() && out.order != OrderPolicy::as_stored)
    throw ConfigError("dataset.order does not apply to streams");
  return out;
}

RunConfig parse_run_config(const json& j, double lambda) {
  Section s(j, "run",
            {"algorithm", "workers", "gamma", "batch_size", "local_batch_size", "worker_minibatch", "delay_model",
             "tau_max", "topology", "compression", "quantize_bits", "dadm_passes", "seed", "max_server_iters",
             "eval_every", "epsilon_target", "target_on_train", "eval_train", "record_duality_gap"});
  RunConfig rc;
  rc.lambda = lambda;
  rc.algorithm = parse_enum(s, "algorithm", rc.algorithm, parse_algorithm);
  rc.workers = s.unsigned_int("workers", rc.workers);
  rc.gamma = s.number("gamma", rc.gamma);
  rc.batch_size = s.unsigned_int("batch_size", rc.batch_size);
  rc.local_batch_size = s.unsigned_int("local_batch_size", rc.local_batch_size);
  rc.worker_minibatch = s.unsigned_int("worker_minibatch", rc.worker_minibatch);
  rc.delay_model = parse_enum(s, "delay_model", rc.delay_model, [](const std::string& v) {
    if (v == "round_robin") return DelayModel::round_robin;
    if (v == "uniform") return DelayModel::uniform;
    throw ConfigError("run.delay_model must be 'round_robin' or 'uniform'");
  });
  rc.tau_max = s.unsigned_int("tau_max", rc.tau_max);
  rc.topology = parse_enum(s, "topology", rc.topology, [](const std::string& v) {
    if (v == "ring") return Topology::ring;
    if (v == "complete") return Topology::complete;
    throw ConfigError("run.topology must be 'ring' or 'complete'");
  });
  rc.compression = parse_enum(s, "compression", rc.compression, [](const std::string& v) {
    if (v == "identity") return Compression::identity;
    if (v == "stochastic_quantize") return Compression::stochastic_quantize;
    throw ConfigError("run.compression must be 'identity' or 'stochastic_quantize'");
  });
  rc.quantize_bits = static_cast<unsigned>(s.unsigned_int("quantize_bits", rc.quantize_bits));
  rc.dadm_passes = s.unsigned_int("dadm_passes", rc.dadm_passes);
  rc.seed = s.unsigned_int("seed", rc.seed);
  rc.max_server_iters = s.unsigned_int("max_server_iters", rc.max_server_iters);
  rc.eval_every = s.unsigned_int("eval_every", rc.eval_every);
  if (s.has("epsilon_target")) rc.epsilon_target = s.number("epsilon_target", 0.0);
  rc.target_on_train = s.boolean("target_on_train", rc.target_on_train);
  rc.eval_train = s.boolean("eval_train", rc.eval_train);
  rc.record_duality_gap = s.boolean("record_duality_gap", rc.record_duality_gap);
  rc.validate();
  return rc;
}

ExperimentConfig parse_experiment_config(const json& j) {
  Section s(j, "config", {"dataset", "split", "objective", "run", "sweep", "output_dir"});
  ExperimentConfig cfg;
  if (!s.has("dataset")) throw ConfigError("config.dataset is required");
  cfg.dataset = parse_dataset_section(s.at("dataset"));

  if (s.has("split")) {
    Section sp(s.at("split"), "split", {"train_fraction", "test_fraction", "seed"});
    cfg.split.train_fraction = sp.number("train_fraction", cfg.split.train_fraction);
    cfg.split.test_fraction = sp.number("test_fraction", cfg.split.test_fraction);
    cfg.split.seed = sp.unsigned_int("seed", cfg.split.seed);
  }
  // Experiments report test logloss, so an empty test split is rejected here even
  // though the library-level split() allows it.
  if (!(cfg.split.train_fraction > 0.0) || !(cfg.split.test_fraction > 0.0) ||
      cfg.split.train_fraction + cfg.split.test_fraction > 1.0)
    throw ConfigError("split fractions must be positive and sum to at most 1");

  if (s.has("objective")) {
    Section ob(s.at("objective"), "objective", {"lambda"});
    cfg.objective.lambda = ob.number("lambda", cfg.objective.lambda);
  }
  if (!(cfg.objective.lambda >= 0.0)) throw ConfigError("objective.lambda must be non-negative");

  cfg.run = parse_run_config(s.has("run") ? s.at("run") : json::object(), cfg.objective.lambda);
  cfg.output_dir = s.string("output_dir", cfg.output_dir);
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");

  if (s.has("sweep")) {
    Section sw(s.at("sweep"), "sweep",
               {"worker_counts", "mode", "fixed_iter", "epsilon", "epsilon_factor", "theta", "theta_relative", "fixture"});
    SweepSection sweep;
    sweep.worker_counts = sw.index_list("worker_counts");
    sweep.mode = parse_enum(sw, "mode", sweep.mode, parse_sweep_mode);
    sweep.fixed_iter = sw.unsigned_int("fixed_iter", 0);
    if (sw.has("epsilon")) sweep.epsilon = sw.number("epsilon", 0.0);
    sweep.epsilon_factor = sw.number("epsilon_factor", sweep.epsilon_factor);
    sweep.theta = sw.number("theta", sweep.theta);
    sweep.theta_relative = sw.boolean("theta_relative", sweep.theta_relative);
    if (sw.has("fixture")) {
      const auto& fx = sw.at("fixture");
      if (!fx.is_array()) throw ConfigError("sweep.fixture must be an array of numbers");
      std::vector<double> values;
      for (const auto& e : fx) {
        if (!e.is_number()) throw ConfigError("sweep.fixture must be an array of numbers");
        values.push_back(e.get<double>());
      }
      if (values.size() != sweep.worker_counts.size())
        throw ConfigError("sweep.fixture needs one value per worker count");
      sweep.fixture = std::move(values);
    }
    cfg.sweep = std::move(sweep);
    cfg.sweep_config(1).validate();
  }
  return cfg;
}

SweepConfig ExperimentConfig::sweep_config(std::size_t jobs) const {
  if (!sweep) throw ConfigError("config has no sweep section");
  SweepConfig sc;
  sc.base = run;
  sc.worker_counts = sweep->worker_counts;
  sc.mode = sweep->mode;
  sc.fixed_iter = sweep->fixed_iter;
  sc.epsilon = sweep->epsilon;
  sc.epsilon_factor = sweep->epsilon_factor;
  sc.theta = sweep->theta;
  sc.theta_relative = sweep->theta_relative;
  sc.jobs = jobs;
  return sc;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_experiment_config(j);
}

std::string resolve_data_path(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  if (const char* root = std::getenv("SCALESGD_DATA_DIR"); root != nullptr && *root != '\0')
    return (std::filesystem::path(root) / p).string();
  return path;
}

namespace {

Dataset load_file(const FileDataset& f) {
  const auto path = resolve_data_path(f.path);
  Dataset ds = f.format == "csv" ? load_dense_csv(path, f.label_column) : load_svmlight(path, f.dim_hint);
  if (ds.size() == 0) throw DataError("dataset '" + path + "' has no samples");
  return ds;
}

Sample stream_first(const StreamGenerator& g) {
  if (!g.origin) return first_sample(g.spec, nullptr, g.spec.seed);
  const Dataset origin = build_dataset(*g.origin);
  if (origin.dim() != g.spec.dim)
    throw ConfigError("stream dim " + std::to_string(g.spec.dim) + " differs from origin dim " +
                      std::to_string(origin.dim()));
  return first_sample(g.spec, &origin, g.spec.seed);
}

Dataset build_generated(const GeneratorSpec& gen) {
  return std::visit(
      [](const auto& g) -> Dataset {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, UniformGenerator>) {
          return gen_uniform_dataset(g.dim, g.n, g.value_range, g.density, g.seed);
        } else if constexpr (std::is_same_v<G, StreamGenerator>) {
          return materialize_stream(g.spec, stream_first(g), g.draws);
        } else if constexpr (std::is_same_v<G, DiversityGenerator>) {
          return diversity_replicate(build_dataset(*g.source), g.parts, g.pattern);
        } else {
          return gen_sparse_corpus(g.spec);
        }
      },
      gen);
}

}  // namespace

Dataset build_dataset(const DatasetSection& section) {
  if (const auto* f = std::get_if<FileDataset>(&section.origin)) return load_file(*f);
  return build_generated(std::get<GeneratorSpec>(section.origin));
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg, bool finite_only) {
  const auto* gen = std::get_if<GeneratorSpec>(&cfg.dataset.origin);
  if (gen != nullptr) {
    if (const auto* g = std::get_if<StreamGenerator>(gen)) {
      // Streams train on the chained draws; the test set is drawn i.i.d. from the
      // same spec so it shares the feature distribution and density.
      const Sample first = stream_first(*g);
      auto train = std::make_shared<Dataset>(materialize_stream(g->spec, first, g->draws));
      SampleSource source = finite_only ? SampleSource::finite(train) : SampleSource::stream(g->spec, first);
      std::shared_ptr<Dataset> test;
      const auto n_test = static_cast<std::size_t>(std::llround(g->test_fraction * static_cast<double>(g->draws)));
      if (n_test > 0)
        test = std::make_shared<Dataset>(gen_uniform_dataset(g->spec.dim, n_test, g->spec.value_range, g->spec.density,
                                                             derive_seed({g->spec.seed, 0x7e57})));
      return {std::move(source), std::move(train), std::move(test)};
    }
  }
  const Dataset full = build_dataset(cfg.dataset);
  auto parts = split(full, cfg.split);
  auto train = std::make_shared<Dataset>(std::move(parts.train));
  std::shared_ptr<Dataset> test;
  if (parts.test.size() > 0) test = std::make_shared<Dataset>(std::move(parts.test));
  if (train->size() == 0) throw DataError("training split is empty");
  SampleSource source = SampleSource::finite(train, cfg.dataset.order, cfg.dataset.order_seed);
  return {std::move(source), std::move(train), std::move(test)};
}

}  // namespace scalesgd

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "scalesgd/algorithms.hpp"
#include "scalesgd/data.hpp"
#include "scalesgd/generators.hpp"
#include "scalesgd/harness.hpp"
#include "scalesgd/objective.hpp"
#include "scalesgd/source.hpp"

namespace scalesgd {

struct DatasetSection;

struct FileDataset {
  std::string path;            // relative paths resolve against SCALESGD_DATA_DIR when set
  std::string format = "svmlight";  // svmlight | csv
  std::size_t label_column = 0;
  std::uint32_t dim_hint = 0;
};

struct UniformGenerator {
  std::uint32_t dim = 28;
  std::size_t n = 1000;
  ValueRange value_range{};
  double density = 1.0;
  std::uint64_t seed = 1;
};

struct StreamGenerator {
  StreamSpec spec;
  std::size_t draws = 20000;
  double test_fraction = 0.2;
  std::shared_ptr<DatasetSection> origin;  // optional source of the first sample
};

struct DiversityGenerator {
  std::shared_ptr<DatasetSection> source;
  std::size_t parts = 4;
  std::vector<std::size_t> pattern;
};

struct CorpusGenerator {
  SparseCorpusSpec spec;
};

using GeneratorSpec = std::variant<UniformGenerator, StreamGenerator, DiversityGenerator, CorpusGenerator>;

struct DatasetSection {
  std::variant<FileDataset, GeneratorSpec> origin;
  OrderPolicy order = OrderPolicy::as_stored;
  std::uint64_t order_seed = 0;
  /// The JSON this section was parsed from, echoed into generator sidecars.
  nlohmann::json raw;

  bool is_stream() const;
};

struct SweepSection {
  std::vector<std::size_t> worker_counts;
  SweepMode mode = SweepMode::async_cost;
  std::size_t fixed_iter = 0;
  std::optional<double> epsilon;
  double epsilon_factor = 1.05;
  double theta = 1e-3;
  bool theta_relative = false;
  /// Replay mode: pre-measured metrics (one per worker count); no training runs.
  std::optional<std::vector<double>> fixture;
};

struct ExperimentConfig {
  DatasetSection dataset;
  SplitSpec split;
  ObjectiveSpec objective;
  RunConfig run;
  std::optional<SweepSection> sweep;
  std::string output_dir = "out";

  SweepConfig sweep_config(std::size_t jobs) const;
};

/// Schema validation happens here, before any dataset IO. Throws ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

RunConfig parse_run_config(const nlohmann::json& j, double lambda);
DatasetSection parse_dataset_section(const nlohmann::json& j);

/// Applies SCALESGD_DATA_DIR to relative paths.
std::string resolve_data_path(const std::string& path);

/// Materialises a dataset section (streams yield their first `draws` samples).
Dataset build_dataset(const DatasetSection& section);

/// Training source plus evaluation sets for an experiment.
struct ExperimentData {
  SampleSource source;
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> test;
};

/// Finite datasets are split per `split`; streams get an i.i.d. test set from the
/// stream spec. `finite_only` materialises streams into a finite source (DADM).
ExperimentData load_experiment_data(const ExperimentConfig& cfg, bool finite_only = false);

}  // namespace scalesgd

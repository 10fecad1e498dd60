#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semsparse/acquisition.hpp"
#include "semsparse/analysis_operator.hpp"
#include "semsparse/bpfa.hpp"
#include "semsparse/dictionary.hpp"
#include "semsparse/ebi.hpp"
#include "semsparse/image.hpp"
#include "semsparse/metrics.hpp"
#include "semsparse/phantom.hpp"
#include "semsparse/superres.hpp"

namespace semsparse {

inline constexpr const char* kVersion = "1.0.0";

// The seven compared methods, in report order.
enum class Method { original_raster, goal_denoise, super_resolution, nn_interpolation, goal_inpaint, ebi, bpfa };
inline constexpr std::array<Method, 7> kAllMethods = {Method::original_raster, Method::goal_denoise,
                                                      Method::super_resolution, Method::nn_interpolation,
                                                      Method::goal_inpaint, Method::ebi, Method::bpfa};

std::string to_string(Method m);
std::optional<Method> parse_method(std::string_view name);

// Strategy behind each method: raster (10 us frame), low resolution, sparse scan.
enum class Strategy { raster, low_resolution, sparse };
Strategy strategy_of(Method m);

struct StrategyBudgets {
  ScanBudget raster = raster_preset();
  ScanBudget low_resolution = low_resolution_preset();
  ScanBudget sparse = sparse_preset();

  const ScanBudget& of(Strategy s) const;
  // Throws ConfigError "budget mismatch: average dwell X μs ≠ Y μs" when the
  // strategies disagree, and on presets the pipeline cannot realise.
  void check() const;
};

struct AutoRoi {
  std::size_t count = 30;
  std::size_t size = 64;
};

struct BenchConfig {
  // Ground truth: a PGM path, or a phantom when the path is empty.
  std::filesystem::path ground_truth_path;
  PhantomSpec phantom;
  double smoothing_sigma = 0.5;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  StrategyBudgets budgets;
  BeamModel beam;
  std::vector<double> currents{0.1};
  std::vector<Rect> rois;  // explicit ROIs; auto placement when empty
  AutoRoi auto_roi;
  std::uint64_t master_seed = 2024;
  // "auto" trains on a separate clean phantom; anything else is a file path.
  std::string ebi_dictionary = "auto";
  std::string goal_operator = "auto";
  std::size_t ebi_dictionary_atoms = 4096;
  std::size_t goal_operator_rows = 128;
  BpfaParams bpfa;
  GoalParams goal;
  EbiParams ebi;
  SrParams sr;
  std::size_t montage_rois = 6;
  std::filesystem::path output_dir = "semsparse_out";

  void validate() const;  // throws ConfigError
};

// JSON config <-> BenchConfig. Unknown keys are rejected.
BenchConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const BenchConfig& config);
BenchConfig load_config(const std::filesystem::path& path);

struct BenchEntry {
  Method method{};
  double current = 0.0;
  NamedReport result;
};

struct BenchReport {
  BenchConfig config;
  std::vector<Rect> rois;
  std::vector<BenchEntry> entries;  // current-major, methods in report order

  const BenchEntry& at(Method m, double current) const;
  bool any_failed() const;
  bool any_numerical_failure = false;
};

// Per-method (and acquisition) seeds; documented in the README.
std::uint64_t acquisition_seed(std::uint64_t master, std::size_t current_index, std::uint64_t stream);
std::uint64_t method_seed(std::uint64_t master, Method m, std::size_t current_index);

// Ground truth exactly as the benchmark uses it: loaded or rendered, cropped to
// even dimensions, smoothed.
Image build_ground_truth(const BenchConfig& config);

// N highest local-variance size x size windows, greedily placed without
// overlap; the allowed overlap is relaxed in steps when the frame is too small.
std::vector<Rect> auto_rois(const Image& image, const AutoRoi& spec);

// Acquisitions for one current.
struct Acquisition {
  Image raster;         // at the raster dwell
  Image low_resolution; // binned frame at the low-resolution dwell
  SparseImage sparse;   // sparse scan at the sparse dwell
};
Acquisition acquire(const Image& truth, const BenchConfig& config, std::size_t current_index);

struct Priors {
  std::optional<PatchDictionary> dictionary;
  std::optional<AnalysisOperator> op;
};
// Loads or trains the EBI dictionary and GOAL operator the configured methods need.
Priors prepare_priors(const BenchConfig& config);

Image reconstruct(Method m, const Acquisition& acq, const Priors& priors, const BenchConfig& config,
                  std::size_t current_index);

// Images behind a report, for montages.
struct BenchArtifacts {
  Image truth;
  std::vector<std::vector<Image>> recon;  // [current][method]; empty image for failed methods
};

BenchReport run_benchmark(const BenchConfig& config, BenchArtifacts* artifacts = nullptr);
// Requires >= 2 currents.
BenchReport beam_current_sweep(const BenchConfig& config, BenchArtifacts* artifacts = nullptr);

// Output files in config.output_dir:
//   metrics_<I>nA.csv  method,metric,mean,sigma,winner_flag
//   table1.csv         methods x metrics, mean ± sigma, for the first current
//   table2.csv         PSNR-HVS-M, methods x currents (+ table2_<metric>.csv)
//   report.json        config echo, seeds, per-ROI values
//   montage_<I>nA.pgm  ground truth | method crops, one row per ROI
void write_outputs(const BenchReport& report, const BenchArtifacts& artifacts);
std::string current_label(double current);
void write_table1_csv(std::ostream& out, const BenchReport& report, double current);
void write_table2_csv(std::ostream& out, const BenchReport& report, Metric metric);
nlohmann::json report_to_json(const BenchReport& report);
Image montage(const Image& truth, const std::vector<Image>& outputs, const std::vector<Rect>& rois,
              std::size_t max_rows);

struct DictionaryStudy {
  std::vector<NamedReport> rows;  // one per dictionary, input order
  std::size_t best = 0;           // highest PSNR (first on ties)
};
// EBI once per dictionary on the same acquisition (first configured current).
DictionaryStudy dictionary_study(const BenchConfig& config, const std::vector<PatchDictionary>& dictionaries,
                                 const std::vector<std::string>& names);
DictionaryStudy dictionary_study(const BenchConfig& config, const std::vector<std::filesystem::path>& paths);

// Grid patches of the ground truth itself (stride 1, seeded subsample).
PatchDictionary ideal_dictionary(const Image& truth, std::size_t patch_size, std::size_t max_atoms,
                                 const SeededRng& rng);
// Uniform random atoms.
PatchDictionary random_dictionary(std::size_t patch_size, std::size_t atoms, const SeededRng& rng);

}  // namespace semsparse

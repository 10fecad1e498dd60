#include "semsparse/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "semsparse/errors.hpp"
#include "semsparse/interpolation.hpp"

namespace semsparse {

using nlohmann::json;

std::string to_string(Method m) {
  switch (m) {
    case Method::original_raster: return "original_raster";
    case Method::goal_denoise: return "goal_denoise";
    case Method::super_resolution: return "super_resolution";
    case Method::nn_interpolation: return "nn_interpolation";
    case Method::goal_inpaint: return "goal_inpaint";
    case Method::ebi: return "ebi";
    case Method::bpfa: return "bpfa";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : kAllMethods)
    if (to_string(m) == name) return m;
  return std::nullopt;
}

Strategy strategy_of(Method m) {
  switch (m) {
    case Method::original_raster:
    case Method::goal_denoise: return Strategy::raster;
    case Method::super_resolution: return Strategy::low_resolution;
    default: return Strategy::sparse;
  }
}

const ScanBudget& StrategyBudgets::of(Strategy s) const {
  switch (s) {
    case Strategy::raster: return raster;
    case Strategy::low_resolution: return low_resolution;
    case Strategy::sparse: return sparse;
  }
  return raster;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool same_dwell(double a, double b) { return std::fabs(a - b) <= 1e-9 * std::max(1.0, std::fabs(b)); }

}  // namespace

void StrategyBudgets::check() const {
  for (Strategy s : {Strategy::raster, Strategy::low_resolution, Strategy::sparse}) {
    try {
      of(s).validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  const double ref = average_dwell(raster);
  for (const ScanBudget* b : {&low_resolution, &sparse}) {
    const double d = average_dwell(*b);
    if (!same_dwell(d, ref))
      throw ConfigError("budget mismatch: average dwell " + fmt("%g", d) + " μs ≠ " + fmt("%g", ref) + " μs");
  }
  if (raster.sampled_fraction != 1.0) throw ConfigError("raster preset must scan every pixel (fraction 1)");
  if (low_resolution.sampled_fraction != 0.25)
    throw ConfigError("low_resolution preset must have fraction 0.25 (2x2 binning)");
}

void BenchConfig::validate() const {
  if (methods.empty()) throw ConfigError("config: at least one method is required");
  std::set<Method> seen;
  for (Method m : methods)
    if (!seen.insert(m).second) throw ConfigError("config: method listed twice: " + to_string(m));
  if (currents.empty()) throw ConfigError("config: at least one beam current is required");
  for (double c : currents)
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("config: beam currents must be > 0");
  if (!(smoothing_sigma >= 0.0)) throw ConfigError("config: smoothing_sigma must be >= 0");
  if (rois.empty() && auto_roi.count == 0) throw ConfigError("config: at least one ROI is required");
  budgets.check();
  try {
    if (ground_truth_path.empty()) phantom.validate();
    beam.validate();
    bpfa.validate();
    goal.validate();
    ebi.validate();
    sr.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (ebi_dictionary.empty() || goal_operator.empty())
    throw ConfigError("config: dictionary entries must be \"auto\" or a path");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <typename F>
void visit(PhantomSpec& p, F&& f) {
  f("width", p.width);
  f("height", p.height);
  f("structure_density", p.structure_density);
  f("droplets", p.droplets);
  f("curves", p.curves);
  f("contrast_lo", p.contrast_lo);
  f("contrast_hi", p.contrast_hi);
  f("seed", p.seed);
}
template <typename F>
void visit(BpfaParams& p, F&& f) {
  f("atoms", p.atoms);
  f("patch_size", p.patch_size);
  f("stride", p.stride);
  f("burn_in", p.burn_in);
  f("collect", p.collect);
  f("a0", p.a0);
  f("b0", p.b0);
  f("c0", p.c0);
  f("d0", p.d0);
  f("e0", p.e0);
  f("f0", p.f0);
}
template <typename F>
void visit(GoalParams& p, F&& f) {
  f("lambda", p.lambda);
  f("epsilon", p.epsilon);
  f("max_iters", p.max_iters);
  f("tolerance", p.tolerance);
  f("patch_size", p.patch_size);
  f("stride", p.stride);
  f("learn_iters", p.learn_iters);
  f("logdet_weight", p.logdet_weight);
  f("max_training_patches", p.max_training_patches);
}
template <typename F>
void visit(EbiParams& p, F&& f) {
  f("patch_size", p.patch_size);
  f("min_known", p.min_known);
  f("max_iterations", p.max_iterations);
}
template <typename F>
void visit(SrParams& p, F&& f) {
  f("lambda", p.lambda);
  f("alpha", p.alpha);
  f("window", p.window);
  f("step", p.step);
  f("max_iters", p.max_iters);
  f("tolerance", p.tolerance);
  f("epsilon", p.epsilon);
}
template <typename F>
void visit(ScanBudget& b, F&& f) {
  f("dwell_us", b.dwell_per_sampled_pixel);
  f("fraction", b.sampled_fraction);
  f("pixel_size_nm", b.pixel_size);
}
template <typename F>
void visit(BeamModel& b, F&& f) {
  f("sigma_ref", b.sigma_ref);
  f("current_ref", b.current_ref);
  f("exponent", b.exponent);
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw ConfigError("config: unknown key \"" + key + "\" in " + where);
}

template <typename T>
void read_value(const json& j, const std::string& where, T& out) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!j.is_number_unsigned()) throw ConfigError("config: " + where + " must be a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw ConfigError("config: " + where + " must be a number");
    }
    out = j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: " + where + ": " + e.what());
  }
}

template <typename P>
void read_struct(const json& j, const std::string& where, P& p) {
  require_object(j, where);
  std::set<std::string> allowed;
  visit(p, [&](const char* key, auto& field) {
    allowed.insert(key);
    if (j.contains(key)) read_value(j.at(key), where + "." + key, field);
  });
  reject_unknown(j, allowed, where);
}

template <typename P>
json write_struct(const P& p) {
  json j = json::object();
  P copy = p;
  visit(copy, [&](const char* key, auto& field) { j[key] = field; });
  return j;
}

json rect_to_json(const Rect& r) { return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }

Rect rect_from_json(const json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, {"x", "y", "w", "h"}, where);
  Rect r;
  for (const char* k : {"x", "y", "w", "h"})
    if (!j.contains(k)) throw ConfigError("config: " + where + " needs x, y, w, h");
  read_value(j.at("x"), where + ".x", r.x);
  read_value(j.at("y"), where + ".y", r.y);
  read_value(j.at("w"), where + ".w", r.w);
  read_value(j.at("h"), where + ".h", r.h);
  return r;
}

}  // namespace

BenchConfig config_from_json(const json& j) {
  BenchConfig c;
  require_object(j, "top level");
  reject_unknown(j,
                 {"ground_truth", "smoothing_sigma", "methods", "budget", "beam", "currents", "rois", "master_seed",
                  "dictionaries", "params", "montage_rois", "output_dir"},
                 "top level");
  if (j.contains("ground_truth")) {
    const auto& g = j.at("ground_truth");
    require_object(g, "ground_truth");
    reject_unknown(g, {"path", "phantom"}, "ground_truth");
    if (g.contains("path") && g.contains("phantom"))
      throw ConfigError("config: ground_truth takes either path or phantom");
    if (g.contains("path")) {
      std::string path;
      read_value(g.at("path"), "ground_truth.path", path);
      c.ground_truth_path = path;
    }
    if (g.contains("phantom")) read_struct(g.at("phantom"), "ground_truth.phantom", c.phantom);
  }
  if (j.contains("smoothing_sigma")) read_value(j.at("smoothing_sigma"), "smoothing_sigma", c.smoothing_sigma);
  if (j.contains("methods")) {
    const auto& ms = j.at("methods");
    if (!ms.is_array()) throw ConfigError("config: methods must be an array");
    c.methods.clear();
    for (const auto& m : ms) {
      if (!m.is_string()) throw ConfigError("config: method names must be strings");
      const auto parsed = parse_method(m.get<std::string>());
      if (!parsed) throw ConfigError("config: unknown method \"" + m.get<std::string>() + "\"");
      c.methods.push_back(*parsed);
    }
  }
  if (j.contains("budget")) {
    const auto& b = j.at("budget");
    require_object(b, "budget");
    reject_unknown(b, {"raster", "low_resolution", "sparse"}, "budget");
    if (b.contains("raster")) read_struct(b.at("raster"), "budget.raster", c.budgets.raster);
    if (b.contains("low_resolution"))
      read_struct(b.at("low_resolution"), "budget.low_resolution", c.budgets.low_resolution);
    if (b.contains("sparse")) read_struct(b.at("sparse"), "budget.sparse", c.budgets.sparse);
  }
  if (j.contains("beam")) read_struct(j.at("beam"), "beam", c.beam);
  if (j.contains("currents")) {
    const auto& cs = j.at("currents");
    if (!cs.is_array()) throw ConfigError("config: currents must be an array");
    c.currents.clear();
    for (const auto& v : cs) {
      double x = 0;
      read_value(v, "currents[]", x);
      c.currents.push_back(x);
    }
  }
  if (j.contains("rois")) {
    const auto& r = j.at("rois");
    if (r.is_array()) {
      for (const auto& e : r) c.rois.push_back(rect_from_json(e, "rois[]"));
      if (c.rois.empty()) throw ConfigError("config: rois list is empty");
    } else {
      require_object(r, "rois");
      reject_unknown(r, {"auto", "size"}, "rois");
      if (r.contains("auto")) read_value(r.at("auto"), "rois.auto", c.auto_roi.count);
      if (r.contains("size")) read_value(r.at("size"), "rois.size", c.auto_roi.size);
    }
  }
  if (j.contains("master_seed")) read_value(j.at("master_seed"), "master_seed", c.master_seed);
  if (j.contains("dictionaries")) {
    const auto& d = j.at("dictionaries");
    require_object(d, "dictionaries");
    reject_unknown(d, {"ebi", "goal", "ebi_atoms", "goal_rows"}, "dictionaries");
    if (d.contains("ebi")) read_value(d.at("ebi"), "dictionaries.ebi", c.ebi_dictionary);
    if (d.contains("goal")) read_value(d.at("goal"), "dictionaries.goal", c.goal_operator);
    if (d.contains("ebi_atoms")) read_value(d.at("ebi_atoms"), "dictionaries.ebi_atoms", c.ebi_dictionary_atoms);
    if (d.contains("goal_rows")) read_value(d.at("goal_rows"), "dictionaries.goal_rows", c.goal_operator_rows);
  }
  if (j.contains("params")) {
    const auto& p = j.at("params");
    require_object(p, "params");
    reject_unknown(p, {"bpfa", "goal", "ebi", "sr"}, "params");
    if (p.contains("bpfa")) read_struct(p.at("bpfa"), "params.bpfa", c.bpfa);
    if (p.contains("goal")) read_struct(p.at("goal"), "params.goal", c.goal);
    if (p.contains("ebi")) read_struct(p.at("ebi"), "params.ebi", c.ebi);
    if (p.contains("sr")) read_struct(p.at("sr"), "params.sr", c.sr);
  }
  if (j.contains("montage_rois")) read_value(j.at("montage_rois"), "montage_rois", c.montage_rois);
  if (j.contains("output_dir")) {
    std::string out;
    read_value(j.at("output_dir"), "output_dir", out);
    c.output_dir = out;
  }
  return c;
}

json config_to_json(const BenchConfig& c) {
  json j;
  if (c.ground_truth_path.empty())
    j["ground_truth"] = {{"phantom", write_struct(c.phantom)}};
  else
    j["ground_truth"] = {{"path", c.ground_truth_path.string()}};
  j["smoothing_sigma"] = c.smoothing_sigma;
  j["methods"] = json::array();
  for (Method m : c.methods) j["methods"].push_back(to_string(m));
  j["budget"] = {{"raster", write_struct(c.budgets.raster)},
                 {"low_resolution", write_struct(c.budgets.low_resolution)},
                 {"sparse", write_struct(c.budgets.sparse)}};
  j["beam"] = write_struct(c.beam);
  j["currents"] = c.currents;
  if (c.rois.empty()) {
    j["rois"] = {{"auto", c.auto_roi.count}, {"size", c.auto_roi.size}};
  } else {
    j["rois"] = json::array();
    for (const auto& r : c.rois) j["rois"].push_back(rect_to_json(r));
  }
  j["master_seed"] = c.master_seed;
  j["dictionaries"] = {{"ebi", c.ebi_dictionary},
                       {"goal", c.goal_operator},
                       {"ebi_atoms", c.ebi_dictionary_atoms},
                       {"goal_rows", c.goal_operator_rows}};
  j["params"] = {{"bpfa", write_struct(c.bpfa)},
                 {"goal", write_struct(c.goal)},
                 {"ebi", write_struct(c.ebi)},
                 {"sr", write_struct(c.sr)}};
  j["montage_rois"] = c.montage_rois;
  j["output_dir"] = c.output_dir.string();
  return j;
}

BenchConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  BenchConfig c = config_from_json(j);
  // Relative paths inside the config resolve against its directory.
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (p != "auto" && !p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
  };
  resolve(c.ebi_dictionary);
  resolve(c.goal_operator);
  if (!c.ground_truth_path.empty() && c.ground_truth_path.is_relative())
    c.ground_truth_path = base / c.ground_truth_path;
  return c;
}

// ---------------------------------------------------------------------------
// Seeds

namespace {
constexpr std::uint64_t kTagAcquisition = 0, kTagMethod = 1, kTagPriors = 2;
}

std::uint64_t acquisition_seed(std::uint64_t master, std::size_t current_index, std::uint64_t stream) {
  return mix_seed(mix_seed(mix_seed(master, kTagAcquisition), current_index), stream);
}

std::uint64_t method_seed(std::uint64_t master, Method m, std::size_t current_index) {
  return mix_seed(mix_seed(mix_seed(master, kTagMethod), static_cast<std::uint64_t>(m)), current_index);
}

// ---------------------------------------------------------------------------
// Ground truth and ROIs

namespace {

Image even_crop(const Image& img) {
  const std::size_t w = img.width() & ~std::size_t{1}, h = img.height() & ~std::size_t{1};
  if (w == img.width() && h == img.height()) return img;
  return crop(img, {0, 0, w, h});
}

}  // namespace

Image build_ground_truth(const BenchConfig& config) {
  Image raw;
  if (config.ground_truth_path.empty()) {
    raw = generate_phantom(config.phantom);
  } else {
    if (!std::filesystem::exists(config.ground_truth_path))
      throw ConfigError("ground truth not found: " + config.ground_truth_path.string());
    raw = load_image(config.ground_truth_path);
  }
  if (raw.width() < 2 || raw.height() < 2) throw ConfigError("ground truth smaller than 2x2");
  raw = even_crop(raw);
  return config.smoothing_sigma > 0.0 ? gaussian_smooth(raw, config.smoothing_sigma) : raw;
}

std::vector<Rect> auto_rois(const Image& image, const AutoRoi& spec) {
  const std::size_t W = image.width(), H = image.height();
  const std::size_t s = spec.size;
  if (s == 0 || s > W || s > H) throw ConfigError("auto ROI size " + std::to_string(s) + " does not fit the frame");
  // Summed-area tables of v and v^2.
  std::vector<double> s1((W + 1) * (H + 1), 0.0), s2((W + 1) * (H + 1), 0.0);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double v = image(x, y);
      const std::size_t i = (y + 1) * (W + 1) + x + 1;
      s1[i] = v + s1[i - 1] + s1[i - (W + 1)] - s1[i - (W + 1) - 1];
      s2[i] = v * v + s2[i - 1] + s2[i - (W + 1)] - s2[i - (W + 1) - 1];
    }
  auto box = [&](const std::vector<double>& t, std::size_t x, std::size_t y) {
    const std::size_t a = y * (W + 1) + x, b = (y + s) * (W + 1) + x;
    return t[b + s] - t[b] - t[a + s] + t[a];
  };
  struct Candidate {
    double variance;
    Rect rect;
  };
  std::vector<Candidate> cand;
  const std::size_t step = std::max<std::size_t>(1, s / 16);
  const double n = static_cast<double>(s * s);
  for (std::size_t y : grid_offsets(H, s, step))
    for (std::size_t x : grid_offsets(W, s, step)) {
      const double m = box(s1, x, y) / n;
      cand.push_back({box(s2, x, y) / n - m * m, {x, y, s, s}});
    }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const Candidate& a, const Candidate& b) { return a.variance > b.variance; });
  auto overlap = [](const Rect& a, const Rect& b) {
    const std::size_t x0 = std::max(a.x, b.x), x1 = std::min(a.x + a.w, b.x + b.w);
    const std::size_t y0 = std::max(a.y, b.y), y1 = std::min(a.y + a.h, b.y + b.h);
    if (x1 <= x0 || y1 <= y0) return 0.0;
    return static_cast<double>((x1 - x0) * (y1 - y0)) / static_cast<double>(a.w * a.h);
  };
  std::vector<Rect> chosen;
  std::vector<bool> used(cand.size(), false);
  for (double allowed : {0.0, 0.25, 0.5, 0.75, 0.999}) {
    for (std::size_t i = 0; i < cand.size() && chosen.size() < spec.count; ++i) {
      if (used[i]) continue;
      bool ok = true;
      for (const auto& r : chosen)
        if (overlap(cand[i].rect, r) > allowed) {
          ok = false;
          break;
        }
      if (ok) {
        used[i] = true;
        chosen.push_back(cand[i].rect);
      }
    }
    if (chosen.size() == spec.count) break;
  }
  return chosen;
}

// ---------------------------------------------------------------------------
// Acquisition, priors, reconstruction

Acquisition acquire(const Image& truth, const BenchConfig& config, std::size_t ci) {
  const double current = config.currents.at(ci);
  const auto& bud = config.budgets;
  const double d_raster = bud.raster.dwell_per_sampled_pixel;
  auto frame = [&](double dwell, double pixel_size, std::uint64_t stream) {
    const ScanBudget b{dwell, 1.0, current, pixel_size};
    return simulate_frame(truth, b, config.beam, SeededRng(acquisition_seed(config.master_seed, ci, stream)));
  };
  Acquisition acq;
  acq.raster = frame(d_raster, bud.raster.pixel_size, 0);
  // Longer dwells are synthesized from the raster frame plus a second frame
  // for the remaining dwell, mirroring the 10 + 30 us combination.
  auto long_frame = [&](double dwell, double pixel_size, std::uint64_t stream) {
    if (same_dwell(dwell, d_raster)) return acq.raster;
    if (dwell < d_raster) return frame(dwell, pixel_size, stream);
    const Image extra = frame(dwell - d_raster, pixel_size, stream);
    return synthesize_combined_frame(acq.raster, d_raster, extra, dwell - d_raster);
  };
  const double d_sparse = bud.sparse.dwell_per_sampled_pixel, d_low = bud.low_resolution.dwell_per_sampled_pixel;
  const Image sparse_frame = long_frame(d_sparse, bud.sparse.pixel_size, 1);
  const Image low_frame = same_dwell(d_low, d_sparse) ? sparse_frame : long_frame(d_low, bud.sparse.pixel_size, 2);
  acq.low_resolution = downscale_by_two(low_frame);
  acq.sparse = sparse_scan(sparse_frame, bud.sparse.sampled_fraction,
                           SeededRng(acquisition_seed(config.master_seed, ci, 3)));
  return acq;
}

namespace {

Image training_image(const BenchConfig& config) {
  PhantomSpec spec = config.phantom;
  spec.seed = mix_seed(spec.seed, 0x7A11);
  const Image raw = generate_phantom(spec);
  return config.smoothing_sigma > 0.0 ? gaussian_smooth(raw, config.smoothing_sigma) : raw;
}

bool needs(const BenchConfig& c, Method m) { return std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end(); }

}  // namespace

Priors prepare_priors(const BenchConfig& config) {
  Priors pr;
  const bool want_dict = needs(config, Method::ebi);
  const bool want_op = needs(config, Method::goal_denoise) || needs(config, Method::goal_inpaint);
  std::optional<Image> train;
  auto training = [&]() -> const Image& {
    if (!train) train = training_image(config);
    return *train;
  };
  if (want_dict) {
    if (config.ebi_dictionary == "auto") {
      pr.dictionary = build_dictionary({training()}, config.ebi.patch_size, 2, config.ebi_dictionary_atoms,
                                       SeededRng::derive(config.master_seed, {kTagPriors, 0}));
    } else {
      if (!std::filesystem::exists(config.ebi_dictionary))
        throw ConfigError("missing EBI dictionary: " + config.ebi_dictionary);
      try {
        pr.dictionary = load_dictionary(config.ebi_dictionary);
      } catch (const CodecError& e) {
        throw ConfigError(std::string("EBI dictionary: ") + e.what());
      }
      if (pr.dictionary->patch_size() != config.ebi.patch_size)
        throw ConfigError("EBI dictionary patch size does not match params.ebi.patch_size");
    }
  }
  if (want_op) {
    if (config.goal_operator == "auto") {
      const PatchSet patches = extract_patches(training(), config.goal.patch_size, config.goal.stride);
      pr.op = learn_operator(patches, config.goal_operator_rows, config.goal,
                             SeededRng::derive(config.master_seed, {kTagPriors, 1}));
    } else {
      if (!std::filesystem::exists(config.goal_operator))
        throw ConfigError("missing GOAL operator: " + config.goal_operator);
      try {
        pr.op = load_operator(config.goal_operator);
      } catch (const CodecError& e) {
        throw ConfigError(std::string("GOAL operator: ") + e.what());
      }
      if (pr.op->cols() != config.goal.patch_size * config.goal.patch_size)
        throw ConfigError("GOAL operator width does not match params.goal.patch_size");
    }
  }
  return pr;
}

Image reconstruct(Method m, const Acquisition& acq, const Priors& priors, const BenchConfig& config,
                  std::size_t ci) {
  switch (m) {
    case Method::original_raster: return acq.raster;
    case Method::goal_denoise: return operator_denoise(acq.raster, priors.op.value(), config.goal);
    case Method::super_resolution: return btv_superresolve(acq.low_resolution, config.sr);
    case Method::nn_interpolation: return interpolate(acq.sparse, InterpMethod::natural_neighbor);
    case Method::goal_inpaint: return operator_inpaint(acq.sparse, priors.op.value(), config.goal);
    case Method::ebi: return ebi_inpaint(acq.sparse, priors.dictionary.value(), config.ebi);
    case Method::bpfa:
      return bpfa_inpaint(acq.sparse, config.bpfa, SeededRng(method_seed(config.master_seed, m, ci)));
  }
  throw std::logic_error("reconstruct: unknown method");
}

// ---------------------------------------------------------------------------
// Benchmark

const BenchEntry& BenchReport::at(Method m, double current) const {
  for (const auto& e : entries)
    if (e.method == m && e.current == current) return e;
  throw std::out_of_range("BenchReport: no entry for " + to_string(m));
}

bool BenchReport::any_failed() const {
  return std::any_of(entries.begin(), entries.end(), [](const BenchEntry& e) { return e.result.failed; });
}

namespace {

std::vector<Rect> resolve_rois(const BenchConfig& config, const Image& truth) {
  std::vector<Rect> rois = config.rois.empty() ? auto_rois(truth, config.auto_roi) : config.rois;
  if (rois.empty()) throw ConfigError("no ROI could be placed");
  const std::size_t min_side = std::max<std::size_t>(cw_ssim_min_size({}), SsimParams{}.window);
  for (const auto& r : rois) {
    if (!fits(r, truth.width(), truth.height()))
      throw ConfigError("ROI (" + std::to_string(r.x) + "," + std::to_string(r.y) + ") lies outside the frame");
    if (r.w < min_side || r.h < min_side)
      throw ConfigError("ROIs must be at least " + std::to_string(min_side) + " pixels per side");
  }
  return rois;
}

}  // namespace

BenchReport run_benchmark(const BenchConfig& config, BenchArtifacts* artifacts) {
  config.validate();
  const Image truth = build_ground_truth(config);
  BenchReport rep;
  rep.config = config;
  rep.rois = resolve_rois(config, truth);
  const Priors priors = prepare_priors(config);
  if (artifacts) {
    artifacts->truth = truth;
    artifacts->recon.assign(config.currents.size(), std::vector<Image>(config.methods.size()));
  }
  for (std::size_t ci = 0; ci < config.currents.size(); ++ci) {
    const Acquisition acq = acquire(truth, config, ci);
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      const Method m = config.methods[mi];
      BenchEntry e{m, config.currents[ci], {to_string(m), {}, false, {}}};
      try {
        const Image out = reconstruct(m, acq, priors, config, ci);
        if (out.width() != truth.width() || out.height() != truth.height())
          throw NumericalError(to_string(m) + ": output size differs from the ground truth");
        e.result.report = evaluate_rois(truth, out, rep.rois);
        if (artifacts) artifacts->recon[ci][mi] = out;
      } catch (const ConfigError&) {
        throw;
      } catch (const NumericalError& ex) {
        e.result.failed = true;
        e.result.error = ex.what();
        rep.any_numerical_failure = true;
      } catch (const std::exception& ex) {
        e.result.failed = true;
        e.result.error = ex.what();
      }
      rep.entries.push_back(std::move(e));
    }
  }
  return rep;
}

BenchReport beam_current_sweep(const BenchConfig& config, BenchArtifacts* artifacts) {
  if (config.currents.size() < 2) throw ConfigError("sweep: at least two beam currents are required");
  return run_benchmark(config, artifacts);
}

// ---------------------------------------------------------------------------
// Output

std::string current_label(double current) { return fmt("%g", current); }

namespace {

std::vector<NamedReport> reports_at(const BenchReport& rep, double current) {
  std::vector<NamedReport> out;
  for (const auto& e : rep.entries)
    if (e.current == current) out.push_back(e.result);
  return out;
}

// Winner flags per metric for the reports at one current.
std::array<std::vector<bool>, 4> winners(const std::vector<NamedReport>& rs) {
  std::array<std::vector<bool>, 4> flags;
  for (std::size_t m = 0; m < 4; ++m) {
    std::vector<MetricStat> stats;
    std::vector<std::size_t> owner;
    for (std::size_t r = 0; r < rs.size(); ++r)
      if (!rs[r].failed) {
        stats.push_back(rs[r].report.stats[m]);
        owner.push_back(r);
      }
    const auto f = winner_flags(stats);
    flags[m].assign(rs.size(), false);
    for (std::size_t i = 0; i < owner.size(); ++i) flags[m][owner[i]] = f[i];
  }
  return flags;
}

std::string cell(const MetricStat& s, Metric m) {
  const char* f = (m == Metric::ssim || m == Metric::cw_ssim) ? "%.3f" : "%.2f";
  return fmt(f, s.mean) + " ± " + fmt(f, s.sigma);
}

const char* pretty(Metric m) {
  switch (m) {
    case Metric::psnr: return "PSNR";
    case Metric::psnr_hvs_m: return "PSNR-HVS-M";
    case Metric::ssim: return "SSIM";
    case Metric::cw_ssim: return "CW-SSIM";
  }
  return "?";
}

}  // namespace

void write_table1_csv(std::ostream& out, const BenchReport& rep, double current) {
  const auto rs = reports_at(rep, current);
  const auto flags = winners(rs);
  out << "method";
  for (Metric m : kAllMetrics) out << "," << pretty(m);
  out << "\n";
  for (std::size_t r = 0; r < rs.size(); ++r) {
    out << rs[r].method;
    for (std::size_t m = 0; m < 4; ++m) {
      if (rs[r].failed)
        out << ",error";
      else
        out << "," << cell(rs[r].report.stats[m], kAllMetrics[m]) << (flags[m][r] ? " *" : "");
    }
    out << "\n";
  }
}

void write_table2_csv(std::ostream& out, const BenchReport& rep, Metric metric) {
  const auto& c = rep.config;
  out << "method";
  for (double cur : c.currents) out << "," << current_label(cur) << "nA";
  out << "\n";
  const auto mi = static_cast<std::size_t>(metric);
  for (Method m : c.methods) {
    out << to_string(m);
    for (double cur : c.currents) {
      const auto& e = rep.at(m, cur);
      out << "," << (e.result.failed ? std::string("error") : cell(e.result.report.stats[mi], metric));
    }
    out << "\n";
  }
}

json report_to_json(const BenchReport& rep) {
  const auto& c = rep.config;
  json j;
  j["version"] = kVersion;
  j["config"] = config_to_json(c);
  j["rois"] = json::array();
  for (const auto& r : rep.rois) j["rois"].push_back(rect_to_json(r));
  json seeds;
  seeds["scheme"] =
      "acquisition = mix(mix(mix(master, 0), current_index), stream) with streams 0 raster frame, 1 sparse-dwell "
      "extra frame, 2 low-resolution extra frame, 3 sparse mask; method = mix(mix(mix(master, 1), method_id), "
      "current_index); priors = derive(master, {2, 0 ebi | 1 goal})";
  seeds["acquisition"] = json::array();
  for (std::size_t ci = 0; ci < c.currents.size(); ++ci)
    for (std::uint64_t s = 0; s < 4; ++s) seeds["acquisition"].push_back(acquisition_seed(c.master_seed, ci, s));
  seeds["methods"] = json::object();
  for (Method m : c.methods) {
    json per = json::array();
    for (std::size_t ci = 0; ci < c.currents.size(); ++ci) per.push_back(method_seed(c.master_seed, m, ci));
    seeds["methods"][to_string(m)] = per;
  }
  j["seeds"] = seeds;
  j["results"] = json::array();
  for (double cur : c.currents) {
    const auto rs = reports_at(rep, cur);
    const auto flags = winners(rs);
    for (std::size_t r = 0; r < rs.size(); ++r) {
      json e;
      e["method"] = rs[r].method;
      e["current_na"] = cur;
      e["failed"] = rs[r].failed;
      if (rs[r].failed) {
        e["error"] = rs[r].error;
      } else {
        for (std::size_t m = 0; m < 4; ++m) {
          const auto& st = rs[r].report.stats[m];
          e["stats"][to_string(kAllMetrics[m])] = {{"mean", st.mean}, {"sigma", st.sigma}, {"winner", bool(flags[m][r])}};
        }
        e["per_roi"] = json::array();
        for (const auto& v : rs[r].report.per_roi)
          e["per_roi"].push_back(
              {{"psnr", v.psnr}, {"psnr_hvs_m", v.psnr_hvs_m}, {"ssim", v.ssim}, {"cw_ssim", v.cw_ssim}});
      }
      j["results"].push_back(e);
    }
  }
  return j;
}

Image montage(const Image& truth, const std::vector<Image>& outputs, const std::vector<Rect>& rois,
              std::size_t max_rows) {
  const std::size_t rows = std::min(max_rows, rois.size());
  if (rows == 0) throw std::invalid_argument("montage: no ROI");
  constexpr std::size_t gap = 2;
  std::size_t tile_w = 0, tile_h = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    tile_w = std::max(tile_w, rois[r].w);
    tile_h = std::max(tile_h, rois[r].h);
  }
  const std::size_t cols = outputs.size() + 1;
  const std::size_t W = cols * tile_w + (cols - 1) * gap, H = rows * tile_h + (rows - 1) * gap;
  std::vector<double> px(W * H, 1.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const Image& src = c == 0 ? truth : outputs[c - 1];
      const Rect& roi = rois[r];
      for (std::size_t y = 0; y < tile_h; ++y)
        for (std::size_t x = 0; x < tile_w; ++x) {
          double v = 0.0;  // failed methods and padding stay black
          if (!src.empty() && x < roi.w && y < roi.h) v = src(roi.x + x, roi.y + y);
          px[(r * (tile_h + gap) + y) * W + c * (tile_w + gap) + x] = v;
        }
    }
  return Image(W, H, std::move(px));
}

void write_outputs(const BenchReport& rep, const BenchArtifacts& art) {
  const auto& c = rep.config;
  const auto dir = c.output_dir;
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  for (std::size_t ci = 0; ci < c.currents.size(); ++ci) {
    const double cur = c.currents[ci];
    auto f = open("metrics_" + current_label(cur) + "nA.csv");
    write_report_csv(f, reports_at(rep, cur));
    if (!art.truth.empty() && ci < art.recon.size())
      save_image(montage(art.truth, art.recon[ci], rep.rois, c.montage_rois),
                 dir / ("montage_" + current_label(cur) + "nA.pgm"), 8);
  }
  {
    auto f = open("table1.csv");
    write_table1_csv(f, rep, c.currents.front());
  }
  {
    auto f = open("table2.csv");
    write_table2_csv(f, rep, Metric::psnr_hvs_m);
  }
  for (Metric m : {Metric::psnr, Metric::ssim, Metric::cw_ssim}) {
    auto f = open("table2_" + to_string(m) + ".csv");
    write_table2_csv(f, rep, m);
  }
  auto f = open("report.json");
  f << report_to_json(rep).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Dictionary study

DictionaryStudy dictionary_study(const BenchConfig& config, const std::vector<PatchDictionary>& dictionaries,
                                 const std::vector<std::string>& names) {
  config.validate();
  if (dictionaries.empty()) throw ConfigError("dictionary study: no dictionaries");
  if (names.size() != dictionaries.size()) throw std::invalid_argument("dictionary study: one name per dictionary");
  const Image truth = build_ground_truth(config);
  const auto rois = resolve_rois(config, truth);
  const Acquisition acq = acquire(truth, config, 0);
  DictionaryStudy study;
  for (std::size_t d = 0; d < dictionaries.size(); ++d) {
    NamedReport row{names[d], {}, false, {}};
    try {
      if (dictionaries[d].patch_size() != config.ebi.patch_size)
        throw ConfigError("dictionary " + names[d] + ": patch size does not match params.ebi.patch_size");
      row.report = evaluate_rois(truth, ebi_inpaint(acq.sparse, dictionaries[d], config.ebi), rois);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    study.rows.push_back(std::move(row));
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < study.rows.size(); ++d)
    if (!study.rows[d].failed && study.rows[d].report.stat(Metric::psnr).mean > best) {
      best = study.rows[d].report.stat(Metric::psnr).mean;
      study.best = d;
    }
  return study;
}

DictionaryStudy dictionary_study(const BenchConfig& config, const std::vector<std::filesystem::path>& paths) {
  std::vector<PatchDictionary> dicts;
  std::vector<std::string> names;
  for (const auto& p : paths) {
    if (!std::filesystem::exists(p)) throw ConfigError("missing dictionary: " + p.string());
    try {
      dicts.push_back(load_dictionary(p));
    } catch (const CodecError& e) {
      throw ConfigError(std::string("dictionary ") + p.string() + ": " + e.what());
    }
    names.push_back(p.stem().string());
  }
  return dictionary_study(config, dicts, names);
}

PatchDictionary ideal_dictionary(const Image& truth, std::size_t patch_size, std::size_t max_atoms,
                                 const SeededRng& rng) {
  auto d = build_dictionary({truth}, patch_size, 1, max_atoms, rng);
  return PatchDictionary(patch_size, std::vector<double>(d.data().begin(), d.data().end()),
                         "ideal: ground-truth patches, " + d.provenance());
}

PatchDictionary random_dictionary(std::size_t patch_size, std::size_t atoms, const SeededRng& rng) {
  SeededRng r = rng;
  std::vector<double> v(patch_size * patch_size * atoms);
  for (double& x : v) x = r.uniform();
  return PatchDictionary(patch_size, std::move(v), "random: " + std::to_string(atoms) + " uniform atoms, seed " +
                                                       std::to_string(rng.seed()));
}

}  // namespace semsparse

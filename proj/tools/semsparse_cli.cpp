#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "semsparse/errors.hpp"
#include "semsparse/harness.hpp"
#include "semsparse/interpolation.hpp"

using namespace semsparse;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> methods;
  std::vector<double> currents;
  std::optional<std::size_t> rois;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory (overrides output_dir)");
  cmd->add_option("--seed", o.seed, "master seed (overrides master_seed)");
  cmd->add_option("--methods", o.methods, "methods (overrides methods)")->delimiter(',');
  cmd->add_option("--currents", o.currents, "beam currents in nA (overrides currents)")->delimiter(',');
  cmd->add_option("--rois", o.rois, "number of auto ROIs (overrides rois)");
}

BenchConfig resolve_config(const Overrides& o, bool sweep_defaults) {
  BenchConfig c;
  bool currents_from_file = false;
  if (!o.config.empty()) {
    c = load_config(o.config);
    std::ifstream in(o.config);
    currents_from_file = json::parse(in).contains("currents");
  }
  if (sweep_defaults && !currents_from_file) c.currents = {0.1, 0.2, 0.4, 0.8};
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed) c.master_seed = *o.seed;
  if (!o.methods.empty()) {
    c.methods.clear();
    for (const auto& name : o.methods) {
      const auto m = parse_method(name);
      if (!m) throw ConfigError("unknown method \"" + name + "\"");
      c.methods.push_back(*m);
    }
  }
  if (!o.currents.empty()) c.currents = o.currents;
  if (o.rois) {
    c.rois.clear();
    c.auto_roi.count = *o.rois;
  }
  c.validate();
  return c;
}

void print_report(const BenchReport& rep) {
  for (double cur : rep.config.currents) {
    std::cout << "# beam current " << current_label(cur) << " nA\n";
    write_table1_csv(std::cout, rep, cur);
  }
}

int run_bench(const Overrides& o, bool sweep) {
  const BenchConfig c = resolve_config(o, sweep);
  BenchArtifacts art;
  const BenchReport rep = sweep ? beam_current_sweep(c, &art) : run_benchmark(c, &art);
  write_outputs(rep, art);
  print_report(rep);
  for (const auto& e : rep.entries)
    if (e.result.failed) std::cerr << "error: " << e.result.method << " @ " << e.current << " nA: " << e.result.error << "\n";
  std::cerr << "reports written to " << c.output_dir.string() << "\n";
  return rep.any_numerical_failure ? kExitNumerical : 0;
}

std::vector<Rect> read_rois(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ROI file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("ROI file: ") + e.what());
  }
  if (j.is_object() && j.contains("rois")) j = j["rois"];
  if (!j.is_array() || j.empty()) throw ConfigError("ROI file must hold a non-empty array of {x, y, w, h}");
  std::vector<Rect> rois;
  for (const auto& r : j) {
    try {
      rois.push_back({r.at("x").get<std::size_t>(), r.at("y").get<std::size_t>(), r.at("w").get<std::size_t>(),
                      r.at("h").get<std::size_t>()});
    } catch (const json::exception& e) {
      throw ConfigError(std::string("ROI file: ") + e.what());
    }
  }
  return rois;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-scan SEM acquisition simulator, reconstruction and quality benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // phantom
  PhantomSpec ps;
  std::string phantom_out;
  auto* phantom = app.add_subcommand("phantom", "render the synthetic phantom as a PGM");
  phantom->add_option("--out", phantom_out, "output PGM")->required();
  phantom->add_option("--width", ps.width);
  phantom->add_option("--height", ps.height);
  phantom->add_option("--density", ps.structure_density);
  phantom->add_option("--droplets", ps.droplets);
  phantom->add_option("--curves", ps.curves);
  phantom->add_option("--seed", ps.seed);

  // simulate
  Overrides sim_o;
  std::string sim_gt;
  double sim_current = 0.1;
  auto* simulate = app.add_subcommand("simulate", "simulate the three acquisitions of the ground truth");
  add_overrides(simulate, sim_o);
  simulate->add_option("--gt", sim_gt, "ground-truth PGM (default: the configured phantom)");
  simulate->add_option("--current", sim_current, "beam current in nA");

  // reconstruct
  Overrides rec_o;
  std::string rec_method, rec_in, rec_mask, rec_dict, rec_out;
  auto* recon = app.add_subcommand("reconstruct", "reconstruct one acquisition with one method");
  recon->add_option("--config", rec_o.config, "JSON config for method parameters")->check(CLI::ExistingFile);
  recon->add_option("--method", rec_method, "method name")->required();
  recon->add_option("--in", rec_in, "input PGM (raster, low-resolution, or sparse values)")->required();
  recon->add_option("--mask", rec_mask, "sampling mask PGM for sparse methods");
  recon->add_option("--dict", rec_dict, "PDC dictionary (ebi) or AOP operator (goal_*)");
  recon->add_option("--out", rec_out, "output PGM")->required();
  recon->add_option("--seed", rec_o.seed, "seed for stochastic methods");

  // evaluate
  std::string ev_gt, ev_recon, ev_rois;
  auto* evaluate = app.add_subcommand("evaluate", "score a reconstruction over ROIs");
  evaluate->add_option("--gt", ev_gt)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--recon", ev_recon)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--rois", ev_rois, "JSON array of {x, y, w, h}")->required()->check(CLI::ExistingFile);

  // bench / sweep
  Overrides bench_o, sweep_o;
  auto* bench = app.add_subcommand("bench", "run the seven-method benchmark");
  add_overrides(bench, bench_o);
  auto* sweep = app.add_subcommand("sweep", "run the beam-current sweep (default 0.1, 0.2, 0.4, 0.8 nA)");
  add_overrides(sweep, sweep_o);

  // train-dict
  std::vector<std::string> td_in;
  std::string td_out;
  std::size_t td_patch = 8, td_stride = 4, td_atoms = 4096, td_rows = 128;
  std::uint64_t td_seed = 1;
  auto* train = app.add_subcommand("train-dict", "build a PDC patch dictionary, or learn an AOP operator (.aop)");
  train->add_option("--in", td_in, "training PGMs")->required()->check(CLI::ExistingFile);
  train->add_option("--out", td_out, "output .pdc or .aop")->required();
  train->add_option("--patch", td_patch);
  train->add_option("--stride", td_stride);
  train->add_option("--atoms", td_atoms, "dictionary size (PDC)");
  train->add_option("--rows", td_rows, "operator rows (AOP)");
  train->add_option("--seed", td_seed);

  // dict-study
  Overrides ds_o;
  std::vector<std::string> ds_dicts;
  bool ds_builtin = false;
  auto* study = app.add_subcommand("dict-study", "EBI once per dictionary on the same acquisition");
  add_overrides(study, ds_o);
  study->add_option("--dict", ds_dicts, "PDC dictionaries")->check(CLI::ExistingFile);
  study->add_flag("--builtin", ds_builtin, "add the ideal (ground-truth) and random 16-atom dictionaries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*phantom) {
      save_image(generate_phantom(ps), phantom_out);
      return 0;
    }
    if (*simulate) {
      BenchConfig c = resolve_config(sim_o, false);
      if (!sim_gt.empty()) c.ground_truth_path = sim_gt;
      c.currents = {sim_current};
      c.validate();
      const Image truth = build_ground_truth(c);
      const Acquisition acq = acquire(truth, c, 0);
      std::filesystem::create_directories(c.output_dir);
      save_image(truth, c.output_dir / "truth.pgm");
      save_image(acq.raster, c.output_dir / "raster.pgm");
      save_image(acq.low_resolution, c.output_dir / "low_resolution.pgm");
      save_sparse(acq.sparse, c.output_dir / "sparse.pgm", c.output_dir / "sparse_mask.pgm");
      std::cerr << "acquisitions written to " << c.output_dir.string() << "\n";
      return 0;
    }
    if (*recon) {
      BenchConfig c = rec_o.config.empty() ? BenchConfig{} : load_config(rec_o.config);
      if (rec_o.seed) c.master_seed = *rec_o.seed;
      const auto m = parse_method(rec_method);
      if (!m) throw ConfigError("unknown method \"" + rec_method + "\"");
      c.methods = {*m};
      if (!rec_dict.empty()) (*m == Method::ebi ? c.ebi_dictionary : c.goal_operator) = rec_dict;
      Acquisition acq;
      if (strategy_of(*m) == Strategy::sparse) {
        if (rec_mask.empty()) throw ConfigError(rec_method + " needs --mask");
        acq.sparse = load_sparse(rec_in, rec_mask);
      } else if (strategy_of(*m) == Strategy::low_resolution) {
        acq.low_resolution = load_image(rec_in);
      } else {
        acq.raster = load_image(rec_in);
      }
      const Priors priors = prepare_priors(c);
      save_image(reconstruct(*m, acq, priors, c, 0), rec_out);
      return 0;
    }
    if (*evaluate) {
      const Image gt = load_image(ev_gt), rc = load_image(ev_recon);
      const auto rois = read_rois(ev_rois);
      for (const auto& r : rois)
        if (!fits(r, gt.width(), gt.height())) throw ConfigError("ROI outside the ground truth");
      const MetricReport rep = evaluate_rois(gt, rc, rois);
      std::cout << "roi,x,y,w,h,psnr,psnr_hvs_m,ssim,cw_ssim\n";
      char buf[256];
      for (std::size_t i = 0; i < rois.size(); ++i) {
        const auto& v = rep.per_roi[i];
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%zu,%.6f,%.6f,%.6f,%.6f\n", i, rois[i].x, rois[i].y,
                      rois[i].w, rois[i].h, v.psnr, v.psnr_hvs_m, v.ssim, v.cw_ssim);
        std::cout << buf;
      }
      write_report_csv(std::cout, {{"recon", rep, false, {}}});
      return 0;
    }
    if (*bench) return run_bench(bench_o, false);
    if (*sweep) return run_bench(sweep_o, true);
    if (*train) {
      std::vector<Image> images;
      for (const auto& p : td_in) images.push_back(load_image(p));
      if (std::filesystem::path(td_out).extension() == ".aop") {
        GoalParams gp;
        gp.patch_size = td_patch;
        gp.stride = td_stride;
        PatchSet all;
        for (const auto& im : images) {
          PatchSet ps1 = extract_patches(im, td_patch, td_stride);
          all.patch_size = ps1.patch_size;
          all.positions.insert(all.positions.end(), ps1.positions.begin(), ps1.positions.end());
          all.values.insert(all.values.end(), ps1.values.begin(), ps1.values.end());
        }
        save_operator(learn_operator(all, td_rows, gp, SeededRng(td_seed)), td_out);
      } else {
        save_dictionary(build_dictionary(images, td_patch, td_stride, td_atoms, SeededRng(td_seed)), td_out);
      }
      return 0;
    }
    if (*study) {
      const BenchConfig c = resolve_config(ds_o, false);
      std::vector<PatchDictionary> dicts;
      std::vector<std::string> names;
      for (const auto& p : ds_dicts) {
        dicts.push_back(load_dictionary(p));
        names.push_back(std::filesystem::path(p).stem().string());
      }
      if (ds_builtin) {
        const Image truth = build_ground_truth(c);
        dicts.push_back(ideal_dictionary(truth, c.ebi.patch_size, c.ebi_dictionary_atoms,
                                         SeededRng::derive(c.master_seed, {3, 0})));
        names.push_back("ideal");
        dicts.push_back(random_dictionary(c.ebi.patch_size, 16, SeededRng::derive(c.master_seed, {3, 1})));
        names.push_back("random16");
      }
      if (dicts.empty()) throw ConfigError("dict-study needs --dict or --builtin");
      const auto res = dictionary_study(c, dicts, names);
      write_report_csv(std::cout, res.rows);
      std::cerr << "best by PSNR: " << res.rows[res.best].method << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CodecError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

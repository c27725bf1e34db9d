// ribsupp: rib shadow suppression from the command line.
//
//   ribsupp suppress --image raw.png --masks ribs.png --out soft.png
//   ribsupp phantom  --out-dir case/ [--spec spec.json]
//   ribsupp tune     --image raw.png --masks ribs.png --out-dir tune/
//   ribsupp evaluate --reference gt.png --estimate soft.png
//
// Errors go to stderr as one JSON line {"error": code, "message": ...};
// exit 2 for bad input or configuration, 3 for I/O and format problems,
// 4 for numerical domain failures, 1 otherwise.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <ribsupp.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ribsupp;

namespace {

// Raised for problems found before any compute starts; prints usage.
struct UsageError : ConfigError {
  using ConfigError::ConfigError;
};

// A named input file that does not exist; also prints usage.
struct MissingInput : IoError {
  using IoError::IoError;
};

int exit_code_for(const std::string& code) {
  if (code == "config" || code == "shape" || code == "mask" || code == "usage") return 2;
  if (code == "io" || code == "format") return 3;
  if (code == "domain") return 4;
  return 1;
}

void report_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << "\n";
}

json read_json_file(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw IoError("missing file: " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw UsageError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

void require_file(const fs::path& p, const std::string& what) {
  std::error_code ec;
  if (p.empty()) throw UsageError(what + " is required");
  if (!fs::is_regular_file(p, ec)) throw MissingInput("missing file: " + p.string());
}

void require_dir(const fs::path& p) {
  std::error_code ec;
  const fs::path d = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(d, ec)) throw IoError("output directory does not exist: " + d.string());
}

void make_dir(const fs::path& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (!fs::is_directory(d, ec)) throw IoError("cannot create directory: " + d.string());
}

// Fills options not given on the command line from a flat JSON object whose
// keys are long flag names without the leading dashes.
void apply_config(CLI::App& app, const fs::path& path) {
  const json cfg = read_json_file(path);
  if (!cfg.is_object()) throw UsageError("config must be a JSON object: " + path.string());
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (it.key() == "config") throw UsageError("config files cannot include other configs");
    CLI::Option* opt = nullptr;
    try {
      opt = app.get_option("--" + it.key());
    } catch (const CLI::OptionNotFound&) {
      throw UsageError("unknown config key: " + it.key());
    }
    if (opt->count() > 0) continue;  // the flag wins
    const json& v = it.value();
    std::string s;
    if (v.is_string()) s = v.get<std::string>();
    else if (v.is_boolean()) s = v.get<bool>() ? "true" : "false";
    else if (v.is_number()) s = v.dump();
    else throw UsageError("config key " + it.key() + " must be a string, number or boolean");
    try {
      opt->add_result(s);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config key " + it.key() + ": " + e.what());
    }
  }
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("ST_RIBSUPP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1 || v > 1024)
      throw UsageError(std::string("ST_RIBSUPP_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<int>(v);
  }
  return 1;
}

int bit_depth_for(double max_value) { return max_value <= 255.0 ? 8 : 16; }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// --------------------------------------------------------------------------
// Shared suppression flags

struct PipelineFlags {
  std::optional<double> kappa_t, tau, s_b;
  std::optional<int> k_center, k_border;
  fs::path params_file;
  double dt = SuppressionOptions{}.dt;
  double ds = SuppressionOptions{}.ds;
  double contour_sigma = ContourFit{}.sigma;
  double corner_deg = ContourFit{}.corner_deg;
  std::string backprojection = "gather";
  std::string reintegration = "midpoint";
  std::string gate = "keep_above";

  void add(CLI::App* app) {
    app->add_option("--params", params_file,
                    "JSON parameter file: one parameter object, or {\"default\": {...}, \"ribs\": {\"<label>\": {...}}}");
    app->add_option("--kappa-t", kappa_t, "Gaussian sigma along the contour, pixels");
    app->add_option("--tau", tau, "centerline ratio threshold");
    app->add_option("--k-center", k_center, "centerline averaging window");
    app->add_option("--s-b", s_b, "border band depth, pixels");
    app->add_option("--k-border", k_border, "border blending neighbour count");
    app->add_option("--dt", dt, "sample spacing along the contour, pixels")->capture_default_str();
    app->add_option("--ds", ds, "sample spacing along the normal, pixels")->capture_default_str();
    app->add_option("--contour-sigma", contour_sigma, "contour fit bandwidth, pixels; 0 keeps the traced outline")
        ->capture_default_str();
    app->add_option("--corner-deg", corner_deg, "turning angle that splits the contour fit")->capture_default_str();
    app->add_option("--backprojection", backprojection, "gather or splat")
        ->check(CLI::IsMember({"gather", "splat"}))
        ->capture_default_str();
    app->add_option("--reintegration", reintegration, "midpoint or trapezoid")
        ->check(CLI::IsMember({"midpoint", "trapezoid"}))
        ->capture_default_str();
    app->add_option("--gate", gate, "centerline gate: keep_above or keep_below")
        ->check(CLI::IsMember({"keep_above", "keep_below"}))
        ->capture_default_str();
  }

  SuppressionOptions options(int threads) const {
    SuppressionOptions o;
    if (!(dt > 0.0) || !(ds > 0.0)) throw UsageError("--dt and --ds must be > 0");
    if (!(contour_sigma >= 0.0)) throw UsageError("--contour-sigma must be >= 0");
    o.dt = dt;
    o.ds = ds;
    o.contour_fit.sigma = contour_sigma;
    o.contour_fit.corner_deg = corner_deg;
    o.backprojection = backprojection == "splat" ? BackprojectionMode::splat : BackprojectionMode::gather;
    o.rule = reintegration == "trapezoid" ? ReintegrationRule::trapezoid : ReintegrationRule::midpoint;
    o.gate = gate == "keep_below" ? CenterlineGate::keep_below : CenterlineGate::keep_above;
    o.threads = threads;
    return o;
  }

  void override(SuppressionParams& p) const {
    if (kappa_t) p.kappa_t = *kappa_t;
    if (tau) p.tau = *tau;
    if (k_center) p.k_center = *k_center;
    if (s_b) p.s_b = *s_b;
    if (k_border) p.k_border = *k_border;
  }

  // Base parameters plus per-label overrides from --params; flags win over both.
  std::vector<SuppressionParams> per_rib(const RibMaskSet& masks) const {
    SuppressionParams base;
    std::map<int, SuppressionParams> by_label;
    if (!params_file.empty()) {
      const json j = read_json_file(params_file);
      try {
        if (j.is_object() && (j.contains("default") || j.contains("ribs"))) {
          for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "default" && it.key() != "ribs") throw ConfigError("unknown key in params file: " + it.key());
          if (j.contains("default")) base = j.at("default").get<SuppressionParams>();
          if (j.contains("ribs"))
            for (auto it = j.at("ribs").begin(); it != j.at("ribs").end(); ++it) {
              SuppressionParams p = base;
              from_json(it.value(), p);
              by_label[std::stoi(it.key())] = p;
            }
        } else {
          base = j.get<SuppressionParams>();
        }
      } catch (const json::exception& e) {
        throw UsageError("bad params file " + params_file.string() + ": " + e.what());
      } catch (const std::invalid_argument&) {
        throw UsageError("rib keys in " + params_file.string() + " must be integer labels");
      }
    }
    std::vector<SuppressionParams> out;
    for (const auto& m : masks.masks) {
      auto it = by_label.find(m.label);
      SuppressionParams p = it == by_label.end() ? base : it->second;
      override(p);
      p.validate();
      out.push_back(p);
    }
    return out;
  }
};

json options_json(const SuppressionOptions& o) {
  return json{{"dt", o.dt},
              {"ds", o.ds},
              {"contour_sigma", o.contour_fit.sigma},
              {"corner_deg", o.contour_fit.corner_deg},
              {"backprojection", o.backprojection == BackprojectionMode::splat ? "splat" : "gather"},
              {"reintegration", o.rule == ReintegrationRule::trapezoid ? "trapezoid" : "midpoint"},
              {"gate", o.gate == CenterlineGate::keep_below ? "keep_below" : "keep_above"}};
}

// --------------------------------------------------------------------------
// suppress

struct SuppressCmd {
  fs::path image, masks, out, report, dump_dir, config;
  int bits = 0;
  int threads = 0;
  bool timing = false;
  PipelineFlags pipeline;

  CLI::App* add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("suppress", "Remove rib shadows from a radiograph");
    sub->add_option("--image", image, "input radiograph, 8- or 16-bit grayscale PNG");
    sub->add_option("--masks", masks, "rib label PNG (value = label) or JSON manifest of per-rib PNGs");
    sub->add_option("--out", out, "soft-tissue output PNG");
    sub->add_option("--report", report, "JSON report path (default: report.json next to --out)");
    sub->add_option("--dump-dir", dump_dir, "write each rib's final ST field as rib_<label>.stf here");
    sub->add_option("--bits", bits, "output bit depth, 8 or 16 (default: same as input)");
    sub->add_option("--threads", threads, "worker threads (fallback: ST_RIBSUPP_THREADS, else 1)");
    sub->add_flag("--timing", timing, "include wall-clock timings in the report");
    sub->add_option("--config", config, "JSON file of flag values; flags on the command line win");
    pipeline.add(sub);
    return sub;
  }

  void run(CLI::App& sub) {
    if (!config.empty()) apply_config(sub, config);
    require_file(image, "--image");
    require_file(masks, "--masks");
    if (out.empty()) throw UsageError("--out is required");
    require_dir(out);
    if (report.empty()) report = (out.has_parent_path() ? out.parent_path() : fs::path(".")) / "report.json";
    require_dir(report);
    if (bits != 0 && bits != 8 && bits != 16) throw UsageError("--bits must be 8 or 16");
    const int n_threads = resolve_threads(threads);
    SuppressionOptions opt = pipeline.options(n_threads);
    opt.keep_fields = !dump_dir.empty();

    const Image img = load_image(image);
    const RibMaskSet set = load_mask_set(masks);
    check_shapes(img, set);
    const auto params = pipeline.per_rib(set);
    if (!dump_dir.empty()) make_dir(dump_dir);

    const auto start = std::chrono::steady_clock::now();
    const SuppressionResult res = suppress_all(img, set, params, opt);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const int out_bits = bits ? bits : bit_depth_for(img.max_value());
    save_image(res.soft, out, out_bits);
    if (!dump_dir.empty())
      for (std::size_t i = 0; i < res.fields.size(); ++i)
        write_field_dump(res.fields[i], dump_dir / ("rib_" + std::to_string(set.masks[i].label) + ".stf"));

    json ribs = json::array();
    for (std::size_t i = 0; i < set.size(); ++i) {
      const BonePatch& b = res.bones[i];
      double peak = 0.0, total = 0.0;
      std::size_t n = 0;
      for (std::size_t k = 0; k < b.weight.size(); ++k)
        if (b.weight[k] > 0.0) {
          peak = std::max(peak, b.values.pixels()[k]);
          total += b.values.pixels()[k];
          ++n;
        }
      ribs.push_back({{"label", set.masks[i].label},
                      {"pixels", set.masks[i].pixel_count()},
                      {"params", params[i]},
                      {"bone_max", peak},
                      {"bone_mean", n ? total / static_cast<double>(n) : 0.0}});
    }
    json j{{"image", image.string()},
           {"width", img.width()},
           {"height", img.height()},
           {"max_value", img.max_value()},
           {"masks", masks.string()},
           {"out", out.string()},
           {"bits", out_bits},
           {"options", options_json(opt)},
           {"ribs", ribs}};
    if (timing) j["wall_time_s"] = seconds;
    write_text_file(report, j.dump(2) + "\n");
  }
};

// --------------------------------------------------------------------------
// phantom

struct PhantomCmd {
  fs::path spec_file, out_dir, config;
  std::optional<std::uint64_t> seed;
  std::optional<int> width, height, n_ribs, vessels, nodules;
  std::optional<std::string> background;
  std::optional<double> amplitude, background_amplitude, wavelength;

  CLI::App* add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("phantom", "Generate a synthetic radiograph with known rib shadows");
    sub->add_option("--spec", spec_file, "JSON phantom spec; missing keys keep their defaults");
    sub->add_option("--out-dir", out_dir, "directory for raw.png, gt_soft.png, gt_bone.png, masks.png, spec.json");
    sub->add_option("--seed", seed, "random seed (default 1)");
    sub->add_option("--width", width, "image width");
    sub->add_option("--height", height, "image height");
    sub->add_option("--n-ribs", n_ribs, "number of ribs");
    sub->add_option("--rib-amplitude", amplitude, "peak bone intensity");
    sub->add_option("--background", background, "constant or low_frequency")
        ->check(CLI::IsMember({"constant", "low_frequency"}));
    sub->add_option("--background-amplitude", background_amplitude, "peak deviation of the low-frequency field");
    sub->add_option("--background-wavelength", wavelength, "shortest background wavelength, pixels");
    sub->add_option("--vessels", vessels, "number of vessel-like distractors");
    sub->add_option("--nodules", nodules, "number of nodule-like blobs");
    sub->add_option("--config", config, "JSON file of flag values; flags on the command line win");
    return sub;
  }

  void run(CLI::App& sub) {
    if (!config.empty()) apply_config(sub, config);
    if (out_dir.empty()) throw UsageError("--out-dir is required");
    PhantomSpec spec;
    if (!spec_file.empty()) {
      require_file(spec_file, "--spec");
      try {
        spec = read_json_file(spec_file).get<PhantomSpec>();
      } catch (const json::exception& e) {
        throw UsageError("bad phantom spec: " + std::string(e.what()));
      }
    }
    if (seed) spec.seed = *seed;
    if (width) spec.width = *width;
    if (height) spec.height = *height;
    if (n_ribs) spec.n_ribs = *n_ribs;
    if (amplitude) spec.rib_amplitude = *amplitude;
    if (background) spec.background = *background == "low_frequency" ? BackgroundKind::low_frequency : BackgroundKind::constant;
    if (background_amplitude) spec.background_amplitude = *background_amplitude;
    if (wavelength) spec.background_wavelength = *wavelength;
    if (vessels) spec.vessel_count = *vessels;
    if (nodules) spec.nodule_count = *nodules;
    spec.validate();
    if (spec.max_value > 65535.0) throw UsageError("max_value above 65535 cannot be stored as PNG");
    make_dir(out_dir);

    const PhantomCase pc = generate_phantom(spec);
    const int b = bit_depth_for(spec.max_value);
    save_image(pc.raw, out_dir / "raw.png", b);
    save_image(pc.gt_soft, out_dir / "gt_soft.png", b);
    save_image(pc.gt_bone, out_dir / "gt_bone.png", b);
    save_label_image(pc.masks.to_label_image(), out_dir / "masks.png");
    write_text_file(out_dir / "spec.json", json(spec).dump(2) + "\n");
  }
};

// --------------------------------------------------------------------------
// tune

struct TuneCmd {
  fs::path image, masks, out_dir, space_file, gt, config;
  std::size_t budget = 50;
  std::uint64_t seed = 1;
  int threads = 0;
  bool timing = false;
  PipelineFlags pipeline;

  CLI::App* add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("tune", "Random search over a parameter grid");
    sub->add_option("--image", image, "input radiograph PNG");
    sub->add_option("--masks", masks, "rib label PNG or JSON manifest");
    sub->add_option("--out-dir", out_dir, "directory for trace.jsonl and best_params.json");
    sub->add_option("--space", space_file, "JSON grid per parameter (default grids otherwise)");
    sub->add_option("--gt", gt, "known soft-tissue PNG; selects RMSE as the objective");
    sub->add_option("--budget", budget, "number of grid draws besides the defaults")->capture_default_str();
    sub->add_option("--seed", seed, "sampling seed")->capture_default_str();
    sub->add_option("--threads", threads, "candidates evaluated in parallel (fallback: ST_RIBSUPP_THREADS, else 1)");
    sub->add_flag("--timing", timing, "record wall-clock time per candidate in the trace");
    sub->add_option("--config", config, "JSON file of flag values; flags on the command line win");
    pipeline.add(sub);
    return sub;
  }

  void run(CLI::App& sub) {
    if (!config.empty()) apply_config(sub, config);
    require_file(image, "--image");
    require_file(masks, "--masks");
    if (!gt.empty()) require_file(gt, "--gt");
    if (out_dir.empty()) throw UsageError("--out-dir is required");
    if (budget < 1) throw UsageError("--budget must be >= 1");
    ParamSpace space;
    if (!space_file.empty()) {
      require_file(space_file, "--space");
      try {
        space = read_json_file(space_file).get<ParamSpace>();
      } catch (const json::exception& e) {
        throw UsageError("bad param space: " + std::string(e.what()));
      }
    }
    space.validate();
    const int n_threads = resolve_threads(threads);

    const Image img = load_image(image);
    const RibMaskSet set = load_mask_set(masks);
    check_shapes(img, set);
    TuneOptions to;
    to.suppression = pipeline.options(1);
    to.threads = n_threads;
    const auto base = pipeline.per_rib(set);
    if (!base.empty()) to.defaults = base.front();
    Objective objective;
    if (!gt.empty()) {
      Image g = load_image(gt);
      if (!g.same_shape(img)) throw ShapeError("gt shape " + g.shape_string() + " differs from image shape " + img.shape_string());
      objective = supervised_objective(std::move(g));
    } else {
      objective = UnsupervisedObjective(set);
    }
    make_dir(out_dir);

    const auto [best, trace] = random_grid_search(img, set, space, budget, objective, seed, to);
    write_text_file(out_dir / "trace.jsonl", trace_to_jsonl(trace, timing));
    write_text_file(out_dir / "best_params.json", json(best).dump(2) + "\n");
  }
};

// --------------------------------------------------------------------------
// evaluate

struct EvaluateCmd {
  fs::path reference, estimate, out, masks, config;
  double alpha = LossWeights{}.alpha;
  double beta = LossWeights{}.beta;
  std::optional<double> max_value;

  CLI::App* add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("evaluate", "Compare an estimate against a reference image");
    sub->add_option("--reference", reference, "reference PNG (x)");
    sub->add_option("--estimate", estimate, "estimate PNG (y)");
    sub->add_option("--out", out, "JSON report path (default: stdout)");
    sub->add_option("--masks", masks, "optional rib masks; adds RMSE inside their union");
    sub->add_option("--alpha", alpha, "PSNR weight of the combined loss")->capture_default_str();
    sub->add_option("--beta", beta, "MS-SSIM weight inside the remainder")->capture_default_str();
    sub->add_option("--max-value", max_value, "peak value (default: reference PNG range)");
    sub->add_option("--config", config, "JSON file of flag values; flags on the command line win");
    return sub;
  }

  void run(CLI::App& sub) {
    if (!config.empty()) apply_config(sub, config);
    require_file(reference, "--reference");
    require_file(estimate, "--estimate");
    if (!masks.empty()) require_file(masks, "--masks");
    if (!out.empty()) require_dir(out);
    if (!(alpha >= 0.0 && alpha <= 1.0) || !(beta >= 0.0 && beta <= 1.0))
      throw UsageError("--alpha and --beta must lie in [0, 1]");

    const Image x = load_image(reference);
    const Image y = load_image(estimate);
    if (!x.same_shape(y)) throw ShapeError("shape mismatch: " + x.shape_string() + " vs " + y.shape_string());
    const double peak = max_value ? *max_value : x.max_value();
    const MetricsReport r = ribsupp::evaluate(x, y, peak, {alpha, beta});
    json j{{"rmse", r.rmse},
           {"psnr_log", number_or_null(r.psnr_log)},
           {"psnr_db", number_or_null(r.psnr_db)},
           {"ms_ssim", number_or_null(r.ms_ssim)},
           {"l1", r.l1},
           {"combined", number_or_null(r.combined)},
           {"identical", r.rmse == 0.0},
           {"alpha", alpha},
           {"beta", beta},
           {"max_value", peak}};
    if (!masks.empty()) {
      const RibMaskSet set = load_mask_set(masks);
      check_shapes(x, set);
      j["rmse_in_masks"] = rmse(x, y, set.union_bitmap(x.width(), x.height()));
    }
    if (out.empty()) std::cout << j.dump(2) << "\n";
    else write_text_file(out, j.dump(2) + "\n");
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rib shadow suppression in contour-normal space", "ribsupp"};
  app.require_subcommand(1);
  SuppressCmd suppress;
  PhantomCmd phantom;
  TuneCmd tune;
  EvaluateCmd evaluate;
  CLI::App* s_sub = suppress.add(app);
  CLI::App* p_sub = phantom.add(app);
  CLI::App* t_sub = tune.add(app);
  CLI::App* e_sub = evaluate.add(app);

  CLI::App* active = &app;
  try {
    app.parse(argc, argv);
    if (s_sub->parsed()) active = s_sub, suppress.run(*s_sub);
    else if (p_sub->parsed()) active = p_sub, phantom.run(*p_sub);
    else if (t_sub->parsed()) active = t_sub, tune.run(*t_sub);
    else if (e_sub->parsed()) active = e_sub, evaluate.run(*e_sub);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    for (CLI::App* sub : app.get_subcommands()) active = sub;
    std::cerr << active->help();
    return 2;
  } catch (const UsageError& e) {
    report_error("usage", e.what());
    std::cerr << active->help();
    return 2;
  } catch (const MissingInput& e) {
    report_error(e.code(), e.what());
    std::cerr << active->help();
    return 3;
  } catch (const Error& e) {
    report_error(e.code(), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
  return 0;
}

#include "spectral_ct/pipeline.hpp"

#include "spectral_ct/decomposition.hpp"
#include "spectral_ct/metrics.hpp"
#include "spectral_ct/png_writer.hpp"
#include "spectral_ct/tensor_file.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace sct {

namespace fs = std::filesystem;

void apply_overrides(RunConfig& cfg, const CommandOverrides& o) {
  if (o.views) {
    if (*o.views < 1 || *o.views > cfg.geometry.view_count()) {
      throw ConfigError("--views must be in [1, " + std::to_string(cfg.geometry.view_count()) + "]");
    }
    if (cfg.recon.subsets > *o.views) throw ConfigError("--views is smaller than recon.subsets");
    cfg.recon_views = *o.views;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
}

const std::vector<std::string>& recon_methods() {
  static const std::vector<std::string> m{"fbp", "ossqs", "tv", "tdl", "l0tdl"};
  return m;
}

SimulatedData simulate(const RunConfig& cfg) {
  const MaterialBasis basis = cfg.basis();
  SimulatedData out;
  out.truth = rasterize_phantom(cfg.phantom, basis);
  const Projector full(cfg.geometry);
  DoseModel dose = cfg.dose;
  dose.seed = cfg.seed;
  out.sino_full = simulate_sinograms(out.truth.spectral, full, dose, cfg.noisy);
  out.sino = select_views(out.sino_full, subsample_views(cfg.geometry.view_count(), cfg.recon_views));
  return out;
}

Tensor3 select_views(const Tensor3& sino, const std::vector<std::size_t>& views) {
  const std::size_t det = sino.dim(0);
  Tensor3 out({det, views.size(), sino.dim(2)});
  for (std::size_t s = 0; s < sino.dim(2); ++s) {
    for (std::size_t i = 0; i < views.size(); ++i) {
      if (views[i] >= sino.dim(1)) throw std::out_of_range("select_views: view index out of range");
      for (std::size_t j = 0; j < det; ++j) out(j, i, s) = sino(j, views[i], s);
    }
  }
  return out;
}

double full_view_scale(const RunConfig& cfg, const Tensor3& sino_full) {
  return normalization_scale(fbp_all_channels(sino_full, cfg.geometry));
}

std::vector<Tensor3> training_patches(const Tensor3& image, std::size_t patch_size, std::size_t max_patches,
                                      std::uint64_t seed) {
  const PatchGrid grid(patch_size, 1, image.dims());
  std::vector<std::size_t> pick(grid.size());
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  if (pick.size() > max_patches) {
    std::mt19937_64 rng(seed);
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(max_patches);
    std::sort(pick.begin(), pick.end());
  }
  std::vector<Tensor3> out;
  out.reserve(pick.size());
  for (std::size_t r : pick) out.push_back(extract_patch(image, grid, r));
  return out;
}

TensorDictionary train_dictionary(const RunConfig& cfg, const Tensor3& sino_full, KcpdTrace* trace) {
  Tensor3 prior = fbp_all_channels(sino_full, cfg.geometry);
  const double scale = normalization_scale(prior);
  for (double& v : prior.data()) v /= scale;
  const std::vector<Tensor3> patches =
      training_patches(prior, cfg.recon.patch_size, cfg.training.max_patches, cfg.seed);
  KcpdOptions opts;
  opts.atoms = cfg.recon.atoms;
  opts.iterations = cfg.training.iterations;
  opts.seed = cfg.seed;
  opts.als_sweeps = cfg.training.als_sweeps;
  opts.coding = cfg.recon.coding();
  return kcpd_train(patches, opts, trace);
}

MethodOutput reconstruct(const RunConfig& cfg, const Tensor3& sino, double scale, const std::string& method,
                         const TensorDictionary* dict, const Tensor3* truth) {
  const ScanGeometry g = cfg.recon_geometry();
  if (sino.dim(0) != g.detector_count || sino.dim(1) != g.view_count()) {
    throw std::invalid_argument("sinogram is " + std::to_string(sino.dim(0)) + "x" + std::to_string(sino.dim(1)) +
                                " but the configuration expects " + std::to_string(g.detector_count) + "x" +
                                std::to_string(g.view_count()));
  }
  Tensor3 y = sino;
  for (double& v : y.data()) v /= scale;
  Tensor3 initial = fbp_all_channels(y, g);
  for (double& v : initial.data()) v = std::max(0.0, v);

  MethodOutput out;
  if (method == "fbp") {
    out.image = denormalize(initial, scale);
    return out;
  }
  const Projector projector(g);
  ReconInputs in{projector, y, std::move(initial), truth, scale};
  ReconResult r;
  if (method == "ossqs") {
    r = os_sqs_reconstruct(in, cfg.recon);
  } else if (method == "tv") {
    r = tv_reconstruct(in, cfg.recon);
  } else if (method == "tdl" || method == "l0tdl") {
    if (!dict) throw MissingInputError(method + " needs a trained dictionary (run train-dict first)");
    r = method == "tdl" ? tdl_reconstruct(in, *dict, cfg.recon) : l0tdl_reconstruct(in, *dict, cfg.recon);
  } else {
    throw ConfigError("unknown method '" + method + "' (known: fbp, ossqs, tv, tdl, l0tdl)");
  }
  out.image = denormalize(r.image, scale);
  out.history = std::move(r.history);
  out.lambda = r.lambda;
  out.beta = r.beta;
  return out;
}

Tensor3 dictionary_factor_tensor(const TensorDictionary& dict) {
  const std::size_t n = dict.patch_size();
  const std::size_t s = dict.channels();
  Tensor3 t({2 * n + s, dict.atom_count(), 1});
  for (std::size_t k = 0; k < dict.atom_count(); ++k) {
    const CpFactors& f = dict.factors(k);
    for (std::size_t i = 0; i < n; ++i) t(i, k, 0) = f.u[static_cast<Eigen::Index>(i)];
    for (std::size_t i = 0; i < n; ++i) t(n + i, k, 0) = f.v[static_cast<Eigen::Index>(i)];
    for (std::size_t i = 0; i < s; ++i) t(2 * n + i, k, 0) = f.w[static_cast<Eigen::Index>(i)];
  }
  return t;
}

TensorDictionary dictionary_from_factors(const Tensor3& factors, std::size_t patch_size, std::size_t channels) {
  const std::size_t n = patch_size;
  if (factors.dim(0) != 2 * n + channels || factors.dim(2) != 1) {
    throw std::invalid_argument("dictionary factors do not match patch size " + std::to_string(n) + " and " +
                                std::to_string(channels) + " channels");
  }
  std::vector<CpFactors> fs(factors.dim(1));
  for (std::size_t k = 0; k < fs.size(); ++k) {
    fs[k].u.resize(static_cast<Eigen::Index>(n));
    fs[k].v.resize(static_cast<Eigen::Index>(n));
    fs[k].w.resize(static_cast<Eigen::Index>(channels));
    for (std::size_t i = 0; i < n; ++i) fs[k].u[static_cast<Eigen::Index>(i)] = factors(i, k, 0);
    for (std::size_t i = 0; i < n; ++i) fs[k].v[static_cast<Eigen::Index>(i)] = factors(n + i, k, 0);
    for (std::size_t i = 0; i < channels; ++i) fs[k].w[static_cast<Eigen::Index>(i)] = factors(2 * n + i, k, 0);
  }
  return TensorDictionary(n, channels, std::move(fs));
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

fs::path out_path(const RunConfig& cfg, const std::string& name) { return cfg.output_dir / name; }

fs::path require(const RunConfig& cfg, const std::string& name) {
  const fs::path p = out_path(cfg, name);
  if (!fs::exists(p)) throw MissingInputError("missing input " + p.string());
  return p;
}

void ensure_output_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir)) {
    throw ConfigError("cannot create output directory " + cfg.output_dir.string());
  }
}

void write_manifest(const RunConfig& cfg, const std::string& command, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json m;
  m["command"] = command;
  m["config_sha256"] = sha256_hex(cfg.source_text);
  m["seed"] = cfg.seed;
  m["recon_views"] = cfg.recon_views;
  m["preset"] = cfg.preset;
  nlohmann::json in = nlohmann::json::object();
  for (const std::string& f : inputs) in[f] = sha256_file(out_path(cfg, f));
  nlohmann::json out = nlohmann::json::object();
  for (const std::string& f : outputs) out[f] = sha256_file(out_path(cfg, f));
  m["inputs"] = in;
  m["outputs"] = out;
  m["parameters"] = std::move(extra);
  write_file_atomic(out_path(cfg, "manifest_" + command + ".json"), m.dump(2) + "\n");
}

void check_method(const std::string& method) {
  const auto& m = recon_methods();
  if (std::find(m.begin(), m.end(), method) == m.end()) {
    throw ConfigError("unknown method '" + method + "' (known: fbp, ossqs, tv, tdl, l0tdl)");
  }
}

}  // namespace

void cmd_simulate(const RunConfig& cfg) {
  ensure_output_dir(cfg);
  const SimulatedData d = simulate(cfg);
  write_tensor(out_path(cfg, "truth.tensor"), d.truth.spectral, TensorPrecision::float64);
  write_tensor(out_path(cfg, "fractions.tensor"), d.truth.fractions, TensorPrecision::float64);
  write_tensor(out_path(cfg, "sino_full.tensor"), d.sino_full);
  write_tensor(out_path(cfg, "sino.tensor"), d.sino);
  nlohmann::json extra;
  extra["photons_per_ray"] = cfg.dose.photons_per_ray;
  extra["noisy"] = cfg.noisy;
  extra["full_views"] = cfg.geometry.view_count();
  write_manifest(cfg, "simulate", {}, {"truth.tensor", "fractions.tensor", "sino_full.tensor", "sino.tensor"}, extra);
}

void cmd_train_dict(const RunConfig& cfg) {
  const fs::path sino_path = require(cfg, "sino_full.tensor");
  const Tensor3 sino_full = read_tensor3(sino_path);
  KcpdTrace trace;
  const TensorDictionary dict = train_dictionary(cfg, sino_full, &trace);
  write_tensor(out_path(cfg, "dict.tensor"), dict.atoms());
  write_tensor(out_path(cfg, "dict_factors.tensor"), dictionary_factor_tensor(dict), TensorPrecision::float64);
  nlohmann::json extra;
  extra["atoms"] = dict.atom_count();
  extra["patch_size"] = dict.patch_size();
  extra["training_iterations"] = cfg.training.iterations;
  extra["max_patches"] = cfg.training.max_patches;
  extra["final_objective"] = trace.objective.empty() ? 0.0 : trace.objective.back();
  write_manifest(cfg, "train-dict", {"sino_full.tensor"}, {"dict.tensor", "dict_factors.tensor"}, extra);
}

void cmd_reconstruct(const RunConfig& cfg, const std::string& method) {
  check_method(method);
  const Tensor3 sino = read_tensor3(require(cfg, "sino.tensor"));
  const Tensor3 sino_full = read_tensor3(require(cfg, "sino_full.tensor"));
  std::vector<std::string> inputs{"sino.tensor", "sino_full.tensor"};
  std::optional<TensorDictionary> dict;
  if (method == "tdl" || method == "l0tdl") {
    const fs::path p = out_path(cfg, "dict_factors.tensor");
    if (!fs::exists(p)) throw MissingInputError(method + " needs " + p.string() + " (run train-dict first)");
    dict.emplace(dictionary_from_factors(read_tensor3(p), cfg.recon.patch_size, sino.dim(2)));
    inputs.push_back("dict_factors.tensor");
  }
  std::optional<Tensor3> truth;
  if (fs::exists(out_path(cfg, "truth.tensor"))) {
    truth.emplace(read_tensor3(out_path(cfg, "truth.tensor")));
    inputs.push_back("truth.tensor");
  }
  const double scale = full_view_scale(cfg, sino_full);
  const MethodOutput r =
      reconstruct(cfg, sino, scale, method, dict ? &*dict : nullptr, truth ? &*truth : nullptr);

  const std::string image_name = "recon_" + method + ".tensor";
  const std::string log_name = "log_" + method + ".csv";
  write_tensor(out_path(cfg, image_name), r.image);
  std::ostringstream log;
  log << "iteration,data_fidelity,dictionary_residual,gradient_l0_x,gradient_l0_u,coupling";
  for (std::size_t s = 0; s < sino.dim(2); ++s) log << ",rmse_ch" << s;
  log << "\n";
  for (const IterationRecord& h : r.history) {
    log << h.iteration << ',' << fmt(h.data_fidelity) << ',' << fmt(h.dictionary_residual) << ','
        << h.gradient_l0_x << ',' << h.gradient_l0_u << ',' << fmt(h.coupling);
    for (double e : h.rmse) log << ',' << fmt(e);
    log << "\n";
  }
  write_file_atomic(out_path(cfg, log_name), log.str());
  nlohmann::json extra;
  extra["method"] = method;
  extra["iterations"] = method == "fbp" ? 0 : cfg.recon.iterations;
  extra["scale"] = scale;
  extra["lambda"] = r.lambda;
  extra["beta"] = r.beta;
  write_manifest(cfg, "reconstruct_" + method, inputs, {image_name, log_name}, extra);
}

void cmd_evaluate(const RunConfig& cfg, const std::string& method) {
  check_method(method);
  const std::string image_name = "recon_" + method + ".tensor";
  const Tensor3 truth = read_tensor3(require(cfg, "truth.tensor"));
  const Tensor3 image = read_tensor3(require(cfg, image_name));
  if (truth.dims() != image.dims()) throw std::invalid_argument("reconstruction dims do not match truth.tensor");

  std::ostringstream csv;
  csv << "method,views,photons,channel,rmse,ssim,fsim\n";
  for (const ChannelMetrics& m : evaluate_channels(truth, image)) {
    csv << method << ',' << cfg.recon_views << ',' << fmt(cfg.dose.photons_per_ray) << ',' << m.channel << ','
        << fmt(m.rmse) << ',' << fmt(m.ssim) << ',' << fmt(m.fsim) << "\n";
  }
  const std::string metrics_name = "metrics_" + method + ".csv";
  write_file_atomic(out_path(cfg, metrics_name), csv.str());

  std::vector<std::string> inputs{"truth.tensor", image_name};
  std::vector<std::string> outputs{metrics_name};
  // ROI statistics against the noiseless full-view FBP, one ROI per material
  // made of the pixels where that material is the only one present.
  const fs::path frac_path = out_path(cfg, "fractions.tensor");
  if (fs::exists(frac_path)) {
    const Tensor3 fractions = read_tensor3(frac_path);
    inputs.push_back("fractions.tensor");
    const Projector full(cfg.geometry);
    DoseModel dose = cfg.dose;
    dose.seed = cfg.seed;
    const Tensor3 clean = simulate_sinograms(truth, full, dose, false);
    const Tensor3 reference = fbp_all_channels(clean, cfg.geometry);
    std::ostringstream roi;
    roi << "method,material,channel,pixels,mean,reference_mean,relative_bias\n";
    const std::size_t len = fractions.slab_size();
    for (std::size_t m = 0; m < fractions.dim(2); ++m) {
      std::vector<unsigned char> mask(len, 0);
      std::size_t count = 0;
      for (std::size_t p = 0; p < len; ++p) {
        bool only = fractions.slab(m)[p] > 0.0;
        for (std::size_t o = 0; o < fractions.dim(2) && only; ++o) {
          if (o != m && fractions.slab(o)[p] != 0.0) only = false;
        }
        mask[p] = only;
        count += only;
      }
      if (count == 0) continue;
      const RoiStats st = roi_mean_bias(image, reference, mask);
      const std::string name = m < cfg.materials.size() ? cfg.materials[m] : std::to_string(m);
      for (std::size_t s = 0; s < st.mean.size(); ++s) {
        roi << method << ',' << name << ',' << s << ',' << count << ',' << fmt(st.mean[s]) << ','
            << fmt(st.reference_mean[s]) << ',' << (st.bias[s] ? fmt(*st.bias[s]) : std::string("undefined")) << "\n";
      }
    }
    const std::string roi_name = "roi_" + method + ".csv";
    write_file_atomic(out_path(cfg, roi_name), roi.str());
    outputs.push_back(roi_name);
  }
  write_manifest(cfg, "evaluate_" + method, inputs, outputs);
}

void cmd_decompose(const RunConfig& cfg, const std::string& method) {
  const bool truth_input = method == "truth";
  if (!truth_input) check_method(method);
  const std::string image_name = truth_input ? "truth.tensor" : "recon_" + method + ".tensor";
  const Tensor3 image = read_tensor3(require(cfg, image_name));
  const MaterialBasis basis = cfg.basis();
  const DecompositionResult d = decompose_materials(image, basis);

  const std::string frac_name = "fractions_" + method + ".tensor";
  write_tensor(out_path(cfg, frac_name), d.fractions, TensorPrecision::float64);
  std::vector<std::string> inputs{image_name};
  std::vector<std::string> outputs{frac_name};

  if (d.fractions.dim(2) == 3) {
    const Tensor3 rgb = color_fuse(d);
    const std::string png_name = "fused_" + method + ".png";
    write_png_rgb(out_path(cfg, png_name), rgb);
    std::ostringstream side;
    side << "image: " << png_name << "\n";
    for (std::size_t c = 0; c < 3; ++c) {
      const auto ch = d.fractions.slab(c);
      side << "channel " << "RGB"[c] << ": " << d.materials[c] << " fraction / "
           << fmt(*std::max_element(ch.begin(), ch.end())) << "\n";
    }
    const std::string side_name = "fused_" + method + ".txt";
    write_file_atomic(out_path(cfg, side_name), side.str());
    outputs.push_back(png_name);
    outputs.push_back(side_name);
  }

  const fs::path planted = out_path(cfg, "fractions.tensor");
  if (fs::exists(planted)) {
    const Tensor3 ref = read_tensor3(planted);
    if (ref.dims() == d.fractions.dims()) {
      std::ostringstream csv;
      csv << "method,material,rmse,max_abs_error\n";
      for (std::size_t m = 0; m < ref.dim(2); ++m) {
        double max_err = 0.0;
        for (std::size_t p = 0; p < ref.slab_size(); ++p) {
          max_err = std::max(max_err, std::abs(ref.slab(m)[p] - d.fractions.slab(m)[p]));
        }
        csv << method << ',' << d.materials[m] << ',' << fmt(rmse(ref.slab(m), d.fractions.slab(m))) << ','
            << fmt(max_err) << "\n";
      }
      const std::string csv_name = "decompose_" + method + ".csv";
      write_file_atomic(out_path(cfg, csv_name), csv.str());
      inputs.push_back("fractions.tensor");
      outputs.push_back(csv_name);
    }
  }
  write_manifest(cfg, "decompose_" + method, inputs, outputs);
}

void cmd_report(const RunConfig& cfg) {
  std::ostringstream md;
  md << "# Reconstruction report\n\n";
  md << "| method | channels | mean RMSE | mean SSIM | mean FSIM |\n|---|---|---|---|---|\n";
  std::vector<std::string> inputs;
  for (const std::string& method : recon_methods()) {
    const std::string name = "metrics_" + method + ".csv";
    if (!fs::exists(out_path(cfg, name))) continue;
    inputs.push_back(name);
    std::istringstream in(read_file(out_path(cfg, name)));
    std::string line;
    std::getline(in, line);
    double r = 0.0, s = 0.0, f = 0.0;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> cols;
      std::stringstream ls(line);
      for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
      if (cols.size() != 7) throw std::runtime_error(name + ": malformed row");
      r += std::stod(cols[4]);
      s += std::stod(cols[5]);
      f += std::stod(cols[6]);
      ++n;
    }
    if (n == 0) continue;
    md << "| " << method << " | " << n << " | " << fmt(r / n) << " | " << fmt(s / n) << " | " << fmt(f / n) << " |\n";
  }
  if (inputs.empty()) throw MissingInputError("no metrics_<method>.csv files in " + cfg.output_dir.string());
  write_file_atomic(out_path(cfg, "report.md"), md.str());
  write_manifest(cfg, "report", inputs, {"report.md"});
}

int run_command(const std::string& command, const fs::path& config_path, const std::string& method,
                const CommandOverrides& overrides, std::ostream& err) {
  try {
    RunConfig cfg = load_config(config_path);
    apply_overrides(cfg, overrides);
    if (command == "simulate") {
      cmd_simulate(cfg);
    } else if (command == "train-dict") {
      cmd_train_dict(cfg);
    } else if (command == "reconstruct") {
      cmd_reconstruct(cfg, method);
    } else if (command == "evaluate") {
      cmd_evaluate(cfg, method);
    } else if (command == "decompose") {
      cmd_decompose(cfg, method);
    } else if (command == "report") {
      cmd_report(cfg);
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }
    return static_cast<int>(ExitCode::ok);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::config_error);
  } catch (const MissingInputError& e) {
    err << "missing input: " << e.what() << "\n";
    return static_cast<int>(ExitCode::missing_input);
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return static_cast<int>(ExitCode::config_error);
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return static_cast<int>(ExitCode::numerical_failure);
  }
}

}  // namespace sct

#include "spectral_ct/config.hpp"

#include "spectral_ct/tensor_file.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <set>

namespace sct {

namespace {

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const YAML::Node& node, const std::string& key, const std::string& where, T fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename T>
std::vector<T> get_list(const YAML::Node& node, const std::string& key, const std::string& where,
                        std::vector<T> fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  if (!v.IsSequence()) throw ConfigError(where + "." + key + ": expected a list");
  std::vector<T> out;
  try {
    for (const auto& e : v) out.push_back(e.as<T>());
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": wrong element type");
  }
  return out;
}

void parse_geometry(const YAML::Node& n, RunConfig& cfg) {
  const std::string w = "geometry";
  check_keys(n, w,
             {"preset", "views", "image_size", "pixel_size_mm", "detector_count", "detector_pitch_mm",
              "detector_offset_mm", "source_to_detector_mm", "source_to_center_mm"});
  const std::string preset = get<std::string>(n, "preset", w, "desk");
  const std::size_t views = get<std::size_t>(n, "views", w, 640);
  if (preset == "desk") {
    cfg.geometry = desk_geometry(views);
  } else if (preset == "reference") {
    cfg.geometry = reference_geometry();
    cfg.geometry.view_angles = uniform_angles(views);
  } else {
    throw ConfigError("geometry.preset: unknown preset '" + preset + "' (known: desk, reference)");
  }
  ScanGeometry& g = cfg.geometry;
  const std::size_t size = get<std::size_t>(n, "image_size", w, g.image_nx);
  g.image_nx = g.image_ny = size;
  g.pixel_size_mm = get<double>(n, "pixel_size_mm", w, g.pixel_size_mm);
  g.detector_count = get<std::size_t>(n, "detector_count", w, g.detector_count);
  g.detector_pitch_mm = get<double>(n, "detector_pitch_mm", w, g.detector_pitch_mm);
  g.detector_offset_mm = get<double>(n, "detector_offset_mm", w, g.detector_offset_mm);
  g.source_to_detector_mm = get<double>(n, "source_to_detector_mm", w, g.source_to_detector_mm);
  g.source_to_center_mm = get<double>(n, "source_to_center_mm", w, g.source_to_center_mm);
}

std::size_t material_index(const std::vector<std::string>& materials, const std::string& name,
                           const std::string& where) {
  const auto it = std::find(materials.begin(), materials.end(), name);
  if (it == materials.end()) throw ConfigError(where + ": material '" + name + "' is not in spectrum.materials");
  return static_cast<std::size_t>(it - materials.begin());
}

void parse_phantom(const YAML::Node& n, RunConfig& cfg) {
  const std::string w = "phantom";
  check_keys(n, w, {"preset", "shapes"});
  const ScanGeometry& g = cfg.geometry;
  if (n["preset"] && n["shapes"]) throw ConfigError("phantom: give either preset or shapes, not both");
  if (n["shapes"]) {
    cfg.phantom = PhantomSpec{{}, g.image_nx, g.image_ny, g.pixel_size_mm};
    const YAML::Node shapes = n["shapes"];
    if (!shapes.IsSequence()) throw ConfigError("phantom.shapes: expected a list");
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const std::string sw = "phantom.shapes[" + std::to_string(i) + "]";
      const YAML::Node s = shapes[i];
      check_keys(s, sw,
                 {"center_x_mm", "center_y_mm", "axis_x_mm", "axis_y_mm", "rotation_rad", "material", "fraction"});
      EllipseShape e;
      e.center_x_mm = get<double>(s, "center_x_mm", sw, 0.0);
      e.center_y_mm = get<double>(s, "center_y_mm", sw, 0.0);
      e.axis_x_mm = get<double>(s, "axis_x_mm", sw, 1.0);
      e.axis_y_mm = get<double>(s, "axis_y_mm", sw, 1.0);
      e.rotation_rad = get<double>(s, "rotation_rad", sw, 0.0);
      if (!s["material"]) throw ConfigError(sw + ".material: required");
      e.material = material_index(cfg.materials, get<std::string>(s, "material", sw, ""), sw + ".material");
      e.fraction = get<double>(s, "fraction", sw, 1.0);
      cfg.phantom.shapes.push_back(e);
    }
    return;
  }
  const std::string preset = get<std::string>(n, "preset", w, "thorax");
  if (preset != "thorax") throw ConfigError("phantom.preset: unknown preset '" + preset + "' (known: thorax)");
  if (cfg.materials != std::vector<std::string>{"soft", "bone", "iodine"}) {
    throw ConfigError("phantom.preset thorax needs spectrum.materials [soft, bone, iodine]");
  }
  cfg.phantom = thorax_phantom(g.image_nx, g.image_ny, g.pixel_size_mm);
}

void parse_recon(const YAML::Node& n, RunConfig& cfg, bool photons_given) {
  const std::string w = "recon";
  check_keys(n, w,
             {"preset", "views", "iterations", "subsets", "patch_size", "patch_stride", "atoms", "eta", "sigma",
              "epsilon", "lambda_star", "sparsity", "tv_weight", "tv_steps", "weights"});
  cfg.preset = get<std::string>(n, "preset", w, "sim-80view");
  const ReconPreset* preset = nullptr;
  try {
    preset = &find_preset(cfg.preset);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("recon.preset: ") + e.what());
  }
  cfg.recon = preset->params;
  const std::string weights = get<std::string>(n, "weights", w, "preset");
  if (weights == "desk") {
    cfg.recon = desk_proportioned(cfg.recon);
  } else if (weights != "preset") {
    throw ConfigError("recon.weights: unknown value '" + weights + "' (known: preset, desk)");
  }
  cfg.recon_views = preset->views;
  if (!photons_given) cfg.dose.photons_per_ray = preset->photons;
  ReconParams& p = cfg.recon;
  cfg.recon_views = get<std::size_t>(n, "views", w, cfg.recon_views);
  p.iterations = get<std::size_t>(n, "iterations", w, p.iterations);
  p.subsets = get<std::size_t>(n, "subsets", w, p.subsets);
  p.patch_size = get<std::size_t>(n, "patch_size", w, p.patch_size);
  p.patch_stride = get<std::size_t>(n, "patch_stride", w, p.patch_stride);
  p.atoms = get<std::size_t>(n, "atoms", w, p.atoms);
  p.eta = get<double>(n, "eta", w, p.eta);
  p.sigma = get<double>(n, "sigma", w, p.sigma);
  p.epsilon = get<double>(n, "epsilon", w, p.epsilon);
  p.lambda_star = get<double>(n, "lambda_star", w, p.lambda_star);
  p.sparsity = get<std::size_t>(n, "sparsity", w, p.sparsity);
  p.tv_weight = get<double>(n, "tv_weight", w, p.tv_weight);
  p.tv_steps = get<std::size_t>(n, "tv_steps", w, p.tv_steps);
}

}  // namespace

ScanGeometry RunConfig::recon_geometry() const {
  return geometry.with_views(subsample_views(geometry.view_count(), recon_views));
}

RunConfig parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  check_keys(root, "config", {"seed", "output", "geometry", "spectrum", "dose", "phantom", "recon", "dictionary"});

  RunConfig cfg;
  cfg.source_text = std::string(text);
  cfg.seed = get<std::uint64_t>(root, "seed", "config", 1);
  cfg.output_dir = get<std::string>(root, "output", "config", "out");

  parse_geometry(root["geometry"] ? root["geometry"] : YAML::Node(YAML::NodeType::Map), cfg);

  const YAML::Node spectrum = root["spectrum"] ? root["spectrum"] : YAML::Node(YAML::NodeType::Map);
  check_keys(spectrum, "spectrum", {"channel_edges_kev", "materials"});
  cfg.channel_edges = get_list<double>(spectrum, "channel_edges_kev", "spectrum", desk_channel_edges());
  cfg.materials = get_list<std::string>(spectrum, "materials", "spectrum", {"soft", "bone", "iodine"});

  const YAML::Node dose = root["dose"] ? root["dose"] : YAML::Node(YAML::NodeType::Map);
  check_keys(dose, "dose", {"photons_per_ray", "channel_weights", "zero_count_clamp", "noisy"});
  const bool photons_given = static_cast<bool>(dose["photons_per_ray"]);
  cfg.dose.photons_per_ray = get<double>(dose, "photons_per_ray", "dose", cfg.dose.photons_per_ray);
  cfg.dose.channel_weights = get_list<double>(dose, "channel_weights", "dose", {});
  cfg.dose.zero_count_clamp = get<double>(dose, "zero_count_clamp", "dose", cfg.dose.zero_count_clamp);
  cfg.noisy = get<bool>(dose, "noisy", "dose", true);

  parse_phantom(root["phantom"] ? root["phantom"] : YAML::Node(YAML::NodeType::Map), cfg);
  parse_recon(root["recon"] ? root["recon"] : YAML::Node(YAML::NodeType::Map), cfg, photons_given);

  const YAML::Node dict = root["dictionary"] ? root["dictionary"] : YAML::Node(YAML::NodeType::Map);
  check_keys(dict, "dictionary", {"iterations", "max_patches", "als_sweeps"});
  cfg.training.iterations = get<std::size_t>(dict, "iterations", "dictionary", cfg.training.iterations);
  cfg.training.max_patches = get<std::size_t>(dict, "max_patches", "dictionary", cfg.training.max_patches);
  cfg.training.als_sweeps = get<std::size_t>(dict, "als_sweeps", "dictionary", cfg.training.als_sweeps);

  try {
    cfg.geometry.validate();
    cfg.basis().validate();
    (void)cfg.dose.weights(cfg.channel_edges.size() - 1);
    cfg.recon.validate();
    if (cfg.recon_views < 1 || cfg.recon_views > cfg.geometry.view_count()) {
      throw std::invalid_argument("recon.views must be in [1, geometry.views]");
    }
    if (cfg.recon.subsets > cfg.recon_views) throw std::invalid_argument("recon.subsets exceeds recon.views");
    if (cfg.recon.patch_size > cfg.geometry.image_nx) throw std::invalid_argument("recon.patch_size exceeds the image");
    if (!(cfg.dose.photons_per_ray > 0.0)) throw std::invalid_argument("dose.photons_per_ray must be positive");
    if (cfg.training.iterations < 1 || cfg.training.max_patches < 1) {
      throw std::invalid_argument("dictionary.iterations and dictionary.max_patches must be >= 1");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return parse_config(text);
}

}  // namespace sct

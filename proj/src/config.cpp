#include "polereloc/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>

namespace polereloc {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

void parse_value(std::string_view v, double& out) { out = parse_double(v); }

void parse_value(std::string_view v, bool& out) {
  if (v == "true" || v == "1") {
    out = true;
  } else if (v == "false" || v == "0") {
    out = false;
  } else {
    throw Error(ErrorKind::kConfig, "expected true or false, got '" + std::string(v) + "'");
  }
}

template <typename Int>
  requires std::is_integral_v<Int>
void parse_value(std::string_view v, Int& out) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw Error(ErrorKind::kConfig, "expected a non-negative integer, got '" + std::string(v) + "'");
  }
  out = value;
}

template <typename T>
void parse_value(std::string_view v, std::vector<T>& out) {
  out.clear();
  while (true) {
    const auto comma = v.find(',');
    T item{};
    parse_value(trim(v.substr(0, comma)), item);
    out.push_back(item);
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
}

std::string format_value(double v) { return format_double(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
template <typename Int>
  requires std::is_integral_v<Int>
std::string format_value(Int v) {
  return std::to_string(v);
}
template <typename T>
std::string format_value(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += format_value(v[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(Config&, std::string_view)> set;
  std::function<std::string(const Config&)> get;
};

template <typename Group, typename T>
Field field(std::string key, Group Config::*group, T Group::*member) {
  return {std::move(key), [=](Config& c, std::string_view v) { parse_value(v, c.*group.*member); },
          [=](const Config& c) { return format_value(c.*group.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using C = Config;
    std::vector<Field> f;
    f.push_back(field("extraction.cluster_distance", &C::extraction, &ExtractionParams::cluster_distance));
    f.push_back(field("extraction.min_points", &C::extraction, &ExtractionParams::min_points));
    f.push_back(field("registration.merge_radius", &C::registration, &RegistrationParams::merge_radius));
    f.push_back(field("registration.strict_labels", &C::registration, &RegistrationParams::strict_labels));
    f.push_back(field("association.search_radius", &C::association, &AssociationParams::search_radius));
    f.push_back(field("association.delta_d", &C::association, &AssociationParams::delta_d));
    f.push_back(field("association.delta_theta", &C::association, &AssociationParams::delta_theta));
    f.push_back(field("association.delta_se", &C::association, &AssociationParams::delta_se));
    f.push_back(field("association.delta_e", &C::association, &AssociationParams::delta_e));
    f.push_back(field("association.n_se", &C::association, &AssociationParams::n_se));
    f.push_back(field("association.n_e", &C::association, &AssociationParams::n_e));
    f.push_back(field("association.n_candidates", &C::association, &AssociationParams::n_candidates));
    f.push_back(field("reloc.epsilon", &C::reloc, &RelocParams::epsilon));
    f.push_back(field("reloc.ransac_threshold", &C::reloc, &RelocParams::ransac_threshold));
    f.push_back(field("reloc.ransac_iterations", &C::reloc, &RelocParams::ransac_iterations));
    f.push_back(field("reloc.min_pairs", &C::reloc, &RelocParams::min_pairs));
    f.push_back(field("reloc.icp_max_iterations", &C::reloc, &RelocParams::icp_max_iterations));
    f.push_back(field("reloc.icp_convergence", &C::reloc, &RelocParams::icp_convergence));
    f.push_back(field("reloc.seed", &C::reloc, &RelocParams::seed));
    f.push_back(field("reloc.ransac_first", &C::reloc, &RelocParams::ransac_first));
    f.push_back(field("pipeline.reloc_period", &C::pipeline, &PipelineConfig::reloc_period));
    f.push_back(field("pipeline.relocalization_enabled", &C::pipeline, &PipelineConfig::relocalization_enabled));
    f.push_back(field("pipeline.reloc_latency_frames", &C::pipeline, &PipelineConfig::reloc_latency_frames));
    f.push_back(field("pipeline.fix_gate", &C::pipeline, &PipelineConfig::fix_gate));
    f.push_back(field("pipeline.background_worker", &C::pipeline, &PipelineConfig::background_worker));
    f.push_back(field("scene.area_x", &C::scene, &SceneSpec::area_x));
    f.push_back(field("scene.area_y", &C::scene, &SceneSpec::area_y));
    f.push_back(field("scene.n_clusters", &C::scene, &SceneSpec::n_clusters));
    f.push_back(field("scene.pole_fraction", &C::scene, &SceneSpec::pole_fraction));
    f.push_back(field("scene.min_spacing", &C::scene, &SceneSpec::min_spacing));
    f.push_back(field("scene.points_per_cluster", &C::scene, &SceneSpec::points_per_cluster));
    f.push_back(field("scene.point_noise_sigma", &C::scene, &SceneSpec::point_noise_sigma));
    f.push_back(field("scene.seed", &C::scene, &SceneSpec::seed));
    f.push_back(field("run.loop_width", &C::run, &RunSpec::loop_width));
    f.push_back(field("run.loop_height", &C::run, &RunSpec::loop_height));
    f.push_back(field("run.corner_radius", &C::run, &RunSpec::corner_radius));
    f.push_back(field("run.start_arc", &C::run, &RunSpec::start_arc));
    f.push_back(field("run.distance", &C::run, &RunSpec::distance));
    f.push_back(field("run.speed", &C::run, &RunSpec::speed));
    f.push_back(field("run.rate", &C::run, &RunSpec::rate));
    f.push_back(field("run.sensor_range", &C::run, &RunSpec::sensor_range));
    f.push_back(field("run.frame_noise_sigma", &C::run, &RunSpec::frame_noise_sigma));
    f.push_back(field("run.label_flip_rate", &C::run, &RunSpec::label_flip_rate));
    f.push_back(field("run.clutter_points", &C::run, &RunSpec::clutter_points));
    f.push_back(field("run.seed", &C::run, &RunSpec::seed));
    f.push_back(field("drift.translational_drift", &C::drift, &DriftSpec::translational_drift));
    f.push_back(field("drift.rotational_drift", &C::drift, &DriftSpec::rotational_drift));
    f.push_back(field("drift.noise_sigma", &C::drift, &DriftSpec::noise_sigma));
    f.push_back(field("drift.seed", &C::drift, &DriftSpec::seed));
    f.push_back(field("eval.retentions", &C::eval, &RelocEvalSpec::retentions));
    f.push_back(field("eval.trials", &C::eval, &RelocEvalSpec::trials));
    f.push_back(field("eval.attempt_spacing", &C::eval, &RelocEvalSpec::attempt_spacing));
    f.push_back(field("eval.max_distance", &C::eval, &RelocEvalSpec::max_distance));
    f.push_back(field("eval.success_threshold", &C::eval, &RelocEvalSpec::success_threshold));
    f.push_back(field("eval.seed", &C::eval, &RelocEvalSpec::seed));
    f.push_back(field("eval.threads", &C::eval, &RelocEvalSpec::threads));
    f.push_back(field("labels.pole", &C::labels, &LabelDictionary::pole_ids));
    f.push_back(field("labels.trunk", &C::labels, &LabelDictionary::trunk_ids));
    return f;
  }();
  return table;
}

}  // namespace

void Config::validate() const {
  extraction.validate();
  registration.validate();
  association.validate();
  reloc.validate();
  pipeline.validate();
  scene.validate();
  run.validate();
  drift.validate();
  eval.validate();
  labels.validate();
}

Config parse_config(std::string_view text) {
  Config config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto end = text.find('\n');
    std::string_view line = text.substr(0, end);
    text.remove_prefix(end == std::string_view::npos ? text.size() : end + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::string where = "config line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorKind::kConfig, where + "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw Error(ErrorKind::kConfig, where + "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw Error(ErrorKind::kConfig, where + "key '" + std::string(key) + "' repeated");
    }
    if (value.empty()) throw Error(ErrorKind::kConfig, where + "missing value for '" + std::string(key) + "'");
    try {
      it->set(config, value);
    } catch (const Error& e) {
      throw Error(ErrorKind::kConfig, where + std::string(key) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

Config load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_config(text);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string format_config(const Config& config) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace polereloc

#include "blochsim/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "blochsim/csv.hpp"
#include "blochsim/errors.hpp"

namespace blochsim {

void RunConfig::validate() const {
  lattice_config().validate();
  if (times.t_ramp_ms < 0 || times.t_bloch_ms < 0 || times.t_rephase_ms < 0 ||
      times.tof_ms < 0 || times.rephase_step_ms < 0)
    throw ConfigError("config: all times must be >= 0");
  if (times.bloch_step_periods <= 0)
    throw ConfigError("config: bloch_step_periods must be positive");
  if (ensemble.n_samples < 1) throw ConfigError("config: n_samples must be >= 1");
  if (ensemble.model != "coherent" && ensemble.model != "squeezed" &&
      ensemble.model != "fock")
    throw ConfigError("config: ensemble model must be coherent, squeezed or fock");
  if (atoms.squeezing_variant != "half" && atoms.squeezing_variant != "full")
    throw ConfigError("config: squeezing_variant must be half or full");
  if (analysis.workers < 1) throw ConfigError("config: workers must be >= 1");
  if (analysis.noise_floor < 0 || analysis.noise_floor > 1)
    throw ConfigError("config: noise_floor must lie in [0, 1]");
  imaging_config().validate();
}

LatticeConfig RunConfig::lattice_config() const {
  LatticeConfig c;
  c.depth_u = lattice.depth_u;
  c.wavelength = lattice.wavelength_nm * kNm;
  c.atom_mass = lattice.atom_mass_kg;
  c.scattering_length = lattice.scattering_length_nm * kNm;
  c.total_atoms = atoms.total_atoms;
  c.central_occupation = atoms.central_occupation;
  c.array_radius_sites = atoms.array_radius_sites;
  c.n_sites = atoms.n_sites;
  c.gradient_e = gradient_e();
  c.transverse_width = atoms.transverse_width_um * kUm;
  c.shot_to_shot_sigma = atoms.shot_to_shot_sigma;
  return c;
}

ImagingConfig RunConfig::imaging_config() const {
  ImagingConfig img = make_imaging_config(lattice_config());
  img.tof_time = times.tof_ms * kMs;
  img.pixel_size = imaging.pixel_size_um * kUm;
  img.n_pixels = imaging.n_pixels;
  img.resolution_blur = imaging.resolution_blur_um * kUm;
  img.noise.photon_shot = imaging.photon_shot;
  img.noise.atom_shot = imaging.atom_shot;
  return img;
}

NumberRegime RunConfig::regime() const {
  if (ensemble.model == "coherent") return NumberRegime::coherent;
  if (ensemble.model == "fock") return NumberRegime::fock;
  return NumberRegime::squeezed;
}

SqueezingVariant RunConfig::variant() const {
  return atoms.squeezing_variant == "full" ? SqueezingVariant::full_denominator
                                           : SqueezingVariant::half_denominator;
}

EnsembleSpec RunConfig::ensemble_spec() const {
  EnsembleSpec spec;
  spec.n_samples = ensemble.n_samples;
  spec.number_sigma_model = regime();
  spec.variant = variant();
  spec.master_seed = ensemble.seed;
  return spec;
}

namespace {

struct Field {
  enum Kind { real, integer, unsigned64, boolean, text } kind;
  void* target;
};

using FieldMap = std::map<std::string, Field>;

FieldMap field_map(RunConfig& c) {
  FieldMap m;
  auto real = [&](const std::string& k, double& v) { m[k] = {Field::real, &v}; };
  auto integer = [&](const std::string& k, int& v) { m[k] = {Field::integer, &v}; };
  auto u64 = [&](const std::string& k, std::uint64_t& v) { m[k] = {Field::unsigned64, &v}; };
  auto boolean = [&](const std::string& k, bool& v) { m[k] = {Field::boolean, &v}; };
  auto text = [&](const std::string& k, std::string& v) { m[k] = {Field::text, &v}; };

  real("lattice.depth_u", c.lattice.depth_u);
  real("lattice.wavelength_nm", c.lattice.wavelength_nm);
  real("lattice.atom_mass_kg", c.lattice.atom_mass_kg);
  real("lattice.scattering_length_nm", c.lattice.scattering_length_nm);

  real("atoms.total_atoms", c.atoms.total_atoms);
  real("atoms.central_occupation", c.atoms.central_occupation);
  real("atoms.array_radius_sites", c.atoms.array_radius_sites);
  integer("atoms.n_sites", c.atoms.n_sites);
  real("atoms.transverse_width_um", c.atoms.transverse_width_um);
  real("atoms.shot_to_shot_sigma", c.atoms.shot_to_shot_sigma);
  text("atoms.squeezing_variant", c.atoms.squeezing_variant);

  real("gradient.frequency_hz", c.gradient.frequency_hz);

  real("times.t_ramp_ms", c.times.t_ramp_ms);
  real("times.t_bloch_ms", c.times.t_bloch_ms);
  real("times.t_rephase_ms", c.times.t_rephase_ms);
  real("times.tof_ms", c.times.tof_ms);
  real("times.bloch_step_periods", c.times.bloch_step_periods);
  real("times.rephase_step_ms", c.times.rephase_step_ms);

  integer("ensemble.n_samples", c.ensemble.n_samples);
  u64("ensemble.seed", c.ensemble.seed);
  text("ensemble.model", c.ensemble.model);

  real("imaging.pixel_size_um", c.imaging.pixel_size_um);
  integer("imaging.n_pixels", c.imaging.n_pixels);
  real("imaging.resolution_blur_um", c.imaging.resolution_blur_um);
  boolean("imaging.photon_shot", c.imaging.photon_shot);
  boolean("imaging.atom_shot", c.imaging.atom_shot);
  real("imaging.image_transverse_width_um", c.imaging.image_transverse_width_um);

  real("analysis.noise_floor", c.analysis.noise_floor);
  real("analysis.zener_fraction", c.analysis.zener_fraction);
  integer("analysis.workers", c.analysis.workers);
  return m;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

void assign(const Field& field, const std::string& raw, const std::string& key, int line) {
  const std::string value = trim(raw);
  auto fail = [&](const char* what) {
    throw ConfigError("config line " + std::to_string(line) + ": " + what + " for key '" +
                      key + "' (got '" + value + "')");
  };
  try {
    switch (field.kind) {
      case Field::real:
        *static_cast<double*>(field.target) = std::stod(value);
        break;
      case Field::integer:
        *static_cast<int*>(field.target) = std::stoi(value);
        break;
      case Field::unsigned64:
        *static_cast<std::uint64_t*>(field.target) = std::stoull(value);
        break;
      case Field::boolean: {
        if (value == "true" || value == "1")
          *static_cast<bool*>(field.target) = true;
        else if (value == "false" || value == "0")
          *static_cast<bool*>(field.target) = false;
        else
          fail("expected true/false");
        break;
      }
      case Field::text:
        *static_cast<std::string*>(field.target) = value;
        break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail("malformed value");
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig config;
  FieldMap fields = field_map(config);

  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(origin + " line " + std::to_string(line_no) +
                          ": malformed section header '" + t + "'");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + " line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = fields.find(full);
    if (it == fields.end())
      throw ConfigError(origin + " line " + std::to_string(line_no) +
                        ": unknown key '" + full + "'");
    assign(it->second, t.substr(eq + 1), full, line_no);
  }
  config.validate();
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  auto num = [](double v) { return format_double(v); };
  out << "[lattice]\n"
      << "depth_u = " << num(c.lattice.depth_u) << "\n"
      << "wavelength_nm = " << num(c.lattice.wavelength_nm) << "\n"
      << "atom_mass_kg = " << num(c.lattice.atom_mass_kg) << "\n"
      << "scattering_length_nm = " << num(c.lattice.scattering_length_nm) << "\n\n"
      << "[atoms]\n"
      << "total_atoms = " << num(c.atoms.total_atoms) << "\n"
      << "central_occupation = " << num(c.atoms.central_occupation) << "\n"
      << "array_radius_sites = " << num(c.atoms.array_radius_sites) << "\n"
      << "n_sites = " << c.atoms.n_sites << "\n"
      << "transverse_width_um = " << num(c.atoms.transverse_width_um) << "\n"
      << "shot_to_shot_sigma = " << num(c.atoms.shot_to_shot_sigma) << "\n"
      << "squeezing_variant = " << c.atoms.squeezing_variant << "\n\n"
      << "[gradient]\n"
      << "frequency_hz = " << num(c.gradient.frequency_hz) << "\n\n"
      << "[times]\n"
      << "t_ramp_ms = " << num(c.times.t_ramp_ms) << "\n"
      << "t_bloch_ms = " << num(c.times.t_bloch_ms) << "\n"
      << "t_rephase_ms = " << num(c.times.t_rephase_ms) << "\n"
      << "tof_ms = " << num(c.times.tof_ms) << "\n"
      << "bloch_step_periods = " << num(c.times.bloch_step_periods) << "\n"
      << "rephase_step_ms = " << num(c.times.rephase_step_ms) << "\n\n"
      << "[ensemble]\n"
      << "n_samples = " << c.ensemble.n_samples << "\n"
      << "seed = " << c.ensemble.seed << "\n"
      << "model = " << c.ensemble.model << "\n\n"
      << "[imaging]\n"
      << "pixel_size_um = " << num(c.imaging.pixel_size_um) << "\n"
      << "n_pixels = " << c.imaging.n_pixels << "\n"
      << "resolution_blur_um = " << num(c.imaging.resolution_blur_um) << "\n"
      << "photon_shot = " << (c.imaging.photon_shot ? "true" : "false") << "\n"
      << "atom_shot = " << (c.imaging.atom_shot ? "true" : "false") << "\n"
      << "image_transverse_width_um = " << num(c.imaging.image_transverse_width_um)
      << "\n\n"
      << "[analysis]\n"
      << "noise_floor = " << num(c.analysis.noise_floor) << "\n"
      << "zener_fraction = " << num(c.analysis.zener_fraction) << "\n"
      << "workers = " << c.analysis.workers << "\n";
  return out.str();
}

std::string config_hash(const RunConfig& config) {
  const std::string text = serialize_config(config);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace blochsim

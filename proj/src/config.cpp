#include "invml/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "invml/error.hpp"

namespace invml {
namespace {

[[noreturn]] void config_error(std::string_view section, std::string_view key,
                               const std::string& why) {
  throw Error(ErrorCode::ConfigError,
              "[" + std::string(section) + "] " + std::string(key) + ": " + why);
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(const std::string& text, std::string_view section, std::string_view key) {
  const std::string v = trim(text);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    config_error(section, key, "cannot parse '" + v + "' as a number");
  }
  return out;
}

bool parse_bool(const std::string& text, std::string_view section, std::string_view key) {
  std::string v = trim(text);
  std::ranges::transform(v, v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  config_error(section, key, "expected true/false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
std::string fmt_int(T v) {
  return std::to_string(v);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

struct Field {
  const char* section;
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define INVML_SIZE(sec, name, member)                                                     \
  Field {                                                                                 \
    sec, name,                                                                            \
        [](ExperimentConfig& c, const std::string& v) {                                   \
          c.member = parse_number<std::size_t>(v, sec, name);                             \
        },                                                                                \
        [](const ExperimentConfig& c) { return fmt_int(c.member); }                       \
  }
#define INVML_U64(sec, name, member)                                                      \
  Field {                                                                                 \
    sec, name,                                                                            \
        [](ExperimentConfig& c, const std::string& v) {                                   \
          c.member = parse_number<std::uint64_t>(v, sec, name);                           \
        },                                                                                \
        [](const ExperimentConfig& c) { return fmt_int(c.member); }                       \
  }
#define INVML_I64(sec, name, member)                                                      \
  Field {                                                                                 \
    sec, name,                                                                            \
        [](ExperimentConfig& c, const std::string& v) {                                   \
          c.member = parse_number<long long>(v, sec, name);                               \
        },                                                                                \
        [](const ExperimentConfig& c) { return fmt_int(c.member); }                       \
  }
#define INVML_F64(sec, name, member)                                                      \
  Field {                                                                                 \
    sec, name,                                                                            \
        [](ExperimentConfig& c, const std::string& v) {                                   \
          c.member = parse_number<double>(v, sec, name);                                  \
        },                                                                                \
        [](const ExperimentConfig& c) { return fmt(c.member); }                           \
  }
#define INVML_BOOL(sec, name, member)                                                     \
  Field {                                                                                 \
    sec, name,                                                                            \
        [](ExperimentConfig& c, const std::string& v) { c.member = parse_bool(v, sec, name); }, \
        [](const ExperimentConfig& c) { return fmt(c.member); }                           \
  }
#define INVML_STR(sec, name, member)                                                      \
  Field {                                                                                 \
    sec, name, [](ExperimentConfig& c, const std::string& v) { c.member = trim(v); },     \
        [](const ExperimentConfig& c) { return c.member; }                                \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      INVML_STR("dataset", "profile", profile),
      INVML_STR("dataset", "kind", dataset.kind),
      INVML_SIZE("dataset", "n", dataset.n),
      INVML_SIZE("dataset", "test_n", dataset.test_n),
      INVML_SIZE("dataset", "ambient_dim", dataset.ambient_dim),
      INVML_SIZE("dataset", "intrinsic_dim", dataset.intrinsic_dim),
      INVML_STR("dataset", "images", dataset.images),
      INVML_STR("dataset", "labels", dataset.labels),
      INVML_BOOL("dataset", "downsample16", dataset.downsample16),
      INVML_STR("dataset", "csv", dataset.csv),
      INVML_BOOL("dataset", "csv_labels", dataset.csv_labels),
      INVML_BOOL("dataset", "standardize", dataset.standardize),
      INVML_U64("dataset", "seed", dataset.seed),

      INVML_SIZE("model", "layers", model.layers),
      INVML_SIZE("model", "target_dim", model.target_dim),
      INVML_SIZE("model", "k", trainer.k),
      INVML_F64("model", "leaky_alpha", model.leaky_alpha),
      INVML_STR("model", "init", model.init),

      INVML_F64("schedule", "alpha0", trainer.schedule.alpha0),
      INVML_F64("schedule", "beta_min", trainer.schedule.beta_min),
      INVML_F64("schedule", "beta_max", trainer.schedule.beta_max),
      INVML_F64("schedule", "gamma0", trainer.schedule.gamma0),
      INVML_F64("schedule", "mu_min", trainer.schedule.mu_min),
      INVML_F64("schedule", "mu_max", trainer.schedule.mu_max),
      INVML_F64("schedule", "alpha_ramp_begin", trainer.schedule.alpha_ramp_begin),
      INVML_F64("schedule", "alpha_ramp_end", trainer.schedule.alpha_ramp_end),
      INVML_F64("schedule", "gamma_decay_begin", trainer.schedule.gamma_decay_begin),
      INVML_F64("schedule", "gamma_decay_end", trainer.schedule.gamma_decay_end),
      INVML_F64("schedule", "push_radius", trainer.schedule.push_radius),
      INVML_BOOL("schedule", "use_orth", trainer.schedule.use_orth),
      INVML_BOOL("schedule", "use_pad", trainer.schedule.use_pad),
      INVML_BOOL("schedule", "use_extra", trainer.schedule.use_extra),
      INVML_BOOL("schedule", "lis_squared", trainer.loss.lis_squared),
      INVML_BOOL("schedule", "push_literal", trainer.loss.push_literal),
      INVML_BOOL("schedule", "mean_reduction", trainer.loss.mean_reduction),
      INVML_SIZE("schedule", "power_iters", trainer.loss.power_iters),

      INVML_SIZE("trainer", "epochs", trainer.epochs),
      INVML_F64("trainer", "lr", trainer.lr),
      INVML_F64("trainer", "beta1", trainer.beta1),
      INVML_F64("trainer", "beta2", trainer.beta2),
      INVML_F64("trainer", "eps", trainer.eps),
      INVML_U64("trainer", "seed", trainer.seed),
      Field{"trainer", "batch_mode",
            [](ExperimentConfig& c, const std::string& v) {
              const std::string t = trim(v);
              if (t == "full") {
                c.trainer.batch_mode = BatchMode::Full;
              } else if (t == "block") {
                c.trainer.batch_mode = BatchMode::NeighborhoodBlock;
              } else {
                config_error("trainer", "batch_mode", "expected full or block, got '" + t + "'");
              }
            },
            [](const ExperimentConfig& c) {
              return std::string(c.trainer.batch_mode == BatchMode::Full ? "full" : "block");
            }},
      INVML_SIZE("trainer", "block_size", trainer.block_size),
      INVML_SIZE("trainer", "log_interval", trainer.log_interval),
      INVML_F64("trainer", "grad_clip", trainer.grad_clip),

      INVML_SIZE("metrics", "k1", metrics.k1),
      INVML_SIZE("metrics", "k2", metrics.k2),
      INVML_F64("metrics", "rank_tol", metrics.rank_tol),
      INVML_SIZE("metrics", "lipschitz_k", metrics.lipschitz_k),
      INVML_SIZE("metrics", "lmse_rows", metrics.lmse_rows),
      INVML_BOOL("metrics", "accuracy", metrics.accuracy),

      INVML_STR("interpolation", "mode", interpolation.mode),
      INVML_SIZE("interpolation", "k_max", interpolation.k_max),
      INVML_SIZE("interpolation", "t_steps", interpolation.t_steps),
      INVML_SIZE("interpolation", "anchors", interpolation.anchors),
      INVML_SIZE("interpolation", "segments", interpolation.segments),
      INVML_SIZE("interpolation", "min_pair_rank", interpolation.min_pair_rank),
      INVML_SIZE("interpolation", "max_hop_rank", interpolation.max_hop_rank),
      INVML_I64("interpolation", "pair_i", interpolation.pair_i),
      INVML_I64("interpolation", "pair_j", interpolation.pair_j),
      INVML_SIZE("interpolation", "sparsity", interpolation.sparsity),

      INVML_STR("output", "dir", output.dir),
      INVML_BOOL("output", "plots", output.plots),
  };
  return table;
}

#undef INVML_SIZE
#undef INVML_U64
#undef INVML_I64
#undef INVML_F64
#undef INVML_BOOL
#undef INVML_STR

const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& f : fields()) {
    if (section == f.section && key == f.key) return &f;
  }
  return nullptr;
}

ExperimentConfig image_profile(std::string name, std::size_t n, std::size_t test_n,
                               std::size_t target_dim, bool downsample, std::string stem) {
  ExperimentConfig c;
  c.profile = std::move(name);
  c.dataset.kind = "idx";
  c.dataset.n = n;
  c.dataset.test_n = test_n;
  c.dataset.images = "data/" + stem + "-images.idx";
  c.dataset.labels = "data/" + stem + "-labels.idx";
  c.dataset.downsample16 = downsample;
  c.model.target_dim = target_dim;
  c.trainer.epochs = 10000;
  c.trainer.batch_mode = BatchMode::NeighborhoodBlock;
  c.trainer.block_size = 2000;
  return c;
}

}  // namespace

const std::vector<std::string>& profile_names() {
  static const std::vector<std::string> names = {"swissroll", "spheres", "halfspheres",
                                                 "usps",      "mnist256", "mnist784",
                                                 "kmnist",    "fmnist",   "coil20"};
  return names;
}

ExperimentConfig profile_config(std::string_view profile) {
  ExperimentConfig c;
  c.trainer.epochs = 10000;
  if (profile == "swissroll") {
    c.profile = "swissroll";
    c.dataset.kind = "swissroll";
    c.dataset.n = 800;
    c.dataset.test_n = 8000;
    c.model.target_dim = 2;
    c.metrics.accuracy = false;
    // Three-wide layers train too slowly at the default 1e-3.
    c.trainer.lr = 1e-2;
  } else if (profile == "spheres" || profile == "halfspheres") {
    const bool half = profile == "halfspheres";
    c.profile = std::string(profile);
    c.dataset.kind = std::string(profile);
    c.dataset.n = 5500;
    c.dataset.test_n = 5500;
    c.dataset.ambient_dim = 101;
    c.dataset.intrinsic_dim = half ? 10 : 0;
    c.model.target_dim = 10;
    c.trainer.batch_mode = BatchMode::NeighborhoodBlock;
    c.trainer.block_size = 2000;
  } else if (profile == "usps") {
    c = image_profile("usps", 4649, 4649, 10, false, "usps");
  } else if (profile == "mnist256") {
    c = image_profile("mnist256", 8000, 0, 10, true, "mnist");
  } else if (profile == "mnist784") {
    c = image_profile("mnist784", 20000, 10000, 10, false, "mnist");
  } else if (profile == "kmnist") {
    c = image_profile("kmnist", 20000, 10000, 10, false, "kmnist");
  } else if (profile == "fmnist") {
    c = image_profile("fmnist", 20000, 10000, 10, false, "fmnist");
  } else if (profile == "coil20") {
    c.profile = "coil20";
    c.dataset.kind = "csv";
    c.dataset.csv = "data/coil20.csv";
    c.dataset.n = 1440;
    c.model.layers = 6;
    c.model.target_dim = 20;
  } else {
    config_error("dataset", "profile", "unknown profile '" + std::string(profile) + "'");
  }
  c.output.dir = "out/" + c.profile;
  return c;
}

ExperimentConfig parse_config(const std::string& ini_text, ExperimentConfig base) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, "line " + std::to_string(e.line()) + ": " + e.message());
  }
  if (const auto p = tree.get_optional<std::string>("dataset.profile")) {
    if (trim(*p) != base.profile) base = profile_config(trim(*p));
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) config_error("", section, "keys must live inside a [section]");
    for (const auto& [key, value] : body) {
      const Field* f = find_field(section, key);
      if (!f) config_error(section, key, "unknown key");
      f->set(base, value.data());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), std::move(base));
}

void apply_quick(ExperimentConfig& c) {
  c.trainer.epochs = std::max<std::size_t>(1, c.trainer.epochs / 5);
  c.dataset.n = std::max<std::size_t>(50, c.dataset.n / 5);
  if (c.dataset.test_n) c.dataset.test_n = std::max<std::size_t>(50, c.dataset.test_n / 5);
  c.trainer.log_interval = std::max<std::size_t>(1, c.trainer.log_interval / 5);
}

void validate(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  static const std::vector<std::string> kinds = {"swissroll", "spheres", "halfspheres", "idx",
                                                 "csv"};
  if (std::ranges::find(kinds, d.kind) == kinds.end()) {
    config_error("dataset", "kind", "expected one of swissroll, spheres, halfspheres, idx, csv");
  }
  if (d.n < 4) config_error("dataset", "n", "need at least 4 samples");
  std::size_t m = 0;
  if (d.kind == "swissroll") m = 3;
  if (d.kind == "spheres" || d.kind == "halfspheres") {
    if (d.ambient_dim < 2) config_error("dataset", "ambient_dim", "must be >= 2");
    if (d.intrinsic_dim + 1 > d.ambient_dim) {
      config_error("dataset", "intrinsic_dim", "sphere dimension must be < ambient_dim");
    }
    m = d.ambient_dim;
  }
  if (d.kind == "idx") {
    if (d.images.empty() || !std::filesystem::exists(d.images)) {
      config_error("dataset", "images", "file '" + d.images + "' does not exist");
    }
    if (!d.labels.empty() && !std::filesystem::exists(d.labels)) {
      config_error("dataset", "labels", "file '" + d.labels + "' does not exist");
    }
  }
  if (d.kind == "csv" && (d.csv.empty() || !std::filesystem::exists(d.csv))) {
    config_error("dataset", "csv", "file '" + d.csv + "' does not exist");
  }

  const auto& mo = c.model;
  if (mo.layers < 3) config_error("model", "layers", "must be >= 3");
  if (mo.target_dim == 0) config_error("model", "target_dim", "must be >= 1");
  if (m != 0 && mo.target_dim > m) {
    config_error("model", "target_dim",
                 "s' = " + std::to_string(mo.target_dim) + " exceeds input dimension m = " +
                     std::to_string(m));
  }
  if (!(mo.leaky_alpha > 0.0 && mo.leaky_alpha < 1.0)) {
    config_error("model", "leaky_alpha", "must lie in (0, 1)");
  }
  if (mo.init != "random" && mo.init != "identity") {
    config_error("model", "init", "expected random or identity");
  }

  const auto& t = c.trainer;
  if (t.k == 0) config_error("model", "k", "must be >= 1");
  if (t.k >= d.n) config_error("model", "k", "must be smaller than the sample count");
  const auto& s = t.schedule;
  const std::pair<const char*, double> nonneg[] = {
      {"alpha0", s.alpha0}, {"beta_min", s.beta_min}, {"beta_max", s.beta_max},
      {"gamma0", s.gamma0}, {"mu_min", s.mu_min},     {"mu_max", s.mu_max},
      {"push_radius", s.push_radius}};
  for (const auto& [name, v] : nonneg) {
    if (!(v >= 0.0) || !std::isfinite(v)) config_error("schedule", name, "must be finite and >= 0");
  }
  const std::pair<const char*, double> fractions[] = {
      {"alpha_ramp_begin", s.alpha_ramp_begin},
      {"alpha_ramp_end", s.alpha_ramp_end},
      {"gamma_decay_begin", s.gamma_decay_begin},
      {"gamma_decay_end", s.gamma_decay_end}};
  for (const auto& [name, v] : fractions) {
    if (!(v >= 0.0 && v <= 1.0)) config_error("schedule", name, "must lie in [0, 1]");
  }
  if (s.alpha_ramp_begin > s.alpha_ramp_end) {
    config_error("schedule", "alpha_ramp_end", "must not precede alpha_ramp_begin");
  }
  if (s.gamma_decay_begin > s.gamma_decay_end) {
    config_error("schedule", "gamma_decay_end", "must not precede gamma_decay_begin");
  }
  if (s.alpha_ramp_end > s.gamma_decay_begin) {
    config_error("schedule", "alpha_ramp_end", "alpha ramp must finish before gamma decay starts");
  }
  if (t.loss.power_iters == 0) config_error("schedule", "power_iters", "must be >= 1");

  if (t.epochs == 0) config_error("trainer", "epochs", "must be >= 1");
  if (!(t.lr > 0.0)) config_error("trainer", "lr", "must be > 0");
  if (!(t.beta1 >= 0.0 && t.beta1 < 1.0)) config_error("trainer", "beta1", "must lie in [0, 1)");
  if (!(t.beta2 >= 0.0 && t.beta2 < 1.0)) config_error("trainer", "beta2", "must lie in [0, 1)");
  if (!(t.eps > 0.0)) config_error("trainer", "eps", "must be > 0");
  if (t.block_size == 0) config_error("trainer", "block_size", "must be >= 1");
  if (t.log_interval == 0) config_error("trainer", "log_interval", "must be >= 1");
  if (!(t.grad_clip >= 0.0)) config_error("trainer", "grad_clip", "must be >= 0");

  const auto& me = c.metrics;
  const std::size_t eval_n = d.test_n ? d.test_n : d.n;
  if (me.k1 < 2) config_error("metrics", "k1", "must be >= 2");
  if (me.k2 < me.k1) config_error("metrics", "k2", "must be >= k1");
  if (3 * me.k2 >= 2 * eval_n - 1) {
    config_error("metrics", "k2", "must satisfy k2 < (2M - 1) / 3 for M = " +
                                      std::to_string(eval_n));
  }
  if (!(me.rank_tol > 0.0 && me.rank_tol < 1.0)) config_error("metrics", "rank_tol", "must lie in (0, 1)");
  if (me.lipschitz_k == 0 || me.lipschitz_k >= eval_n) {
    config_error("metrics", "lipschitz_k", "must lie in [1, M)");
  }
  if (me.lmse_rows < 2) config_error("metrics", "lmse_rows", "must be >= 2");

  const auto& ip = c.interpolation;
  if (ip.mode != "knn" && ip.mode != "geodesic") {
    config_error("interpolation", "mode", "expected knn or geodesic");
  }
  if (ip.k_max == 0 || ip.k_max >= eval_n) config_error("interpolation", "k_max", "must lie in [1, M)");
  if (ip.t_steps < 2) config_error("interpolation", "t_steps", "must be >= 2");
  if (ip.segments == 0) config_error("interpolation", "segments", "must be >= 1");
  if ((ip.pair_i < 0) != (ip.pair_j < 0)) {
    config_error("interpolation", "pair_j", "set both pair_i and pair_j or neither");
  }
  if (c.output.dir.empty()) config_error("output", "dir", "must not be empty");
}

std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(c) << '\n';
  }
  return out.str();
}

}  // namespace invml

#include "hyperproto/run_config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hyperproto/errors.hpp"

namespace hyperproto {

namespace {

constexpr std::array kKnownKeys = {
    "space",       "d",           "k",          "r",           "epsilon",     "clip",         "gradient_mode",
    "train_way",   "train_shot",  "train_queries", "test_way", "test_shot",   "test_queries", "episodes",
    "lr",          "lr_step",     "lr_gamma",   "branching",   "depth",       "input_dim",    "hidden_dim",
    "node_scale",  "noise_scale", "eval_episodes", "seed",     "output",      "renormalize_prototypes",
    "prototype_gradients", "threads",     "norm_epsilon"};

constexpr std::array kSpaceKeys = {"space", "k", "r", "epsilon", "clip", "gradient_mode"};

// Keys that fix the test episodes every compared run is scored on.
constexpr std::array kSharedDataKeys = {"seed",      "branching",   "depth",        "input_dim",    "node_scale",
                                        "noise_scale", "test_way",  "test_shot",    "test_queries", "eval_episodes"};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool is_known(std::string_view key) {
  for (const char* k : kKnownKeys) {
    if (key == k) return true;
  }
  return false;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class FieldReader {
 public:
  explicit FieldReader(const ConfigFields& f) : fields_(f) {}

  bool has(std::string_view key) const { return fields_.find(key) != fields_.end(); }

  const std::string* raw(std::string_view key) const {
    const auto it = fields_.find(key);
    return it == fields_.end() ? nullptr : &it->second;
  }

  template <class Int>
  void integer(std::string_view key, Int& out) const {
    const std::string* v = raw(key);
    if (!v) return;
    Int parsed{};
    const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), parsed);
    if (ec != std::errc{} || end != v->data() + v->size()) {
      throw ConfigError(std::string(key), "expected an integer, got '" + *v + "'");
    }
    out = parsed;
  }

  void real(std::string_view key, double& out) const {
    const std::string* v = raw(key);
    if (!v) return;
    std::size_t used = 0;
    double parsed = 0.0;
    try {
      parsed = std::stod(*v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v->size() || v->empty() || !std::isfinite(parsed)) {
      throw ConfigError(std::string(key), "expected a finite number, got '" + *v + "'");
    }
    out = parsed;
  }

  void boolean(std::string_view key, bool& out) const {
    const std::string* v = raw(key);
    if (!v) return;
    if (*v == "true") {
      out = true;
    } else if (*v == "false") {
      out = false;
    } else {
      throw ConfigError(std::string(key), "expected true or false, got '" + *v + "'");
    }
  }

 private:
  const ConfigFields& fields_;
};

CurvatureSpace space_from_fields(const FieldReader& in) {
  std::string kind = "poincare";
  if (const auto* v = in.raw("space")) kind = *v;
  try {
    if (kind == "poincare") {
      if (in.has("r")) throw ConfigError("r", "the radius applies to the sphere space only");
      double k = -0.05;
      double eps = 1e-3;
      in.real("k", k);
      in.real("epsilon", eps);
      if (!(k < 0.0)) throw ConfigError("k", "curvature must be negative for the poincare space");
      if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("epsilon", "must lie in (0, 1)");
      return CurvatureSpace::poincare_ball(k, eps);
    }
    for (const char* key : {"k", "epsilon", "clip"}) {
      if (in.has(key)) throw ConfigError(key, "applies to the poincare space only");
    }
    if (kind == "sphere") {
      double r = default_sphere_radius();
      in.real("r", r);
      if (!(r > 0.0)) throw ConfigError("r", "radius must be positive");
      return CurvatureSpace::fixed_radius_sphere(r);
    }
    if (kind == "euclidean") {
      if (in.has("r")) throw ConfigError("r", "the radius applies to the sphere space only");
      return CurvatureSpace::euclidean_squared();
    }
  } catch (const DomainError& e) {
    throw ConfigError("space", e.what());
  }
  throw ConfigError("space", "expected euclidean, poincare or sphere, got '" + kind + "'");
}

std::vector<std::string_view> split_documents(std::string_view text) {
  std::vector<std::string_view> docs;
  std::size_t start = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = std::min(text.find('\n', pos), text.size());
    if (trim(text.substr(pos, eol - pos)) == "---") {
      docs.push_back(text.substr(start, pos - start));
      start = eol + 1;
    }
    if (eol == text.size()) break;
    pos = eol + 1;
  }
  docs.push_back(text.substr(std::min(start, text.size())));
  return docs;
}

}  // namespace

double default_sphere_radius() { return 1.0 / std::sqrt(0.006); }

ConfigFields parse_fields(std::string_view text) {
  ConfigFields fields;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key: value'");
    }
    const std::string key(trim(line.substr(0, colon)));
    const std::string value(trim(line.substr(colon + 1)));
    if (!is_known(key)) throw ConfigError(key, "unknown key");
    if (value.empty() && key != "output") throw ConfigError(key, "missing value");
    if (!fields.emplace(key, value).second) throw ConfigError(key, "duplicate key");
  }
  return fields;
}

RunConfig config_from_fields(const ConfigFields& fields) {
  const FieldReader in(fields);
  RunConfig cfg;
  ExperimentConfig& e = cfg.experiment;
  e.space = space_from_fields(in);

  if (const auto* v = in.raw("clip")) {
    if (*v != "none") {
      double c = 0.0;
      in.real("clip", c);
      e.clip.max_norm = c;
    }
  }
  if (const auto* v = in.raw("gradient_mode")) {
    if (*v == "euclidean") {
      e.gradient_mode = GradientMode::EuclideanBackprop;
    } else if (*v == "riemannian") {
      e.gradient_mode = GradientMode::RiemannianScaled;
    } else {
      throw ConfigError("gradient_mode", "expected euclidean or riemannian, got '" + *v + "'");
    }
  }
  in.integer("d", e.d);
  in.real("norm_epsilon", e.norm_epsilon);
  in.integer("train_way", e.train_episode.way);
  in.integer("train_shot", e.train_episode.shot);
  in.integer("train_queries", e.train_episode.queries);
  in.integer("test_way", e.test_episode.way);
  in.integer("test_shot", e.test_episode.shot);
  in.integer("test_queries", e.test_episode.queries);
  in.integer("episodes", e.episodes);
  in.real("lr", e.lr);
  in.integer("lr_step", e.lr_step);
  in.real("lr_gamma", e.lr_gamma);
  in.integer("branching", e.hierarchy.branching);
  in.integer("depth", e.hierarchy.depth);
  in.integer("input_dim", e.hierarchy.input_dim);
  in.integer("hidden_dim", e.hidden_dim);
  in.real("node_scale", e.hierarchy.node_scale);
  in.real("noise_scale", e.hierarchy.noise_scale);
  in.integer("eval_episodes", e.eval_episodes);
  in.integer("seed", e.seed);
  in.integer("threads", e.threads);
  in.boolean("renormalize_prototypes", e.prototypes.renormalize_sphere);
  in.boolean("prototype_gradients", e.prototype_gradients);
  if (const auto* v = in.raw("output")) cfg.output = *v;

  e.hierarchy.seed = e.seed;
  e.validate();
  return cfg;
}

RunConfig parse_run_config(std::string_view text) {
  const auto docs = split_documents(text);
  if (docs.size() != 1) throw ConfigError("", "expected a single configuration document");
  return config_from_fields(parse_fields(text));
}

std::string serialize(const RunConfig& config) {
  const ExperimentConfig& e = config.experiment;
  std::ostringstream out;
  out << "space: " << to_string(e.space.kind()) << '\n';
  out << "d: " << e.d << '\n';
  if (e.space.is_poincare()) {
    out << "k: " << fmt(e.space.k()) << '\n';
    out << "epsilon: " << fmt(e.space.epsilon()) << '\n';
    out << "clip: " << (e.clip.max_norm ? fmt(*e.clip.max_norm) : "none") << '\n';
  }
  if (e.space.is_sphere()) out << "r: " << fmt(e.space.radius()) << '\n';
  out << "norm_epsilon: " << fmt(e.norm_epsilon) << '\n';
  out << "gradient_mode: " << to_string(e.gradient_mode) << '\n';
  out << "train_way: " << e.train_episode.way << '\n';
  out << "train_shot: " << e.train_episode.shot << '\n';
  out << "train_queries: " << e.train_episode.queries << '\n';
  out << "test_way: " << e.test_episode.way << '\n';
  out << "test_shot: " << e.test_episode.shot << '\n';
  out << "test_queries: " << e.test_episode.queries << '\n';
  out << "episodes: " << e.episodes << '\n';
  out << "lr: " << fmt(e.lr) << '\n';
  out << "lr_step: " << e.lr_step << '\n';
  out << "lr_gamma: " << fmt(e.lr_gamma) << '\n';
  out << "branching: " << e.hierarchy.branching << '\n';
  out << "depth: " << e.hierarchy.depth << '\n';
  out << "input_dim: " << e.hierarchy.input_dim << '\n';
  out << "hidden_dim: " << e.hidden_dim << '\n';
  out << "node_scale: " << fmt(e.hierarchy.node_scale) << '\n';
  out << "noise_scale: " << fmt(e.hierarchy.noise_scale) << '\n';
  out << "eval_episodes: " << e.eval_episodes << '\n';
  out << "seed: " << e.seed << '\n';
  out << "renormalize_prototypes: " << (e.prototypes.renormalize_sphere ? "true" : "false") << '\n';
  out << "prototype_gradients: " << (e.prototype_gradients ? "true" : "false") << '\n';
  out << "threads: " << e.threads << '\n';
  out << "output: " << config.output << '\n';
  return out.str();
}

std::vector<RunConfig> parse_compare_configs(std::string_view text) {
  std::vector<ConfigFields> docs;
  for (const auto doc : split_documents(text)) {
    ConfigFields f = parse_fields(doc);
    if (!f.empty()) docs.push_back(std::move(f));
  }
  if (docs.size() < 2) throw ConfigError("space", "compare needs at least two configuration documents");

  const ConfigFields& base = docs.front();
  std::vector<RunConfig> out;
  out.push_back(config_from_fields(base));
  for (std::size_t i = 1; i < docs.size(); ++i) {
    ConfigFields merged = docs[i];
    for (const auto& [key, value] : base) {
      bool space_key = false;
      for (const char* s : kSpaceKeys) space_key = space_key || key == s;
      if (!space_key) merged.emplace(key, value);
    }
    out.push_back(config_from_fields(merged));
  }

  // Compare the resolved values so defaults and explicit keys agree.
  const auto& first = out.front().experiment;
  for (std::size_t i = 1; i < out.size(); ++i) {
    const auto& e = out[i].experiment;
    const std::array<bool, kSharedDataKeys.size()> same = {
        e.seed == first.seed,
        e.hierarchy.branching == first.hierarchy.branching,
        e.hierarchy.depth == first.hierarchy.depth,
        e.hierarchy.input_dim == first.hierarchy.input_dim,
        e.hierarchy.node_scale == first.hierarchy.node_scale,
        e.hierarchy.noise_scale == first.hierarchy.noise_scale,
        e.test_episode.way == first.test_episode.way,
        e.test_episode.shot == first.test_episode.shot,
        e.test_episode.queries == first.test_episode.queries,
        e.eval_episodes == first.eval_episodes,
    };
    for (std::size_t j = 0; j < same.size(); ++j) {
      if (!same[j]) {
        throw ConfigError(kSharedDataKeys[j], "document " + std::to_string(i + 1) +
                                                  " does not match the data settings of the first document");
      }
    }
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return buf.str();
}

}  // namespace hyperproto

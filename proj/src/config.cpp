#include "sogclr/config.hpp"

#include <functional>

#include "sogclr/errors.hpp"
#include "sogclr/text_io.hpp"

namespace sogclr {

const char* to_string(OptimizerKind k) noexcept {
  switch (k) {
    case OptimizerKind::simclr: return "simclr";
    case OptimizerKind::simclr_momentum: return "simclr_momentum";
    case OptimizerKind::sogclr: return "sogclr";
    case OptimizerKind::sogclr_adam: return "sogclr_adam";
    case OptimizerKind::bimodal_sogclr: return "bimodal_sogclr";
  }
  return "?";
}

const char* to_string(Schedule s) noexcept { return s == Schedule::constant ? "constant" : "cosine"; }
const char* to_string(MetricsFormat f) noexcept { return f == MetricsFormat::csv ? "csv" : "jsonl"; }
const char* to_string(SamplingMode m) noexcept {
  return m == SamplingMode::epoch_shuffle ? "epoch_shuffle" : "with_replacement";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  for (auto k : {OptimizerKind::simclr, OptimizerKind::simclr_momentum, OptimizerKind::sogclr,
                 OptimizerKind::sogclr_adam, OptimizerKind::bimodal_sogclr}) {
    if (name == to_string(k)) return k;
  }
  fail(ErrorKind::config, "unknown optimizer kind '" + name + "'");
}

Schedule parse_schedule(const std::string& name) {
  if (name == "constant") return Schedule::constant;
  if (name == "cosine") return Schedule::cosine;
  fail(ErrorKind::config, "unknown schedule '" + name + "'");
}

MetricsFormat parse_metrics_format(const std::string& name) {
  if (name == "csv") return MetricsFormat::csv;
  if (name == "jsonl") return MetricsFormat::jsonl;
  fail(ErrorKind::config, "unknown metrics format '" + name + "'");
}

SamplingMode parse_sampling_mode(const std::string& name) {
  if (name == "epoch_shuffle") return SamplingMode::epoch_shuffle;
  if (name == "with_replacement") return SamplingMode::with_replacement;
  fail(ErrorKind::config, "unknown sampling mode '" + name + "'");
}

namespace {

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::size_t as_size(const std::string& key, const std::string& v) {
  long long x = 0;
  try {
    x = text::parse_int(v);
  } catch (const Error&) {
    fail(ErrorKind::config, key + ": expected a non-negative integer, got '" + v + "'");
  }
  if (x < 0) fail(ErrorKind::config, key + ": expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

double as_real(const std::string& key, const std::string& v) {
  try {
    return text::parse_double(v);
  } catch (const Error&) {
    fail(ErrorKind::config, key + ": expected a real number, got '" + v + "'");
  }
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  fail(ErrorKind::config, key + ": expected true or false, got '" + v + "'");
}

template <class F>
auto as_enum(const std::string& key, const std::string& v, F parse) {
  try {
    return parse(v);
  } catch (const Error& e) {
    fail(ErrorKind::config, key + ": " + e.what());
  }
}

std::string num(double x) { return text::format_double(x); }
std::string num(std::size_t x) { return std::to_string(x); }
std::string num(std::uint64_t x, int) { return std::to_string(x); }

#define SIZE_FIELD(KEY, MEMBER) \
  Field { KEY, [](const RunConfig& c) { return num(c.MEMBER); }, [](RunConfig& c, const std::string& v) { c.MEMBER = as_size(KEY, v); } }
#define SEED_FIELD(KEY, MEMBER) \
  Field { KEY, [](const RunConfig& c) { return num(c.MEMBER, 0); }, [](RunConfig& c, const std::string& v) { c.MEMBER = as_size(KEY, v); } }
#define REAL_FIELD(KEY, MEMBER) \
  Field { KEY, [](const RunConfig& c) { return num(c.MEMBER); }, [](RunConfig& c, const std::string& v) { c.MEMBER = as_real(KEY, v); } }
#define TEXT_FIELD(KEY, MEMBER) \
  Field { KEY, [](const RunConfig& c) { return c.MEMBER; }, [](RunConfig& c, const std::string& v) { c.MEMBER = v; } }
#define ENUM_FIELD(KEY, MEMBER, PARSE)                                                                \
  Field {                                                                                             \
    KEY, [](const RunConfig& c) { return std::string(to_string(c.MEMBER)); },                         \
        [](RunConfig& c, const std::string& v) { c.MEMBER = as_enum(KEY, v, [](const std::string& s) { return PARSE(s); }); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SIZE_FIELD("dataset.n", dataset.n),
      SIZE_FIELD("dataset.input_dim", dataset.input_dim),
      SIZE_FIELD("dataset.text_dim", dataset.text_dim),
      SIZE_FIELD("dataset.clusters", dataset.clusters),
      REAL_FIELD("dataset.separation", dataset.separation),
      SEED_FIELD("dataset.seed", dataset.seed),
      TEXT_FIELD("dataset.path", dataset.path),
      Field{"dataset.labelled", [](const RunConfig& c) { return std::string(c.dataset.labelled ? "true" : "false"); },
            [](RunConfig& c, const std::string& v) { c.dataset.labelled = as_bool("dataset.labelled", v); }},
      SIZE_FIELD("augment.count", augment.count),
      REAL_FIELD("augment.scale", augment.scale),
      SEED_FIELD("augment.seed", augment.seed),
      ENUM_FIELD("encoder.arch", encoder.arch, parse_architecture),
      SIZE_FIELD("encoder.hidden_dim", encoder.hidden_dim),
      SIZE_FIELD("encoder.embed_dim", encoder.embed_dim),
      REAL_FIELD("encoder.init_scale", encoder.init_scale),
      SEED_FIELD("encoder.seed", encoder.seed),
      REAL_FIELD("objective.tau", objective.tau),
      REAL_FIELD("objective.eps0", objective.eps0),
      ENUM_FIELD("objective.version", objective.version, parse_objective_version),
      ENUM_FIELD("optimizer.kind", optimizer.kind, parse_optimizer_kind),
      REAL_FIELD("optimizer.eta", optimizer.eta),
      REAL_FIELD("optimizer.beta", optimizer.beta),
      REAL_FIELD("optimizer.gamma", optimizer.gamma),
      SIZE_FIELD("optimizer.batch_size", optimizer.batch_size),
      SIZE_FIELD("optimizer.steps", optimizer.steps),
      ENUM_FIELD("optimizer.sampling", optimizer.sampling, parse_sampling_mode),
      ENUM_FIELD("optimizer.u_lag", optimizer.u_lag, parse_u_lag),
      ENUM_FIELD("optimizer.schedule", optimizer.schedule, parse_schedule),
      REAL_FIELD("optimizer.eta_min", optimizer.eta_min),
      SEED_FIELD("optimizer.seed", optimizer.seed),
      SIZE_FIELD("metrics.cadence", metrics.cadence),
      Field{"metrics.oracle", [](const RunConfig& c) { return std::string(c.metrics.oracle ? "true" : "false"); },
            [](RunConfig& c, const std::string& v) { c.metrics.oracle = as_bool("metrics.oracle", v); }},
      TEXT_FIELD("metrics.path", metrics.path),
      ENUM_FIELD("metrics.format", metrics.format, parse_metrics_format),
      Field{"metrics.wall_clock", [](const RunConfig& c) { return std::string(c.metrics.wall_clock ? "true" : "false"); },
            [](RunConfig& c, const std::string& v) { c.metrics.wall_clock = as_bool("metrics.wall_clock", v); }},
      TEXT_FIELD("checkpoint.encoder", checkpoint.encoder),
      TEXT_FIELD("checkpoint.state", checkpoint.state),
  };
  return table;
}

#undef SIZE_FIELD
#undef SEED_FIELD
#undef REAL_FIELD
#undef TEXT_FIELD
#undef ENUM_FIELD

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) fail(ErrorKind::config, std::string(key) + ": " + what);
}

}  // namespace

void RunConfig::validate() const {
  const bool paired = optimizer.kind == OptimizerKind::bimodal_sogclr;
  require(dataset.n >= 2, "dataset.n", "must be >= 2");
  require(dataset.input_dim >= 1, "dataset.input_dim", "must be >= 1");
  require(!paired || dataset.text_dim >= 1, "dataset.text_dim", "must be >= 1");
  require(dataset.clusters >= 1, "dataset.clusters", "must be >= 1");
  require(dataset.n >= dataset.clusters, "dataset.clusters", "must not exceed dataset.n");
  require(dataset.separation >= 0.0, "dataset.separation", "must be >= 0");
  require(augment.count >= 1, "augment.count", "must be >= 1");
  require(augment.scale >= 0.0, "augment.scale", "must be >= 0");
  require(encoder.embed_dim >= 2, "encoder.embed_dim", "must be >= 2");
  require(encoder.arch == Architecture::linear || encoder.hidden_dim >= 1, "encoder.hidden_dim", "must be >= 1");
  require(encoder.init_scale > 0.0, "encoder.init_scale", "must be > 0");
  require(objective.tau > 0.0, "objective.tau", "must be > 0");
  require(objective.eps0 >= 0.0, "objective.eps0", "must be >= 0");
  require(optimizer.eta >= 0.0, "optimizer.eta", "must be >= 0");
  require(optimizer.beta > 0.0 && optimizer.beta <= 1.0, "optimizer.beta", "must lie in (0, 1]");
  require(optimizer.gamma >= 0.0 && optimizer.gamma <= 1.0, "optimizer.gamma", "must lie in [0, 1]");
  require(optimizer.batch_size >= 2, "optimizer.batch_size", "must be >= 2");
  require(optimizer.sampling == SamplingMode::with_replacement || optimizer.batch_size <= dataset.n,
          "optimizer.batch_size", "must not exceed dataset.n under epoch_shuffle");
  require(optimizer.steps >= 1, "optimizer.steps", "must be >= 1");
  require(optimizer.eta_min >= 0.0 && optimizer.eta_min <= optimizer.eta, "optimizer.eta_min",
          "must lie in [0, optimizer.eta]");
  require(metrics.cadence >= 1, "metrics.cadence", "must be >= 1");
  require(checkpoint.state.empty() || optimizer.kind == OptimizerKind::sogclr ||
              optimizer.kind == OptimizerKind::sogclr_adam,
          "checkpoint.state", "only sogclr and sogclr_adam keep a checkpointable state");
}

ConfigMap parse_config_text(std::string_view body, std::string_view origin) {
  ConfigMap map;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    const auto end = std::min(body.find('\n', pos), body.size());
    std::string_view line = body.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) fail(ErrorKind::config, where + ": expected 'key = value'");
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string value(text::trim(line.substr(eq + 1)));
    if (key.empty()) fail(ErrorKind::config, where + ": empty key");
    if (!map.emplace(key, value).second) fail(ErrorKind::config, where + ": duplicate key '" + key + "'");
  }
  return map;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::string body;
  for (const auto& line : text::read_lines(path)) {
    body += line;
    body += '\n';
  }
  return parse_config_text(body, path.string());
}

void apply_override(ConfigMap& map, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    fail(ErrorKind::config, "override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(text::trim(assignment.substr(0, eq)));
  if (key.empty()) fail(ErrorKind::config, "override '" + std::string(assignment) + "' has an empty key");
  map[key] = std::string(text::trim(assignment.substr(eq + 1)));
}

RunConfig run_config_from_map(const ConfigMap& map) {
  RunConfig cfg;
  for (const auto& [key, value] : map) {
    bool known = false;
    for (const auto& f : fields()) {
      if (key == f.key) {
        f.set(cfg, value);
        known = true;
        break;
      }
    }
    if (!known) fail(ErrorKind::config, "unknown key '" + key + "'");
  }
  if (!map.contains("objective.tau") && cfg.optimizer.kind == OptimizerKind::bimodal_sogclr) cfg.objective.tau = 0.07;
  cfg.validate();
  return cfg;
}

ConfigMap to_map(const RunConfig& cfg) {
  ConfigMap map;
  for (const auto& f : fields()) map.emplace(f.key, f.get(cfg));
  return map;
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  ConfigMap map = read_config_file(path);
  for (const auto& o : overrides) apply_override(map, o);
  return run_config_from_map(map);
}

}  // namespace sogclr

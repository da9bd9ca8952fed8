#include "volt/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "volt/data_synth.hpp"
#include "volt/error.hpp"

namespace volt {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key));
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  int base = 10;
  if (v.starts_with("0x") || v.starts_with("0X")) {
    v.remove_prefix(2);
    base = 16;
  }
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v);
  return out;
}

std::size_t parse_size(std::string_view key, std::string_view v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(std::string(v), &used);
    if (used != v.size()) bad_value(key, v);
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

int parse_int(std::string_view key, std::string_view v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(std::string_view key, std::string_view v, Parse parse) {
  std::vector<T> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const std::size_t comma = v.find(',', pos);
    const std::string item = trim(v.substr(pos, comma == std::string_view::npos ? v.size() - pos
                                                                               : comma - pos));
    if (item.empty()) bad_value(key, v);
    out.push_back(parse(key, item));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) out += fmt_double(xs[i]);
    else out += std::to_string(xs[i]);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define VOLT_SIZE_FIELD(name, member)                                                       \
  Field{name, [](RunConfig& c, std::string_view v) { c.member = parse_size(name, v); },     \
        [](const RunConfig& c) { return std::to_string(c.member); }}
#define VOLT_U64_FIELD(name, member)                                                        \
  Field{name, [](RunConfig& c, std::string_view v) { c.member = parse_u64(name, v); },      \
        [](const RunConfig& c) { return std::to_string(c.member); }}
#define VOLT_DOUBLE_FIELD(name, member)                                                     \
  Field{name, [](RunConfig& c, std::string_view v) { c.member = parse_double(name, v); },   \
        [](const RunConfig& c) { return fmt_double(c.member); }}
#define VOLT_STRING_FIELD(name, member)                                                     \
  Field{name, [](RunConfig& c, std::string_view v) { c.member = std::string(v); },          \
        [](const RunConfig& c) { return c.member; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"variant",
            [](RunConfig& c, std::string_view v) {
              if (v == "evolt") c.model.enhance = true;
              else if (v == "volt") c.model.enhance = false;
              else bad_value("variant", v);
            },
            [](const RunConfig& c) { return c.variant(); }},
      VOLT_SIZE_FIELD("d", model.d),
      VOLT_SIZE_FIELD("heads", model.heads),
      VOLT_SIZE_FIELD("d_k", model.d_k),
      VOLT_SIZE_FIELD("ffn_hidden", model.ffn_hidden),
      VOLT_SIZE_FIELD("l_enc", model.l_enc),
      VOLT_SIZE_FIELD("l_dec", model.l_dec),
      VOLT_SIZE_FIELD("g", model.g),
      VOLT_SIZE_FIELD("s", model.s),
      VOLT_SIZE_FIELD("m_max", model.m_max),
      VOLT_DOUBLE_FIELD("lr", lr),
      VOLT_DOUBLE_FIELD("weight_decay", weight_decay),
      VOLT_DOUBLE_FIELD("beta1", beta1),
      VOLT_DOUBLE_FIELD("beta2", beta2),
      VOLT_DOUBLE_FIELD("adam_eps", adam_eps),
      VOLT_SIZE_FIELD("batch_size", batch_size),
      VOLT_SIZE_FIELD("steps", steps),
      VOLT_SIZE_FIELD("warmup", warmup),
      VOLT_SIZE_FIELD("train_views", train_views),
      VOLT_STRING_FIELD("train_split", train_split),
      VOLT_U64_FIELD("seed", seed),
      VOLT_SIZE_FIELD("objects", objects),
      VOLT_SIZE_FIELD("views", views),
      VOLT_SIZE_FIELD("image_size", image_size),
      VOLT_U64_FIELD("embedder_seed", embedder_seed),
      VOLT_U64_FIELD("data_fingerprint", data_fingerprint),
      Field{"eval_views",
            [](RunConfig& c, std::string_view v) {
              c.eval_views = parse_list<std::size_t>("eval_views", v, parse_size);
            },
            [](const RunConfig& c) { return join(c.eval_views); }},
      Field{"thresholds",
            [](RunConfig& c, std::string_view v) {
              c.thresholds = parse_list<double>("thresholds", v, parse_double);
            },
            [](const RunConfig& c) { return join(c.thresholds); }},
      VOLT_STRING_FIELD("split", split),
      VOLT_SIZE_FIELD("diag_objects", diag_objects),
      VOLT_SIZE_FIELD("diag_views", diag_views),
      VOLT_SIZE_FIELD("diag_export", diag_export),
      Field{"diag_head", [](RunConfig& c, std::string_view v) { c.diag_head = parse_int("diag_head", v); },
            [](const RunConfig& c) { return std::to_string(c.diag_head); }},
      VOLT_U64_FIELD("shuffle_views", shuffle_views),
      VOLT_STRING_FIELD("data", data),
      VOLT_STRING_FIELD("out", out),
      VOLT_STRING_FIELD("checkpoint", checkpoint),
      VOLT_STRING_FIELD("preset", preset),
  };
  return table;
}

#undef VOLT_SIZE_FIELD
#undef VOLT_U64_FIELD
#undef VOLT_DOUBLE_FIELD
#undef VOLT_STRING_FIELD

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  if (key == "preset") {
    apply_preset(v);
    return;
  }
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(*this, v);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::vector<std::string> RunConfig::presets() {
  return {"desk", "overfit8", "divergence", "full", "micro"};
}

void RunConfig::apply_preset(std::string_view name) {
  if (name.empty()) return;
  if (name == "desk") {
    // built-in defaults
  } else if (name == "overfit8") {
    objects = 8;
    views = 8;
    model.g = 16;
    model.s = 4;
    steps = 500;
    lr = 1e-3;
    batch_size = 8;
    seed = 1;
    train_split = "all";
    split = "all";
  } else if (name == "divergence") {
    objects = 64;
    views = 24;
    steps = 2000;
    lr = 1e-3;
  } else if (name == "full") {
    model.g = 32;
    model.s = 4;
    batch_size = 64;
    views = 24;
  } else if (name == "micro") {
    model.d = 8;
    model.heads = 2;
    model.d_k = 4;
    model.ffn_hidden = 16;
    model.l_enc = 2;
    model.l_dec = 2;
    model.g = 4;
    model.s = 2;
    model.m_max = 2;
    views = 2;
    objects = 4;
    image_size = 4;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  preset = std::string(name);
}

void RunConfig::validate() const {
  model.validate();
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("beta1 and beta2 must lie in [0, 1)");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (views < 1 || views > 24) throw ConfigError("views must be in [1, 24]");
  if (objects < 2) throw ConfigError("objects must be >= 2");
  if (train_views > model.m_max) throw ConfigError("train_views exceeds m_max");
  if (split != "train" && split != "val" && split != "all") {
    throw ConfigError("split must be train, val or all");
  }
  if (train_split != "train" && train_split != "all") {
    throw ConfigError("train_split must be train or all");
  }
  if (diag_head >= static_cast<int>(model.heads)) throw ConfigError("diag_head out of range");
  for (double t : thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("thresholds must lie in (0, 1)");
  }
  if (thresholds.empty()) throw ConfigError("thresholds must not be empty");
  for (std::size_t v : eval_views) {
    if (v == 0) throw ConfigError("eval_views entries must be positive");
  }
}

std::string RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? out + "/checkpoint.vltc" : checkpoint;
}

AdamWConfig RunConfig::optimizer() const {
  return AdamWConfig{lr, beta1, beta2, adam_eps, weight_decay};
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

RunConfig RunConfig::from_text(std::string_view text) {
  RunConfig c;
  for (const auto& [k, v] : parse_config_text(text)) {
    if (k == "preset") c.preset = v;  // values already carry the preset's effect
    else c.set(k, v);
  }
  return c;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.emplace_back(f.key);
  return out;
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    out[trim(std::string_view(line).substr(0, eq))] = trim(std::string_view(line).substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace volt

#include "ocam/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ocam/error.hpp"
#include "ocam/rng.hpp"

namespace ocam {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v))
    throw UsageError("config: " + key + ": not a number: '" + value + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  if (value.empty() || value[0] == '-')
    throw UsageError("config: " + key + ": not a nonnegative integer: '" +
                     value + "'");
  const char* begin = value.c_str();
  char* end = nullptr;
  const unsigned long long v = std::strtoull(begin, &end, 10);
  if (end == begin || *end != '\0')
    throw UsageError("config: " + key + ": not a nonnegative integer: '" +
                     value + "'");
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("config: " + key + ": not a boolean: '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string cur;
  for (const char c : value) {
    if (c == ',') {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cur = trim(cur);
  if (!cur.empty() || !items.empty()) items.push_back(cur);
  return items;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

ConfigMap default_config() {
  return {
      {"data.path", ""},
      {"eval.map_mode", "standard"},
      {"eval.spaces", "euclidean,hamming"},
      {"eval.threads", "1"},
      {"eval.z", "5,20,50"},
      {"loss.alpha", "auto"},
      {"loss.anchor_scale", "3"},
      {"loss.beta1", "0.83"},
      {"loss.beta2", "0.64"},
      {"loss.delta", "0.1"},
      {"loss.gamma", "0.01"},
      {"loss.kappa", "0.01"},
      {"loss.kind", "ocam"},
      {"loss.metric", "cosine"},
      {"loss.prob_floor", "1e-12"},
      {"loss.sigma1", "2.04"},
      {"loss.sigma2", "1.71"},
      {"model.activation", "relu"},
      {"model.dropout", "0"},
      {"model.embedding_dim", "16"},
      {"model.hidden", "32"},
      {"out.dir", "out"},
      {"seed", "42"},
      {"split.stratified", "true"},
      {"split.train_fraction", "0.85"},
      {"synth.classes", "8"},
      {"synth.dim", "32"},
      {"synth.per_class", "120"},
      {"synth.sigma", "1"},
      {"synth.spacing", "6"},
      {"train.adam_beta1", "0.9"},
      {"train.adam_beta2", "0.999"},
      {"train.adam_epsilon", "1e-08"},
      {"train.batch_size", "20"},
      {"train.deterministic", "true"},
      {"train.learning_rate", "0.001"},
      {"train.steps", "1500"},
      {"train.triep_classes", "4"},
      {"train.triep_per_class", "5"},
  };
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) +
                       ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw UsageError("config line " + std::to_string(line_no) +
                       ": empty key");
    cfg[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_overrides(ConfigMap& cfg,
                     const std::vector<std::string>& assignments) {
  for (const std::string& a : assignments) {
    const std::size_t eq = a.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("override must be key=value, got '" + a + "'");
    cfg[trim(a.substr(0, eq))] = trim(a.substr(eq + 1));
  }
}

ResolvedConfig resolve_config(const ConfigMap& user) {
  ConfigMap merged = default_config();
  for (const auto& [k, v] : user) {
    if (merged.find(k) == merged.end())
      throw UsageError("config: unknown key '" + k + "'");
    merged[k] = v;
  }

  ResolvedConfig rc;
  rc.seed = parse_u64("seed", merged.at("seed"));
  rc.data_path = merged.at("data.path");
  rc.out_dir = merged.at("out.dir");

  rc.synth.classes = parse_size("synth.classes", merged.at("synth.classes"));
  rc.synth.per_class =
      parse_size("synth.per_class", merged.at("synth.per_class"));
  rc.synth.dim = parse_size("synth.dim", merged.at("synth.dim"));
  rc.synth.spacing = parse_double("synth.spacing", merged.at("synth.spacing"));
  rc.synth.sigma = parse_double("synth.sigma", merged.at("synth.sigma"));
  if (rc.synth.classes < 2)
    throw UsageError("config: synth.classes must be >= 2");
  if (rc.synth.per_class < 2)
    throw UsageError("config: synth.per_class must be >= 2");
  if (rc.synth.dim == 0) throw UsageError("config: synth.dim must be >= 1");
  if (rc.synth.classes > 2 * rc.synth.dim)
    throw UsageError("config: synth.classes must be <= 2 * synth.dim");
  if (!(rc.synth.sigma > 0.0))
    throw UsageError("config: synth.sigma must be > 0");
  if (!(rc.synth.spacing >= 0.0))
    throw UsageError("config: synth.spacing must be >= 0");

  rc.split.train_fraction =
      parse_double("split.train_fraction", merged.at("split.train_fraction"));
  rc.split.stratified =
      parse_bool("split.stratified", merged.at("split.stratified"));
  rc.split.seed = rc.seed;
  if (!(rc.split.train_fraction > 0.0) || !(rc.split.train_fraction < 1.0))
    throw UsageError("config: split.train_fraction must be in (0, 1)");

  LossSpec loss;
  loss.kind = loss_kind_from_string(merged.at("loss.kind"));
  loss.metric = metric_from_string(merged.at("loss.metric"));
  const std::string alpha = merged.at("loss.alpha");
  loss.alpha = alpha == "auto" ? default_alpha(loss.kind)
                               : parse_double("loss.alpha", alpha);
  loss.sigma1 = parse_double("loss.sigma1", merged.at("loss.sigma1"));
  loss.sigma2 = parse_double("loss.sigma2", merged.at("loss.sigma2"));
  loss.beta1 = parse_double("loss.beta1", merged.at("loss.beta1"));
  loss.beta2 = parse_double("loss.beta2", merged.at("loss.beta2"));
  loss.anchor_scale =
      parse_double("loss.anchor_scale", merged.at("loss.anchor_scale"));
  loss.delta = parse_double("loss.delta", merged.at("loss.delta"));
  loss.kappa = parse_double("loss.kappa", merged.at("loss.kappa"));
  loss.gamma = parse_double("loss.gamma", merged.at("loss.gamma"));
  loss.prob_floor =
      parse_double("loss.prob_floor", merged.at("loss.prob_floor"));
  merged["loss.alpha"] = format_double(loss.alpha);

  rc.train.loss = loss;
  const std::vector<std::string> hidden_items =
      split_list(merged.at("model.hidden"));
  rc.train.hidden.clear();
  for (const std::string& h : hidden_items) {
    if (h.empty())
      throw UsageError("config: model.hidden has an empty entry");
    rc.train.hidden.push_back(parse_size("model.hidden", h));
  }
  rc.train.embedding_dim =
      parse_size("model.embedding_dim", merged.at("model.embedding_dim"));
  rc.train.activation =
      activation_from_string(merged.at("model.activation"));
  rc.train.dropout_rate =
      parse_double("model.dropout", merged.at("model.dropout"));
  rc.train.steps = parse_size("train.steps", merged.at("train.steps"));
  rc.train.batch_size =
      parse_size("train.batch_size", merged.at("train.batch_size"));
  rc.train.learning_rate =
      parse_double("train.learning_rate", merged.at("train.learning_rate"));
  rc.train.adam_beta1 =
      parse_double("train.adam_beta1", merged.at("train.adam_beta1"));
  rc.train.adam_beta2 =
      parse_double("train.adam_beta2", merged.at("train.adam_beta2"));
  rc.train.adam_epsilon =
      parse_double("train.adam_epsilon", merged.at("train.adam_epsilon"));
  rc.train.deterministic =
      parse_bool("train.deterministic", merged.at("train.deterministic"));
  rc.train.triep_classes =
      parse_size("train.triep_classes", merged.at("train.triep_classes"));
  rc.train.triep_per_class =
      parse_size("train.triep_per_class", merged.at("train.triep_per_class"));
  rc.train.seed = rc.seed;
  validate(rc.train);

  rc.eval.zs.clear();
  for (const std::string& z : split_list(merged.at("eval.z"))) {
    if (z.empty()) throw UsageError("config: eval.z has an empty entry");
    rc.eval.zs.push_back(parse_size("eval.z", z));
  }
  rc.eval.spaces.clear();
  for (const std::string& s : split_list(merged.at("eval.spaces"))) {
    if (s.empty()) throw UsageError("config: eval.spaces has an empty entry");
    rc.eval.spaces.push_back(space_from_string(s));
  }
  rc.eval.threads = parse_size("eval.threads", merged.at("eval.threads"));
  rc.map_mode = map_mode_from_string(merged.at("eval.map_mode"));
  validate(rc.eval);

  rc.canonical = std::move(merged);
  rc.hash = config_hash(rc.canonical);
  return rc;
}

std::string dump_config(const ConfigMap& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t config_hash(const ConfigMap& canonical) {
  return fnv1a64(dump_config(canonical));
}

}  // namespace ocam

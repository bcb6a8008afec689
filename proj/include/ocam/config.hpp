#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ocam/corpus.hpp"
#include "ocam/eval.hpp"
#include "ocam/trainer.hpp"

namespace ocam {

// Key=value text form. std::map keeps dumps sorted and stable.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap default_config();

// Parses "key = value" lines; '#' starts a comment; blank lines are
// skipped; a repeated key keeps the last assignment.
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);

// Applies "key=value" strings (CLI overrides) onto cfg.
void apply_overrides(ConfigMap& cfg,
                     const std::vector<std::string>& assignments);

// Typed view of a fully validated configuration. `canonical` is the
// complete sorted key set with loss.alpha=auto replaced by the kind's
// default, and `hash` fingerprints that canonical text.
struct ResolvedConfig {
  std::uint64_t seed = 42;
  std::string data_path;
  std::string out_dir = "out";
  SynthSpec synth;
  SplitSpec split;
  TrainConfig train;
  EvalOptions eval;
  MapMode map_mode = MapMode::standard;
  ConfigMap canonical;
  std::uint64_t hash = 0;
};

// Overlays user keys on the defaults, rejects unknown keys and
// out-of-domain values, and resolves auto fields. Throws UsageError with
// the offending key in the message.
ResolvedConfig resolve_config(const ConfigMap& user);

std::string dump_config(const ConfigMap& cfg);
std::uint64_t config_hash(const ConfigMap& canonical);

}  // namespace ocam

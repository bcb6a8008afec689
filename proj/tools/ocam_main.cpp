// Command-line front end: corpus -> training -> indexing -> querying ->
// evaluation. All engine work goes through the C API in ocam.h; this
// file only parses arguments, moves bytes and formats output.
//
// Exit codes: 0 success, 2 usage/config error, 3 runtime error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ocam.h"

namespace {

using ojson = nlohmann::ordered_json;

struct CliError {
  int code;
  std::string message;
};

void check(ocam_status st) {
  if (st != OCAM_OK)
    throw CliError{static_cast<int>(st), ocam_last_error()};
}

struct OwnedStr {
  char* p = nullptr;
  ~OwnedStr() { ocam_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct DatasetDeleter {
  void operator()(ocam_dataset* d) const { ocam_dataset_free(d); }
};
struct ModelDeleter {
  void operator()(ocam_model* m) const { ocam_model_free(m); }
};
struct IndexDeleter {
  void operator()(ocam_index* i) const { ocam_index_free(i); }
};
using DatasetPtr = std::unique_ptr<ocam_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<ocam_model, ModelDeleter>;
using IndexPtr = std::unique_ptr<ocam_index, IndexDeleter>;

// Options shared by every data-touching subcommand. Dedicated flags are
// appended after --set assignments so flags win.
struct CommonOpts {
  std::string config_file;
  std::vector<std::string> sets;
  std::string seed;
  std::string out_dir;
  std::string threads;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_file,
                  "Key=value config file (see `ocam config --dump-defaults`)");
  cmd->add_option("--set", o.sets, "Override a config key, e.g. --set seed=7");
  cmd->add_option("--seed", o.seed, "Shortcut for --set seed=N");
  cmd->add_option("--out", o.out_dir, "Shortcut for --set out.dir=DIR");
  cmd->add_option("--threads", o.threads,
                  "Shortcut for --set eval.threads=N (evaluation only)");
  cmd->add_flag("--deterministic", o.deterministic,
                "Shortcut for --set train.deterministic=true");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{2, path + ": cannot open"};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError{3, path + ": cannot open for writing"};
  out << content;
  if (!out) throw CliError{3, path + ": write failed"};
}

std::string build_config_text(const CommonOpts& o,
                              const std::vector<std::string>& extra = {}) {
  std::string text;
  if (!o.config_file.empty()) {
    text += read_file(o.config_file);
    text += '\n';
  }
  for (const std::string& s : o.sets) {
    text += s;
    text += '\n';
  }
  for (const std::string& s : extra) {
    text += s;
    text += '\n';
  }
  if (!o.seed.empty()) text += "seed=" + o.seed + "\n";
  if (!o.out_dir.empty()) text += "out.dir=" + o.out_dir + "\n";
  if (!o.threads.empty()) text += "eval.threads=" + o.threads + "\n";
  if (o.deterministic) text += "train.deterministic=true\n";
  return text;
}

std::string resolve_config(const std::string& text) {
  OwnedStr canonical;
  check(ocam_config_resolve(text.c_str(), &canonical.p));
  return canonical.str();
}

std::string get_key(const std::string& canonical, const std::string& key) {
  std::istringstream in(canonical);
  std::string line;
  const std::string prefix = key + "=";
  while (std::getline(in, line))
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  throw CliError{3, "resolved config misses key '" + key + "'"};
}

ojson config_as_json(const std::string& canonical) {
  ojson out = ojson::object();
  std::istringstream in(canonical);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t eq = line.find('=');
    if (eq != std::string::npos)
      out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

std::string out_path(const std::string& out_dir, const std::string& name) {
  std::filesystem::create_directories(out_dir);
  return (std::filesystem::path(out_dir) / name).string();
}

DatasetPtr load_or_synth(const std::string& text, const std::string& canonical,
                         bool synth) {
  ocam_dataset* ds = nullptr;
  if (synth) {
    check(ocam_dataset_synth(text.c_str(), &ds));
  } else {
    const std::string path = get_key(canonical, "data.path");
    if (path.empty())
      throw CliError{2,
                     "no input data: pass --data FILE, set data.path, or use "
                     "--synth"};
    check(ocam_dataset_load_csv(path.c_str(), &ds));
  }
  return DatasetPtr(ds);
}

std::string dataset_summary(const ocam_dataset* ds) {
  OwnedStr info;
  check(ocam_dataset_info(ds, &info.p));
  const ojson j = ojson::parse(info.str());
  std::ostringstream out;
  out << j["rows"].get<std::size_t>() << " rows, "
      << j["classes"].get<std::size_t>() << " classes, dim "
      << j["dim"].get<std::size_t>();
  return out.str();
}

// ---- subcommand bodies --------------------------------------------------

int run_config(const CommonOpts& common, bool dump_defaults) {
  if (dump_defaults) {
    OwnedStr text;
    check(ocam_config_defaults(&text.p));
    std::cout << text.str();
    return 0;
  }
  std::cout << resolve_config(build_config_text(common));
  return 0;
}

int run_synth(const CommonOpts& common, const std::string& out_file) {
  const std::string text = build_config_text(common);
  const std::string canonical = resolve_config(text);
  const std::string path = out_file.empty()
                               ? out_path(get_key(canonical, "out.dir"),
                                          "synth.csv")
                               : out_file;
  ocam_dataset* raw = nullptr;
  check(ocam_dataset_synth(text.c_str(), &raw));
  DatasetPtr ds(raw);
  check(ocam_dataset_save_csv(ds.get(), path.c_str()));
  std::cout << "wrote " << path << " (" << dataset_summary(ds.get()) << ")\n";
  return 0;
}

int run_train(const CommonOpts& common, const std::string& data,
              bool synth, bool split, const std::string& model_out) {
  std::vector<std::string> extra;
  if (!data.empty()) extra.push_back("data.path=" + data);
  const std::string text = build_config_text(common, extra);
  const std::string canonical = resolve_config(text);
  const std::string out_dir = get_key(canonical, "out.dir");

  DatasetPtr ds = load_or_synth(text, canonical, synth);
  DatasetPtr train_side;
  if (split) {
    ocam_dataset* tr = nullptr;
    ocam_dataset* te = nullptr;
    check(ocam_dataset_split(ds.get(), text.c_str(), &tr, &te));
    train_side.reset(tr);
    DatasetPtr test_side(te);
    check(ocam_dataset_save_csv(train_side.get(),
                                out_path(out_dir, "train_split.csv").c_str()));
    check(ocam_dataset_save_csv(test_side.get(),
                                out_path(out_dir, "test_split.csv").c_str()));
  } else {
    train_side = std::move(ds);
  }

  ocam_model* raw_model = nullptr;
  OwnedStr history;
  check(ocam_train(train_side.get(), text.c_str(), &raw_model, &history.p));
  ModelPtr model(raw_model);

  const std::string model_path =
      model_out.empty() ? out_path(out_dir, "model.bin") : model_out;
  check(ocam_model_save(model.get(), model_path.c_str()));
  write_file(out_path(out_dir, "history.json"), history.str());
  write_file(out_path(out_dir, "resolved_config.txt"), canonical);

  const ojson h = ojson::parse(history.str());
  std::cout << "trained on " << dataset_summary(train_side.get()) << "; "
            << h.size() << " steps, final mean loss "
            << h.back().get<double>() << "\n";
  std::cout << "wrote " << model_path << "\n";
  return 0;
}

int run_evaluate(const CommonOpts& common, const std::string& model_path,
                 const std::string& data, const std::string& report_out) {
  std::vector<std::string> extra;
  if (!data.empty()) extra.push_back("data.path=" + data);
  const std::string text = build_config_text(common, extra);
  const std::string canonical = resolve_config(text);
  const std::string out_dir = get_key(canonical, "out.dir");

  ocam_model* raw_model = nullptr;
  check(ocam_model_load(model_path.c_str(), &raw_model));
  ModelPtr model(raw_model);
  DatasetPtr ds = load_or_synth(text, canonical, false);

  OwnedStr report;
  check(ocam_evaluate(model.get(), ds.get(), text.c_str(), &report.p));
  const std::string path =
      report_out.empty() ? out_path(out_dir, "report.json") : report_out;
  write_file(path, report.str());

  const ojson j = ojson::parse(report.str());
  for (const auto& [space, cells] : j["results"].items())
    for (const auto& [z, cell] : cells.items()) {
      std::cout << space << " z=" << z << ": P@Z=";
      if (cell["precision"]["macro"].is_null())
        std::cout << "n/a";
      else
        std::cout << cell["precision"]["macro"].get<double>();
      std::cout << " mAP=";
      if (cell["map_standard"]["macro"].is_null())
        std::cout << "n/a";
      else
        std::cout << cell["map_standard"]["macro"].get<double>();
      std::cout << "\n";
    }
  std::cout << "wrote " << path << "\n";
  return 0;
}

int run_query(const CommonOpts& common, const std::string& model_path,
              const std::string& data, std::size_t row, std::size_t z,
              const std::string& space, bool include_self) {
  std::vector<std::string> extra;
  if (!data.empty()) extra.push_back("data.path=" + data);
  const std::string text = build_config_text(common, extra);
  const std::string canonical = resolve_config(text);

  ocam_model* raw_model = nullptr;
  check(ocam_model_load(model_path.c_str(), &raw_model));
  ModelPtr model(raw_model);
  DatasetPtr ds = load_or_synth(text, canonical, false);

  std::size_t dim = 0;
  check(ocam_dataset_dim(ds.get(), &dim));
  std::vector<double> features(dim);
  std::int64_t id = 0;
  OwnedStr label;
  check(ocam_dataset_row(ds.get(), row, features.data(), dim, &id, &label.p));

  OwnedStr model_info;
  check(ocam_model_info(model.get(), &model_info.p));
  const std::size_t s =
      ojson::parse(model_info.str())["embedding_dim"].get<std::size_t>();
  std::vector<double> embedding(s);
  check(ocam_model_embed(model.get(), features.data(), dim, embedding.data(),
                         s));

  ocam_index* raw_index = nullptr;
  check(ocam_index_build(model.get(), ds.get(), &raw_index));
  IndexPtr index(raw_index);

  OwnedStr result;
  check(ocam_index_query(index.get(), embedding.data(), s, z, space.c_str(),
                         include_self ? 0 : 1, id, &result.p));

  OwnedStr info;
  check(ocam_dataset_info(ds.get(), &info.p));
  const std::vector<std::string> class_names =
      ojson::parse(info.str())["class_names"]
          .get<std::vector<std::string>>();

  const ojson res = ojson::parse(result.str());
  ojson items = ojson::array();
  for (std::size_t k = 0; k < res["ids"].size(); ++k) {
    const auto cls = res["labels"][k].get<std::size_t>();
    items.push_back({{"id", res["ids"][k]},
                     {"label", class_names.at(cls)},
                     {"distance", res["distances"][k]}});
  }
  const ojson out = {{"query", {{"row", row}, {"id", id}, {"label", label.str()}}},
                     {"space", res["space"]},
                     {"z", z},
                     {"exclude_self", !include_self},
                     {"results", items}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_ablate(const CommonOpts& common, const std::string& data, bool synth) {
  std::vector<std::string> extra;
  if (!data.empty()) extra.push_back("data.path=" + data);
  const std::string text = build_config_text(common, extra);
  const std::string canonical = resolve_config(text);
  const std::string out_dir = get_key(canonical, "out.dir");

  // Split once, persist both sides, then reload from the files so every
  // variant (and any later standalone run on the same files) consumes
  // bit-identical inputs.
  const std::string train_csv = out_path(out_dir, "train_split.csv");
  const std::string test_csv = out_path(out_dir, "test_split.csv");
  {
    DatasetPtr full = load_or_synth(text, canonical, synth);
    ocam_dataset* tr = nullptr;
    ocam_dataset* te = nullptr;
    check(ocam_dataset_split(full.get(), text.c_str(), &tr, &te));
    DatasetPtr train_side(tr), test_side(te);
    check(ocam_dataset_save_csv(train_side.get(), train_csv.c_str()));
    check(ocam_dataset_save_csv(test_side.get(), test_csv.c_str()));
  }
  ocam_dataset* tr_raw = nullptr;
  ocam_dataset* te_raw = nullptr;
  check(ocam_dataset_load_csv(train_csv.c_str(), &tr_raw));
  DatasetPtr train_side(tr_raw);
  check(ocam_dataset_load_csv(test_csv.c_str(), &te_raw));
  DatasetPtr test_side(te_raw);

  const std::vector<std::string> variants = {"ocam", "ocam-no-pn",
                                             "ocam-fixed-margin", "triplet"};
  ojson comparison;
  comparison["config"] = config_as_json(canonical);
  comparison["variants"] = ojson::object();

  struct Row {
    std::string variant, space;
    std::vector<double> precision, map_standard;
  };
  std::vector<Row> table_rows;
  std::vector<std::string> z_labels;

  for (const std::string& variant : variants) {
    const std::string vtext = text + "loss.kind=" + variant + "\n";
    ocam_model* raw_model = nullptr;
    check(ocam_train(train_side.get(), vtext.c_str(), &raw_model, nullptr));
    ModelPtr model(raw_model);
    check(ocam_model_save(
        model.get(), out_path(out_dir, "model_" + variant + ".bin").c_str()));

    OwnedStr report;
    check(ocam_evaluate(model.get(), test_side.get(), vtext.c_str(),
                        &report.p));
    write_file(out_path(out_dir, "report_" + variant + ".json"), report.str());

    const ojson j = ojson::parse(report.str());
    ojson per_variant = ojson::object();
    bool first_space = true;
    for (const auto& [space, cells] : j["results"].items()) {
      Row row{variant, space, {}, {}};
      ojson per_space = ojson::object();
      for (const auto& [z, cell] : cells.items()) {
        per_space[z] = {{"precision", cell["precision"]["macro"]},
                        {"map_standard", cell["map_standard"]["macro"]},
                        {"map_as_written", cell["map_as_written"]["macro"]}};
        row.precision.push_back(cell["precision"]["macro"].get<double>());
        row.map_standard.push_back(cell["map_standard"]["macro"].get<double>());
        if (variant == variants.front() && first_space) z_labels.push_back(z);
      }
      first_space = false;
      per_variant[space] = std::move(per_space);
      table_rows.push_back(std::move(row));
    }
    comparison["variants"][variant] = std::move(per_variant);
  }

  // Aligned text table, one block per metric.
  std::ostringstream txt;
  auto emit_block = [&](const std::string& title,
                        std::vector<double> Row::*field) {
    txt << title << "\n";
    txt << "  " << std::left << std::setw(20) << "variant" << std::setw(12)
        << "space";
    for (const std::string& z : z_labels)
      txt << std::right << std::setw(10) << ("Z=" + z);
    txt << "\n";
    for (const Row& row : table_rows) {
      txt << "  " << std::left << std::setw(20) << row.variant
          << std::setw(12) << row.space;
      char buf[32];
      for (const double v : row.*field) {
        std::snprintf(buf, sizeof buf, "%.4f", v);
        txt << std::right << std::setw(10) << buf;
      }
      txt << "\n";
    }
    txt << "\n";
  };
  emit_block("macro P@Z", &Row::precision);
  emit_block("macro mAP@Z (standard mode)", &Row::map_standard);

  write_file(out_path(out_dir, "ablation.json"),
             comparison.dump(2) + "\n");
  write_file(out_path(out_dir, "ablation.txt"), txt.str());
  std::cout << txt.str();
  std::cout << "wrote " << out_path(out_dir, "ablation.json") << " and "
            << out_path(out_dir, "ablation.txt") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metric-learning retrieval engine"};
  app.require_subcommand(1);

  CommonOpts config_opts;
  bool dump_defaults = false;
  CLI::App* cmd_config =
      app.add_subcommand("config", "Print resolved or default configuration");
  add_common(cmd_config, config_opts);
  cmd_config->add_flag("--dump-defaults", dump_defaults,
                       "Print the full default key set");

  CommonOpts synth_opts;
  std::string synth_out_file;
  CLI::App* cmd_synth =
      app.add_subcommand("synth", "Generate a synthetic clustered CSV");
  add_common(cmd_synth, synth_opts);
  cmd_synth->add_option("--out-file", synth_out_file,
                        "CSV path (default <out.dir>/synth.csv)");

  CommonOpts train_opts;
  std::string train_data, train_model_out;
  bool train_synth = false, train_split = false;
  CLI::App* cmd_train = app.add_subcommand(
      "train", "Fit an embedder; writes checkpoint and loss history");
  add_common(cmd_train, train_opts);
  cmd_train->add_option("--data", train_data, "Training CSV");
  cmd_train->add_flag("--synth", train_synth,
                      "Generate the dataset instead of loading one");
  cmd_train->add_flag(
      "--split", train_split,
      "Split first; train on the train side, write both sides as CSVs");
  cmd_train->add_option("--model-out", train_model_out,
                        "Checkpoint path (default <out.dir>/model.bin)");

  CommonOpts eval_opts;
  std::string eval_model, eval_data, eval_report;
  CLI::App* cmd_eval = app.add_subcommand(
      "evaluate", "Leave-one-query-out P@Z / mAP report for a checkpoint");
  add_common(cmd_eval, eval_opts);
  cmd_eval->add_option("--model", eval_model, "Model checkpoint")->required();
  cmd_eval->add_option("--data", eval_data, "Test CSV");
  cmd_eval->add_option("--report", eval_report,
                       "Report path (default <out.dir>/report.json)");

  CommonOpts query_opts;
  std::string query_model, query_data, query_space = "euclidean";
  std::size_t query_row = 0, query_z = 10;
  bool query_include_self = false;
  CLI::App* cmd_query = app.add_subcommand(
      "query", "Rank a corpus against one of its rows used as the query");
  add_common(cmd_query, query_opts);
  cmd_query->add_option("--model", query_model, "Model checkpoint")
      ->required();
  cmd_query->add_option("--data", query_data, "Corpus CSV");
  cmd_query->add_option("--row", query_row, "Query row (0-based)")
      ->required();
  cmd_query->add_option("--z", query_z, "Neighbors to return");
  cmd_query->add_option("--space", query_space,
                        "euclidean, hamming or cosine");
  cmd_query->add_flag("--include-self", query_include_self,
                      "Keep the query row in the ranking");

  CommonOpts ablate_opts;
  std::string ablate_data;
  bool ablate_synth = false;
  CLI::App* cmd_ablate = app.add_subcommand(
      "ablate",
      "Compare the adaptive-margin loss, its two ablations and the classic "
      "triplet loss on one split");
  add_common(cmd_ablate, ablate_opts);
  cmd_ablate->add_option("--data", ablate_data, "Dataset CSV");
  cmd_ablate->add_flag("--synth", ablate_synth,
                       "Generate the dataset instead of loading one");

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(cmd_config))
      return run_config(config_opts, dump_defaults);
    if (app.got_subcommand(cmd_synth))
      return run_synth(synth_opts, synth_out_file);
    if (app.got_subcommand(cmd_train))
      return run_train(train_opts, train_data, train_synth, train_split,
                       train_model_out);
    if (app.got_subcommand(cmd_eval))
      return run_evaluate(eval_opts, eval_model, eval_data, eval_report);
    if (app.got_subcommand(cmd_query))
      return run_query(query_opts, query_model, query_data, query_row,
                       query_z, query_space, query_include_self);
    if (app.got_subcommand(cmd_ablate))
      return run_ablate(ablate_opts, ablate_data, ablate_synth);
    return 2;  // unreachable; require_subcommand guards
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    const ojson err = {{"error", e.what()}, {"code", 2}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const CliError& e) {
    const ojson err = {{"error", e.message}, {"code", e.code}};
    std::cerr << err.dump() << "\n";
    return e.code;
  } catch (const std::exception& e) {
    const ojson err = {{"error", e.what()}, {"code", 3}};
    std::cerr << err.dump() << "\n";
    return 3;
  }
}

// repe: command-line driver for the extraction / purification / regression /
// steering pipeline.
//
// Exit codes: 0 ok, 2 usage or config, 3 missing input, 4 phase error,
//             5 i/o, 6 backend unavailable.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "repe/pipeline.hpp"

extern char** environ;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::string work_dir;
  std::string backend;
  long long seed = -1;
  bool quiet = false;
};

repe::RunConfig resolve(const GlobalOptions& g) {
  auto cfg = repe::default_config();
  if (!g.config_path.empty()) repe::merge_config(cfg, repe::load_config_file(g.config_path));
  repe::apply_env_overrides(cfg, environ);
  if (!g.work_dir.empty()) cfg["paths"]["work_dir"] = g.work_dir;
  if (!g.backend.empty()) cfg["backend"] = g.backend;
  if (g.seed >= 0) cfg["seed"] = g.seed;
  for (const auto& s : g.sets) repe::apply_set_argument(cfg, s);
  return repe::build_run_config(cfg);
}

int inspect(const std::string& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw repe::Error(repe::ErrorKind::missing_input, "cannot open '" + file + "'");
  std::vector<std::uint8_t> buf{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  nlohmann::json out;
  if (buf.size() >= 4 && std::equal(repe::acf_magic.begin(), repe::acf_magic.end(), buf.begin())) {
    const auto set = repe::decode_acf(buf);
    std::map<std::string, int> splits;
    for (const auto& r : set.records) ++splits[r.split_tag.value_or("")];
    out = {{"format", "ACF1"}, {"records", set.size()}, {"layers", set.n_layers}, {"dim", set.dim},
           {"model_id", set.model_id}, {"capture_note", set.capture_note}, {"splits", splits}};
  } else if (buf.size() >= 4 && std::equal(repe::cvb_magic.begin(), repe::cvb_magic.end(), buf.begin())) {
    const auto b = repe::decode_bundle(buf);
    std::map<std::string, std::size_t> per_factor;
    for (const auto& e : b.entries) ++per_factor[std::string(repe::factor_name(e.factor))];
    out = {{"format", "CVB1"}, {"kind", b.kind}, {"entries", b.entries.size()}, {"dim", b.dim}, {"per_factor", per_factor}};
  } else {
    throw repe::Error(repe::ErrorKind::bad_magic, "'" + file + "' is neither an ACF1 nor a CVB1 file");
  }
  out["sha256"] = repe::sha256_hex(buf);
  std::cout << out.dump(2) << '\n';
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept-vector extraction, purification, regression and steering"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("-c,--config", g.config_path, "JSON config file");
  app.add_option("--set", g.sets, "Override a config field, e.g. --set steer.alpha=2 (repeatable)");
  app.add_option("-w,--work-dir", g.work_dir, "Run directory (paths.work_dir)");
  app.add_option("--backend", g.backend, "toy | acf | tap");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_flag("-q,--quiet", g.quiet, "Suppress progress output");

  std::vector<std::pair<CLI::App*, std::optional<repe::Phase>>> phase_cmds;
  for (repe::Phase p : repe::all_phases) {
    static const std::map<repe::Phase, const char*> help = {
        {repe::Phase::gen, "Build contrastive pairs and vignettes"},
        {repe::Phase::capture, "Capture hidden states into ACF files"},
        {repe::Phase::scan, "Layer scan and raw concept vectors"},
        {repe::Phase::purify, "Orthogonalize concept vectors against confounders"},
        {repe::Phase::regress, "Layer-wise regression with placebo check"},
        {repe::Phase::steer, "Stimulation, suppression and knockout scans"},
        {repe::Phase::report, "Aggregate reports and digests"}};
    phase_cmds.emplace_back(app.add_subcommand(std::string(repe::phase_name(p)), help.at(p)), p);
  }
  phase_cmds.emplace_back(app.add_subcommand("all", "Run every phase in order"), std::nullopt);
  auto* show = app.add_subcommand("config", "Print the effective config");
  auto* insp = app.add_subcommand("inspect", "Summarize an ACF or vector bundle file");
  std::string inspect_file;
  insp->add_option("file", inspect_file, "File to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : repe::exit_usage;
  }

  try {
    if (insp->parsed()) return inspect(inspect_file);
    auto cfg = resolve(g);
    if (show->parsed()) {
      std::cout << cfg.effective.dump(2) << '\n';
      return 0;
    }
    repe::Pipeline pipe(std::move(cfg), g.quiet ? nullptr : &std::cerr);
    for (auto& [cmd, phase] : phase_cmds) {
      if (!cmd->parsed()) continue;
      if (phase) pipe.run(*phase);
      else pipe.run_all();
    }
    return 0;
  } catch (const repe::Error& e) {
    std::cerr << "repe: error [" << repe::error_kind_name(e.kind()) << "] " << e.what() << '\n';
    return repe::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "repe: error " << e.what() << '\n';
    return repe::exit_phase;
  }
}

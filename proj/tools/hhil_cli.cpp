#include <algorithm>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "hhil/config.hpp"
#include "hhil/runner.hpp"
#include "hhil/server.hpp"

namespace fs = std::filesystem;
using namespace hhil;

namespace {

WorkbenchConfig config_from(const std::string& path) {
  return path.empty() ? WorkbenchConfig{} : load_config(path);
}

/// "1" and "2" select the built-in scenarios; anything else is a scenario file.
runner::EpisodeSetup setup_from(const WorkbenchConfig& cfg, const std::string& scenario) {
  if (scenario == "1" || scenario == "2") return runner::EpisodeSetup::prepare(cfg, std::stoi(scenario));
  const auto settled = plant::steady_state(cfg.params, cfg.setpoints, cfg.gains);
  const auto attack = attacks::load_scenario(scenario, attacks::reference_values(cfg.setpoints, settled.plant));
  return runner::EpisodeSetup::prepare(cfg, attack);
}

int scenario_number(const std::string& scenario, const runner::EpisodeSetup& setup) {
  if (scenario == "1" || scenario == "2") return std::stoi(scenario);
  return setup.attack.channel == plant::ChannelId::S5 ? 2 : 1;
}

int run_batch(const std::string& scenario, const std::string& persona, std::size_t iterations, std::uint64_t seed,
              const std::string& out, const std::string& mode, unsigned workers, const std::string& config_path,
              const std::string& personas_path, const std::vector<std::string>& library_dirs) {
  const auto cfg = config_from(config_path);
  const auto setup = setup_from(cfg, scenario);
  const auto personas = personas_path.empty() ? operators::PersonaLibrary::defaults()
                                              : operators::PersonaLibrary::load(personas_path);
  runner::MonteCarloConfig mc;
  mc.iterations = iterations;
  mc.seed = seed;
  mc.scenario = scenario_number(scenario, setup);
  mc.persona = operators::parse_persona(persona);
  mc.mode = runner::parse_campaign_mode(mode);
  mc.workers = std::max(1u, workers);
  mc.keep_traces = true;

  const auto& det = personas.get(mc.persona, mc.scenario, operators::Phase::Detection);
  const auto& res = personas.get(mc.persona, mc.scenario, operators::Phase::Restoration);
  runner::CampaignInputs inputs{&setup, operators::fit_persona(det.anchors), operators::fit_persona(res.anchors), {}};
  if (mc.mode == runner::CampaignMode::Splice) {
    for (const auto& dir : library_dirs) inputs.libraries.push_back(runner::load_library(dir));
    if (inputs.libraries.empty()) {
      const double longest = std::max(cfg.episode.max_detection, det.anchors.back() + 1.0);
      inputs.libraries.push_back(runner::record_library(setup, longest, res.anchors[2]));
    }
  }

  const auto results = runner::monte_carlo(mc, inputs);
  runner::write_campaign(out, mc, setup, results);
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.ok; });
  std::cout << "wrote " << results.size() << " iterations to " << out;
  if (failed > 0) std::cout << " (" << failed << " failed)";
  std::cout << '\n';
  return failed > 0 ? 1 : 0;
}

int analyze(const std::string& dir) {
  const auto group = runner::analyze(dir);
  std::cout << "re-scored " << group.results.size() << " iterations in " << dir << '\n';
  return 0;
}

int report(const std::vector<std::string>& dirs, const std::string& format) {
  if (format != "csv" && format != "txt") throw ValidationError("report: format must be csv or txt");
  std::vector<runner::Group> groups;
  for (const auto& dir : dirs) {
    auto g = runner::load_campaign(dir);
    if (dirs.size() > 1) g.label = fs::path(dir).lexically_normal().filename().string() + ":" + g.label;
    groups.push_back(std::move(g));
  }
  const auto bundle = runner::report(groups);
  runner::write_report(dirs.front(), bundle, format);
  if (format == "txt") {
    std::cout << bundle.text;
  } else {
    std::cout << bundle.summary_csv << '\n' << bundle.tests_csv;
  }
  return 0;
}

server::SessionServer* g_server = nullptr;

extern "C" void on_signal(int) {
  // Only flips an atomic flag; the main thread joins the workers.
  if (g_server) g_server->request_stop();
}

int serve(const std::string& scenario, double timescale, std::uint16_t port, const std::string& log,
          const std::string& static_dir, const std::string& config_path, const std::string& address) {
  const auto cfg = config_from(config_path);
  const auto setup = setup_from(cfg, scenario);
  server::ServerOptions opt;
  opt.address = address;
  opt.port = port;
  opt.timescale = timescale;
  opt.log_path = log;
  opt.static_dir = static_dir;
  server::SessionServer srv(setup, opt);
  const auto bound = srv.start();
  g_server = &srv;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "session on ws://" << address << ':' << bound << "/session, log " << (log.empty() ? "(memory)" : log)
            << std::endl;
  srv.wait();
  srv.stop();
  g_server = nullptr;
  std::cout << "session ended at t=" << srv.sim_time() << " s" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid human-in-the-loop resilience workbench"};
  app.require_subcommand(1);

  std::string scenario = "1", persona = "expert", out, mode = "generative", config_path, personas_path;
  std::size_t iterations = 500;
  std::uint64_t seed = 0;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::string> libraries;
  auto* batch = app.add_subcommand("run-batch", "Monte Carlo campaign with persona-drawn operator times");
  batch->add_option("--scenario", scenario, "1, 2 or a scenario INI file")->required();
  batch->add_option("--persona", persona, "expert or novice")->required()->check(CLI::IsMember({"expert", "novice"}));
  batch->add_option("--iterations", iterations)->required()->check(CLI::PositiveNumber);
  batch->add_option("--seed", seed)->required();
  batch->add_option("--out", out, "output directory")->required();
  batch->add_option("--mode", mode, "generative or splice")->check(CLI::IsMember({"generative", "splice"}));
  batch->add_option("--workers", workers)->check(CLI::PositiveNumber);
  batch->add_option("--config", config_path, "plant/controller INI")->check(CLI::ExistingFile);
  batch->add_option("--personas", personas_path, "persona anchor INI")->check(CLI::ExistingFile);
  batch->add_option("--library", libraries, "segment library directory (splice mode, repeatable)")
      ->check(CLI::ExistingDirectory);

  std::string results_dir;
  auto* an = app.add_subcommand("analyze", "Recompute resilience and statistics from stored traces");
  an->add_option("--results", results_dir)->required()->check(CLI::ExistingDirectory);

  std::vector<std::string> report_dirs;
  std::string format = "txt";
  auto* rep = app.add_subcommand("report", "Summary tables and group comparisons");
  rep->add_option("--results", report_dirs, "campaign directory (repeat to compare groups)")
      ->required()
      ->check(CLI::ExistingDirectory);
  rep->add_option("--format", format)->check(CLI::IsMember({"csv", "txt"}));

  double timescale = 1.0;
  std::uint16_t port = 8080;
  std::string log, static_dir, address = "127.0.0.1";
  auto* srv = app.add_subcommand("serve", "Live operator session over WebSocket");
  srv->add_option("--scenario", scenario, "1, 2 or a scenario INI file")->required();
  srv->add_option("--timescale", timescale, "simulated seconds per wall second (0: unthrottled)")
      ->check(CLI::NonNegativeNumber);
  srv->add_option("--port", port);
  srv->add_option("--log", log, "session JSONL file");
  srv->add_option("--static", static_dir, "console bundle directory")->check(CLI::ExistingDirectory);
  srv->add_option("--config", config_path, "plant/controller INI")->check(CLI::ExistingFile);
  srv->add_option("--address", address);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*batch) {
      return run_batch(scenario, persona, iterations, seed, out, mode, workers, config_path, personas_path, libraries);
    }
    if (*an) return analyze(results_dir);
    if (*rep) return report(report_dirs, format);
    if (*srv) return serve(scenario, timescale, port, log, static_dir, config_path, address);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

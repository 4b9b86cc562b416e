// Experiment driver: simulate, partition, train, sweep, plotdata, graph-info.
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "epifed/error.hpp"
#include "epifed/pipeline.hpp"
#include "epifed/runtime.hpp"

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::string> flag_overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "JSON config file");
  cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set training.rounds=50")
      ->take_all();
}

// Registers a flag that maps onto a config key; its value is applied last.
template <class T>
void add_mapped(CLI::App* cmd, Common& c, const std::string& flag, const std::string& key,
                const std::string& help, bool quote = false) {
  cmd->add_option_function<T>(
      flag,
      [&c, key, quote](const T& v) {
        std::ostringstream o;
        if (quote) o << '"' << v << '"';
        else o << v;
        c.flag_overrides.push_back(key + "=" + o.str());
      },
      help);
}

void add_graph_flags(CLI::App* cmd, Common& c) {
  cmd->add_option_function<std::string>(
      "--graph-file",
      [&c](const std::string& v) {
        c.flag_overrides.push_back("graph.source=\"file\"");
        c.flag_overrides.push_back("graph.path=\"" + v + "\"");
      },
      "Edge list file (src,dst per line)");
  add_mapped<std::string>(cmd, c, "--graph-kind", "graph.kind", "Synthetic graph: er, ba, complete, star, ring", true);
  add_mapped<std::size_t>(cmd, c, "--nodes", "graph.n", "Synthetic node count");
  add_mapped<std::size_t>(cmd, c, "--ba-m", "graph.m", "Barabasi-Albert attachments per node");
  add_mapped<double>(cmd, c, "--er-p", "graph.p", "Erdos-Renyi edge probability");
  add_mapped<std::size_t>(cmd, c, "--top-k", "graph.top_k", "Keep the k highest-degree nodes");
  add_mapped<std::uint64_t>(cmd, c, "--seed", "seed", "Master seed");
}

std::string params_json(const std::string& text) {
  std::ostringstream o;
  o << '{';
  std::istringstream in(text);
  bool first = true;
  for (std::string item; std::getline(in, item, ';');) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw epifed::ValidationError("--params expects k=v;k=v");
    o << (first ? "" : ",") << '"' << item.substr(0, eq) << "\":" << item.substr(eq + 1);
    first = false;
  }
  o << '}';
  return o.str();
}

epifed::RunConfig resolve(const Common& c) {
  std::string text;
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw epifed::ValidationError("cannot open config file '" + c.config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  std::vector<std::string> all = c.overrides;
  all.insert(all.end(), c.flag_overrides.begin(), c.flag_overrides.end());
  return epifed::parse_config(text, all);
}

}  // namespace

int main(int argc, char** argv) {
  epifed::tune_allocator();
  CLI::App app{"epifed: epidemic simulation and federated epidemic prediction"};
  app.require_subcommand(1);

  Common sim_c, part_c, train_c, sweep_c, info_c;
  std::string sim_out, part_out;

  auto* sim = app.add_subcommand("simulate", "Simulate an epidemic and write a trajectory file");
  add_common(sim, sim_c);
  add_graph_flags(sim, sim_c);
  add_mapped<std::string>(sim, sim_c, "--model", "epidemic.model", "sis, sir, seir, nmsis, sirs, sirvs, sistv", true);
  sim->add_option_function<std::string>(
      "--params", [&](const std::string& v) { sim_c.flag_overrides.push_back("epidemic.params=" + params_json(v)); },
      "Model parameters as k=v;k=v");
  add_mapped<double>(sim, sim_c, "--tau-factor", "epidemic.tau_over_threshold", "Effective rate as a multiple of 1/lambda1");
  add_mapped<double>(sim, sim_c, "--dt", "epidemic.dt", "Sampling interval");
  add_mapped<double>(sim, sim_c, "--t-max", "epidemic.t_max", "Simulated time span");
  add_mapped<double>(sim, sim_c, "--init-fraction", "epidemic.init_fraction", "Initially infected fraction");
  sim->add_option("-o,--out", sim_out, "Trajectory output path")->required();

  auto* part = app.add_subcommand("partition", "Split the graph into client subnetworks");
  add_common(part, part_c);
  add_graph_flags(part, part_c);
  add_mapped<std::string>(part, part_c, "--method", "partition.method", "even, spectral, kl", true);
  add_mapped<std::size_t>(part, part_c, "--clients", "partition.clients", "Number of clients");
  part->add_option("-o,--out", part_out, "Partition CSV output path")->required();

  auto* train = app.add_subcommand("train", "Train centralized, solo or federated predictors");
  add_common(train, train_c);
  add_graph_flags(train, train_c);
  add_mapped<std::string>(train, train_c, "--scenario", "training.scenario", "federated, solo, centralized", true);
  add_mapped<std::string>(train, train_c, "--aggregation", "training.aggregation", "fedavg or fedprox", true);
  add_mapped<std::string>(train, train_c, "--architecture", "model.architecture", "lstm or stgat", true);
  add_mapped<std::size_t>(train, train_c, "--clients", "partition.clients", "Number of clients");
  add_mapped<std::size_t>(train, train_c, "--rounds", "training.rounds", "Communication rounds");
  add_mapped<std::size_t>(train, train_c, "--workers", "training.workers", "Client worker threads");
  add_mapped<std::string>(train, train_c, "--out-dir", "output_dir", "Output directory", true);

  auto* sweep = app.add_subcommand("sweep", "Run a client-count, tau or missing-report sweep");
  add_common(sweep, sweep_c);
  add_graph_flags(sweep, sweep_c);
  add_mapped<std::string>(sweep, sweep_c, "--kind", "sweep.kind", "clients, tau or missing", true);
  add_mapped<std::size_t>(sweep, sweep_c, "--workers", "sweep.workers", "Sweep point worker threads");
  add_mapped<std::string>(sweep, sweep_c, "--out-dir", "output_dir", "Output directory", true);

  std::string plot_in, plot_family = "line", plot_metric = "acc", plot_out;
  auto* plot = app.add_subcommand("plotdata", "Turn a per-client sweep table into plot inputs");
  plot->add_option("-i,--input", plot_in, "Per-client sweep table (sweep_clients.csv)")->required();
  plot->add_option("--family", plot_family, "violin or line")->capture_default_str();
  plot->add_option("--metric", plot_metric, "Metric name")->capture_default_str();
  plot->add_option("-o,--out", plot_out, "Output CSV")->required();

  auto* info = app.add_subcommand("graph-info", "Print graph statistics and the epidemic threshold");
  add_common(info, info_c);
  add_graph_flags(info, info_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    std::string report;
    if (*sim) report = epifed::cmd_simulate(resolve(sim_c), sim_out);
    else if (*part) report = epifed::cmd_partition(resolve(part_c), part_out);
    else if (*train) report = epifed::cmd_train(resolve(train_c));
    else if (*sweep) report = epifed::cmd_sweep(resolve(sweep_c));
    else if (*plot) report = epifed::cmd_plotdata(plot_in, plot_family, plot_metric, plot_out);
    else if (*info) report = epifed::cmd_graph_info(resolve(info_c));
    std::cout << report << '\n';
    return 0;
  } catch (const epifed::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const epifed::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

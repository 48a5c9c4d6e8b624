// cuepref: simulate, fit, evaluate, diagnose, report, serve.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cuepref/analytics.hpp"
#include "cuepref/diagnostics.hpp"
#include "cuepref/error.hpp"
#include "cuepref/harness.hpp"
#include "cuepref/io.hpp"
#include "cuepref/service.hpp"
#include "cuepref/simulator.hpp"
#include "cuepref/workflow.hpp"

namespace fs = std::filesystem;
using namespace cuepref;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;

struct Common {
  std::string problem;
  std::vector<std::string> data;
  std::vector<std::string> variants;
  int gamma = 2;
  int samples = 10000;
  int burnin = 1000;
  int chains = 3;
  std::uint64_t seed = 1;
  std::string out = ".";
};

Problem load_problem(const std::string& path) {
  if (path.empty() || path == "phone_contracts") return phone_contracts_problem();
  return read_problem(path);
}

SamplerConfig sampler_from(const Common& c) {
  SamplerConfig s;
  s.samples = c.samples;
  s.warmup = c.burnin;
  s.chains = c.chains;
  s.seed = c.seed;
  return s;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

int cmd_simulate(const Common& c, int dms, int pairs, const std::string& family, double noise) {
  const Problem problem = load_problem(c.problem);
  const PiecewiseConfig config = PiecewiseConfig::uniform(problem.num_criteria(), c.gamma);
  const fs::path out = c.out;
  fs::create_directories(out);
  write_problem(problem, out / "problem.json");
  SimulationOptions opts;
  opts.lognormal_noise_sd = noise;
  json cases = json::array();
  for (int d = 0; d < dms; ++d) {
    const SyntheticCase sc = generate_case(problem, config, parse_family(family),
                                           static_cast<std::size_t>(pairs),
                                           derive_seed(c.seed, {static_cast<std::uint64_t>(d)}), opts);
    std::ostringstream name;
    name << "dm_" << std::setw(2) << std::setfill('0') << d + 1;
    write_dataset(sc.dataset, out / (name.str() + ".jsonl"));
    std::ofstream csv(out / (name.str() + ".csv"));
    write_dataset_csv(sc.dataset, problem, csv);
    json m = manifest_json(sc, problem);
    m["name"] = name.str();
    m["dataset"] = name.str() + ".jsonl";
    cases.push_back(std::move(m));
  }
  json manifest = {{"problem", "problem.json"}, {"seed", c.seed}, {"cases", cases}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << dms << " synthetic datasets to " << out.string() << "\n";
  return 0;
}

int cmd_fit(const Common& c) {
  if (c.data.size() != 1) throw ValidationError("fit takes exactly one --data file");
  const Problem problem = load_problem(c.problem);
  const Dataset data = read_dataset(fs::path(c.data.front()), problem.id());
  FitRequest req;
  req.spec = VariantSpec::parse(c.variants.empty() ? "i2" : c.variants.front());
  req.config = PiecewiseConfig::uniform(problem.num_criteria(), c.gamma);
  req.sampler = sampler_from(c);
  const FitResult fit = fit_model(problem, data, req, [&](int done) {
    std::cerr << "chain " << done << "/" << c.chains << " done\n";
  });
  const fs::path out = c.out;
  fs::create_directories(out);
  {
    std::ofstream dump(out / "posterior.csv", std::ios::binary);
    write_posterior_csv(fit.samples, dump);
  }
  write_text(out / "result.json", fit.bundle.to_json().dump(2) + "\n");
  std::cout << "max R-hat " << fit.bundle.diagnostics->max_rhat << ", min ESS "
            << fit.bundle.diagnostics->min_ess << "\n";
  if (!fit.converged) {
    std::cerr << "chains did not converge (R-hat >= 1.1) after a retry\n";
    return kExitConvergence;
  }
  return 0;
}

std::vector<ExperimentDataset> load_datasets(const Common& c, const Problem& problem) {
  std::vector<ExperimentDataset> out;
  for (const auto& item : c.data) {
    const fs::path path = item;
    if (path.extension() == ".json") {
      const json manifest = read_json(path);
      for (const auto& m : manifest.at("cases")) {
        ExperimentDataset ds;
        ds.name = m.at("name").get<std::string>();
        ds.data = read_dataset(path.parent_path() / m.at("dataset").get<std::string>(), problem.id());
        ds.truth = std::make_pair(dm_from_manifest(m).u_true, config_from_manifest(m));
        out.push_back(std::move(ds));
      }
    } else {
      out.push_back({path.stem().string(), read_dataset(path, problem.id()), std::nullopt});
    }
  }
  if (out.empty()) throw ValidationError("evaluate needs at least one --data file");
  return out;
}

int cmd_evaluate(const Common& c, int repeats, double train_fraction, std::vector<int> candidates) {
  const Problem problem = load_problem(c.problem);
  ExperimentPlan plan;
  plan.datasets = load_datasets(c, problem);
  if (!c.variants.empty()) {
    plan.variants.clear();
    for (const auto& v : c.variants) plan.variants.push_back(VariantSpec::parse(v));
  }
  plan.repeats = repeats;
  plan.train_fraction = train_fraction;
  plan.gamma_candidates = candidates.empty() ? std::vector<int>{c.gamma} : std::move(candidates);
  plan.sampler = sampler_from(c);
  plan.master_seed = c.seed;
  const ExperimentReport report = run_experiment(problem, plan, [&](const CellResult& cell) {
    std::cerr << plan.datasets[cell.dataset].name << " repeat " << cell.repeat << " "
              << plan.variants[cell.variant].name() << (cell.converged ? "" : " [flagged]") << "\n";
  });
  const fs::path out = c.out;
  fs::create_directories(out);
  write_text(out / "report.json", report.to_json().dump(2) + "\n");
  std::ostringstream table;
  report.write_table_csv(table);
  write_text(out / "table.csv", table.str());
  std::cout << table.str();
  return 0;
}

int cmd_diagnose(const Common& c, int max_lag) {
  if (c.data.size() != 1) throw ValidationError("diagnose takes exactly one posterior dump");
  std::ifstream in(c.data.front());
  if (!in) throw ValidationError("cannot open " + c.data.front());
  const SampleSet samples = read_posterior_csv(in);
  const FitDiagnostics diag = diagnose(samples);
  json acf_json = json::array();
  double worst = 0.0;
  for (int i = 0; i < samples.gamma; ++i) {
    json per_chain = json::array();
    for (const auto& series : samples.u_series(i)) {
      const auto acf = autocorrelation(series, static_cast<std::size_t>(max_lag));
      const double at = acf.size() > static_cast<std::size_t>(max_lag) ? acf[static_cast<std::size_t>(max_lag)] : 0.0;
      worst = std::max(worst, std::abs(at));
      per_chain.push_back(at);
    }
    acf_json.push_back(per_chain);
  }
  json j = diag.to_json();
  j["acf_lag"] = max_lag;
  j["acf"] = acf_json;
  j["max_abs_acf"] = worst;
  const fs::path out = c.out;
  fs::create_directories(out);
  write_text(out / "diagnostics.json", j.dump(2) + "\n");
  std::printf("max R-hat %.4f  min ESS %.1f  max |acf(%d)| %.4f\n", diag.max_rhat, diag.min_ess, max_lag, worst);
  return diag.converged() ? 0 : kExitConvergence;
}

std::string render_bundle(const json& b) {
  std::ostringstream os;
  const auto alts = b.at("alternatives").get<std::vector<std::string>>();
  os << "Rank acceptability indices (%)\n" << std::setw(6) << "";
  for (std::size_t r = 0; r < alts.size(); ++r) os << std::setw(8) << ("r" + std::to_string(r + 1));
  os << "\n" << std::fixed << std::setprecision(2);
  for (std::size_t a = 0; a < alts.size(); ++a) {
    os << std::setw(6) << alts[a];
    for (const auto& v : b.at("rai")[a]) os << std::setw(8) << v.get<double>();
    os << "\n";
  }
  os << "\nPairwise winning indices\n" << std::setw(6) << "";
  for (const auto& a : alts) os << std::setw(8) << a;
  os << "\n" << std::setprecision(3);
  for (std::size_t a = 0; a < alts.size(); ++a) {
    os << std::setw(6) << alts[a];
    for (const auto& v : b.at("pwi")[a]) os << std::setw(8) << v.get<double>();
    os << "\n";
  }
  os << "\nMarginal value increments (posterior mean, 95% HPD)\n" << std::setprecision(4);
  for (const auto& h : b.at("hpd")) {
    os << std::setw(6) << h.at("criterion").get<std::string>() << " seg " << h.at("segment").get<int>()
       << std::setw(10) << h.at("mean").get<double>() << "  [" << h.at("low").get<double>() << ", "
       << h.at("high").get<double>() << "]\n";
  }
  os << "\nWeight shares\n";
  const auto crits = b.at("criteria").get<std::vector<std::string>>();
  for (std::size_t m = 0; m < crits.size(); ++m) {
    os << std::setw(6) << crits[m] << std::setw(10) << b.at("weight_shares")[m].get<double>() << "\n";
  }
  return os.str();
}

std::string render_report(const json& r) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "Model" << std::setw(16) << "ASP" << std::setw(16) << "ART"
     << "fits/flagged\n";
  char buf[64];
  for (const auto& s : r.at("summary")) {
    os << std::setw(12) << s.at("label").get<std::string>();
    std::snprintf(buf, sizeof buf, "%.3f(%.3f)", s.at("asp_mean").get<double>(), s.at("asp_sd").get<double>());
    os << std::setw(16) << buf;
    std::snprintf(buf, sizeof buf, "%.3f(%.3f)", s.at("art_mean").get<double>(), s.at("art_sd").get<double>());
    os << std::setw(16) << buf << s.at("fits").get<std::size_t>() << "/" << s.at("flagged").get<std::size_t>()
       << "\n";
  }
  return os.str();
}

int cmd_report(const Common& c) {
  if (c.data.size() != 1) throw ValidationError("report takes one result.json or report.json");
  const json j = read_json(c.data.front());
  const std::string text = j.contains("summary") ? render_report(j) : render_bundle(j);
  const fs::path out = c.out;
  fs::create_directories(out);
  write_text(out / (j.contains("summary") ? "report.txt" : "result.txt"), text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavioral preference learning from pairwise comparisons, response times and attention"};
  app.require_subcommand(1);
  Common c;

  auto add_common = [&c](CLI::App* sub) {
    sub->add_option("--problem", c.problem, "Problem JSON (default: bundled phone contracts)");
    sub->add_option("--data", c.data, "Input file(s)");
    sub->add_option("--variant", c.variants, "Variant: bor, i1..i3, ii1..ii3, iii1..iii3")
        ->check(CLI::IsMember({"bor", "i1", "i2", "i3", "ii1", "ii2", "ii3", "iii1", "iii2", "iii3"}));
    sub->add_option("--gamma", c.gamma, "Segments per criterion")->check(CLI::PositiveNumber);
    sub->add_option("--samples", c.samples, "Retained draws per chain (K)");
    sub->add_option("--burnin", c.burnin, "Warmup draws per chain (W)");
    sub->add_option("--chains", c.chains, "Number of chains");
    sub->add_option("--seed", c.seed, "Master seed");
    sub->add_option("--out", c.out, "Output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "Generate synthetic decision makers and datasets");
  add_common(simulate);
  int dms = 20;
  int pairs = 30;
  std::string family = "exponential";
  double noise = 0.0;
  simulate->add_option("--dms", dms, "Number of synthetic decision makers");
  simulate->add_option("--pairs", pairs, "Comparisons per decision maker");
  simulate->add_option("--family", family, "Duration family")
      ->check(CLI::IsMember({"exponential", "gamma", "poisson"}));
  simulate->add_option("--noise", noise, "Lognormal duration noise sd (off by default)");

  auto* fit = app.add_subcommand("fit", "Fit one variant to one dataset");
  add_common(fit);

  auto* evaluate = app.add_subcommand("evaluate", "Run the split / select / fit / score experiment");
  add_common(evaluate);
  int repeats = 20;
  double train_fraction = 0.8;
  std::vector<int> candidates;
  evaluate->add_option("--repeats", repeats, "Random splits per dataset");
  evaluate->add_option("--train-fraction", train_fraction, "Training share");
  evaluate->add_option("--gamma-candidates", candidates, "Segment counts to select from (default: --gamma)")
      ->delimiter(',');

  auto* diag = app.add_subcommand("diagnose", "R-hat, ESS and autocorrelation from a posterior dump");
  add_common(diag);
  int max_lag = 50;
  diag->add_option("--lag", max_lag, "Autocorrelation lag to report");

  auto* report = app.add_subcommand("report", "Render a result bundle or experiment report as tables");
  add_common(report);

  auto* serve_cmd = app.add_subcommand("serve", "Start the elicitation HTTP service");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string root = "cuepref-data";
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--root", root, "Directory for problems and session logs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return cmd_simulate(c, dms, pairs, family, noise);
    if (*fit) return cmd_fit(c);
    if (*evaluate) return cmd_evaluate(c, repeats, train_fraction, candidates);
    if (*diag) return cmd_diagnose(c, max_lag);
    if (*report) return cmd_report(c);
    if (*serve_cmd) {
      std::cout << "listening on " << host << ":" << port << "\n";
      serve(root, host, port);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

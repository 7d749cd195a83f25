#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "gtvd/bipartite.hpp"
#include "gtvd/cli.hpp"
#include "gtvd/cloud.hpp"
#include "gtvd/errors.hpp"
#include "gtvd/graph.hpp"
#include "gtvd/metrics.hpp"
#include "gtvd/normals.hpp"
#include "gtvd/solver.hpp"

namespace gtvd::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kBenchCsvHeader = "model,sigma,stage,c2c_unsq,c2c_sq,c2p,runtime_s";

// --config plus one --<key> flag per setting (underscores become dashes).
struct ParamFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "settings file of 'key = value' lines");
    for (const auto& key : setting_keys()) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      options[key] = app->add_option(flag, values[key], "overrides '" + key + "'");
    }
  }

  RunConfig resolve() const {
    RunConfig rc;
    if (!config_path.empty()) apply_settings(rc, load_settings(config_path));
    Settings flags;
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) flags[key] = values.at(key);
    apply_settings(rc, flags);
    rc.params.validate();
    return rc;
  }
};

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

void log_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- noise ----

struct NoiseArgs {
  std::string input, output;
  double sigma = 0.1;
  std::uint64_t seed = 1;
};

int cmd_noise(const NoiseArgs& a, std::ostream& out) {
  const PointCloud cloud = load_cloud(a.input);
  const PointCloud noisy = add_gaussian_noise(cloud, {a.sigma, a.seed});
  save_cloud(noisy, a.output);

  Vec3 mean = Vec3::Zero();
  for (std::size_t i = 0; i < cloud.size(); ++i) mean += noisy[i] - cloud[i];
  mean /= static_cast<double>(cloud.size());
  Vec3 var = Vec3::Zero();
  for (std::size_t i = 0; i < cloud.size(); ++i) var += (noisy[i] - cloud[i] - mean).cwiseAbs2();
  const double dof = cloud.size() > 1 ? static_cast<double>(cloud.size() - 1) : 1.0;
  const Vec3 std_dev = (var / dof).cwiseSqrt();
  out << "points: " << cloud.size() << '\n'
      << "sigma: " << a.sigma << '\n'
      << "seed: " << a.seed << '\n'
      << "rng: " << kNoiseRngId << '\n'
      << "achieved_std: " << std_dev.x() << ' ' << std_dev.y() << ' ' << std_dev.z() << '\n';
  return kOk;
}

// ---- denoise ----

struct DenoiseArgs {
  std::string input, output, diagnostics, config_out;
  ParamFlags flags;
};

int cmd_denoise(const DenoiseArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig rc = a.flags.resolve();
  const PointCloud cloud = load_cloud(a.input);
  const fs::path output(a.output);
  const fs::path diag_path = a.diagnostics.empty() ? fs::path(a.output + ".diag.txt") : fs::path(a.diagnostics);
  const fs::path config_path = a.config_out.empty() ? fs::path(a.output + ".config.txt") : fs::path(a.config_out);

  DenoiseResult result = denoise(cloud, rc.params);
  log_warnings(err, result.diagnostics.warnings);
  result.diagnostics.set("input", a.input);
  result.diagnostics.set("output", a.output);
  result.diagnostics.set("config_echo", config_path.string());

  save_cloud(result.cloud, output);
  std::ostringstream diag;
  write_diagnostics(diag, result.diagnostics);
  write_text_file(diag_path, diag.str());
  write_text_file(config_path, "# effective settings for " + a.input + "\n" + format_settings(rc.params));

  const auto& d = result.diagnostics;
  out << "points: " << cloud.size() << '\n'
      << "outer_iterations: " << d.outer_iterations << '\n'
      << "outer_converged: " << (d.outer_converged ? "true" : "false") << '\n'
      << "no_support_pair_nodes: " << d.no_support_pair_nodes << '\n'
      << "seconds: " << d.seconds << '\n'
      << "output: " << output.string() << '\n'
      << "diagnostics: " << diag_path.string() << '\n'
      << "config: " << config_path.string() << '\n';
  if (d.no_support_pair_nodes > 0)
    err << "warning: " << d.no_support_pair_nodes << " nodes had no support pair and kept their observed positions\n";
  return kOk;
}

// ---- eval ----

struct EvalArgs {
  std::string ground, test, label;
  std::size_t k = 8;
  double sigma = 0.0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const PointCloud ground = load_cloud(a.ground);
  const PointCloud test = load_cloud(a.test);
  const MetricReport report = evaluate(ground, test, a.k);
  const double secs = elapsed(start);
  write_metric_table(out, report);
  out << kMetricCsvHeader << '\n'
      << metric_csv_row(a.label.empty() ? fs::path(a.test).stem().string() : a.label, a.sigma, report, secs)
      << '\n';
  return kOk;
}

// ---- inspect ----

struct InspectArgs {
  std::string input, what, color = "red", output;
  ParamFlags flags;
};

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const RunConfig rc = a.flags.resolve();
  const DenoiseParams& p = rc.params;
  const PointCloud cloud = load_cloud(a.input);
  const std::size_t k = std::min(p.k, cloud.size() > 1 ? cloud.size() - 1 : std::size_t{1});
  const WeightedGraph graph = build_knn_graph(cloud, k, p.sigma_p);

  std::ofstream file;
  if (!a.output.empty()) {
    file.open(a.output, std::ios::binary);
    if (!file) throw IoError("cannot open '" + a.output + "' for writing");
  }
  std::ostream& sink = a.output.empty() ? out : file;

  if (a.what == "graph") {
    write_edge_list(sink, graph);
    return kOk;
  }
  const Bipartition bp =
      approximate_bipartite(graph, bipartite_options(p, resolve_start_node(p, cloud.size())));
  if (a.what == "bipartition") {
    write_bipartition(sink, bp);
    return kOk;
  }
  const Color color = a.color == "blue" ? Color::Blue : Color::Red;
  const PartiteNormals normals =
      estimate_partite_normals(cloud.positions(), graph, bp, color, k, p.collinearity_tol);
  write_normals(sink, normals);
  return kOk;
}

// ---- bench ----

struct BenchArgs {
  std::string model_dir, csv;
  std::vector<double> sigmas{0.1, 0.3};
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  ParamFlags flags;
};

struct BenchRow {
  MetricReport noisy, denoised;
  double noise_seconds = 0.0;
  double denoise_seconds = 0.0;
};

std::vector<fs::path> list_models(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("model directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> models;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".xyz" || ext == ".ply") models.push_back(entry.path());
  }
  std::sort(models.begin(), models.end());
  if (models.empty()) throw IoError("no .xyz or .ply models in '" + dir.string() + "'");
  return models;
}

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig rc = a.flags.resolve();
  const auto models = list_models(a.model_dir);
  const std::size_t tasks = models.size() * a.sigmas.size();
  std::vector<std::optional<BenchRow>> rows(tasks);
  std::vector<std::string> failures(tasks);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const auto& model = models[t / a.sigmas.size()];
      const double sigma = a.sigmas[t % a.sigmas.size()];
      try {
        DenoiseParams params = rc.params;
        if (!rc.gamma_explicit && sigma >= 0.3) params.gamma = 0.1;
        const PointCloud clean = load_cloud(model);
        const auto t0 = std::chrono::steady_clock::now();
        const PointCloud noisy = add_gaussian_noise(clean, {sigma, a.seed});
        BenchRow row;
        row.noise_seconds = elapsed(t0);
        row.noisy = evaluate(clean, noisy);
        const DenoiseResult res = denoise(noisy, params);
        row.denoise_seconds = res.diagnostics.seconds;
        row.denoised = evaluate(clean, res.cloud);
        rows[t] = row;
      } catch (const std::exception& e) {
        failures[t] = e.what();
        std::lock_guard lock(log_mutex);
        err << "error: " << model.filename().string() << " sigma " << sigma << ": " << e.what() << '\n';
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(a.jobs, static_cast<unsigned>(tasks)));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  auto name_of = [&](std::size_t m) { return models[m].stem().string(); };
  std::size_t name_width = 5;
  for (std::size_t m = 0; m < models.size(); ++m) name_width = std::max(name_width, name_of(m).size());

  auto table = [&](const char* title, auto metric) {
    out << title << '\n' << std::left << std::setw(static_cast<int>(name_width) + 2) << "model" << std::right;
    for (double s : a.sigmas) {
      std::ostringstream h;
      h << "s=" << s;
      out << std::setw(14) << (h.str() + " noise") << std::setw(14) << (h.str() + " proposed");
    }
    out << '\n';
    for (std::size_t m = 0; m < models.size(); ++m) {
      out << std::left << std::setw(static_cast<int>(name_width) + 2) << name_of(m) << std::right;
      for (std::size_t s = 0; s < a.sigmas.size(); ++s) {
        const auto& row = rows[m * a.sigmas.size() + s];
        if (!row) {
          out << std::setw(14) << "failed" << std::setw(14) << "failed";
          continue;
        }
        out << std::fixed << std::setprecision(6) << std::setw(14) << metric(row->noisy) << std::setw(14)
            << metric(row->denoised) << std::defaultfloat;
      }
      out << '\n';
    }
    out << '\n';
  };
  out << "seed: " << a.seed << "  rng: " << kNoiseRngId << '\n' << '\n';
  table("C2C (unsquared, symmetric mean)", [](const MetricReport& r) { return r.c2c_mean_dist(); });
  table("C2P (squared, symmetric mean)", [](const MetricReport& r) { return r.c2p_mean_sq(); });
  out << "runtime per model (s)\n";
  for (std::size_t m = 0; m < models.size(); ++m) {
    double total = 0.0;
    for (std::size_t s = 0; s < a.sigmas.size(); ++s)
      if (const auto& row = rows[m * a.sigmas.size() + s]) total += row->noise_seconds + row->denoise_seconds;
    out << std::left << std::setw(static_cast<int>(name_width) + 2) << name_of(m) << std::right << total << '\n';
  }

  std::ostringstream csv;
  csv.precision(9);
  csv << kBenchCsvHeader << '\n';
  for (std::size_t t = 0; t < tasks; ++t) {
    if (!rows[t]) continue;
    const auto name = name_of(t / a.sigmas.size());
    const double sigma = a.sigmas[t % a.sigmas.size()];
    auto line = [&](const char* stage, const MetricReport& r, double secs) {
      csv << name << ',' << sigma << ',' << stage << ',' << r.c2c_mean_dist() << ',' << r.c2c_mean_sq() << ','
          << r.c2p_mean_sq() << ',' << secs << '\n';
    };
    line("noise", rows[t]->noisy, rows[t]->noise_seconds);
    line("proposed", rows[t]->denoised, rows[t]->denoise_seconds);
  }
  if (a.csv.empty()) {
    out << '\n' << csv.str();
  } else {
    write_text_file(a.csv, csv.str());
    out << "\ncsv: " << a.csv << '\n';
  }

  const bool any_failed = std::any_of(failures.begin(), failures.end(), [](const auto& f) { return !f.empty(); });
  return any_failed ? kModelFailed : kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point cloud denoising by bipartite graph approximation and graph total variation", "gtvd"};
  app.require_subcommand(1);
  app.footer(std::string("Exit codes: 0 ok, 1 bench model failure or internal error, 2 usage, 3 I/O, 4 parse, "
                         "5 convergence, 6 degenerate input.\nbench CSV columns: ") +
             kBenchCsvHeader + "\neval CSV columns: " + kMetricCsvHeader);

  NoiseArgs noise;
  auto* noise_cmd = app.add_subcommand("noise", "add zero-mean Gaussian noise to every coordinate");
  noise_cmd->add_option("input", noise.input, "clean cloud (.xyz or .ply)")->required();
  noise_cmd->add_option("output", noise.output, "noisy cloud (.xyz or .ply)")->required();
  noise_cmd->add_option("--sigma", noise.sigma, "per-axis standard deviation")->capture_default_str();
  noise_cmd->add_option("--seed", noise.seed, "random seed")->capture_default_str();

  DenoiseArgs den;
  auto* den_cmd = app.add_subcommand("denoise", "denoise a cloud");
  den_cmd->add_option("input", den.input, "noisy cloud")->required();
  den_cmd->add_option("output", den.output, "denoised cloud")->required();
  den_cmd->add_option("--diagnostics", den.diagnostics, "diagnostics file (default <output>.diag.txt)");
  den_cmd->add_option("--config-out", den.config_out, "effective settings echo (default <output>.config.txt)");
  den.flags.attach(den_cmd);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "C2C and C2P errors between a ground-truth and a test cloud");
  eval_cmd->add_option("ground", ev.ground, "ground-truth cloud")->required();
  eval_cmd->add_option("test", ev.test, "cloud to evaluate")->required();
  eval_cmd->add_option("--k", ev.k, "neighbors for the C2P plane fit")->capture_default_str();
  eval_cmd->add_option("--label", ev.label, "model column of the CSV row (default: test file stem)");
  eval_cmd->add_option("--sigma", ev.sigma, "sigma column of the CSV row")->capture_default_str();

  InspectArgs ins;
  auto* ins_cmd = app.add_subcommand("inspect", "dump an intermediate structure as text");
  ins_cmd->add_option("input", ins.input, "cloud")->required();
  ins_cmd->add_option("--what", ins.what, "graph | bipartition | normals")
      ->required()
      ->check(CLI::IsMember({"graph", "bipartition", "normals"}));
  ins_cmd->add_option("--color", ins.color, "partite for --what normals")
      ->check(CLI::IsMember({"red", "blue"}))
      ->capture_default_str();
  ins_cmd->add_option("--output", ins.output, "write here instead of standard output");
  ins.flags.attach(ins_cmd);

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "noise, denoise and evaluate every model in a directory");
  bench_cmd->add_option("model_dir", bench.model_dir, "directory of clean .xyz/.ply models")->required();
  bench_cmd->add_option("--sigmas", bench.sigmas, "noise levels")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "noise seed used for every run")->capture_default_str();
  bench_cmd->add_option("--jobs", bench.jobs, "concurrent model runs")->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--csv", bench.csv, "write the CSV here instead of standard output");
  bench.flags.attach(bench_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (noise_cmd->parsed()) return cmd_noise(noise, out);
    if (den_cmd->parsed()) return cmd_denoise(den, out, err);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (ins_cmd->parsed()) return cmd_inspect(ins, out);
    if (bench_cmd->parsed()) return cmd_bench(bench, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const ConvergenceError& e) {
    err << "convergence failure: " << e.what() << '\n';
    return kConvergence;
  } catch (const DegenerateInput& e) {
    err << "degenerate input: " << e.what() << '\n';
    return kDegenerate;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kModelFailed;
  }
  return kUsage;
}

}  // namespace gtvd::cli

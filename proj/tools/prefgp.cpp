// Command-line entry point: simulate / train / predict / evaluate / bench.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "prefgp/config.hpp"
#include "prefgp/crowd.hpp"
#include "prefgp/data.hpp"
#include "prefgp/eval.hpp"
#include "prefgp/gppl.hpp"
#include "prefgp/serialize.hpp"

namespace fs = std::filesystem;
using namespace prefgp;

namespace {

constexpr std::string_view kSimulateKeys[] = {
    "seed",        "sim.grid_side", "sim.item_subsample",
    "sim.users",   "sim.C_true",    "sim.s_t",
    "sim.s_v",     "sim.s_v_min",   "sim.s_v_max",
    "sim.s_w",     "sim.pairs",
};

constexpr std::string_view kTrainKeys[] = {
    "seed",
    "kernel.family",
    "kernel.heuristic",
    "user_kernel.family",
    "user_kernel.heuristic",
    "inducing.items",
    "inducing.users",
    "svi.batch_size",
    "svi.delay",
    "svi.forgetting_rate",
    "svi.max_iterations",
    "svi.convergence_tol",
    "svi.inner_max",
    "svi.inner_tol",
    "svi.elbo_every",
    "svi.fixed_rho",
    "hyper.alpha0",
    "hyper.beta0",
    "hyper.alpha0_t",
    "hyper.beta0_t",
    "hyper.alpha0_v",
    "hyper.beta0_v",
    "hyper.alpha0_w",
    "hyper.beta0_w",
    "model.C",
    "model.user_kernel_split",
};

constexpr std::string_view kBenchKeys[] = {
    "seed",          "bench.model",     "bench.sweep", "bench.values",
    "bench.items",   "bench.users",     "bench.pairs", "bench.iterations",
    "inducing.items", "inducing.users", "svi.batch_size", "model.C",
};

void write_failed_marker(const std::string& out_dir, const std::string& why) {
  if (out_dir.empty()) return;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream marker(fs::path(out_dir) / "FAILED");
  marker << why << "\n";
}

void echo_config(const Config& cfg, const std::string& out_dir) {
  std::ofstream out(fs::path(out_dir) / "config_resolved.txt");
  out << cfg.serialize();
}

Eigen::VectorXd length_scales_for(const Eigen::MatrixXd& X,
                                  const std::string& heuristic) {
  if (heuristic == "median") return median_heuristic(X);
  if (heuristic == "scaled_median") return scaled_median_heuristic(X);
  throw InvalidConfigError("unknown length-scale heuristic: " + heuristic +
                           " (expected median or scaled_median)");
}

KernelConfig kernel_from_config(const Config& cfg, const std::string& prefix,
                                const Eigen::MatrixXd& X) {
  const std::string family = cfg.get_string(prefix + ".family", "matern32");
  if (family == "identity") return KernelConfig::identity();
  KernelConfig k;
  k.family = kernel_family_from_name(family);
  k.length_scales =
      length_scales_for(X, cfg.get_string(prefix + ".heuristic", "median"));
  return k;
}

SviSchedule schedule_from_config(const Config& cfg, uint64_t seed) {
  SviSchedule s;
  s.batch_size = cfg.get_int("svi.batch_size", 1000);
  s.delay = cfg.get_double("svi.delay", 1.0);
  s.forgetting_rate = cfg.get_double("svi.forgetting_rate", 0.9);
  s.max_iterations = cfg.get_int("svi.max_iterations", 200);
  s.convergence_tol = cfg.get_double("svi.convergence_tol", 1e-4);
  s.inner_max = cfg.get_int("svi.inner_max", 20);
  s.inner_tol = cfg.get_double("svi.inner_tol", 1e-3);
  s.elbo_every = cfg.get_int("svi.elbo_every", 5);
  s.fixed_rho = cfg.get_double("svi.fixed_rho", 0.0);
  s.seed = seed;
  s.validate();
  return s;
}

PreferenceDataset load_data_dir(const std::string& dir) {
  const fs::path base(dir);
  if (!fs::exists(base / "items.csv") || !fs::exists(base / "pairs.csv")) {
    throw LoadError("data directory " + dir +
                    " must contain items.csv and pairs.csv");
  }
  const fs::path users = base / "users.csv";
  return load_csv((base / "items.csv").string(),
                  fs::exists(users) ? users.string() : std::string(),
                  (base / "pairs.csv").string());
}

void write_elbo_trace(const std::vector<double>& trace,
                      const std::string& out_dir) {
  std::ofstream out(fs::path(out_dir) / "elbo_trace.csv");
  out << "check,elbo\n";
  out.precision(17);
  for (size_t i = 0; i < trace.size(); ++i) {
    out << i << "," << trace[i] << "\n";
  }
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<uint64_t> seed_override) {
  Config cfg = Config::load(config_path);
  cfg.require_known(kSimulateKeys);
  if (seed_override) cfg.set("seed", std::to_string(*seed_override));

  SimulationConfig sim;
  sim.grid_side = cfg.get_int("sim.grid_side", 20);
  sim.item_subsample = cfg.get_int("sim.item_subsample", 0);
  sim.users = cfg.get_int("sim.users", 25);
  sim.C_true = cfg.get_int("sim.C_true", 5);
  sim.s_t = cfg.get_double("sim.s_t", 1.0);
  sim.s_v = cfg.get_double_list("sim.s_v");
  sim.s_v_min = cfg.get_double("sim.s_v_min", 0.0);
  sim.s_v_max = cfg.get_double("sim.s_v_max", 0.0);
  sim.s_w = cfg.get_double("sim.s_w", 1.0);
  sim.pairs = cfg.get_int("sim.pairs", 900);
  sim.seed = cfg.get_uint64("seed", 0);
  sim.validate();

  fs::create_directories(out_dir);
  const PreferenceDataset ds = simulate_crowd(sim);
  save_csv(ds, out_dir);
  echo_config(cfg, out_dir);
  std::cout << "simulated " << ds.num_items() << " items, " << ds.num_users()
            << " users, " << ds.pairs.size() << " pairs -> " << out_dir
            << "\n";
  return 0;
}

int cmd_train(const std::string& model, const std::string& data_dir,
              const std::string& config_path, const std::string& out_dir,
              std::optional<uint64_t> seed_override) {
  Config cfg = config_path.empty() ? Config() : Config::load(config_path);
  cfg.require_known(kTrainKeys);
  if (seed_override) cfg.set("seed", std::to_string(*seed_override));
  const uint64_t seed = cfg.get_uint64("seed", 0);

  PreferenceDataset ds = load_data_dir(data_dir);
  const SviSchedule schedule = schedule_from_config(cfg, seed);
  const KernelConfig item_kernel = kernel_from_config(cfg, "kernel", ds.items);
  const int m_items =
      cfg.get_int("inducing.items", std::min<int>(100, ds.num_items()));
  const InducingSet item_inducing = select_inducing(ds.items, m_items, seed);

  fs::create_directories(out_dir);
  const std::string model_path = (fs::path(out_dir) / "model.json").string();

  if (model == "gppl") {
    const double alpha0 = cfg.get_double("hyper.alpha0", 1.0);
    const double beta0 = cfg.get_double("hyper.beta0", 100.0);
    const GpplState st =
        gppl_fit(ds, item_kernel, item_inducing, alpha0, beta0, schedule);
    save_model(st, model_path);
    write_elbo_trace(st.elbo_trace, out_dir);
  } else if (model == "crowd") {
    CrowdHyperparams hyper;
    hyper.alpha0_t = cfg.get_double("hyper.alpha0_t", 1.0);
    hyper.beta0_t = cfg.get_double("hyper.beta0_t", 100.0);
    hyper.alpha0_v = cfg.get_double("hyper.alpha0_v", 1.0);
    hyper.beta0_v = cfg.get_double("hyper.beta0_v", 100.0);
    hyper.alpha0_w = cfg.get_double("hyper.alpha0_w", 1.0);
    hyper.beta0_w = cfg.get_double("hyper.beta0_w", 10.0);
    hyper.C = cfg.get_int("model.C", 20);
    hyper.user_kernel_split = cfg.get_int("model.user_kernel_split", -1);

    KernelConfig user_kernel = KernelConfig::identity();
    InducingSet user_inducing;
    if (hyper.resolved_split(ds.users.rows() > 0) > 0) {
      user_kernel = kernel_from_config(cfg, "user_kernel", ds.users);
      const int m_users =
          cfg.get_int("inducing.users", std::min<int>(100, ds.num_users()));
      user_inducing = select_inducing(ds.users, m_users, seed);
    }
    const CrowdState st = crowd_fit(ds, item_kernel, user_kernel,
                                    item_inducing, user_inducing, hyper,
                                    schedule);
    save_model(st, model_path);
    write_elbo_trace(st.elbo_trace, out_dir);
  } else if (model == "gppl-per-user") {
    const double alpha0 = cfg.get_double("hyper.alpha0", 1.0);
    const double beta0 = cfg.get_double("hyper.beta0", 100.0);
    const int users = ds.num_users();
    std::vector<GpplState> states;
    std::vector<double> merged_trace;
    for (int u = 0; u < users; ++u) {
      PreferenceDataset sub;
      sub.items = ds.items;
      for (const PairwiseLabel& p : ds.pairs) {
        if (p.user == u) sub.pairs.push_back({0, p.item_a, p.item_b, p.y});
      }
      if (sub.pairs.empty()) {
        states.push_back(
            gppl_init(sub, item_kernel, item_inducing, alpha0, beta0));
        states.back().K_nm.resize(0, 0);
        states.back().A.resize(0, 0);
      } else {
        states.push_back(gppl_fit(sub, item_kernel, item_inducing, alpha0,
                                  beta0, schedule));
        for (double v : states.back().elbo_trace) merged_trace.push_back(v);
      }
    }
    save_model(states, model_path);
    write_elbo_trace(merged_trace, out_dir);
  } else {
    throw InvalidConfigError("unknown model: " + model +
                             " (expected gppl, crowd or gppl-per-user)");
  }
  echo_config(cfg, out_dir);
  std::cout << "trained " << model << " -> " << model_path << "\n";
  return 0;
}

void write_pair_probs(const std::vector<PairwiseLabel>& pairs,
                      const Eigen::VectorXd& probs,
                      const std::string& out_dir) {
  std::ofstream out(fs::path(out_dir) / "probabilities.csv");
  out << "user_id,item_a,item_b,probability\n";
  out.precision(17);
  for (size_t i = 0; i < pairs.size(); ++i) {
    out << pairs[i].user << "," << pairs[i].item_a << "," << pairs[i].item_b
        << "," << probs[static_cast<Eigen::Index>(i)] << "\n";
  }
}

int cmd_predict(const std::string& model_path, const std::string& items_csv,
                const std::string& users_csv, const std::string& pairs_csv,
                const std::string& out_dir) {
  PreferenceDataset ds =
      load_csv(items_csv, users_csv,
               pairs_csv.empty() ? std::string() : pairs_csv);
  fs::create_directories(out_dir);
  std::ofstream util(fs::path(out_dir) / "utilities.csv");
  util.precision(17);

  const ModelKind kind = peek_model_kind(model_path);
  if (kind == ModelKind::Gppl) {
    const GpplState st = load_gppl(model_path);
    const GpplPrediction pred = gppl_predict(st, ds.items);
    util << "item,utility,variance\n";
    for (Eigen::Index i = 0; i < pred.mean.size(); ++i) {
      util << i << "," << pred.mean[i] << "," << pred.cov(i, i) << "\n";
    }
    if (!ds.pairs.empty()) {
      write_pair_probs(ds.pairs, gppl_predict_pairs(st, ds.items, ds.pairs),
                       out_dir);
    }
  } else if (kind == ModelKind::Crowd) {
    const CrowdState st = load_crowd(model_path);
    if (st.user_kernel_split > 0 && ds.users.rows() == 0) {
      throw InvalidInputError(
          "predict: this model requires user features (users.csv)");
    }
    const int users = std::max<int>(st.num_users,
                                    static_cast<int>(ds.users.rows()));
    std::vector<int> indices(static_cast<size_t>(users));
    for (int u = 0; u < users; ++u) {
      indices[static_cast<size_t>(u)] = u < st.num_users ? u : -1;
    }
    const CrowdPrediction pred =
        crowd_predict(st, ds.items, ds.users, indices);
    util << "item";
    for (int u = 0; u < pred.F.cols(); ++u) util << ",user_" << u;
    util << ",consensus\n";
    for (Eigen::Index i = 0; i < pred.F.rows(); ++i) {
      util << i;
      for (Eigen::Index u = 0; u < pred.F.cols(); ++u) {
        util << "," << pred.F(i, u);
      }
      util << "," << pred.t_mean[i] << "\n";
    }
    if (!ds.pairs.empty()) {
      write_pair_probs(
          ds.pairs,
          crowd_predict_pairs(st, ds.items, ds.users, indices, ds.pairs),
          out_dir);
    }
  } else {
    const std::vector<GpplState> states = load_gppl_per_user(model_path);
    if (states.empty()) throw LoadError("per-user model holds no users");
    Eigen::MatrixXd f(ds.items.rows(), static_cast<Eigen::Index>(states.size()));
    for (size_t u = 0; u < states.size(); ++u) {
      f.col(static_cast<Eigen::Index>(u)) =
          gppl_predict(states[u], ds.items).mean;
    }
    const Eigen::VectorXd consensus = per_user_consensus(f);
    util << "item";
    for (size_t u = 0; u < states.size(); ++u) util << ",user_" << u;
    util << ",consensus\n";
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      util << i;
      for (Eigen::Index u = 0; u < f.cols(); ++u) util << "," << f(i, u);
      util << "," << consensus[i] << "\n";
    }
    if (!ds.pairs.empty()) {
      Eigen::VectorXd probs(static_cast<Eigen::Index>(ds.pairs.size()));
      for (size_t i = 0; i < ds.pairs.size(); ++i) {
        const PairwiseLabel& p = ds.pairs[i];
        if (p.user < 0 || p.user >= static_cast<int>(states.size())) {
          throw InvalidInputError("predict: pair references unknown user " +
                                  std::to_string(p.user));
        }
        probs[static_cast<Eigen::Index>(i)] =
            gppl_predict_pairs(states[static_cast<size_t>(p.user)], ds.items,
                               {p})[0];
      }
      write_pair_probs(ds.pairs, probs, out_dir);
    }
  }
  std::cout << "predictions written to " << out_dir << "\n";
  return 0;
}

std::vector<double> read_column(const std::string& path, int column,
                                bool skip_header) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open file: " + path);
  std::vector<double> out;
  std::string line;
  bool first = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (first && skip_header) {
      first = false;
      continue;
    }
    first = false;
    std::istringstream row(line);
    std::string cell;
    for (int c = 0; c <= column; ++c) {
      if (!std::getline(row, cell, ',')) {
        throw LoadError(path + ":" + std::to_string(lineno) +
                        ": missing column " + std::to_string(column));
      }
    }
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw LoadError(path + ":" + std::to_string(lineno) +
                      ": not a number: " + cell);
    }
  }
  return out;
}

int cmd_evaluate(const std::string& pred_path, const std::string& gold_path,
                 const std::string& out_dir, const std::string& run_id,
                 const std::string& method, bool as_scores) {
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "metrics.csv");
  out << "run_id,method,metric,value\n";
  out.precision(17);
  if (as_scores) {
    // Ranking comparison: one score column per file (last column).
    const std::vector<double> pred = read_column(pred_path, 1, true);
    const std::vector<double> gold = read_column(gold_path, 1, true);
    const Eigen::Map<const Eigen::VectorXd> p(pred.data(),
                                              static_cast<Eigen::Index>(pred.size()));
    const Eigen::Map<const Eigen::VectorXd> g(gold.data(),
                                              static_cast<Eigen::Index>(gold.size()));
    out << run_id << "," << method << ",kendall_tau," << kendall_tau(p, g)
        << "\n";
    out << run_id << "," << method << ",pearson,"
        << pearson_correlation(p, g) << "\n";
  } else {
    // Pairwise comparison: probabilities.csv vs pairs.csv labels.
    const std::vector<double> pred = read_column(pred_path, 3, true);
    const std::vector<double> gold = read_column(gold_path, 3, true);
    if (pred.size() != gold.size()) {
      throw InvalidInputError("evaluate: prediction and gold row counts differ");
    }
    Eigen::VectorXd p(static_cast<Eigen::Index>(pred.size()));
    Eigen::VectorXi y(static_cast<Eigen::Index>(gold.size()));
    for (size_t i = 0; i < pred.size(); ++i) {
      p[static_cast<Eigen::Index>(i)] = pred[i];
      y[static_cast<Eigen::Index>(i)] = gold[i] > 0.5 ? 1 : 0;
    }
    out << run_id << "," << method << ",accuracy," << accuracy(p, y) << "\n";
    out << run_id << "," << method << ",cross_entropy," << cross_entropy(p, y)
        << "\n";
  }
  std::cout << "metrics written to " << out_dir << "\n";
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out_dir,
              std::optional<uint64_t> seed_override) {
  Config cfg = Config::load(config_path);
  cfg.require_known(kBenchKeys);
  if (seed_override) cfg.set("seed", std::to_string(*seed_override));
  const uint64_t seed = cfg.get_uint64("seed", 0);

  const std::string model = cfg.get_string("bench.model", "gppl");
  const std::string sweep = cfg.get_string("bench.sweep", "P");
  std::vector<double> values = cfg.get_double_list("bench.values");
  if (values.empty()) values = {900, 1800, 3600};
  const int base_items = cfg.get_int("bench.items", 100);
  const int base_users = cfg.get_int("bench.users", 25);
  const int base_pairs = cfg.get_int("bench.pairs", 900);
  const int iterations = cfg.get_int("bench.iterations", 10);
  const int m_items = cfg.get_int("inducing.items", 50);
  const int m_users = cfg.get_int("inducing.users", 25);
  const int batch = cfg.get_int("svi.batch_size", 512);
  const int comps = cfg.get_int("model.C", 5);

  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "timings.csv");
  out << "sweep,value,iterations,init_ms,wall_ms_per_iter,state_bytes\n";

  using clock = std::chrono::steady_clock;
  for (double value : values) {
    int items = base_items, users = base_users, pairs = base_pairs;
    int m = m_items;
    if (sweep == "P") {
      pairs = static_cast<int>(value);
    } else if (sweep == "N") {
      items = static_cast<int>(value);
    } else if (sweep == "M") {
      m = static_cast<int>(value);
    } else {
      throw InvalidConfigError("bench.sweep must be P, N or M");
    }

    SimulationConfig sim;
    sim.grid_side = static_cast<int>(std::ceil(std::sqrt(items)));
    sim.item_subsample = items;
    sim.users = users;
    sim.C_true = 3;
    sim.s_v = {1.0, 1.0, 1.0};
    sim.pairs = pairs;
    sim.seed = seed;
    const PreferenceDataset ds = simulate_crowd(sim);

    const KernelConfig kernel =
        KernelConfig::matern32(median_heuristic(ds.items));
    const InducingSet inducing = select_inducing(ds.items, m, seed);
    SviSchedule schedule;
    schedule.batch_size = batch;
    schedule.max_iterations = iterations;
    schedule.convergence_tol = 0.0;
    schedule.track_elbo = false;
    schedule.seed = seed;

    double init_ms = 0.0, per_iter_ms = 0.0;
    std::size_t state_bytes = 0;
    if (model == "gppl") {
      auto t0 = clock::now();
      GpplState warm = gppl_init(ds, kernel, inducing, 1.0, 100.0);
      auto t1 = clock::now();
      init_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      (void)warm;
      t0 = clock::now();
      const GpplState st =
          gppl_fit(ds, kernel, inducing, 1.0, 100.0, schedule);
      t1 = clock::now();
      const double fit_ms =
          std::chrono::duration<double, std::milli>(t1 - t0).count();
      per_iter_ms = std::max(fit_ms - init_ms, 0.0) / iterations;
      state_bytes = st.persistent_bytes();
    } else if (model == "crowd") {
      CrowdHyperparams hyper;
      hyper.C = comps;
      hyper.beta0_w = 10.0;
      const KernelConfig user_kernel =
          KernelConfig::matern32(median_heuristic(ds.users));
      const InducingSet user_inducing =
          select_inducing(ds.users, m_users, seed);
      auto t0 = clock::now();
      CrowdState warm = crowd_init(ds, kernel, user_kernel, inducing,
                                   user_inducing, hyper, seed);
      auto t1 = clock::now();
      init_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      (void)warm;
      t0 = clock::now();
      const CrowdState st = crowd_fit(ds, kernel, user_kernel, inducing,
                                      user_inducing, hyper, schedule);
      t1 = clock::now();
      const double fit_ms =
          std::chrono::duration<double, std::milli>(t1 - t0).count();
      per_iter_ms = std::max(fit_ms - init_ms, 0.0) / iterations;
      state_bytes = st.persistent_bytes();
    } else {
      throw InvalidConfigError("bench.model must be gppl or crowd");
    }
    out << sweep << "," << value << "," << iterations << "," << init_ms << ","
        << per_iter_ms << "," << state_bytes << "\n";
    out.flush();
  }
  echo_config(cfg, out_dir);
  std::cout << "timings written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scalable Bayesian pairwise preference learning"};
  app.require_subcommand(1);

  std::string config_path, out_dir, model, data_dir, model_path;
  std::string items_csv, users_csv, pairs_csv;
  std::string pred_path, gold_path, run_id = "run", method = "model";
  bool as_scores = false;
  std::optional<uint64_t> seed;
  int threads = 0;

  app.add_option("--threads", threads, "Eigen thread count (0 = default)");

  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic crowd");
  sim->add_option("--config", config_path, "Run configuration")->required();
  sim->add_option("--out", out_dir, "Output directory")->required();
  sim->add_option("--seed", seed, "Override the config seed");

  CLI::App* train = app.add_subcommand("train", "Fit a model");
  train->add_option("--model", model, "gppl | crowd | gppl-per-user")
      ->required();
  train->add_option("--data", data_dir, "Data directory")->required();
  train->add_option("--config", config_path, "Run configuration");
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--seed", seed, "Override the config seed");

  CLI::App* predict = app.add_subcommand("predict", "Predict with a model");
  predict->add_option("--model-file", model_path, "Serialized model")
      ->required();
  predict->add_option("--items", items_csv, "items.csv")->required();
  predict->add_option("--users", users_csv, "users.csv");
  predict->add_option("--pairs", pairs_csv, "pairs.csv to score");
  predict->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score predictions");
  evaluate->add_option("--predictions", pred_path, "Predictions CSV")
      ->required();
  evaluate->add_option("--gold", gold_path, "Gold CSV")->required();
  evaluate->add_option("--out", out_dir, "Output directory")->required();
  evaluate->add_option("--run-id", run_id, "Run identifier column");
  evaluate->add_option("--method", method, "Method column");
  evaluate->add_flag("--scores", as_scores,
                     "Compare score columns (rank metrics) instead of pairs");

  CLI::App* bench = app.add_subcommand("bench", "Per-iteration timings");
  bench->add_option("--config", config_path, "Run configuration")->required();
  bench->add_option("--out", out_dir, "Output directory")->required();
  bench->add_option("--seed", seed, "Override the config seed");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) Eigen::setNbThreads(threads);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out_dir, seed);
    if (train->parsed()) {
      return cmd_train(model, data_dir, config_path, out_dir, seed);
    }
    if (predict->parsed()) {
      return cmd_predict(model_path, items_csv, users_csv, pairs_csv, out_dir);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(pred_path, gold_path, out_dir, run_id, method,
                          as_scores);
    }
    if (bench->parsed()) return cmd_bench(config_path, out_dir, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    write_failed_marker(out_dir, e.what());
    return 1;
  }
  return 1;
}

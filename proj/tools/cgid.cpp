// Command-line front end: signal generation, filament simulation, model
// fitting and evaluation, kernel export and the two experiment sweeps.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "cgid/experiments.hpp"
#include "cgid/io.hpp"
#include "cgid/synthetic.hpp"

namespace {

using namespace cgid;

template <class Write>
void write_text_file(const std::string& path, Write&& write) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write(out);
  if (!out.flush()) throw std::runtime_error("write to '" + path + "' failed");
}

void add_train_options(CLI::App* cmd, TrainConfig& train) {
  cmd->add_option("--epochs", train.epochs, "Maximum Adam epochs")->capture_default_str();
  cmd->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--tolerance", train.tolerance, "Relative loss-change stopping tolerance")->capture_default_str();
  cmd->add_option("--patience", train.patience, "Epoch window for the stopping rule")->capture_default_str();
}

// ---------------------------------------------------------------------------

struct ParamCountArgs {
  std::size_t n = 16;
  int d = 2;
  int k = 1;
  std::size_t leaf = 2;
  std::string repr = "hierarchical";
};

void run_param_count(const ParamCountArgs& a) {
  const KernelSpec spec{parse_repr(a.repr), a.d, a.n, a.k, a.leaf};
  const std::size_t count = param_count(spec);
  std::cout << "count: " << count << '\n';
  if (spec.repr == Repr::hierarchical)
    std::cout << "closed_form_bound: " << param_bound_closed_form(log2_exact(a.n), a.d, a.k) << '\n';
}

struct GenSignalArgs {
  std::string kind = "drive";
  std::size_t len = 0;
  std::uint64_t seed = 0;
  double sigma = 1.0;
  double cutoff = 0.05;
  double lo = 0.0;
  double hi = 1.5;
  double rate = 750.0;
  std::string out;
};

void run_gen_signal(const GenSignalArgs& a) {
  SignalSeries s;
  if (a.kind == "white")
    s = white_noise(a.len, a.sigma, a.seed, a.rate);
  else if (a.kind == "lowpass")
    s = lowpass_noise(a.len, a.cutoff, a.seed, a.rate);
  else if (a.kind == "drive")
    s = filament_drive(a.len, a.seed, a.lo, a.hi, a.cutoff, a.rate);
  else
    throw std::invalid_argument("unknown signal kind '" + a.kind + "'");
  write_signal_file(a.out, s);
}

struct SimulateArgs {
  std::string signal;
  std::string params;
  int substeps = 8;
  std::string out;
  std::string temperature_out;
};

void run_simulate(const SimulateArgs& a) {
  const SignalSeries v = read_signal_file(a.signal);
  const FilamentParams p = a.params.empty() ? FilamentParams{} : read_filament_params_file(a.params);
  const FilamentTrace tr = simulate_filament(v, p, a.substeps);
  write_dataset_file(a.out, make_dataset(v, tr.luminosity, 0));
  if (!a.temperature_out.empty()) write_signal_file(a.temperature_out, tr.temperature);
  if (tr.clamp_count > 0) std::cerr << "note: temperature clamped at zero " << tr.clamp_count << " times\n";
}

struct FitArgs {
  std::string data;
  std::string spec;
  std::string heldout;
  std::string out;
  std::string history;
  TrainConfig train;
};

void run_fit(FitArgs a) {
  const ModelSpec spec = read_model_spec_file(a.spec);
  const Dataset data = read_dataset_file(a.data);
  std::optional<Dataset> held;
  if (!a.heldout.empty()) held = read_dataset_file(a.heldout);
  a.train.validate();
  const FitResult f = fit(spec, data, a.train, held ? &*held : nullptr);
  write_json_file(a.out, model_to_json(f.model));
  if (!a.history.empty())
    write_text_file(a.history, [&](std::ostream& os) { write_history_csv(os, f.training.history); });
  std::cout << "params: " << spec.param_count() << '\n'
            << "epochs: " << f.training.epochs_run << (f.training.converged ? " (converged)" : "") << '\n'
            << "loss: " << format_double(f.training.best_loss) << '\n'
            << "train_vaf: " << format_double(evaluate_vaf(f.model, data)) << '\n';
  if (f.heldout_vaf) std::cout << "heldout_vaf: " << format_double(*f.heldout_vaf) << '\n';
}

struct EvalArgs {
  std::string data;
  std::string model;
};

void run_eval(const EvalArgs& a) {
  const VolterraModel m = read_model_file(a.model);
  const Dataset d = read_dataset_file(a.data);
  std::cout << format_double(evaluate_vaf(m, d)) << '\n';
}

struct ExportKernelArgs {
  std::string model;
  int order = 2;
  std::string out;
};

void run_export_kernel(const ExportKernelArgs& a) {
  const VolterraModel m = read_model_file(a.model);
  if (a.order < 2 || a.order > m.max_order())
    throw std::invalid_argument("model has no kernel of order " + std::to_string(a.order));
  const Kernel& k = m.kernels[static_cast<std::size_t>(a.order - 2)];
  write_text_file(a.out, [&](std::ostream& os) { write_heatmap_csv(os, k); });
}

struct ExportOperatorArgs {
  std::size_t n = 16;
  std::string out;
};

void run_export_operator(const ExportOperatorArgs& a) {
  const IntegralOperator op = build_operator(a.n);
  write_text_file(a.out, [&](std::ostream& os) { write_heatmap_csv(os, op.matrix); });
}

struct SweepArgs {
  std::vector<double> sigmas{0.01, 0.03, 0.1, 0.3, 1.0};
  std::vector<std::string> classes{"toeplitz", "hierarchical", "dense"};
  SearchConfig search;
  std::string out;
};

void run_sweep(SweepArgs a) {
  std::vector<OperatorClass> classes;
  for (const auto& c : a.classes) classes.push_back(parse_operator_class(c));
  for (double s : a.sigmas)
    if (!(s >= 0)) throw std::invalid_argument("noise levels must be nonnegative");
  a.search.train.validate();
  const auto rows = sweep(a.sigmas, classes, a.search);
  write_text_file(a.out, [&](std::ostream& os) { write_sweep_csv(os, rows); });
}

struct BudgetArgs {
  std::vector<std::size_t> budgets{750};
  std::vector<std::string> classes{"linear", "dense", "coarse"};
  BudgetConfig config;
  std::vector<double> linear_l2, dense_l2, coarse_l2;
  std::string out;
};

void run_budget(BudgetArgs a) {
  std::vector<ModelClass> classes;
  for (const auto& c : a.classes) classes.push_back(parse_model_class(c));
  if (!a.linear_l2.empty()) a.config.l2_grid[ModelClass::linear] = a.linear_l2;
  if (!a.dense_l2.empty()) a.config.l2_grid[ModelClass::dense] = a.dense_l2;
  if (!a.coarse_l2.empty()) a.config.l2_grid[ModelClass::coarse] = a.coarse_l2;
  if (!is_pow2(a.config.memory)) throw std::invalid_argument("memory must be a power of two");
  a.config.train.validate();
  const auto curve = budget_curve(a.budgets, classes, a.config);
  write_text_file(a.out, [&](std::ostream& os) { write_budget_csv(os, curve.rows); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-grained Volterra system identification"};
  app.require_subcommand(1);

  ParamCountArgs pc;
  auto* cmd = app.add_subcommand("param-count", "Print the parameter count of a kernel shape");
  cmd->add_option("--n", pc.n, "Kernel side length")->capture_default_str();
  cmd->add_option("--d", pc.d, "Kernel order")->capture_default_str();
  cmd->add_option("--k", pc.k, "Off-diagonal block rank")->capture_default_str();
  cmd->add_option("--leaf", pc.leaf, "Leaf side length")->capture_default_str();
  cmd->add_option("--repr", pc.repr, "dense, hierarchical or toeplitz_sym")->capture_default_str();
  cmd->callback([&] { run_param_count(pc); });

  GenSignalArgs gs;
  cmd = app.add_subcommand("gen-signal", "Write an excitation signal CSV");
  cmd->add_option("--kind", gs.kind, "white, lowpass or drive")->capture_default_str();
  cmd->add_option("--len", gs.len, "Number of samples")->required();
  cmd->add_option("--seed", gs.seed, "Random seed")->required();
  cmd->add_option("--sigma", gs.sigma, "Standard deviation (white)")->capture_default_str();
  cmd->add_option("--cutoff", gs.cutoff, "Normalized cutoff (lowpass, drive)")->capture_default_str();
  cmd->add_option("--lo", gs.lo, "Lower clip level (drive)")->capture_default_str();
  cmd->add_option("--hi", gs.hi, "Upper clip level (drive)")->capture_default_str();
  cmd->add_option("--rate", gs.rate, "Sample rate in Hz")->capture_default_str();
  cmd->add_option("--out", gs.out, "Output signal CSV")->required();
  cmd->callback([&] { run_gen_signal(gs); });

  SimulateArgs sim;
  cmd = app.add_subcommand("simulate-filament", "Drive the filament model with a voltage signal");
  cmd->add_option("--signal", sim.signal, "Voltage signal CSV")->required();
  cmd->add_option("--params", sim.params, "Filament parameter JSON (defaults if omitted)");
  cmd->add_option("--substeps", sim.substeps, "RK4 steps per sample")->capture_default_str();
  cmd->add_option("--out", sim.out, "Output dataset CSV (input,output)")->required();
  cmd->add_option("--temperature-out", sim.temperature_out, "Optional temperature signal CSV");
  cmd->callback([&] { run_simulate(sim); });

  FitArgs ft;
  cmd = app.add_subcommand("fit", "Fit a Volterra model to a dataset");
  cmd->add_option("--data", ft.data, "Training dataset CSV")->required();
  cmd->add_option("--model-spec", ft.spec, "Model shape JSON")->required();
  cmd->add_option("--heldout", ft.heldout, "Held-out dataset CSV");
  cmd->add_option("--l2", ft.train.l2, "L2 strength on kernels of order two and above")->capture_default_str();
  cmd->add_option("--seed", ft.train.seed, "Initialization seed")->required();
  cmd->add_option("--out", ft.out, "Output model JSON")->required();
  cmd->add_option("--history", ft.history, "Training history CSV");
  cmd->add_option("--heldout-every", ft.train.heldout_every, "Held-out scoring period")->capture_default_str();
  add_train_options(cmd, ft.train);
  cmd->callback([&] { run_fit(ft); });

  EvalArgs ev;
  cmd = app.add_subcommand("eval", "Print the VAF of a model on a dataset");
  cmd->add_option("--data", ev.data, "Dataset CSV")->required();
  cmd->add_option("--model", ev.model, "Model JSON")->required();
  cmd->callback([&] { run_eval(ev); });

  ExportKernelArgs ek;
  cmd = app.add_subcommand("export-kernel", "Write an order-2 kernel as an n x n CSV grid");
  cmd->add_option("--model", ek.model, "Model JSON")->required();
  cmd->add_option("--order", ek.order, "Kernel order")->capture_default_str();
  cmd->add_option("--out", ek.out, "Output CSV")->required();
  cmd->callback([&] { run_export_kernel(ek); });

  ExportOperatorArgs eo;
  cmd = app.add_subcommand("export-operator", "Write the discretized log-kernel operator as a CSV grid");
  cmd->add_option("--n", eo.n, "Basis count")->capture_default_str();
  cmd->add_option("--out", eo.out, "Output CSV")->required();
  cmd->callback([&] { run_export_operator(eo); });

  SweepArgs sw;
  cmd = app.add_subcommand("synth-sweep", "Training samples needed per operator class and noise level");
  cmd->add_option("--sigmas", sw.sigmas, "Noise levels")->delimiter(',')->capture_default_str();
  cmd->add_option("--classes", sw.classes, "dense, hierarchical, toeplitz")->delimiter(',')->capture_default_str();
  cmd->add_option("--target-vaf", sw.search.target_vaf, "Held-out VAF target (%)")->capture_default_str();
  cmd->add_option("--seed", sw.search.seed, "Experiment seed")->required();
  cmd->add_option("--repeats", sw.search.repeats, "Repeats per sample size")->capture_default_str();
  cmd->add_option("--n", sw.search.N, "Basis count")->capture_default_str();
  cmd->add_option("--cap", sw.search.cap, "Largest sample count tried")->capture_default_str();
  cmd->add_option("--heldout", sw.search.heldout_count, "Held-out sample count")->capture_default_str();
  cmd->add_option("--out", sw.out, "Output CSV")->required();
  add_train_options(cmd, sw.search.train);
  cmd->callback([&] { run_sweep(sw); });

  BudgetArgs bc;
  cmd = app.add_subcommand("budget-curve", "Held-out VAF per model class and training budget on filament data");
  cmd->add_option("--budgets", bc.budgets, "Training budgets in samples")->delimiter(',')->capture_default_str();
  cmd->add_option("--classes", bc.classes, "linear, dense, coarse")->delimiter(',')->capture_default_str();
  cmd->add_option("--seed", bc.config.seed, "Experiment seed")->required();
  cmd->add_option("--repeats", bc.config.repeats, "Independent recordings per cell")->capture_default_str();
  cmd->add_option("--memory", bc.config.memory, "Model memory in samples")->capture_default_str();
  cmd->add_option("--eval-samples", bc.config.eval_samples, "Validation and test length")->capture_default_str();
  cmd->add_option("--linear-l2", bc.linear_l2, "L2 grid for the linear class")->delimiter(',');
  cmd->add_option("--dense-l2", bc.dense_l2, "L2 grid for the dense class")->delimiter(',');
  cmd->add_option("--coarse-l2", bc.coarse_l2, "L2 grid for the coarse class")->delimiter(',');
  cmd->add_option("--out", bc.out, "Output CSV")->required();
  add_train_options(cmd, bc.config.train);
  cmd->callback([&] { run_budget(bc); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "cgid: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

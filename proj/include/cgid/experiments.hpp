#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cgid/filament.hpp"
#include "cgid/signals.hpp"
#include "cgid/synthetic.hpp"
#include "cgid/train.hpp"

namespace cgid {

/// Model families compared on filament data.
enum class ModelClass { linear, dense, coarse };

inline std::string to_string(ModelClass c) {
  switch (c) {
    case ModelClass::linear: return "linear";
    case ModelClass::dense: return "dense";
    case ModelClass::coarse: return "coarse";
  }
  return "?";
}

inline ModelClass parse_model_class(const std::string& s) {
  if (s == "linear") return ModelClass::linear;
  if (s == "dense") return ModelClass::dense;
  if (s == "coarse" || s == "hierarchical") return ModelClass::coarse;
  throw std::invalid_argument("unknown model class '" + s + "'");
}

/// Second-order model for the dense and coarse classes; the coarse kernel is
/// hierarchical with rank 1 and leaf size 2.
inline ModelSpec model_class_spec(ModelClass c, std::size_t memory, double sample_rate = 750.0) {
  ModelSpec spec{memory, sample_rate, {}};
  if (c == ModelClass::dense) spec.higher.push_back({Repr::dense, 2, memory});
  if (c == ModelClass::coarse) spec.higher.push_back({Repr::hierarchical, 2, memory, 1, 2});
  return spec;
}

struct BudgetConfig {
  std::size_t memory = 128;
  int repeats = 5;
  std::uint64_t seed = 1;
  std::size_t burn_in = 256;
  std::size_t eval_samples = 3000;  // 4 s at 750 Hz, for validation and for test
  FilamentParams plant{};
  double drive_lo = 0.0;
  double drive_hi = 1.5;
  std::map<ModelClass, std::vector<double>> l2_grid{
      {ModelClass::linear, {0.0}}, {ModelClass::dense, {1e-2, 1e-1, 1.0}}, {ModelClass::coarse, {1e-4, 1e-3, 1e-2}}};
  TrainConfig train = default_train();

  static TrainConfig default_train() {
    TrainConfig c;
    c.lr = 3e-3;
    c.epochs = 3000;
    return c;
  }

  const std::vector<double>& grid(ModelClass c) const {
    const auto it = l2_grid.find(c);
    if (it == l2_grid.end() || it->second.empty())
      throw std::invalid_argument("no L2 grid for class " + to_string(c));
    return it->second;
  }
};

/// One simulated recording: input V (shifted by the drive midpoint) and
/// luminosity, with `memory - 1` samples of history before the scored part.
inline Dataset filament_recording(std::size_t scored, std::uint64_t seed, const BudgetConfig& cfg) {
  const std::size_t total = cfg.burn_in + cfg.memory - 1 + scored;
  const SignalSeries drive = filament_drive(total, seed, cfg.drive_lo, cfg.drive_hi);
  const FilamentTrace trace = simulate_filament(drive, cfg.plant);
  const auto from = static_cast<std::ptrdiff_t>(cfg.burn_in);
  const double mid = 0.5 * (cfg.drive_lo + cfg.drive_hi);
  SignalSeries in{{drive.samples.begin() + from, drive.samples.end()}, drive.sample_rate};
  for (auto& v : in.samples) v -= mid;
  SignalSeries out{{trace.luminosity.samples.begin() + from, trace.luminosity.samples.end()}, drive.sample_rate};
  return make_dataset(std::move(in), std::move(out), cfg.memory);
}

/// First `scored` scored samples of `d`, with the output shifted by `offset`.
inline Dataset leading_part(const Dataset& d, std::size_t scored, double offset) {
  const std::size_t len = d.valid_start + scored;
  if (len > d.size()) throw std::invalid_argument("recording is shorter than the requested budget");
  SignalSeries in{{d.input.samples.begin(), d.input.samples.begin() + static_cast<std::ptrdiff_t>(len)},
                  d.input.sample_rate};
  SignalSeries out{{d.output.samples.begin(), d.output.samples.begin() + static_cast<std::ptrdiff_t>(len)},
                   d.output.sample_rate};
  for (auto& v : out.samples) v -= offset;
  Dataset r{std::move(in), std::move(out), d.valid_start};
  return r;
}

inline double scored_mean(const Dataset& d) {
  double s = 0.0;
  for (std::size_t t = d.valid_start; t < d.size(); ++t) s += d.output.samples[t];
  return s / static_cast<double>(d.valid_count());
}

struct BudgetCell {
  ModelClass cls;
  std::size_t budget;
  int repeat;
  double l2;
  double validation_vaf;
  double test_vaf;
};

struct BudgetRow {
  ModelClass cls;
  std::size_t budget;
  double median_vaf;
  double min_vaf;
  double max_vaf;
  double median_l2;
};

struct BudgetCurve {
  std::vector<BudgetRow> rows;    // budget outer, class inner
  std::vector<BudgetCell> cells;  // chosen L2 per (budget, class, repeat)
};

/// Trains every class at every budget on `repeats` independent recordings.
/// Each fit's L2 strength is the grid value with the best VAF on a separate
/// validation recording; the reported VAF is on a third, test recording.
/// Budget b uses the first b samples of repeat r's recording, so larger
/// budgets extend smaller ones.
inline BudgetCurve budget_curve(const std::vector<std::size_t>& budgets, const std::vector<ModelClass>& classes,
                                const BudgetConfig& cfg) {
  if (budgets.empty() || classes.empty()) throw std::invalid_argument("budget curve needs budgets and classes");
  if (cfg.repeats < 1) throw std::invalid_argument("budget curve needs at least one repeat");
  for (auto b : budgets)
    if (b == 0) throw std::invalid_argument("budgets must be positive");
  const std::size_t longest = *std::max_element(budgets.begin(), budgets.end());

  std::vector<Dataset> recordings;
  for (int r = 0; r < cfg.repeats; ++r)
    recordings.push_back(
        filament_recording(longest, detail::mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(r)), cfg));
  const Dataset validation_raw = filament_recording(cfg.eval_samples, detail::mix_seed(cfg.seed, 1), cfg);
  const Dataset test_raw = filament_recording(cfg.eval_samples, detail::mix_seed(cfg.seed, 2), cfg);

  BudgetCurve curve;
  for (auto budget : budgets) {
    for (auto cls : classes) {
      const ModelSpec spec = model_class_spec(cls, cfg.memory, validation_raw.input.sample_rate);
      std::vector<double> vafs, l2s;
      for (int r = 0; r < cfg.repeats; ++r) {
        const Dataset& rec = recordings[static_cast<std::size_t>(r)];
        const double offset = scored_mean(leading_part(rec, budget, 0.0));
        const Dataset train = leading_part(rec, budget, offset);
        const Dataset validation = leading_part(validation_raw, cfg.eval_samples, offset);
        const Dataset test = leading_part(test_raw, cfg.eval_samples, offset);

        std::optional<BudgetCell> best;
        for (double l2 : cfg.grid(cls)) {
          TrainConfig tc = cfg.train;
          tc.l2 = l2;
          tc.seed = detail::mix_seed(cfg.seed, 200 + static_cast<std::uint64_t>(r));
          const FitResult f = fit(spec, train, tc);
          const double v = evaluate_vaf(f.model, validation);
          if (!best || v > best->validation_vaf) best = BudgetCell{cls, budget, r, l2, v, evaluate_vaf(f.model, test)};
        }
        curve.cells.push_back(*best);
        vafs.push_back(best->test_vaf);
        l2s.push_back(best->l2);
      }
      curve.rows.push_back({cls, budget, median(vafs), *std::min_element(vafs.begin(), vafs.end()),
                            *std::max_element(vafs.begin(), vafs.end()), median(l2s)});
    }
  }
  return curve;
}

inline void write_budget_csv(std::ostream& out, const std::vector<BudgetRow>& rows) {
  out << "class,budget,median_vaf,min_vaf,max_vaf,median_lambda\n";
  for (const auto& r : rows)
    out << to_string(r.cls) << ',' << r.budget << ',' << format_double(r.median_vaf) << ','
        << format_double(r.min_vaf) << ',' << format_double(r.max_vaf) << ',' << format_double(r.median_l2) << '\n';
}

}  // namespace cgid

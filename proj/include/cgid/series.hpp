#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgid {

/// Uniformly sampled scalar time series.
struct SignalSeries {
  std::vector<double> samples;
  double sample_rate = 750.0;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

inline void require_finite(const SignalSeries& s, const char* what) {
  for (std::size_t i = 0; i < s.samples.size(); ++i)
    if (!std::isfinite(s.samples[i]))
      throw std::invalid_argument(std::string(what) + ": non-finite sample at index " + std::to_string(i));
}

/// Paired input/output recording. Outputs before `valid_start` are warm-up
/// samples whose input history is incomplete.
struct Dataset {
  SignalSeries input;
  SignalSeries output;
  std::size_t valid_start = 0;

  std::size_t size() const { return input.samples.size(); }
  std::size_t valid_count() const { return size() > valid_start ? size() - valid_start : 0; }
};

inline Dataset make_dataset(SignalSeries input, SignalSeries output, std::size_t memory) {
  if (input.size() != output.size())
    throw std::invalid_argument("dataset input and output lengths differ (" + std::to_string(input.size()) +
                                " vs " + std::to_string(output.size()) + ")");
  require_finite(input, "dataset input");
  require_finite(output, "dataset output");
  Dataset d{std::move(input), std::move(output), memory == 0 ? 0 : memory - 1};
  return d;
}

// ---------------------------------------------------------------------------
// CSV. Files start with a "# sample_rate=<hz>" line, then a header row, then
// one row per sample. Values are written with 17 significant digits so a
// read-back reproduces every double exactly.

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline double parse_double(const std::string& text, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": cannot parse number '" + text + "'");
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used != text.size())
    throw std::runtime_error("line " + std::to_string(line_no) + ": trailing characters in '" + text + "'");
  if (!std::isfinite(v))
    throw std::runtime_error("line " + std::to_string(line_no) + ": non-finite value '" + text + "'");
  return v;
}

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

/// Reads the metadata line, the header (checked against `columns`) and the
/// numeric rows.
inline std::vector<std::vector<double>> read_table(std::istream& in, const std::vector<std::string>& columns,
                                                   double& sample_rate) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw std::runtime_error("empty file");
  ++line_no;
  strip_cr(line);
  const std::string key = "# sample_rate=";
  if (line.rfind(key, 0) != 0) throw std::runtime_error("line 1: expected '# sample_rate=<hz>'");
  sample_rate = parse_double(line.substr(key.size()), line_no);
  if (!(sample_rate > 0)) throw std::runtime_error("line 1: sample rate must be positive");

  if (!std::getline(in, line)) throw std::runtime_error("missing header row");
  ++line_no;
  strip_cr(line);
  if (split_commas(line) != columns) {
    std::string want;
    for (const auto& c : columns) want += (want.empty() ? "" : ",") + c;
    throw std::runtime_error("line 2: expected header '" + want + "'");
  }

  std::vector<std::vector<double>> cols(columns.size());
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != columns.size())
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " + std::to_string(columns.size()) +
                               " columns, got " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) cols[c].push_back(parse_double(cells[c], line_no));
  }
  return cols;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

inline void write_signal_csv(std::ostream& out, const SignalSeries& s) {
  out << "# sample_rate=" << format_double(s.sample_rate) << "\nvalue\n";
  for (double x : s.samples) out << format_double(x) << '\n';
}

inline SignalSeries read_signal_csv(std::istream& in) {
  SignalSeries s;
  auto cols = detail::read_table(in, {"value"}, s.sample_rate);
  s.samples = std::move(cols[0]);
  return s;
}

inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << "# sample_rate=" << format_double(d.input.sample_rate) << "\ninput,output\n";
  for (std::size_t i = 0; i < d.size(); ++i)
    out << format_double(d.input.samples[i]) << ',' << format_double(d.output.samples[i]) << '\n';
}

/// The valid range is left at 0; callers set it from the model memory.
inline Dataset read_dataset_csv(std::istream& in) {
  double rate = 0.0;
  auto cols = detail::read_table(in, {"input", "output"}, rate);
  return Dataset{{std::move(cols[0]), rate}, {std::move(cols[1]), rate}, 0};
}

inline SignalSeries read_signal_file(const std::string& path) {
  auto in = detail::open_in(path);
  try {
    return read_signal_csv(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

inline Dataset read_dataset_file(const std::string& path) {
  auto in = detail::open_in(path);
  try {
    return read_dataset_csv(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

inline void write_signal_file(const std::string& path, const SignalSeries& s) {
  auto out = detail::open_out(path);
  write_signal_csv(out, s);
}

inline void write_dataset_file(const std::string& path, const Dataset& d) {
  auto out = detail::open_out(path);
  write_dataset_csv(out, d);
}

}  // namespace cgid

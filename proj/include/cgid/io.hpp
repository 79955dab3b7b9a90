#pragma once

// JSON files for kernels, models, model shapes and filament parameters.
// Every reader rejects unknown keys, wrong types and non-finite numbers with
// std::invalid_argument; the *_file variants prefix the message with the path.

#include <json.hpp>

#include <set>
#include <string>

#include "cgid/filament.hpp"
#include "cgid/kernel.hpp"
#include "cgid/volterra.hpp"

namespace cgid {

using Json = nlohmann::json;

namespace detail {

inline void require_object(const Json& j, const std::string& what, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument(what + " must be a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!keys.contains(key)) throw std::invalid_argument(what + ": unknown key '" + key + "'");
}

inline const Json& field(const Json& j, const char* key, const std::string& what) {
  const auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(what + ": missing key '" + key + "'");
  return *it;
}

inline double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw std::invalid_argument(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw std::invalid_argument(what + " must be finite");
  return v;
}

inline std::size_t count(const Json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0)
    throw std::invalid_argument(what + " must be a nonnegative integer");
  return j.get<std::size_t>();
}

inline int small_int(const Json& j, const std::string& what) {
  const std::size_t v = count(j, what);
  if (v > 64) throw std::invalid_argument(what + " is out of range");
  return static_cast<int>(v);
}

inline std::vector<double> numbers(const Json& j, const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument(what + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(number(v, what + " entry"));
  return out;
}

inline std::string text(const Json& j, const std::string& what) {
  if (!j.is_string()) throw std::invalid_argument(what + " must be a string");
  return j.get<std::string>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Kernels

inline Json kernel_to_json(const Kernel& k) {
  const KernelSpec s = spec_of(k);
  Json j{{"repr", to_string(s.repr)}, {"d", s.order}, {"n", s.side}};
  if (s.repr == Repr::hierarchical) {
    j["k"] = s.rank;
    j["leaf_size"] = s.leaf_size;
  }
  j["parameters"] = flatten(k);
  return j;
}

/// Shape fields of a kernel object. `default_side` fills in a missing "n".
inline KernelSpec kernel_spec_from_json(const Json& j, std::optional<std::size_t> default_side = std::nullopt) {
  const std::string what = "kernel";
  KernelSpec s;
  s.repr = parse_repr(detail::text(detail::field(j, "repr", what), "kernel repr"));
  s.order = detail::small_int(detail::field(j, "d", what), "kernel d");
  if (j.contains("n") || !default_side)
    s.side = detail::count(detail::field(j, "n", what), "kernel n");
  else
    s.side = *default_side;
  if (j.contains("k")) s.rank = detail::small_int(j["k"], "kernel k");
  if (j.contains("leaf_size")) s.leaf_size = detail::count(j["leaf_size"], "kernel leaf_size");
  validate(s);
  return s;
}

inline Kernel kernel_from_json(const Json& j) {
  detail::require_object(j, "kernel", {"repr", "d", "n", "k", "leaf_size", "parameters"});
  const KernelSpec s = kernel_spec_from_json(j);
  const auto params = detail::numbers(detail::field(j, "parameters", "kernel"), "kernel parameters");
  if (params.size() != param_count(s))
    throw std::invalid_argument("kernel has " + std::to_string(params.size()) + " parameters, expected " +
                                std::to_string(param_count(s)));
  return unflatten(params, s);
}

// ---------------------------------------------------------------------------
// Model shapes
//
//   {"n": 128, "sample_rate": 750,
//    "kernels": [{"repr": "hierarchical", "d": 2, "k": 1, "leaf_size": 2}]}
//
// Kernel entries list orders 2..D in sequence; "n" may be omitted inside them.

inline Json model_spec_to_json(const ModelSpec& spec) {
  Json kernels = Json::array();
  for (const auto& k : spec.higher) {
    Json e{{"repr", to_string(k.repr)}, {"d", k.order}};
    if (k.repr == Repr::hierarchical) {
      e["k"] = k.rank;
      e["leaf_size"] = k.leaf_size;
    }
    kernels.push_back(std::move(e));
  }
  return {{"n", spec.memory}, {"sample_rate", spec.sample_rate}, {"kernels", std::move(kernels)}};
}

inline ModelSpec model_spec_from_json(const Json& j) {
  detail::require_object(j, "model spec", {"n", "sample_rate", "max_order", "kernels"});
  ModelSpec spec;
  spec.memory = detail::count(detail::field(j, "n", "model spec"), "model spec n");
  if (j.contains("sample_rate")) spec.sample_rate = detail::number(j["sample_rate"], "model spec sample_rate");
  if (j.contains("kernels")) {
    if (!j["kernels"].is_array()) throw std::invalid_argument("model spec kernels must be an array");
    for (const auto& e : j["kernels"]) {
      detail::require_object(e, "model spec kernel", {"repr", "d", "n", "k", "leaf_size"});
      spec.higher.push_back(kernel_spec_from_json(e, spec.memory));
    }
  }
  if (j.contains("max_order") && detail::small_int(j["max_order"], "model spec max_order") != spec.max_order())
    throw std::invalid_argument("model spec max_order disagrees with its kernel list");
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Fitted models

inline Json model_to_json(const VolterraModel& m) {
  Json kernels = Json::array();
  for (const auto& k : m.kernels) kernels.push_back(kernel_to_json(k));
  return {{"n", m.memory},     {"max_order", m.max_order()}, {"sample_rate", m.sample_rate},
          {"h0", m.h0},        {"h1", m.h1},                 {"kernels", std::move(kernels)}};
}

inline VolterraModel model_from_json(const Json& j) {
  detail::require_object(j, "model", {"n", "max_order", "sample_rate", "h0", "h1", "kernels"});
  VolterraModel m;
  m.memory = detail::count(detail::field(j, "n", "model"), "model n");
  m.sample_rate = detail::number(detail::field(j, "sample_rate", "model"), "model sample_rate");
  m.h0 = detail::number(detail::field(j, "h0", "model"), "model h0");
  m.h1 = detail::numbers(detail::field(j, "h1", "model"), "model h1");
  const Json& kernels = detail::field(j, "kernels", "model");
  if (!kernels.is_array()) throw std::invalid_argument("model kernels must be an array");
  for (const auto& e : kernels) m.kernels.push_back(kernel_from_json(e));
  if (m.h1.size() != m.memory)
    throw std::invalid_argument("model h1 has length " + std::to_string(m.h1.size()) + ", expected n = " +
                                std::to_string(m.memory));
  if (j.contains("max_order") && detail::small_int(j["max_order"], "model max_order") != m.max_order())
    throw std::invalid_argument("model max_order disagrees with its kernel list");
  m.spec().validate();
  return m;
}

// ---------------------------------------------------------------------------
// Filament parameters; absent keys keep their defaults.

inline Json filament_params_to_json(const FilamentParams& p) {
  Json j{{"k1", p.k1}, {"k2", p.k2},           {"k3", p.k3},
         {"k4", p.k4}, {"R0", p.R0},           {"alpha_R", p.alpha_R},
         {"time_scale", p.time_scale}};
  if (p.T_init) j["T_init"] = *p.T_init;
  return j;
}

inline FilamentParams filament_params_from_json(const Json& j) {
  detail::require_object(j, "filament params", {"k1", "k2", "k3", "k4", "R0", "alpha_R", "time_scale", "T_init"});
  FilamentParams p;
  for (auto [key, slot] : {std::pair{"k1", &p.k1}, {"k2", &p.k2}, {"k3", &p.k3}, {"k4", &p.k4}, {"R0", &p.R0},
                           {"alpha_R", &p.alpha_R}, {"time_scale", &p.time_scale}})
    if (j.contains(key)) *slot = detail::number(j[key], std::string("filament ") + key);
  if (j.contains("T_init")) p.T_init = detail::number(j["T_init"], "filament T_init");
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Files

inline Json read_json_file(const std::string& path) {
  auto in = detail::open_in(path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(path + ": malformed JSON (byte " + std::to_string(e.byte) + ")");
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

template <class F>
auto read_json_as(const std::string& path, F&& convert) -> decltype(convert(std::declval<const Json&>())) {
  const Json j = read_json_file(path);
  try {
    return convert(j);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

inline VolterraModel read_model_file(const std::string& path) { return read_json_as(path, model_from_json); }
inline ModelSpec read_model_spec_file(const std::string& path) { return read_json_as(path, model_spec_from_json); }
inline FilamentParams read_filament_params_file(const std::string& path) {
  return read_json_as(path, filament_params_from_json);
}

}  // namespace cgid

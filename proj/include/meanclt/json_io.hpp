#pragma once

// JSON forms of the domain types and reports.
//   FourierFn   {"constant": c, "cos": [a_1..a_K], "sin": [b_1..b_K]}
//   ProcessSpec {"type": "doubling"}
//               {"type": "circle", "a": "sqrt2-1" | "golden" | number}
//               {"type": "iid"} or {"type": "iid", "law": {"kind": "rademacher"}}
//                 law kinds: rademacher, gaussian {"sd"}, discrete {"atoms", "probs"}
//               {"type": "chain", "P": [[...]], "values": [...]}
//   JointPmf    {"points": [[x_1..x_k], ...], "probs": [...]}

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "meanclt/bounds.hpp"
#include "meanclt/coefficients.hpp"
#include "meanclt/errors.hpp"
#include "meanclt/fourier.hpp"
#include "meanclt/processes.hpp"

namespace meanclt {

using Json = nlohmann::ordered_json;

namespace detail {

inline const Json& require_field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(where + ": missing field '" + key + "'");
  }
  return j.at(key);
}

template <class T>
T get_as(const Json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

// Non-finite doubles become null in JSON; readers map null back to +inf.
inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace detail

inline Json to_json(const FourierFn& f) {
  return Json{{"constant", f.constant()}, {"cos", f.cos_coeffs()}, {"sin", f.sin_coeffs()}};
}

inline FourierFn fourier_from_json(const Json& j, const std::string& where = "observable") {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  const double c = j.contains("constant") ? detail::get_as<double>(j.at("constant"), where + ".constant") : 0.0;
  auto a = j.contains("cos") ? detail::get_as<std::vector<double>>(j.at("cos"), where + ".cos")
                             : std::vector<double>{};
  auto b = j.contains("sin") ? detail::get_as<std::vector<double>>(j.at("sin"), where + ".sin")
                             : std::vector<double>{};
  const std::size_t K = std::max(a.size(), b.size());
  a.resize(K, 0.0);
  b.resize(K, 0.0);
  try {
    return FourierFn(c, std::move(a), std::move(b));
  } catch (const Error& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

inline Json to_json(const Rotation& r) {
  return Json{{"value", r.value()}, {"hi", r.hi()}, {"lo", r.lo()}};
}

inline Rotation rotation_from_json(const Json& j, const std::string& where) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "sqrt2-1") return Rotation::sqrt2_minus_1();
    if (name == "golden") return Rotation::golden();
    throw ValidationError(where + ": unknown rotation '" + name + "' (sqrt2-1, golden or a number)");
  }
  if (j.is_number()) return Rotation(j.get<double>());
  if (j.is_object() && j.contains("hi")) {
    return Rotation(detail::get_as<double>(j.at("hi"), where + ".hi"),
                    j.contains("lo") ? detail::get_as<double>(j.at("lo"), where + ".lo") : 0.0);
  }
  throw ValidationError(where + ": rotation must be a name, a number or {hi, lo}");
}

inline Json to_json(const MarginalLaw& law) {
  switch (law.kind) {
    case MarginalLaw::Kind::rademacher: return Json{{"kind", "rademacher"}};
    case MarginalLaw::Kind::gaussian: return Json{{"kind", "gaussian"}, {"sd", law.sd}};
    case MarginalLaw::Kind::discrete: {
      const auto a = law.pmf->atoms();
      const auto p = law.pmf->probs();
      return Json{{"kind", "discrete"},
                  {"atoms", std::vector<double>(a.begin(), a.end())},
                  {"probs", std::vector<double>(p.begin(), p.end())}};
    }
  }
  return Json{};
}

inline Json to_json(const ProcessSpec& spec) {
  struct {
    Json operator()(const DoublingMap&) const { return Json{{"type", "doubling"}}; }
    Json operator()(const CircleWalk& c) const { return Json{{"type", "circle"}, {"a", to_json(c.a)}}; }
    Json operator()(const FiniteChain& c) const {
      return Json{{"type", "chain"}, {"P", c.P}, {"values", c.values}};
    }
    Json operator()(const IIDLaw& l) const {
      Json j{{"type", "iid"}};
      if (l.law) j["law"] = to_json(*l.law);
      return j;
    }
  } visitor;
  return std::visit(visitor, spec);
}

inline ProcessSpec process_from_json(const Json& j, const std::string& where = "process") {
  const auto type = detail::get_as<std::string>(detail::require_field(j, "type", where), where + ".type");
  ProcessSpec spec;
  try {
    if (type == "doubling") {
      spec = DoublingMap{};
    } else if (type == "circle") {
      spec = CircleWalk{rotation_from_json(detail::require_field(j, "a", where), where + ".a")};
    } else if (type == "chain") {
      spec = make_chain(
          detail::get_as<std::vector<std::vector<double>>>(detail::require_field(j, "P", where), where + ".P"),
          detail::get_as<std::vector<double>>(detail::require_field(j, "values", where), where + ".values"));
    } else if (type == "iid") {
      IIDLaw l;
      if (j.contains("law")) {
        const Json& lj = j.at("law");
        const std::string lw = where + ".law";
        const auto kind = detail::get_as<std::string>(detail::require_field(lj, "kind", lw), lw + ".kind");
        MarginalLaw law;
        if (kind == "rademacher") {
          law.kind = MarginalLaw::Kind::rademacher;
        } else if (kind == "gaussian") {
          law.kind = MarginalLaw::Kind::gaussian;
          law.sd = detail::get_as<double>(detail::require_field(lj, "sd", lw), lw + ".sd");
        } else if (kind == "discrete") {
          law.kind = MarginalLaw::Kind::discrete;
          law.pmf = FinitePmf(
              detail::get_as<std::vector<double>>(detail::require_field(lj, "atoms", lw), lw + ".atoms"),
              detail::get_as<std::vector<double>>(detail::require_field(lj, "probs", lw), lw + ".probs"));
        } else {
          throw ValidationError(lw + ".kind: unknown law '" + kind + "'");
        }
        l.law = law;
      }
      spec = l;
    } else {
      throw ValidationError(where + ".type: unknown process '" + type + "'");
    }
    validate(spec);
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return spec;
}

inline Json to_json(const JointPmf& j) { return Json{{"points", j.points()}, {"probs", j.probs()}}; }

inline JointPmf joint_from_json(const Json& j, const std::string& where = "joint") {
  return JointPmf(
      detail::get_as<std::vector<std::vector<double>>>(detail::require_field(j, "points", where), where + ".points"),
      detail::get_as<std::vector<double>>(detail::require_field(j, "probs", where), where + ".probs"));
}

inline Json to_json(const Tolerance& t) {
  return Json{{"abs", t.abs_tol}, {"rel", t.rel_tol}, {"depth", t.max_depth}};
}

inline Tolerance tolerance_from_json(const Json& j, const std::string& where = "tolerance") {
  Tolerance t;
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  if (j.contains("abs")) t.abs_tol = detail::get_as<double>(j.at("abs"), where + ".abs");
  if (j.contains("rel")) t.rel_tol = detail::get_as<double>(j.at("rel"), where + ".rel");
  if (j.contains("depth")) t.max_depth = detail::get_as<int>(j.at("depth"), where + ".depth");
  try {
    t.validate();
  } catch (const Error& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline Json to_json(const MomentSummary& m) {
  return Json{{"sigma2", m.sigma2}, {"var0", m.var0},     {"abs3", m.abs3},
              {"lambda", m.lambda}, {"linf", detail::number(m.linf)}, {"linf_upper", detail::number(m.linf_upper)}};
}

inline Json to_json(const BoundReport& r) {
  Json terms = Json::object();
  for (const auto& t : r.terms) terms[t.name] = t.value;
  Json j{{"theorem", r.theorem}, {"n", r.n},         {"total", r.total},   {"terms", terms},
         {"m_cutoff", r.m_cutoff}, {"sigma", r.sigma}, {"lambda", r.lambda}, {"per_m", r.per_m}};
  if (!r.dprime_first.empty()) {
    j["dprime_first"] = r.dprime_first;
    j["dprime_second"] = r.dprime_second;
  }
  return j;
}

/// CSV row (n, total, term...) in the report's term order.
inline std::string bound_csv_row(const BoundReport& r) {
  std::string row = std::to_string(r.n);
  char buf[32];
  std::snprintf(buf, sizeof buf, ",%.17g", r.total);
  row += buf;
  for (const auto& t : r.terms) {
    std::snprintf(buf, sizeof buf, ",%.17g", t.value);
    row += buf;
  }
  return row;
}

inline Json to_json(const Thm23Report& r) {
  return Json{{"explicit_part", to_json(r.explicit_part)},
              {"square_dev", r.square_dev},
              {"j_norms", r.j_norms},
              {"j_sum", r.j_sum},
              {"L", r.L},
              {"note", "constants C, C_delta are not synthesised; total is the explicit series only"}};
}

inline Json to_json(const TrendVerdict& v) {
  return Json{{"ratio", detail::number(v.ratio)}, {"trend", trend_name(v.trend)}};
}

inline Json to_json(const MixingIntegralReport& r) {
  return Json{{"power", r.power},
              {"weight", r.weight},
              {"kmax_requested", r.kmax_requested},
              {"kmax_used", r.kmax_used},
              {"series", r.series},
              {"rearranged", r.rearranged},
              {"power_form", r.power_form},
              {"partial_sums", r.partial_sums},
              {"verdict", to_json(r.verdict)}};
}

inline Json to_json(const ThetaReport& r) {
  return Json{{"value", r.value}, {"argmax", r.argmax}, {"shapes", r.shapes}, {"window", r.window}};
}

inline Json to_json(const AlphaEstimate& a) {
  return Json{{"value", a.value},
              {"thresholds", a.thresholds},
              {"candidates", a.candidates},
              {"clipped", a.clipped},
              {"kind", "grid lower bound"}};
}

inline Json to_json(const CovarianceBoundReport& r) {
  Json j{{"lhs", r.lhs},
         {"alpha", r.alpha},
         {"alpha_unconditional", r.alpha_unconditional},
         {"rhs", r.rhs},
         {"holds", r.holds},
         {"ordering_holds", r.ordering_holds}};
  j["conditioning"] = r.conditioning ? Json(*r.conditioning) : Json(nullptr);
  return j;
}

inline Json to_json(const CorollaryReport& r) {
  return Json{{"lhs", r.lhs}, {"alpha", r.alpha}, {"rhs", r.rhs}, {"holds", r.holds}};
}

inline Json to_json(const DispersionReport& r) {
  return Json{{"holds", r.holds},
              {"zero_is_median", r.zero_is_median},
              {"equality_holds", r.equality_holds},
              {"worst_violation", r.worst_violation},
              {"probes", r.probes}};
}

inline Json to_json(const RateFit& r) {
  return Json{{"slope", r.slope}, {"intercept", r.intercept}, {"r2", r.r2}};
}

}  // namespace meanclt

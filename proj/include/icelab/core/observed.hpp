#pragma once

// What an analyst sees: assigned arm, observed cells with reason codes, and
// the ICE history on the assigned arm only. Estimators work from this view
// and never touch counterfactual trajectories.

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "icelab/core/model.hpp"

namespace icelab {

struct ObservedPatient {
  int id = 0;
  int arm = kControl;
  std::vector<ObservedCell> cells;  // visits 0..T
  std::vector<IceEvent> events;     // assigned arm only

  double baseline() const { return *cells.front().value; }
  int final_visit() const { return static_cast<int>(cells.size()) - 1; }
  bool operator==(const ObservedPatient& o) const {
    if (id != o.id || arm != o.arm || events != o.events || cells.size() != o.cells.size()) return false;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i].value != o.cells[i].value || !(cells[i].reason == o.cells[i].reason)) return false;
    return true;
  }
};

inline ObservedPatient observe(const PatientRecord& p) {
  if (p.observed.empty()) throw Error("patient " + std::to_string(p.id) + " has no observed data");
  return {p.id, p.assigned_arm, p.observed, p.events(p.assigned_arm)};
}

inline std::vector<ObservedPatient> observe(const std::vector<PatientRecord>& ps) {
  std::vector<ObservedPatient> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.push_back(observe(p));
  return out;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  double x = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw Error("malformed number '" + std::string(s) + "'");
  return x;
}

// ---------------------------------------------------------------------------
// Patient-level CSV. Column order is fixed:
//   replicate,patient,arm,visit,observed_value,missing_reason,ice_cause,ice_kind
// observed_value is NA when missing; events dated at the row's visit are
// listed in ice_cause/ice_kind, joined by ';' when several share a visit.

inline constexpr const char* kDatasetHeader = "replicate,patient,arm,visit,observed_value,missing_reason,ice_cause,ice_kind";

inline void write_dataset_csv(std::ostream& os, std::uint64_t replicate, const std::vector<ObservedPatient>& patients,
                              bool header = true) {
  if (header) os << kDatasetHeader << '\n';
  for (const auto& p : patients) {
    for (std::size_t v = 0; v < p.cells.size(); ++v) {
      const auto& cell = p.cells[v];
      std::string causes, kinds;
      for (const auto& e : p.events)
        if (e.visit == static_cast<int>(v)) {
          if (!causes.empty()) {
            causes += ';';
            kinds += ';';
          }
          causes += to_string(e.cause);
          kinds += to_string(e.kind);
        }
      os << replicate << ',' << p.id << ',' << p.arm << ',' << v << ','
         << (cell.value ? format_double(*cell.value) : "NA") << ',' << to_string(cell.reason) << ',' << causes << ','
         << kinds << '\n';
    }
  }
}

namespace detail {
inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}
}  // namespace detail

struct DatasetRows {
  std::map<std::uint64_t, std::vector<ObservedPatient>> by_replicate;
};

/// Inverse of write_dataset_csv. Withdrawal flags are recovered from the
/// reason codes of the cells the event made missing.
inline DatasetRows read_dataset_csv(std::istream& is) {
  DatasetRows out;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line) || line != kDatasetHeader) throw ParseError("expected dataset header", 1, 1);
  ++lineno;
  std::map<std::pair<std::uint64_t, int>, std::size_t> index;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = detail::split(line, ',');
    if (f.size() != 8) throw ParseError("expected 8 columns", lineno, 1);
    const auto rep = static_cast<std::uint64_t>(std::stoull(f[0]));
    const int id = std::stoi(f[1]);
    const int arm = std::stoi(f[2]);
    const int visit = std::stoi(f[3]);
    auto& vec = out.by_replicate[rep];
    auto key = std::make_pair(rep, id);
    if (!index.count(key)) {
      index[key] = vec.size();
      vec.push_back({id, arm, {}, {}});
    }
    auto& p = vec[index[key]];
    if (visit != static_cast<int>(p.cells.size())) throw ParseError("visits must be consecutive from 0", lineno, 1);
    ObservedCell cell;
    if (f[4] != "NA") cell.value = parse_double(f[4]);
    auto reason = parse_missing_reason(f[5]);
    if (!reason) throw ParseError("unknown missing_reason '" + f[5] + "'", lineno, 1);
    cell.reason = *reason;
    if (cell.missing() && cell.reason.kind == MissingReason::Kind::None)
      throw ParseError("missing cell without a reason code", lineno, 1);
    p.cells.push_back(cell);
    if (!f[6].empty()) {
      auto cs = detail::split(f[6], ';');
      auto ks = detail::split(f[7], ';');
      if (cs.size() != ks.size()) throw ParseError("ice_cause and ice_kind lists differ in length", lineno, 1);
      for (std::size_t i = 0; i < cs.size(); ++i) {
        auto c = parse_cause(cs[i]);
        auto k = parse_kind(ks[i]);
        if (!c || !k) throw ParseError("unknown ICE cause or kind", lineno, 1);
        p.events.push_back({*c, visit, *k, false});
      }
    }
  }
  for (auto& [rep, pats] : out.by_replicate)
    for (auto& p : pats)
      for (auto& e : p.events) {
        if (e.kind == IceKind::Death) {
          e.withdrawal = true;
          continue;
        }
        const auto v = static_cast<std::size_t>(e.visit);
        e.withdrawal = v < p.cells.size() && p.cells[v].reason == MissingReason::from_event(e);
      }
  return out;
}

}  // namespace icelab

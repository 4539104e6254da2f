#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <utility>
#include <vector>

#include "icelab/core/observed.hpp"
#include "icelab/plan/spec.hpp"

namespace icelab {

struct CellProvenance {
  enum class Kind { Observed, Imputed, Dead };
  Kind kind = Kind::Observed;
  ImputationMethod method;  // Imputed only
  double delta = 0.0;       // shift applied on top of the draw

  bool operator==(const CellProvenance&) const = default;
};

inline std::string to_string(CellProvenance::Kind k) {
  switch (k) {
    case CellProvenance::Kind::Observed: return "Observed";
    case CellProvenance::Kind::Imputed: return "Imputed";
    case CellProvenance::Kind::Dead: return "Dead";
  }
  return "?";
}

/// m completed copies of one observed dataset. Observed cells are identical
/// in every copy; dead cells (composite failures) hold NaN. The draw index of
/// an imputed value is its copy index.
struct ImputedDatasetSet {
  std::vector<ObservedPatient> source;
  std::vector<std::vector<CellProvenance>> provenance;   // [patient][visit]
  std::vector<std::vector<std::vector<double>>> copies;  // [copy][patient][visit]

  int m() const { return static_cast<int>(copies.size()); }
  std::size_t patients() const { return source.size(); }
  double value(int copy, std::size_t patient, int visit) const {
    return copies[static_cast<std::size_t>(copy)][patient][static_cast<std::size_t>(visit)];
  }
  const CellProvenance& cell(std::size_t patient, int visit) const {
    return provenance[patient][static_cast<std::size_t>(visit)];
  }
};

struct CellRef {
  std::size_t patient;
  int visit;
};

/// Shifts the targeted imputed cells by `delta` in every copy.
inline ImputedDatasetSet apply_delta(ImputedDatasetSet set, double delta, const std::vector<CellRef>& targets) {
  for (const auto& t : targets) {
    if (t.patient >= set.patients() || t.visit < 0 ||
        static_cast<std::size_t>(t.visit) >= set.provenance[t.patient].size())
      throw ImputationError("delta target outside the dataset");
    auto& prov = set.provenance[t.patient][static_cast<std::size_t>(t.visit)];
    if (prov.kind != CellProvenance::Kind::Imputed)
      throw ImputationError("delta may only target imputed cells; patient " + std::to_string(set.source[t.patient].id) +
                            " visit " + std::to_string(t.visit) + " is " + to_string(prov.kind));
  }
  if (delta == 0.0) return set;
  for (const auto& t : targets) {
    set.provenance[t.patient][static_cast<std::size_t>(t.visit)].delta += delta;
    for (auto& copy : set.copies) copy[t.patient][static_cast<std::size_t>(t.visit)] += delta;
  }
  return set;
}

/// Long format: replicate,copy,patient,visit,value,provenance,method
inline constexpr const char* kImputedHeader = "replicate,copy,patient,visit,value,provenance,method";

inline void write_imputed_csv(std::ostream& os, std::uint64_t replicate, const ImputedDatasetSet& set, bool header = true) {
  if (header) os << kImputedHeader << '\n';
  for (int k = 0; k < set.m(); ++k)
    for (std::size_t i = 0; i < set.patients(); ++i)
      for (std::size_t v = 0; v < set.provenance[i].size(); ++v) {
        const auto& prov = set.provenance[i][v];
        const double x = set.copies[static_cast<std::size_t>(k)][i][v];
        os << replicate << ',' << k << ',' << set.source[i].id << ',' << v << ','
           << (std::isnan(x) ? std::string("NA") : format_double(x)) << ',' << to_string(prov.kind) << ','
           << (prov.kind == CellProvenance::Kind::Imputed ? to_string(prov.method) : std::string()) << '\n';
      }
}

}  // namespace icelab

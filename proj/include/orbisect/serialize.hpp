#pragma once

#include <string>

#include <json.hpp>

#include "orbisect/divisor.hpp"
#include "orbisect/lattice.hpp"
#include "orbisect/strata.hpp"
#include "orbisect/transversality.hpp"

namespace orbisect {

using Json = nlohmann::ordered_json;

/// Registry preset plus the data needed to rebuild a SectionSpace from it.
struct SpaceTag {
  std::string preset;
  int order = 2;              // C1_Zm_chart only
  double chart_radius = 0.0;  // chart units
};

SectionSpace space_from_tag(const SpaceTag& tag, int k);

Json to_json(const RVector& v);
RVector vector_from_json(const Json& j);
Json to_json(Cplx c);
Cplx complex_from_json(const Json& j);

Json to_json(const StrataPoset& poset);
Json lattice_summary(const SeparatedLattice& l, const PropertyPReport* report = nullptr);

Json section_to_json(const SectionExpansion& s, const SpaceTag& tag);
SectionExpansion section_from_json(const Json& j);

Json to_json(const PerturbationSchedule& s);
PerturbationSchedule schedule_from_json(const Json& j);
Json to_json(const ClauseReport& r);

Json to_json(const TransversalityCertificate& c);
TransversalityCertificate certificate_from_json(const Json& j);

Json zero_set_summary(const ZeroSetSample& z);
Json to_json(const SymplecticReport& r);
Json to_json(const WindingCount& w);
Json to_json(const MorseReport& r);
Json to_json(const AsymptoticProfile& p);

/// Doubles that may be non-finite: null on output.
Json number(double x);

std::string read_text_file(const std::string& path);  // MissingUpstreamArtifact if absent
void write_text_file(const std::string& path, const std::string& text);
Json read_json_file(const std::string& path);

}  // namespace orbisect

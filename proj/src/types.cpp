#include "metseq/types.hpp"

namespace metseq {

std::string_view label_name(Label label) {
  switch (label) {
    case Label::LIT: return "LIT";
    case Label::INSTITUTE: return "INSTITUTE";
    case Label::ARTIFACT: return "ARTIFACT";
    case Label::TEAM: return "TEAM";
    case Label::EVENT: return "EVENT";
    case Label::MET: return "MET";
  }
  throw std::logic_error("unreachable label");
}

Label parse_label(std::string_view name) {
  if (name == "LIT") return Label::LIT;
  if (name == "INSTITUTE") return Label::INSTITUTE;
  if (name == "ARTIFACT") return Label::ARTIFACT;
  if (name == "TEAM") return Label::TEAM;
  if (name == "EVENT") return Label::EVENT;
  if (name == "MET") return Label::MET;
  throw ParseError("unknown label: " + std::string(name));
}

bool is_fine_label(Label label) { return label != Label::MET; }

std::string_view granularity_name(Granularity g) {
  return g == Granularity::Fine ? "fine" : "coarse";
}

Granularity parse_granularity(std::string_view name) {
  if (name == "fine") return Granularity::Fine;
  if (name == "coarse") return Granularity::Coarse;
  throw ParseError("unknown granularity: " + std::string(name));
}

std::vector<Label> LabelScheme::positives(Granularity g) const {
  std::vector<Label> out;
  for (Label l : labels(g)) {
    if (l != Label::LIT) out.push_back(l);
  }
  return out;
}

}  // namespace metseq

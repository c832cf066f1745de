#pragma once

#include "irda/applefarm.hpp"
#include "irda/common.hpp"
#include "irda/moralmachine.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace irda::features {

/// How a raw feature value turns into a spoken cue.
enum class Trigger {
  Positive,  // fires when value > 0
  AtMostOne, // fires when value <= 1
  AtLeastThree,
  Signed, // +1 cue when value > 0, -1 cue when value < 0
};

struct FeatureSpec {
  std::string name;
  std::string cue;          // phrase used when the feature fires (positive side)
  std::string negative_cue; // Signed features only
  Trigger trigger = Trigger::Positive;
};

/// A fired feature: catalog index plus side (+1, or -1 for the negative cue).
struct Cue {
  int feature = 0;
  int sign = 1;

  auto operator<=>(const Cue&) const = default;
};

struct Catalog {
  std::string version;
  std::vector<FeatureSpec> features;

  std::size_t size() const { return features.size(); }
  std::vector<std::string> names() const;
  /// -1 when unknown.
  int index_of(std::string_view name) const;
  const std::string& phrase(Cue c) const;
  /// Cue direction active for `value`, if any.
  std::optional<int> active_sign(int feature, double value) const;
  std::vector<Cue> active_cues(const FeatureVector& v) const;
  bool fires(Cue c, const FeatureVector& v) const;
  /// Every cue the catalog can produce, in catalog order (+1 before -1).
  std::vector<Cue> all_cues() const;
};

const Catalog& applefarm_catalog();
const Catalog& moralmachine_catalog();
const Catalog& catalog(EnvKind env);

FeatureVector featurize(const applefarm::Trajectory& t);
FeatureVector featurize(const moralmachine::Scenario& s);

/// Per-column min-max scaling to [0,1]; constant columns map to 0.
std::vector<std::vector<double>> normalize_minmax(const std::vector<FeatureVector>& rows);

void write_csv(std::ostream& out, const std::vector<std::string>& ids, const std::vector<FeatureVector>& rows);

} // namespace irda::features

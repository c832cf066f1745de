#include "irda/features.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

namespace irda::features {

namespace {

using applefarm::Cell;
using applefarm::EventKind;
using applefarm::GridState;
using applefarm::kMainQuadrant;
using applefarm::quadrant_of;

Catalog make_applefarm() {
  Catalog c;
  c.version = "applefarm-features/1";
  c.features = {
      {"steps-outside-own-quadrant", "it left its own quadrant", "", Trigger::Positive},
      {"apples-picked-own", "it picked apples in its own quadrant", "", Trigger::Positive},
      {"apples-picked-others", "it picked apples from another agent's quadrant", "", Trigger::Positive},
      {"garbage-collected", "it collected garbage", "", Trigger::Positive},
      {"garbage-before-apples", "it cleared garbage before picking apples", "", Trigger::Positive},
      {"min-distance-to-other-agents", "it came right next to another agent", "", Trigger::AtMostOne},
      {"entered-occupied-quadrant", "it entered a quadrant while its owner was there", "", Trigger::Positive},
      {"entered-unoccupied-quadrant", "it entered a quadrant while its owner was away", "", Trigger::Positive},
      {"blocked-other-agent", "it got in the way of the moving agent", "", Trigger::Positive},
      {"picked-from-moving-agent-quadrant", "it picked apples in the moving agent's quadrant", "", Trigger::Positive},
      {"idle-steps", "it stood idle for several steps", "", Trigger::AtLeastThree},
      {"finished-own-before-leaving", "it finished its own apples before leaving", "", Trigger::Positive},
  };
  return c;
}

Catalog make_moralmachine() {
  Catalog c;
  c.version = "moralmachine-features/1";
  c.features = {
      {"casualty-difference", "staying on course would kill more characters", "swerving would kill more characters",
       Trigger::Signed},
      {"traffic-rule-compliance", "the pedestrians ahead are crossing illegally",
       "the pedestrians ahead are crossing legally", Trigger::Signed},
      {"humans-vs-animals", "swerving would only hit animals", "staying on course would only hit animals",
       Trigger::Signed},
      {"children-present-difference", "more children are ahead", "more children are in the other path",
       Trigger::Signed},
      {"elderly-difference", "more elderly people are ahead", "more elderly people are in the other path",
       Trigger::Signed},
      {"passengers-vs-pedestrians", "swerving would sacrifice the passengers", "swerving would hit other pedestrians",
       Trigger::Signed},
      {"social-status-difference", "the people ahead have higher social status",
       "the people in the other path have higher social status", Trigger::Signed},
      {"intervention-required", "swerving means the car actively intervenes", "", Trigger::Positive},
      {"group-size-equal", "both groups are the same size", "", Trigger::Positive},
  };
  return c;
}

int status_score(const moralmachine::OutcomeGroup& g) {
  using moralmachine::Character;
  return g.count(Character::Doctor) + g.count(Character::Executive) - g.count(Character::Criminal) -
         g.count(Character::Homeless);
}

int children(const moralmachine::OutcomeGroup& g) {
  using moralmachine::Character;
  return g.count(Character::Boy) + g.count(Character::Girl);
}

int elderly(const moralmachine::OutcomeGroup& g) {
  using moralmachine::Character;
  return g.count(Character::ElderlyMan) + g.count(Character::ElderlyWoman);
}

} // namespace

std::vector<std::string> Catalog::names() const {
  std::vector<std::string> out;
  out.reserve(features.size());
  for (const auto& f : features) {
    out.push_back(f.name);
  }
  return out;
}

int Catalog::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

const std::string& Catalog::phrase(Cue c) const {
  const FeatureSpec& f = features.at(static_cast<std::size_t>(c.feature));
  return c.sign < 0 ? f.negative_cue : f.cue;
}

std::optional<int> Catalog::active_sign(int feature, double value) const {
  switch (features.at(static_cast<std::size_t>(feature)).trigger) {
  case Trigger::Positive:
    if (value > 0) return 1;
    break;
  case Trigger::AtMostOne:
    if (value <= 1) return 1;
    break;
  case Trigger::AtLeastThree:
    if (value >= 3) return 1;
    break;
  case Trigger::Signed:
    if (value > 0) return 1;
    if (value < 0) return -1;
    break;
  }
  return std::nullopt;
}

std::vector<Cue> Catalog::active_cues(const FeatureVector& v) const {
  if (v.size() != features.size()) {
    throw ValidationError("feature vector does not match catalog " + version);
  }
  std::vector<Cue> out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (auto s = active_sign(static_cast<int>(i), v[i])) {
      out.push_back(Cue{static_cast<int>(i), *s});
    }
  }
  return out;
}

bool Catalog::fires(Cue c, const FeatureVector& v) const {
  const auto s = active_sign(c.feature, v.values.at(static_cast<std::size_t>(c.feature)));
  return s && *s == c.sign;
}

std::vector<Cue> Catalog::all_cues() const {
  std::vector<Cue> out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    out.push_back(Cue{static_cast<int>(i), 1});
    if (features[i].trigger == Trigger::Signed) {
      out.push_back(Cue{static_cast<int>(i), -1});
    }
  }
  return out;
}

const Catalog& applefarm_catalog() {
  static const Catalog c = make_applefarm();
  return c;
}

const Catalog& moralmachine_catalog() {
  static const Catalog c = make_moralmachine();
  return c;
}

const Catalog& catalog(EnvKind env) {
  return env == EnvKind::AppleFarm ? applefarm_catalog() : moralmachine_catalog();
}

FeatureVector featurize(const applefarm::Trajectory& t) {
  const auto& frames = t.frames;
  std::vector<double> v(12, 0.0);

  // Which background agent moves is read off the frames, so ASCII-decoded
  // trajectories featurize the same as generated ones.
  int mover = -1;
  for (std::size_t i = 1; i < frames.size() && mover < 0; ++i) {
    for (int a = 0; a < applefarm::kBackgroundAgents; ++a) {
      if (frames[i].background[a] != frames[i - 1].background[a]) {
        mover = a;
        break;
      }
    }
  }

  std::optional<std::size_t> first_outside;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const GridState& s = frames[i];
    const int q = quadrant_of(s.main);
    if (q == kMainQuadrant) {
      continue;
    }
    v[0] += 1;
    if (!first_outside) {
      first_outside = i;
    }
    const Cell owner = s.background[q - 1];
    if (quadrant_of(owner) == q) {
      v[6] += 1;
    } else {
      v[7] += 1;
    }
  }

  int first_pick = std::numeric_limits<int>::max();
  int first_collect = std::numeric_limits<int>::max();
  for (const auto& e : t.events()) {
    if (e.kind == EventKind::ApplePick) {
      first_pick = std::min(first_pick, e.step);
      if (quadrant_of(e.cell) == kMainQuadrant) {
        v[1] += 1;
      } else {
        v[2] += 1;
      }
      if (mover >= 0 && quadrant_of(e.cell) == mover + 1) {
        v[9] += 1;
      }
    } else {
      first_collect = std::min(first_collect, e.step);
      v[3] += 1;
    }
  }
  v[4] = (v[3] > 0 && first_collect < first_pick) ? 1.0 : 0.0;

  int min_dist = std::numeric_limits<int>::max();
  for (const GridState& s : frames) {
    for (const Cell& b : s.background) {
      min_dist = std::min(min_dist, applefarm::manhattan(s.main, b));
    }
  }
  v[5] = frames.empty() ? 0.0 : min_dist;

  if (mover >= 0) {
    for (std::size_t i = 1; i < frames.size(); ++i) {
      const Cell before = frames[i - 1].background[mover];
      if (frames[i].background[mover] == before && applefarm::manhattan(frames[i].main, before) == 1) {
        v[8] += 1;
      }
    }
  }

  for (auto a : t.actions) {
    if (a == applefarm::Action::Stay) {
      v[10] += 1;
    }
  }

  if (first_outside) {
    const auto& apples = frames[*first_outside].apples;
    const bool own_left = std::any_of(apples.begin(), apples.end(),
                                      [](const Cell& c) { return quadrant_of(c) == kMainQuadrant; });
    v[11] = own_left ? 0.0 : 1.0;
  }

  return FeatureVector{std::move(v), applefarm_catalog().names()};
}

FeatureVector featurize(const moralmachine::Scenario& s) {
  const auto& stay = s.stay_outcome;
  const auto& swerve = s.swerve_outcome;
  std::vector<double> v(9, 0.0);
  v[0] = stay.total() - swerve.total();
  switch (s.legality) {
  case moralmachine::Legality::PedestriansJaywalking:
    v[1] = 1;
    break;
  case moralmachine::Legality::PedestriansLawful:
    v[1] = -1;
    break;
  case moralmachine::Legality::NotApplicable:
    v[1] = 0;
    break;
  }
  if (swerve.humans() == 0 && stay.humans() > 0) {
    v[2] = 1;
  } else if (stay.humans() == 0 && swerve.humans() > 0) {
    v[2] = -1;
  }
  v[3] = children(stay) - children(swerve);
  v[4] = elderly(stay) - elderly(swerve);
  v[5] = swerve.role == moralmachine::Role::Passengers ? 1 : -1;
  v[6] = status_score(stay) - status_score(swerve);
  v[7] = 1;
  v[8] = stay.total() == swerve.total() ? 1 : 0;
  return FeatureVector{std::move(v), moralmachine_catalog().names()};
}

std::vector<std::vector<double>> normalize_minmax(const std::vector<FeatureVector>& rows) {
  std::vector<std::vector<double>> out;
  if (rows.empty()) {
    return out;
  }
  const std::size_t d = rows.front().size();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& r : rows) {
    if (r.size() != d) {
      throw ValidationError("feature rows differ in dimension");
    }
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], r[j]);
      hi[j] = std::max(hi[j], r[j]);
    }
  }
  out.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<double> x(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      if (hi[j] > lo[j]) {
        x[j] = (r[j] - lo[j]) / (hi[j] - lo[j]);
      }
    }
    out.push_back(std::move(x));
  }
  return out;
}

void write_csv(std::ostream& out, const std::vector<std::string>& ids, const std::vector<FeatureVector>& rows) {
  if (ids.size() != rows.size()) {
    throw ValidationError("ids and feature rows differ in length");
  }
  out << "id";
  if (!rows.empty()) {
    for (const auto& n : rows.front().names) {
      out << ',' << n;
    }
  }
  out << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << ids[i];
    for (double x : rows[i].values) {
      out << ',' << x;
    }
    out << '\n';
  }
}

} // namespace irda::features

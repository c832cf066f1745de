#pragma once

#include "irda/common.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

// Autonomous-vehicle dilemmas: stay on course (always hits the pedestrians
// ahead) or swerve (hits another group of pedestrians, or a barrier that kills
// the passengers).
namespace irda::moralmachine {

enum class Character {
  Man,
  Woman,
  Boy,
  Girl,
  ElderlyMan,
  ElderlyWoman,
  PregnantWoman,
  Doctor,
  Executive,
  Criminal,
  Homeless,
  Dog,
  Cat,
};
inline constexpr std::size_t kCharacterCount = 13;
inline constexpr int kMaxGroup = 5;

std::string_view to_string(Character c);
bool is_animal(Character c);

enum class Role { Pedestrians, Passengers };
enum class Legality { PedestriansLawful, PedestriansJaywalking, NotApplicable };
enum class BarrierSide { Stay, Swerve, None };

std::string_view to_string(Role r);
std::string_view to_string(Legality l);
std::string_view to_string(BarrierSide b);

struct OutcomeGroup {
  Role role = Role::Pedestrians;
  std::array<int, kCharacterCount> counts{};

  int total() const;
  int count(Character c) const { return counts[static_cast<std::size_t>(c)]; }
  int humans() const;
  int animals() const;
  bool operator==(const OutcomeGroup&) const = default;
};

struct Scenario {
  std::string id;
  OutcomeGroup stay_outcome;
  OutcomeGroup swerve_outcome;
  Legality legality = Legality::NotApplicable;
  BarrierSide barrier_side = BarrierSide::None;

  /// Equality over content; ids are ignored.
  bool same_dilemma(const Scenario& other) const;
};

/// Throws ValidationError when a group is out of [1,5], counts are negative,
/// or both outcomes are identical.
void validate(const Scenario& s);

inline constexpr std::size_t kVectorSize = 26;
/// Frozen layout: [0,13) stay counts in character order; [13,24) swerve counts
/// for man..homeless; 24 swerve dog+cat; 25 legality code (lawful 0,
/// jaywalking 1, not applicable 2).
std::array<double, kVectorSize> encode_vector(const Scenario& s);

std::string encode_text(const Scenario& s);
/// Inverse of encode_text (ids come from the header line).
Scenario parse_text(std::string_view text);

std::vector<Scenario> generate_scenarios(std::uint64_t seed, int count);

std::string env_description();
inline constexpr std::string_view kEnvDescriptionVersion = "moralmachine-env/1";

nlohmann::json to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
void write_jsonl(std::ostream& out, const std::vector<Scenario>& pool);
std::vector<Scenario> read_jsonl(std::istream& in);

} // namespace irda::moralmachine

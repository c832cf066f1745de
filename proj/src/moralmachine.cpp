#include "irda/moralmachine.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace irda::moralmachine {

namespace {

constexpr std::array<std::string_view, kCharacterCount> kNames{
    "man",    "woman",     "boy",      "girl",     "elderly_man", "elderly_woman", "pregnant_woman",
    "doctor", "executive", "criminal", "homeless", "dog",         "cat"};

constexpr std::array<std::string_view, kCharacterCount> kSingular{
    "man",    "woman",     "boy",      "girl",            "elderly man", "elderly woman", "pregnant woman",
    "doctor", "executive", "criminal", "homeless person", "dog",         "cat"};

constexpr std::array<std::string_view, kCharacterCount> kPlural{
    "men",     "women",      "boys",      "girls",           "elderly men", "elderly women", "pregnant women",
    "doctors", "executives", "criminals", "homeless people", "dogs",        "cats"};

constexpr std::string_view kStayPrefix = "Stay on course: the car hits ";
constexpr std::string_view kSwervePedestrians = "Swerve: the car hits ";
constexpr std::string_view kSwerveBarrier = "Swerve: the car crashes into a barrier, killing its ";
constexpr std::string_view kLawful = "Signal: the pedestrians ahead are crossing on a green light.";
constexpr std::string_view kJaywalking = "Signal: the pedestrians ahead are jaywalking against a red light.";
constexpr std::string_view kNoSignal = "Signal: there is no traffic light.";

std::string list_characters(const OutcomeGroup& g) {
  std::string out;
  for (std::size_t i = 0; i < kCharacterCount; ++i) {
    const int n = g.counts[i];
    if (n == 0) {
      continue;
    }
    if (!out.empty()) {
      out += ", ";
    }
    out += std::to_string(n) + " " + std::string(n == 1 ? kSingular[i] : kPlural[i]);
  }
  return out;
}

OutcomeGroup parse_characters(std::string_view list, Role role) {
  OutcomeGroup g;
  g.role = role;
  std::string text(list);
  if (!text.empty() && text.back() == '.') {
    text.pop_back();
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto start = item.find_first_not_of(' ');
    if (start == std::string::npos) {
      continue;
    }
    item = item.substr(start);
    const auto space = item.find(' ');
    if (space == std::string::npos) {
      throw ValidationError("malformed character count '" + item + "'");
    }
    const int n = std::stoi(item.substr(0, space));
    const std::string name = item.substr(space + 1);
    bool found = false;
    for (std::size_t i = 0; i < kCharacterCount; ++i) {
      if (name == kSingular[i] || name == kPlural[i]) {
        g.counts[i] += n;
        found = true;
        break;
      }
    }
    if (!found) {
      throw ValidationError("unknown character '" + name + "'");
    }
  }
  return g;
}

std::string_view after_colon(std::string_view line) {
  const auto pos = line.rfind(": ");
  if (pos == std::string_view::npos) {
    throw ValidationError("expected ': ' in scenario line");
  }
  return line.substr(pos + 2);
}

void fill(OutcomeGroup& g, const std::vector<Character>& palette, int total, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, palette.size() - 1);
  for (int i = 0; i < total; ++i) {
    g.counts[static_cast<std::size_t>(palette[pick(rng)])] += 1;
  }
}

Scenario random_scenario(std::mt19937_64& rng) {
  using C = Character;
  static const std::vector<C> kHumans{C::Man,  C::Woman,     C::Boy,      C::Girl,    C::ElderlyMan, C::ElderlyWoman,
                                      C::PregnantWoman, C::Doctor, C::Executive, C::Criminal, C::Homeless};
  static const std::vector<C> kAdults{C::Man, C::Woman};
  static const std::vector<C> kAnimals{C::Dog, C::Cat};
  static const std::vector<C> kChildren{C::Boy, C::Girl};
  static const std::vector<C> kElderly{C::ElderlyMan, C::ElderlyWoman};
  static const std::vector<C> kHighStatus{C::Doctor, C::Executive};
  static const std::vector<C> kLowStatus{C::Criminal, C::Homeless};
  static const std::vector<C> kEveryone{C::Man,      C::Woman,    C::Boy,      C::Girl,      C::ElderlyMan,
                                        C::ElderlyWoman, C::PregnantWoman, C::Doctor, C::Executive, C::Criminal,
                                        C::Homeless, C::Dog,      C::Cat};

  std::uniform_int_distribution<int> size(1, kMaxGroup);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scenario s;
  s.stay_outcome.role = Role::Pedestrians;
  s.swerve_outcome.role = u(rng) < 0.35 ? Role::Passengers : Role::Pedestrians;
  const bool flip = u(rng) < 0.5;
  OutcomeGroup& first = flip ? s.swerve_outcome : s.stay_outcome;
  OutcomeGroup& second = flip ? s.stay_outcome : s.swerve_outcome;

  const int theme = std::uniform_int_distribution<int>(0, 4)(rng);
  switch (theme) {
  case 0: // species
    fill(first, kHumans, size(rng), rng);
    fill(second, kAnimals, size(rng), rng);
    break;
  case 1: // age
    fill(first, kChildren, size(rng), rng);
    fill(second, u(rng) < 0.5 ? kElderly : kAdults, size(rng), rng);
    break;
  case 2: // social status
    fill(first, kHighStatus, size(rng), rng);
    fill(second, kLowStatus, size(rng), rng);
    break;
  case 3: { // group size with one character type
    const C who = kEveryone[std::uniform_int_distribution<std::size_t>(0, kEveryone.size() - 1)(rng)];
    first.counts[static_cast<std::size_t>(who)] = size(rng);
    second.counts[static_cast<std::size_t>(who)] = size(rng);
    break;
  }
  default:
    fill(first, kEveryone, size(rng), rng);
    fill(second, kEveryone, size(rng), rng);
    break;
  }

  const double l = u(rng);
  s.legality = l < 0.4 ? Legality::PedestriansLawful
                       : (l < 0.75 ? Legality::PedestriansJaywalking : Legality::NotApplicable);
  s.barrier_side = s.swerve_outcome.role == Role::Passengers ? BarrierSide::Swerve : BarrierSide::None;
  return s;
}

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view name, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) {
      return static_cast<Enum>(i);
    }
  }
  throw ValidationError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

constexpr std::array<std::string_view, 2> kRoleNames{"pedestrians", "passengers"};
constexpr std::array<std::string_view, 3> kLegalityNames{"pedestrians_lawful", "pedestrians_jaywalking",
                                                         "not_applicable"};
constexpr std::array<std::string_view, 3> kBarrierNames{"stay", "swerve", "none"};

nlohmann::json group_json(const OutcomeGroup& g) {
  nlohmann::json counts = nlohmann::json::object();
  for (std::size_t i = 0; i < kCharacterCount; ++i) {
    if (g.counts[i] != 0) {
      counts[std::string(kNames[i])] = g.counts[i];
    }
  }
  return nlohmann::json{{"role", std::string(to_string(g.role))}, {"counts", counts}};
}

OutcomeGroup group_from_json(const nlohmann::json& j) {
  OutcomeGroup g;
  g.role = enum_from<Role>(j.at("role").get<std::string>(), kRoleNames, "role");
  for (const auto& [name, n] : j.at("counts").items()) {
    g.counts[static_cast<std::size_t>(enum_from<Character>(name, kNames, "character"))] = n.get<int>();
  }
  return g;
}

} // namespace

std::string_view to_string(Character c) {
  return kNames[static_cast<std::size_t>(c)];
}

bool is_animal(Character c) {
  return c == Character::Dog || c == Character::Cat;
}

std::string_view to_string(Role r) {
  return kRoleNames[static_cast<std::size_t>(r)];
}

std::string_view to_string(Legality l) {
  return kLegalityNames[static_cast<std::size_t>(l)];
}

std::string_view to_string(BarrierSide b) {
  return kBarrierNames[static_cast<std::size_t>(b)];
}

int OutcomeGroup::total() const {
  int t = 0;
  for (int n : counts) {
    t += n;
  }
  return t;
}

int OutcomeGroup::humans() const {
  return total() - animals();
}

int OutcomeGroup::animals() const {
  return count(Character::Dog) + count(Character::Cat);
}

bool Scenario::same_dilemma(const Scenario& other) const {
  return stay_outcome == other.stay_outcome && swerve_outcome == other.swerve_outcome &&
         legality == other.legality && barrier_side == other.barrier_side;
}

void validate(const Scenario& s) {
  for (const OutcomeGroup* g : {&s.stay_outcome, &s.swerve_outcome}) {
    for (int n : g->counts) {
      if (n < 0) {
        throw ValidationError("scenario " + s.id + ": negative character count");
      }
    }
    if (g->total() < 1 || g->total() > kMaxGroup) {
      throw ValidationError("scenario " + s.id + ": each outcome must involve 1 to 5 characters");
    }
  }
  if (s.stay_outcome == s.swerve_outcome) {
    throw ValidationError("scenario " + s.id + ": stay and swerve outcomes are identical");
  }
}

std::array<double, kVectorSize> encode_vector(const Scenario& s) {
  validate(s);
  std::array<double, kVectorSize> v{};
  for (std::size_t i = 0; i < kCharacterCount; ++i) {
    v[i] = s.stay_outcome.counts[i];
  }
  for (std::size_t i = 0; i < 11; ++i) {
    v[13 + i] = s.swerve_outcome.counts[i];
  }
  v[24] = s.swerve_outcome.animals();
  v[25] = static_cast<double>(static_cast<int>(s.legality));
  return v;
}

std::string encode_text(const Scenario& s) {
  const auto noun = [](const OutcomeGroup& g, std::string_view one, std::string_view many) {
    return std::to_string(g.total()) + " " + std::string(g.total() == 1 ? one : many);
  };
  std::string out = "Scenario " + s.id + "\n";
  out += std::string(kStayPrefix) + noun(s.stay_outcome, "pedestrian", "pedestrians") +
         " crossing ahead: " + list_characters(s.stay_outcome) + ".\n";
  if (s.swerve_outcome.role == Role::Passengers) {
    out += std::string(kSwerveBarrier) + noun(s.swerve_outcome, "passenger", "passengers") + ": " +
           list_characters(s.swerve_outcome) + ".\n";
  } else {
    out += std::string(kSwervePedestrians) + noun(s.swerve_outcome, "pedestrian", "pedestrians") +
           " crossing in the other lane: " + list_characters(s.swerve_outcome) + ".\n";
  }
  switch (s.legality) {
  case Legality::PedestriansLawful:
    out += std::string(kLawful) + "\n";
    break;
  case Legality::PedestriansJaywalking:
    out += std::string(kJaywalking) + "\n";
    break;
  case Legality::NotApplicable:
    out += std::string(kNoSignal) + "\n";
    break;
  }
  return out;
}

Scenario parse_text(std::string_view text) {
  std::vector<std::string> lines;
  std::stringstream ss{std::string(text)};
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty()) {
      lines.push_back(line);
    }
  }
  if (lines.size() != 4 || lines[0].rfind("Scenario ", 0) != 0 || lines[1].rfind(kStayPrefix, 0) != 0 ||
      lines[2].rfind("Swerve: ", 0) != 0) {
    throw ValidationError("malformed scenario text");
  }
  Scenario s;
  s.id = lines[0].substr(9);
  try {
    s.stay_outcome = parse_characters(after_colon(lines[1]), Role::Pedestrians);
    const bool barrier = lines[2].rfind(kSwerveBarrier, 0) == 0;
    s.swerve_outcome = parse_characters(after_colon(lines[2]), barrier ? Role::Passengers : Role::Pedestrians);
  } catch (const std::invalid_argument&) {
    throw ValidationError("malformed scenario character counts");
  }
  if (lines[3] == kLawful) {
    s.legality = Legality::PedestriansLawful;
  } else if (lines[3] == kJaywalking) {
    s.legality = Legality::PedestriansJaywalking;
  } else if (lines[3] == kNoSignal) {
    s.legality = Legality::NotApplicable;
  } else {
    throw ValidationError("unknown legality clause '" + lines[3] + "'");
  }
  s.barrier_side = s.swerve_outcome.role == Role::Passengers ? BarrierSide::Swerve : BarrierSide::None;
  return s;
}

std::vector<Scenario> generate_scenarios(std::uint64_t seed, int count) {
  if (count < 1) {
    throw ConfigError("scenario count must be at least 1");
  }
  std::mt19937_64 rng(mix_seed(seed, 0x6d6d));
  std::set<std::array<double, kVectorSize>> seen;
  std::vector<Scenario> out;
  out.reserve(static_cast<std::size_t>(count));
  const long long max_attempts = 1000LL * count;
  for (long long attempt = 0; static_cast<int>(out.size()) < count; ++attempt) {
    if (attempt >= max_attempts) {
      throw ConfigError("could not generate enough distinct scenarios");
    }
    Scenario s = random_scenario(rng);
    if (s.stay_outcome == s.swerve_outcome) {
      continue;
    }
    // Distinct 26-d vectors keep the supervised encoding injective over the pool.
    if (!seen.insert(encode_vector(s)).second) {
      continue;
    }
    char id[48];
    std::snprintf(id, sizeof(id), "s%llu-%04zu", static_cast<unsigned long long>(seed), out.size());
    s.id = id;
    out.push_back(std::move(s));
  }
  return out;
}

std::string env_description() {
  return std::string("Environment: ") + std::string(kEnvDescriptionVersion) +
         "\n"
         "An autonomous car with sudden brake failure must either stay on course or swerve.\n"
         "Staying on course always hits the pedestrians crossing ahead. Swerving either hits a\n"
         "different group of pedestrians in the other lane, or crashes into a barrier and kills the\n"
         "car's passengers. Characters: men, women, boys, girls, elderly men, elderly women, pregnant\n"
         "women, doctors, executives, criminals, homeless people, dogs and cats. The signal line says\n"
         "whether the pedestrians ahead cross legally (green light), illegally (red light), or whether\n"
         "there is no traffic light. Decide which outcome the car should choose: stay or swerve.\n";
}

nlohmann::json to_json(const Scenario& s) {
  return nlohmann::json{{"id", s.id},
                        {"stay", group_json(s.stay_outcome)},
                        {"swerve", group_json(s.swerve_outcome)},
                        {"legality", std::string(to_string(s.legality))},
                        {"barrier_side", std::string(to_string(s.barrier_side))}};
}

Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    s.id = j.at("id").get<std::string>();
    s.stay_outcome = group_from_json(j.at("stay"));
    s.swerve_outcome = group_from_json(j.at("swerve"));
    s.legality = enum_from<Legality>(j.at("legality").get<std::string>(), kLegalityNames, "legality");
    s.barrier_side = enum_from<BarrierSide>(j.at("barrier_side").get<std::string>(), kBarrierNames, "barrier side");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed scenario JSON: ") + e.what());
  }
}

void write_jsonl(std::ostream& out, const std::vector<Scenario>& pool) {
  for (const Scenario& s : pool) {
    out << to_json(s).dump() << '\n';
  }
}

std::vector<Scenario> read_jsonl(std::istream& in) {
  std::vector<Scenario> pool;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    try {
      pool.push_back(scenario_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("malformed JSON line: ") + e.what());
    }
  }
  return pool;
}

} // namespace irda::moralmachine

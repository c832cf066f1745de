#include "irda/applefarm.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace irda::applefarm {

namespace {

constexpr std::array<Action, 4> kMoves{Action::Up, Action::Down, Action::Left, Action::Right};

constexpr std::array<std::string_view, 7> kActionNames{"Up", "Down", "Left", "Right", "Stay", "Pick", "Collect"};

constexpr std::array<std::string_view, kBehaviorCount> kBehaviorNames{
    "own-orchard-harvester", "trespasser", "garbage-first", "aggressive-proximity", "random-walker"};

Cell quadrant_origin(int quadrant) {
  return Cell{(quadrant / 2) * kQuadrantSize, (quadrant % 2) * kQuadrantSize};
}

std::vector<Cell> quadrant_cells(int quadrant) {
  std::vector<Cell> cells;
  const Cell origin = quadrant_origin(quadrant);
  for (int r = 0; r < kQuadrantSize; ++r) {
    for (int c = 0; c < kQuadrantSize; ++c) {
      cells.push_back(Cell{origin.row + r, origin.col + c});
    }
  }
  return cells;
}

double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

template <typename T>
const T& pick_one(const std::vector<T>& items, std::mt19937_64& rng) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

// Per-trajectory personality knobs layered over the behavior profile.
struct Traits {
  double epsilon = 0.1;
  bool tidy = false;
  double idle = 0.5;
  bool chase_moving = true;
};

bool main_can_enter(const GridState& s, Cell c) {
  return in_bounds(c) && !s.occupied_by_agent(c);
}

std::vector<Action> open_moves(const GridState& s, bool stay_home) {
  std::vector<Action> out;
  for (Action a : kMoves) {
    const Cell next = moved(s.main, a);
    if (!main_can_enter(s, next)) {
      continue;
    }
    if (stay_home && quadrant_of(next) != kMainQuadrant) {
      continue;
    }
    out.push_back(a);
  }
  return out;
}

Action random_move(const GridState& s, std::mt19937_64& rng, bool stay_home) {
  const auto moves = open_moves(s, stay_home);
  return moves.empty() ? Action::Stay : pick_one(moves, rng);
}

Action step_toward(const GridState& s, Cell target, bool stay_home) {
  const int dr = target.row - s.main.row;
  const int dc = target.col - s.main.col;
  std::vector<Action> prefs;
  const Action vertical = dr > 0 ? Action::Down : Action::Up;
  const Action horizontal = dc > 0 ? Action::Right : Action::Left;
  if (std::abs(dr) >= std::abs(dc)) {
    if (dr != 0) prefs.push_back(vertical);
    if (dc != 0) prefs.push_back(horizontal);
  } else {
    if (dc != 0) prefs.push_back(horizontal);
    if (dr != 0) prefs.push_back(vertical);
  }
  for (Action a : prefs) {
    const Cell next = moved(s.main, a);
    if (main_can_enter(s, next) && (!stay_home || quadrant_of(next) == kMainQuadrant)) {
      return a;
    }
  }
  return Action::Stay;
}

std::optional<Cell> nearest(Cell from, const std::set<Cell>& cells, int quadrant_filter, bool exclude) {
  std::optional<Cell> best;
  int best_d = 1 << 20;
  for (const Cell& c : cells) {
    const bool in_q = quadrant_of(c) == quadrant_filter;
    if (quadrant_filter >= 0 && (exclude ? in_q : !in_q)) {
      continue;
    }
    const int d = manhattan(from, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Action main_policy(Behavior behavior, const GridState& s, int moving_agent, const Traits& traits, bool has_left,
                   std::mt19937_64& rng) {
  const bool on_apple = s.apples.contains(s.main);
  const bool on_garbage = s.garbage.contains(s.main);

  switch (behavior) {
  case Behavior::OwnOrchardHarvester: {
    if (on_apple && quadrant_of(s.main) == kMainQuadrant) {
      return Action::Pick;
    }
    if (on_garbage && traits.tidy) {
      return Action::Collect;
    }
    if (uniform01(rng) < traits.epsilon) {
      return random_move(s, rng, true);
    }
    if (auto apple = nearest(s.main, s.apples, kMainQuadrant, false)) {
      return step_toward(s, *apple, true);
    }
    if (traits.tidy) {
      if (auto g = nearest(s.main, s.garbage, kMainQuadrant, false)) {
        return step_toward(s, *g, true);
      }
    }
    return uniform01(rng) < traits.idle ? Action::Stay : random_move(s, rng, true);
  }
  case Behavior::Trespasser: {
    if (on_apple) {
      return Action::Pick;
    }
    if (on_garbage && traits.tidy) {
      return Action::Collect;
    }
    if (has_left && uniform01(rng) < traits.epsilon) {
      return random_move(s, rng, false);
    }
    auto target = nearest(s.main, s.apples, kMainQuadrant, true);
    if (!target) {
      target = nearest(s.main, s.apples, -1, false);
    }
    if (!target) {
      return random_move(s, rng, false);
    }
    const Action a = step_toward(s, *target, false);
    return a == Action::Stay ? random_move(s, rng, false) : a;
  }
  case Behavior::GarbageFirst: {
    if (on_garbage) {
      return Action::Collect;
    }
    if (!s.garbage.empty()) {
      if (uniform01(rng) < traits.epsilon) {
        return random_move(s, rng, false);
      }
      return step_toward(s, *nearest(s.main, s.garbage, -1, false), false);
    }
    if (on_apple) {
      return Action::Pick;
    }
    auto target = nearest(s.main, s.apples, kMainQuadrant, false);
    if (!target) {
      target = nearest(s.main, s.apples, -1, false);
    }
    if (!target) {
      return uniform01(rng) < traits.idle ? Action::Stay : random_move(s, rng, false);
    }
    return step_toward(s, *target, false);
  }
  case Behavior::AggressiveProximity: {
    if (on_apple && uniform01(rng) < 0.7) {
      return Action::Pick;
    }
    Cell target = s.background[moving_agent - 1];
    if (!traits.chase_moving) {
      std::set<Cell> stationary;
      for (int i = 0; i < kBackgroundAgents; ++i) {
        if (i + 1 != moving_agent) {
          stationary.insert(s.background[i]);
        }
      }
      target = *nearest(s.main, stationary, -1, false);
    }
    if (manhattan(s.main, target) > 1) {
      return step_toward(s, target, false);
    }
    return uniform01(rng) < 0.5 ? Action::Stay : random_move(s, rng, false);
  }
  case Behavior::RandomWalker: {
    if (on_apple && uniform01(rng) < 0.7) {
      return Action::Pick;
    }
    if (on_garbage && uniform01(rng) < 0.5) {
      return Action::Collect;
    }
    if (uniform01(rng) < 0.2) {
      return Action::Stay;
    }
    return random_move(s, rng, false);
  }
  }
  return Action::Stay;
}

Action background_policy(const GridState& s, int moving_agent, std::mt19937_64& rng) {
  const Cell pos = s.background[moving_agent - 1];
  std::vector<Action> moves;
  for (Action a : kMoves) {
    if (in_bounds(moved(pos, a))) {
      moves.push_back(a);
    }
  }
  return pick_one(moves, rng);
}

GridState initial_state(std::mt19937_64& rng) {
  GridState s;
  for (int q = 0; q < 4; ++q) {
    auto cells = quadrant_cells(q);
    std::shuffle(cells.begin(), cells.end(), rng);
    const int n = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int i = 0; i < n; ++i) {
      s.apples.insert(cells[i]);
    }
  }
  const int garbage = std::uniform_int_distribution<int>(1, 3)(rng);
  while (static_cast<int>(s.garbage.size()) < garbage) {
    const Cell c{std::uniform_int_distribution<int>(0, kGridSize - 1)(rng),
                 std::uniform_int_distribution<int>(0, kGridSize - 1)(rng)};
    if (!s.apples.contains(c)) {
      s.garbage.insert(c);
    }
  }
  s.main = pick_one(quadrant_cells(kMainQuadrant), rng);
  for (int i = 0; i < kBackgroundAgents; ++i) {
    std::vector<Cell> free;
    for (const Cell& c : quadrant_cells(i + 1)) {
      if (!s.apples.contains(c) && !s.garbage.contains(c)) {
        free.push_back(c);
      }
    }
    s.background[i] = pick_one(free, rng);
  }
  return s;
}

Trajectory simulate(std::string id, Behavior behavior, std::mt19937_64& rng) {
  Trajectory t;
  t.id = std::move(id);
  t.behavior = behavior;
  t.moving_agent = std::uniform_int_distribution<int>(1, kBackgroundAgents)(rng);
  Traits traits;
  traits.epsilon = std::uniform_real_distribution<double>(0.0, 0.25)(rng);
  traits.tidy = uniform01(rng) < 0.5;
  traits.idle = std::uniform_real_distribution<double>(0.2, 0.8)(rng);
  traits.chase_moving = uniform01(rng) < 0.6;
  const int horizon = std::uniform_int_distribution<int>(kMinSteps, kMaxSteps)(rng);

  t.frames.push_back(initial_state(rng));
  bool has_left = false;
  for (int step = 1; step <= horizon; ++step) {
    const GridState& s = t.frames.back();
    const Action a = main_policy(behavior, s, t.moving_agent, traits, has_left, rng);
    const Action b = background_policy(s, t.moving_agent, rng);
    t.actions.push_back(a);
    t.background_actions.push_back(b);
    t.frames.push_back(transition(s, a, t.moving_agent, b, step));
    has_left = has_left || quadrant_of(t.frames.back().main) != kMainQuadrant;
  }
  return t;
}

bool moving_agent_moved(const Trajectory& t) {
  for (std::size_t i = 1; i < t.frames.size(); ++i) {
    if (t.frames[i].background != t.frames[i - 1].background) {
      return true;
    }
  }
  return false;
}

char cell_symbol(const GridState& s, Cell c) {
  if (s.main == c) {
    return 'B';
  }
  for (const Cell& b : s.background) {
    if (b == c) {
      return 'g';
    }
  }
  if (s.apples.contains(c)) {
    return 'A';
  }
  if (s.garbage.contains(c)) {
    return 'G';
  }
  return '.';
}

nlohmann::json cell_json(Cell c) {
  return nlohmann::json::array({c.row, c.col});
}

Cell cell_from_json(const nlohmann::json& j) {
  return Cell{j.at(0).get<int>(), j.at(1).get<int>()};
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::string current;
  for (char ch : text) {
    if (ch == '\n') {
      lines.push_back(current);
      current.clear();
    } else if (ch != '\r') {
      current.push_back(ch);
    }
  }
  if (!current.empty()) {
    lines.push_back(current);
  }
  return lines;
}

} // namespace

int quadrant_of(Cell c) {
  return (c.row / kQuadrantSize) * 2 + (c.col / kQuadrantSize);
}

int orchard_owner(Cell c) {
  return quadrant_of(c);
}

bool in_bounds(Cell c) {
  return c.row >= 0 && c.row < kGridSize && c.col >= 0 && c.col < kGridSize;
}

int manhattan(Cell a, Cell b) {
  return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

bool GridState::occupied_by_agent(Cell c) const {
  return main == c || std::find(background.begin(), background.end(), c) != background.end();
}

std::string_view to_string(Action a) {
  return kActionNames[static_cast<std::size_t>(a)];
}

Action action_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i) {
    if (kActionNames[i] == name) {
      return static_cast<Action>(i);
    }
  }
  throw ValidationError("unknown action '" + std::string(name) + "'");
}

Cell moved(Cell c, Action a) {
  switch (a) {
  case Action::Up:
    return Cell{c.row - 1, c.col};
  case Action::Down:
    return Cell{c.row + 1, c.col};
  case Action::Left:
    return Cell{c.row, c.col - 1};
  case Action::Right:
    return Cell{c.row, c.col + 1};
  default:
    return c;
  }
}

std::string_view to_string(Behavior b) {
  return kBehaviorNames[static_cast<std::size_t>(b)];
}

Behavior behavior_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kBehaviorNames.size(); ++i) {
    if (kBehaviorNames[i] == name) {
      return static_cast<Behavior>(i);
    }
  }
  throw ConfigError("unknown behavior profile '" + std::string(name) + "'");
}

BehaviorMix BehaviorMix::uniform() {
  BehaviorMix mix;
  mix.weights.fill(1.0 / kBehaviorCount);
  return mix;
}

BehaviorMix BehaviorMix::only(Behavior b) {
  BehaviorMix mix;
  mix.weights[static_cast<std::size_t>(b)] = 1.0;
  return mix;
}

BehaviorMix BehaviorMix::parse(std::string_view spec) {
  if (spec.empty() || spec == "uniform") {
    return uniform();
  }
  BehaviorMix mix;
  std::string text(spec);
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("behavior mix entry '" + part + "' must be name=weight");
    }
    const Behavior b = behavior_from_string(part.substr(0, eq));
    try {
      mix.weights[static_cast<std::size_t>(b)] = std::stod(part.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("behavior mix weight '" + part.substr(eq + 1) + "' is not a number");
    }
  }
  mix.validate();
  return mix;
}

void BehaviorMix::validate() const {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) {
      throw ConfigError("behavior mix weights must be non-negative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("behavior mix weights must sum to 1");
  }
}

std::vector<Event> Trajectory::events() const {
  std::vector<Event> out;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    for (const Cell& c : frames[i - 1].apples) {
      if (!frames[i].apples.contains(c)) {
        out.push_back(Event{static_cast<int>(i), EventKind::ApplePick, c});
      }
    }
    for (const Cell& c : frames[i - 1].garbage) {
      if (!frames[i].garbage.contains(c)) {
        out.push_back(Event{static_cast<int>(i), EventKind::GarbageCollect, c});
      }
    }
  }
  return out;
}

GridState transition(const GridState& s, Action main_action, int moving_agent, Action background_action, int step,
                     std::vector<Event>* events) {
  GridState next = s;
  switch (main_action) {
  case Action::Up:
  case Action::Down:
  case Action::Left:
  case Action::Right: {
    const Cell target = moved(s.main, main_action);
    if (in_bounds(target) && std::find(s.background.begin(), s.background.end(), target) == s.background.end()) {
      next.main = target;
    }
    break;
  }
  case Action::Pick:
    if (next.apples.erase(s.main) > 0 && events != nullptr) {
      events->push_back(Event{step, EventKind::ApplePick, s.main});
    }
    break;
  case Action::Collect:
    if (next.garbage.erase(s.main) > 0 && events != nullptr) {
      events->push_back(Event{step, EventKind::GarbageCollect, s.main});
    }
    break;
  case Action::Stay:
    break;
  }

  if (moving_agent >= 1 && moving_agent <= kBackgroundAgents) {
    Cell& mover = next.background[moving_agent - 1];
    const Cell target = moved(mover, background_action);
    const bool free = in_bounds(target) && !next.occupied_by_agent(target) && !next.apples.contains(target) &&
                      !next.garbage.contains(target);
    if (free) {
      mover = target;
    }
  }
  return next;
}

void validate(const Trajectory& t) {
  if (t.frames.size() != t.actions.size() + 1) {
    throw ValidationError("trajectory " + t.id + ": frame count must be action count + 1");
  }
  if (t.background_actions.size() != t.actions.size()) {
    throw ValidationError("trajectory " + t.id + ": background action count must match action count");
  }
  if (t.moving_agent < 1 || t.moving_agent > kBackgroundAgents) {
    throw ValidationError("trajectory " + t.id + ": moving agent must be 1..3");
  }
  for (const GridState& s : t.frames) {
    std::set<Cell> agents{s.main};
    for (const Cell& b : s.background) {
      agents.insert(b);
    }
    if (agents.size() != 1 + kBackgroundAgents) {
      throw ValidationError("trajectory " + t.id + ": two agents share a cell");
    }
    for (const Cell& c : agents) {
      if (!in_bounds(c)) {
        throw ValidationError("trajectory " + t.id + ": agent out of bounds");
      }
    }
    for (const Cell& c : s.apples) {
      if (!in_bounds(c) || s.garbage.contains(c)) {
        throw ValidationError("trajectory " + t.id + ": apple cell invalid or shared with garbage");
      }
    }
    for (const Cell& c : s.garbage) {
      if (!in_bounds(c)) {
        throw ValidationError("trajectory " + t.id + ": garbage out of bounds");
      }
    }
  }
  std::set<int> movers;
  for (std::size_t i = 1; i < t.frames.size(); ++i) {
    const GridState expected =
        transition(t.frames[i - 1], t.actions[i - 1], t.moving_agent, t.background_actions[i - 1], static_cast<int>(i));
    if (!(expected == t.frames[i])) {
      throw ValidationError("trajectory " + t.id + ": frame " + std::to_string(i) + " does not follow from its predecessor");
    }
    for (int b = 0; b < kBackgroundAgents; ++b) {
      if (t.frames[i].background[b] != t.frames[i - 1].background[b]) {
        movers.insert(b + 1);
      }
    }
  }
  if (!t.actions.empty() && movers.size() != 1) {
    throw ValidationError("trajectory " + t.id + ": exactly one background agent must move");
  }
}

std::vector<Trajectory> generate_pool(std::uint64_t seed, int count, const BehaviorMix& mix) {
  if (count < 1) {
    throw ConfigError("pool count must be at least 1");
  }
  mix.validate();
  std::vector<Trajectory> pool;
  pool.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    char id[48];
    std::snprintf(id, sizeof(id), "t%llu-%04d", static_cast<unsigned long long>(seed), i);
    for (std::uint64_t attempt = 0;; ++attempt) {
      std::mt19937_64 rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(i)), attempt));
      std::discrete_distribution<std::size_t> choose(mix.weights.begin(), mix.weights.end());
      const auto behavior = static_cast<Behavior>(choose(rng));
      Trajectory t = simulate(id, behavior, rng);
      if (moving_agent_moved(t)) {
        pool.push_back(std::move(t));
        break;
      }
    }
  }
  return pool;
}

std::string encode_ascii(const Trajectory& t) {
  std::string out;
  for (std::size_t i = 0; i < t.frames.size(); ++i) {
    if (i > 0) {
      out += '\n';
    }
    out += "step " + std::to_string(i) + ": ";
    out += i == 0 ? std::string("start") : std::string(to_string(t.actions[i - 1]));
    out += '\n';
    const GridState& s = t.frames[i];
    for (int r = 0; r < kGridSize; ++r) {
      if (r == kQuadrantSize) {
        out += "+++++++++\n";
      }
      for (int c = 0; c < kGridSize; ++c) {
        if (c == kQuadrantSize) {
          out += " + ";
        }
        out += cell_symbol(s, Cell{r, c});
      }
      out += '\n';
    }
    if (s.apples.contains(s.main)) {
      out += "B on A\n";
    }
    if (s.garbage.contains(s.main)) {
      out += "B on G\n";
    }
    for (const Cell& b : s.background) {
      if (s.apples.contains(b)) {
        out += "g on A at " + std::to_string(b.row) + "," + std::to_string(b.col) + "\n";
      }
      if (s.garbage.contains(b)) {
        out += "g on G at " + std::to_string(b.row) + "," + std::to_string(b.col) + "\n";
      }
    }
  }
  return out;
}

std::vector<ParsedFrame> parse_ascii(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<ParsedFrame> frames;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (lines[i].empty()) {
      ++i;
      continue;
    }
    ParsedFrame frame;
    const std::string& header = lines[i];
    if (header.rfind("step ", 0) != 0 || header.find(": ") == std::string::npos) {
      throw ValidationError("expected 'step k: action' header, got '" + header + "'");
    }
    const auto colon = header.find(": ");
    try {
      frame.step = std::stoi(header.substr(5, colon - 5));
    } catch (const std::exception&) {
      throw ValidationError("bad step number in '" + header + "'");
    }
    const std::string action = header.substr(colon + 2);
    if (action != "start") {
      frame.action = action_from_string(action);
    }
    ++i;
    std::vector<Cell> background;
    bool has_main = false;
    for (int r = 0; r < kGridSize; ++r) {
      if (r == kQuadrantSize) {
        if (i >= lines.size() || lines[i] != "+++++++++") {
          throw ValidationError("missing quadrant boundary row");
        }
        ++i;
      }
      if (i >= lines.size() || lines[i].size() != 9 || lines[i].substr(3, 3) != " + ") {
        throw ValidationError("malformed grid row");
      }
      const std::string row = lines[i].substr(0, 3) + lines[i].substr(6, 3);
      for (int c = 0; c < kGridSize; ++c) {
        const Cell cell{r, c};
        switch (row[static_cast<std::size_t>(c)]) {
        case 'B':
          frame.state.main = cell;
          has_main = true;
          break;
        case 'g':
          background.push_back(cell);
          break;
        case 'A':
          frame.state.apples.insert(cell);
          break;
        case 'G':
          frame.state.garbage.insert(cell);
          break;
        case '.':
          break;
        default:
          throw ValidationError("unknown grid symbol");
        }
      }
      ++i;
    }
    while (i < lines.size() && !lines[i].empty()) {
      const std::string& legend = lines[i];
      if (legend == "B on A") {
        frame.state.apples.insert(frame.state.main);
      } else if (legend == "B on G") {
        frame.state.garbage.insert(frame.state.main);
      } else if (legend.rfind("g on ", 0) == 0 && legend.size() > 10) {
        const auto comma = legend.find(',', 10);
        const Cell c{std::stoi(legend.substr(10, comma - 10)), std::stoi(legend.substr(comma + 1))};
        (legend[5] == 'A' ? frame.state.apples : frame.state.garbage).insert(c);
      } else {
        throw ValidationError("unknown legend line '" + legend + "'");
      }
      ++i;
    }
    if (!has_main || background.size() != kBackgroundAgents) {
      throw ValidationError("frame must contain one main agent and three background agents");
    }

    // Background identities: by orchard on the first frame, by continuity afterwards.
    if (frames.empty()) {
      std::array<bool, kBackgroundAgents> assigned{};
      std::vector<Cell> leftovers;
      for (const Cell& c : background) {
        const int owner = orchard_owner(c);
        if (owner >= 1 && !assigned[owner - 1]) {
          frame.state.background[owner - 1] = c;
          assigned[owner - 1] = true;
        } else {
          leftovers.push_back(c);
        }
      }
      for (int b = 0; b < kBackgroundAgents; ++b) {
        if (!assigned[b]) {
          frame.state.background[b] = leftovers.front();
          leftovers.erase(leftovers.begin());
        }
      }
    } else {
      const auto& prev = frames.back().state.background;
      std::vector<Cell> unmatched = background;
      std::array<bool, kBackgroundAgents> kept{};
      for (int b = 0; b < kBackgroundAgents; ++b) {
        auto it = std::find(unmatched.begin(), unmatched.end(), prev[b]);
        if (it != unmatched.end()) {
          frame.state.background[b] = *it;
          unmatched.erase(it);
          kept[b] = true;
        }
      }
      for (int b = 0; b < kBackgroundAgents; ++b) {
        if (!kept[b]) {
          frame.state.background[b] = unmatched.front();
          unmatched.erase(unmatched.begin());
        }
      }
    }
    frames.push_back(std::move(frame));
  }
  if (frames.empty()) {
    throw ValidationError("no frames in ASCII trajectory");
  }
  return frames;
}

Trajectory trajectory_from_ascii(std::string_view text, std::string id) {
  const auto parsed = parse_ascii(text);
  Trajectory t;
  t.id = std::move(id);
  for (const auto& f : parsed) {
    t.frames.push_back(f.state);
  }
  for (std::size_t i = 1; i < parsed.size(); ++i) {
    t.actions.push_back(parsed[i].action.value_or(Action::Stay));
    Action bg = Action::Stay;
    for (int b = 0; b < kBackgroundAgents; ++b) {
      const Cell before = parsed[i - 1].state.background[b];
      const Cell after = parsed[i].state.background[b];
      if (before != after) {
        t.moving_agent = b + 1;
        for (Action a : kMoves) {
          if (moved(before, a) == after) {
            bg = a;
          }
        }
      }
    }
    t.background_actions.push_back(bg);
  }
  return t;
}

std::string env_description() {
  return std::string("Environment: ") + std::string(kEnvDescriptionVersion) +
         "\n"
         "A 6x6 grid is divided into four 3x3 orchards (quadrants). The main agent owns the top-left\n"
         "quadrant; each of the three background agents owns one of the other quadrants (top-right,\n"
         "bottom-left, bottom-right). Two background agents stay where they are; one moves freely.\n"
         "Symbols: B = main agent, g = background agent, A = apple, G = garbage, . = empty cell,\n"
         "+ = quadrant boundary. When the main agent stands on an item, the item is listed on a legend\n"
         "line below the grid, e.g. 'B on A' or 'B on G'.\n"
         "Actions of the main agent: Up, Down, Left, Right, Stay, Pick (take the apple it stands on),\n"
         "Collect (remove the garbage it stands on).\n"
         "Each trajectory is shown frame by frame as 'step k: action' followed by the grid.\n"
         "Reward: the main agent is rewarded for picking apples; collecting garbage yields no reward.\n";
}

nlohmann::json to_json(const Trajectory& t) {
  nlohmann::json frames = nlohmann::json::array();
  for (const GridState& s : t.frames) {
    nlohmann::json f;
    f["main"] = cell_json(s.main);
    f["background"] = nlohmann::json::array();
    for (const Cell& b : s.background) {
      f["background"].push_back(cell_json(b));
    }
    f["apples"] = nlohmann::json::array();
    for (const Cell& c : s.apples) {
      f["apples"].push_back(cell_json(c));
    }
    f["garbage"] = nlohmann::json::array();
    for (const Cell& c : s.garbage) {
      f["garbage"].push_back(cell_json(c));
    }
    frames.push_back(std::move(f));
  }
  nlohmann::json actions = nlohmann::json::array();
  for (Action a : t.actions) {
    actions.push_back(std::string(to_string(a)));
  }
  nlohmann::json bg = nlohmann::json::array();
  for (Action a : t.background_actions) {
    bg.push_back(std::string(to_string(a)));
  }
  return nlohmann::json{{"id", t.id},
                        {"behavior", std::string(to_string(t.behavior))},
                        {"moving_agent", t.moving_agent},
                        {"frames", std::move(frames)},
                        {"actions", std::move(actions)},
                        {"background_actions", std::move(bg)}};
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  try {
    Trajectory t;
    t.id = j.at("id").get<std::string>();
    t.behavior = behavior_from_string(j.at("behavior").get<std::string>());
    t.moving_agent = j.at("moving_agent").get<int>();
    for (const auto& f : j.at("frames")) {
      GridState s;
      s.main = cell_from_json(f.at("main"));
      for (int b = 0; b < kBackgroundAgents; ++b) {
        s.background[b] = cell_from_json(f.at("background").at(b));
      }
      for (const auto& c : f.at("apples")) {
        s.apples.insert(cell_from_json(c));
      }
      for (const auto& c : f.at("garbage")) {
        s.garbage.insert(cell_from_json(c));
      }
      t.frames.push_back(std::move(s));
    }
    for (const auto& a : j.at("actions")) {
      t.actions.push_back(action_from_string(a.get<std::string>()));
    }
    for (const auto& a : j.at("background_actions")) {
      t.background_actions.push_back(action_from_string(a.get<std::string>()));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed trajectory JSON: ") + e.what());
  }
}

void write_jsonl(std::ostream& out, const std::vector<Trajectory>& pool) {
  for (const Trajectory& t : pool) {
    out << to_json(t).dump() << '\n';
  }
}

std::vector<Trajectory> read_jsonl(std::istream& in) {
  std::vector<Trajectory> pool;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("malformed JSON line: ") + e.what());
    }
    pool.push_back(trajectory_from_json(j));
  }
  return pool;
}

std::vector<double> tensor_encoding(const Trajectory& t) {
  std::vector<double> out(kTensorSize, 0.0);
  constexpr int cells = kGridSize * kGridSize;
  const std::size_t frames = std::min<std::size_t>(t.frames.size(), kTensorFrames);
  for (std::size_t f = 0; f < frames; ++f) {
    const GridState& s = t.frames[f];
    const auto at = [&](int channel, Cell c) -> double& {
      return out[f * kTensorChannels * cells + static_cast<std::size_t>(channel * cells + c.row * kGridSize + c.col)];
    };
    at(0, s.main) = 1.0;
    for (const Cell& b : s.background) {
      at(1, b) = 1.0;
    }
    for (const Cell& c : s.apples) {
      at(2, c) = 1.0;
    }
    for (const Cell& c : s.garbage) {
      at(3, c) = 1.0;
    }
  }
  return out;
}

} // namespace irda::applefarm

#pragma once

#include "irda/common.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <compare>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

// Multi-agent apple-farming gridworld.
//
// A 6x6 grid is split into four 3x3 orchards. Agent 0 (the main agent, `B`)
// owns the top-left orchard; background agent i (1..3, `g`) owns quadrant i,
// numbered row-major: 1 top-right, 2 bottom-left, 3 bottom-right. Two
// background agents never move; the `moving_agent` walks freely.
namespace irda::applefarm {

inline constexpr int kGridSize = 6;
inline constexpr int kQuadrantSize = 3;
inline constexpr int kBackgroundAgents = 3;
inline constexpr int kMinSteps = 8;
inline constexpr int kMaxSteps = 20;
inline constexpr int kMainQuadrant = 0;

struct Cell {
  int row = 0;
  int col = 0;

  auto operator<=>(const Cell&) const = default;
};

int quadrant_of(Cell c);
/// Agent id that owns the orchard containing `c` (0 = main agent).
int orchard_owner(Cell c);
bool in_bounds(Cell c);
int manhattan(Cell a, Cell b);

struct GridState {
  static constexpr int width = kGridSize;
  static constexpr int height = kGridSize;

  std::set<Cell> apples;
  std::set<Cell> garbage;
  Cell main;
  std::array<Cell, kBackgroundAgents> background;

  bool occupied_by_agent(Cell c) const;
  bool operator==(const GridState&) const = default;
};

enum class Action { Up, Down, Left, Right, Stay, Pick, Collect };

std::string_view to_string(Action a);
Action action_from_string(std::string_view name);
Cell moved(Cell c, Action a);

enum class EventKind { ApplePick, GarbageCollect };

struct Event {
  int step = 0; // index of the frame produced by the action
  EventKind kind = EventKind::ApplePick;
  Cell cell;

  bool operator==(const Event&) const = default;
};

enum class Behavior { OwnOrchardHarvester, Trespasser, GarbageFirst, AggressiveProximity, RandomWalker };
inline constexpr std::size_t kBehaviorCount = 5;

std::string_view to_string(Behavior b);
Behavior behavior_from_string(std::string_view name);

/// Sampling weights over the scripted behavior profiles.
struct BehaviorMix {
  std::array<double, kBehaviorCount> weights{};

  static BehaviorMix uniform();
  static BehaviorMix only(Behavior b);
  /// Parses `name=weight,name=weight`; unnamed profiles get weight 0.
  static BehaviorMix parse(std::string_view spec);
  void validate() const;
};

struct Trajectory {
  std::string id;
  Behavior behavior = Behavior::RandomWalker;
  int moving_agent = 1;
  std::vector<GridState> frames;
  std::vector<Action> actions;            // main agent, length T
  std::vector<Action> background_actions; // moving agent intents, length T

  int steps() const { return static_cast<int>(actions.size()); }
  /// Apple picks and garbage collections, recomputed from consecutive frames.
  std::vector<Event> events() const;
};

/// Environment transition: the main agent acts first, then the moving
/// background agent attempts its move. Moves into walls, agents, or (for
/// background agents) item cells leave the mover in place.
GridState transition(const GridState& s, Action main_action, int moving_agent, Action background_action,
                     int step, std::vector<Event>* events = nullptr);

/// Throws ValidationError if any trajectory invariant fails.
void validate(const Trajectory& t);

std::vector<Trajectory> generate_pool(std::uint64_t seed, int count, const BehaviorMix& mix);

std::string encode_ascii(const Trajectory& t);

struct ParsedFrame {
  int step = 0;
  std::optional<Action> action;
  GridState state;
};

/// Inverse of encode_ascii. Throws ValidationError on malformed input.
std::vector<ParsedFrame> parse_ascii(std::string_view text);
/// Rebuilds a trajectory (frames, main actions, derived moving agent) from its ASCII form.
Trajectory trajectory_from_ascii(std::string_view text, std::string id = {});

std::string env_description();
inline constexpr std::string_view kEnvDescriptionVersion = "applefarm-env/1";

nlohmann::json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

void write_jsonl(std::ostream& out, const std::vector<Trajectory>& pool);
std::vector<Trajectory> read_jsonl(std::istream& in);

/// Flattened one-hot occupancy (main, background, apple, garbage) over the
/// first 10 frames; shorter trajectories are zero padded.
inline constexpr int kTensorFrames = 10;
inline constexpr int kTensorChannels = 4;
inline constexpr int kTensorSize = kTensorFrames * kTensorChannels * kGridSize * kGridSize;
std::vector<double> tensor_encoding(const Trajectory& t);

} // namespace irda::applefarm
